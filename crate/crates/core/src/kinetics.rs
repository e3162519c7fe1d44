//! Bistable nonlinearity and the planar traveling front.

use serde::Serialize;

use crate::interp::MonotoneCubic;
use crate::numerics::{adaptive_simpson, fit_line, rk4_step};
use crate::{Error, Real, Result};

/// Pointwise reaction term of a semilinear parabolic equation.
pub trait Reaction<S: Real>: Sync {
    fn f(&self, u: S) -> S;
    fn fprime(&self, u: S) -> S;
}

/// Zero reaction, for pure diffusion checks.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoReaction;

impl<S: Real> Reaction<S> for NoReaction {
    fn f(&self, _u: S) -> S {
        S::zero()
    }
    fn fprime(&self, _u: S) -> S {
        S::zero()
    }
}

#[derive(Clone, Debug)]
enum Shape<S> {
    Cubic,
    Sampled(MonotoneCubic<S>),
}

/// Bistable reaction `f` with zeros `0 < θ < 1`, extended affinely outside `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Nonlinearity<S> {
    theta: S,
    slope0: S,
    slope1: S,
    shape: Shape<S>,
}

/// Cubic `u(1-u)(u-θ)`. Requires `0 < θ < 1/2` so that the mass is positive.
pub fn make_cubic<S: Real>(theta: S) -> Result<Nonlinearity<S>> {
    if !(theta > S::zero() && theta < S::of(0.5)) {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta} must lie in (0, 1/2) for positive mass"
        )));
    }
    Ok(Nonlinearity {
        theta,
        slope0: -theta,
        slope1: theta - S::one(),
        shape: Shape::Cubic,
    })
}

impl<S: Real> Nonlinearity<S> {
    /// Reconstructs `f` from samples on a uniform grid of `[0, 1]`.
    ///
    /// The samples must vanish at both ends, change sign exactly once inside,
    /// and have negative end slopes and positive mass.
    pub fn from_samples(samples: Vec<S>) -> Result<Self> {
        let n = samples.len();
        if n < 5 {
            return Err(Error::InvalidParameter(
                "need at least five samples of f on [0, 1]".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInput("non-finite sample of f".into()));
        }
        let scale = samples.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        let tol = scale * S::of(1e-9);
        if samples[0].abs() > tol || samples[n - 1].abs() > tol {
            return Err(Error::InvalidParameter("f must vanish at 0 and 1".into()));
        }
        let mut s = samples;
        s[0] = S::zero();
        s[n - 1] = S::zero();
        let dx = S::one() / S::of_usize(n - 1);
        let table = MonotoneCubic::pchip(S::zero(), dx, s.clone())?;
        let changes: Vec<usize> = (1..n - 2)
            .filter(|&k| s[k] < S::zero() && s[k + 1] >= S::zero())
            .collect();
        let interior_positive_first = s[1] > S::zero();
        if changes.len() != 1 || interior_positive_first {
            return Err(Error::InvalidParameter(
                "samples must be negative then positive with a single interior zero".into(),
            ));
        }
        let k = changes[0];
        let mut lo = dx * S::of_usize(k);
        let mut hi = dx * S::of_usize(k + 1);
        for _ in 0..200 {
            let mid = (lo + hi) * S::of(0.5);
            if table.eval(mid) < S::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = (lo + hi) * S::of(0.5);
        let slope0 = table.eval_deriv(S::zero());
        let slope1 = table.eval_deriv(S::one());
        let nl = Self {
            theta,
            slope0,
            slope1,
            shape: Shape::Sampled(table),
        };
        if !(slope0 < S::zero() && slope1 < S::zero()) {
            return Err(Error::InvalidParameter(
                "f'(0) and f'(1) must be negative".into(),
            ));
        }
        if !(nl.fprime(theta) > S::zero()) {
            return Err(Error::InvalidParameter("f'(θ) must be positive".into()));
        }
        if !(nl.primitive(S::zero()) > S::zero()) {
            return Err(Error::InvalidParameter("mass of f must be positive".into()));
        }
        Ok(nl)
    }

    pub fn theta(&self) -> S {
        self.theta
    }

    /// `f'(0)`.
    pub fn slope_at_zero(&self) -> S {
        self.slope0
    }

    /// `f'(1)`.
    pub fn slope_at_one(&self) -> S {
        self.slope1
    }

    pub fn f(&self, u: S) -> S {
        if u < S::zero() {
            return self.slope0 * u;
        }
        if u > S::one() {
            return self.slope1 * (u - S::one());
        }
        match &self.shape {
            Shape::Cubic => u * (S::one() - u) * (u - self.theta),
            Shape::Sampled(t) => t.eval(u),
        }
    }

    pub fn fprime(&self, u: S) -> S {
        if u < S::zero() {
            return self.slope0;
        }
        if u > S::one() {
            return self.slope1;
        }
        match &self.shape {
            Shape::Cubic => {
                let th = self.theta;
                -S::of(3.0) * u * u + S::of(2.0) * (S::one() + th) * u - th
            }
            Shape::Sampled(t) => t.eval_deriv(u),
        }
    }

    /// `f(1 - deficit)`, accurate for tiny deficits.
    pub fn f_from_one(&self, deficit: S) -> S {
        match &self.shape {
            Shape::Cubic if deficit >= S::zero() && deficit <= S::one() => {
                (S::one() - deficit) * deficit * (S::one() - self.theta - deficit)
            }
            Shape::Sampled(_) if deficit >= S::zero() && deficit < S::of(1e-7) => {
                -self.slope1 * deficit
            }
            _ => self.f(S::one() - deficit),
        }
    }

    /// `F(t) = ∫_t^1 f(s) ds`, including the affine extension.
    pub fn primitive(&self, t: S) -> S {
        let half = S::of(0.5);
        if t < S::zero() {
            return self.primitive(S::zero()) - half * self.slope0 * t * t;
        }
        if t > S::one() {
            let d = t - S::one();
            return -half * self.slope1 * d * d;
        }
        match &self.shape {
            Shape::Cubic => {
                let th = self.theta;
                let g = |x: S| {
                    let x2 = x * x;
                    -x2 * x2 / S::of(4.0) + (S::one() + th) * x2 * x / S::of(3.0) - th * x2 * half
                };
                g(S::one()) - g(t)
            }
            Shape::Sampled(tab) => tab.integral_to_end(t),
        }
    }

    /// Largest Lipschitz constant of `f'` observed on a fine scan of `[0, 1]`.
    pub fn derivative_lipschitz_estimate(&self) -> S {
        let n = 4000;
        let h = S::one() / S::of_usize(n);
        let mut best = S::zero();
        let mut prev = self.fprime(S::zero());
        for k in 1..=n {
            let cur = self.fprime(h * S::of_usize(k));
            best = best.max((cur - prev).abs() / h);
            prev = cur;
        }
        best
    }
}

impl<S: Real> Reaction<S> for Nonlinearity<S> {
    fn f(&self, u: S) -> S {
        Nonlinearity::f(self, u)
    }
    fn fprime(&self, u: S) -> S {
        Nonlinearity::fprime(self, u)
    }
}

/// `∫_0^1 f` by adaptive quadrature.
pub fn mass<S: Real>(nl: &Nonlinearity<S>) -> Result<S> {
    let tol = (S::epsilon() * S::of(100.0)).max(S::of(1e-14));
    let f = |u: S| nl.f(u);
    adaptive_simpson(&f, S::zero(), S::one(), tol)
}

/// Exponential decay rates of the front: `μ*` ahead (towards 0) and `μ_*` behind.
pub fn decay_rates<S: Real>(nl: &Nonlinearity<S>, c: S) -> Result<(S, S)> {
    if !(c > S::zero()) {
        return Err(Error::Precondition(format!(
            "front speed {c} must be positive"
        )));
    }
    let four = S::of(4.0);
    let half = S::of(0.5);
    let mu_star = (c + (c * c - four * nl.slope_at_zero()).sqrt()) * half;
    let mu_lower = (-c + (c * c - four * nl.slope_at_one()).sqrt()) * half;
    Ok((mu_star, mu_lower))
}

/// Tabulated planar front `φ` with speed `c`, normalized by `φ(0) = θ`.
#[derive(Clone, Debug)]
pub struct WaveProfile<S> {
    pub theta: S,
    pub c: S,
    pub mu_star: S,
    pub mu_lower: S,
    /// Max ODE residual with sixth-order differences of the stored slope.
    pub residual_max: S,
    /// Max ODE residual with second-order centered differences of `φ`.
    pub residual_centered: S,
    table: MonotoneCubic<S>,
}

impl<S: Real> WaveProfile<S> {
    pub fn z_min(&self) -> S {
        self.table.x0()
    }

    pub fn z_max(&self) -> S {
        self.table.x_end()
    }

    pub fn dz(&self) -> S {
        self.table.dx()
    }

    pub fn z_grid(&self) -> Vec<S> {
        (0..self.table.len())
            .map(|k| self.z_min() + self.dz() * S::of_usize(k))
            .collect()
    }

    pub fn phi_values(&self) -> &[S] {
        self.table.values()
    }

    pub fn phiprime_values(&self) -> &[S] {
        self.table.slopes()
    }

    /// `φ(z)` with exponential tails beyond the table.
    pub fn phi(&self, z: S) -> S {
        let vals = self.table.values();
        if z < self.z_min() {
            let deficit = S::one() - vals[0];
            return S::one() - deficit * (self.mu_lower * (z - self.z_min())).exp();
        }
        if z > self.z_max() {
            return vals[vals.len() - 1] * (-self.mu_star * (z - self.z_max())).exp();
        }
        self.table.eval(z)
    }

    /// `φ'(z)` with exponential tails beyond the table.
    pub fn phiprime(&self, z: S) -> S {
        let vals = self.table.values();
        if z < self.z_min() {
            let deficit = S::one() - vals[0];
            return -self.mu_lower * deficit * (self.mu_lower * (z - self.z_min())).exp();
        }
        if z > self.z_max() {
            return -self.mu_star
                * vals[vals.len() - 1]
                * (-self.mu_star * (z - self.z_max())).exp();
        }
        self.table.eval_deriv(z)
    }

    /// `φ''(z)` from the ODE, `φ'' = -cφ' - f(φ)`.
    pub fn phisecond(&self, nl: &Nonlinearity<S>, z: S) -> S {
        -self.c * self.phiprime(z) - nl.f(self.phi(z))
    }

    /// The unique `z` with `φ(z) = level`, for `level` in `(0, 1)`.
    pub fn inverse(&self, level: S) -> Result<S> {
        if !(level > S::zero() && level < S::one()) {
            return Err(Error::InvalidParameter(format!(
                "level {level} must lie in (0, 1)"
            )));
        }
        let vals = self.table.values();
        let last = vals[vals.len() - 1];
        if level <= last {
            return Ok(self.z_max() + (last / level).ln() / self.mu_star);
        }
        if level >= vals[0] {
            let deficit = S::one() - vals[0];
            return Ok(self.z_min() + ((S::one() - level) / deficit).ln() / self.mu_lower);
        }
        // values decrease, so the first index below `level` closes the bracket
        let k = vals.partition_point(|&v| v >= level).max(1) - 1;
        let mut lo = self.z_min() + self.dz() * S::of_usize(k);
        let mut hi = lo + self.dz();
        for _ in 0..80 {
            let mid = (lo + hi) * S::of(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.table.eval(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * S::of(0.5))
    }
}

enum Crossing<S> {
    Reached(S),
    TurnedBack,
}

/// Left branch: from `φ = 1` along the unstable manifold, returns `φ'` where `φ = θ`.
fn left_branch<S: Real>(nl: &Nonlinearity<S>, c: S, h: S) -> Crossing<S> {
    let (_, mu_lower) = match decay_rates(nl, c.max(S::epsilon())) {
        Ok(r) => r,
        Err(_) => return Crossing::TurnedBack,
    };
    let mu_lower = if c > S::zero() {
        mu_lower
    } else {
        (-nl.slope_at_one()).sqrt()
    };
    let eps = S::epsilon().sqrt();
    // deficit v = 1 - φ, v'' = -c v' + f(1 - v)
    let rhs = |_t: S, y: [S; 2]| [y[1], -c * y[1] + nl.f_from_one(y[0])];
    let target = S::one() - nl.theta();
    let mut y = [eps, mu_lower * eps];
    for _ in 0..2_000_000 {
        let next = rk4_step(&rhs, S::zero(), y, h);
        if next[1] <= S::zero() {
            return Crossing::TurnedBack;
        }
        if next[0] >= target {
            let p = crossing_slope(&rhs, y, h, target);
            return Crossing::Reached(-p);
        }
        y = next;
    }
    Crossing::TurnedBack
}

/// Right branch: from `φ = 0` backwards in `z` along the stable manifold.
fn right_branch<S: Real>(nl: &Nonlinearity<S>, c: S, h: S) -> S {
    let mu_star = (c + (c * c - S::of(4.0) * nl.slope_at_zero()).sqrt()) * S::of(0.5);
    let eps = S::epsilon().sqrt();
    // reversed variable s = -z: φ_s = -p, p_s = c p + f(φ)
    let rhs = |_t: S, y: [S; 2]| [-y[1], c * y[1] + nl.f(y[0])];
    let target = nl.theta();
    let mut y = [eps, -mu_star * eps];
    loop {
        let next = rk4_step(&rhs, S::zero(), y, h);
        if next[0] >= target {
            return crossing_slope(&rhs, y, h, target);
        }
        y = next;
    }
}

/// Integrates a tail branch `y = (a, a'·sign)` from amplitude `amp·(1, rate)` so
/// that the first component reaches `target` after exactly `width`, and samples
/// it every `sub` steps over `mid + 1` nodes.
fn anchored_branch<S: Real>(
    rhs: &impl Fn(S, [S; 2]) -> [S; 2],
    rate: S,
    target: S,
    width: S,
    h: S,
    sub: usize,
    mid: usize,
) -> Result<Vec<[S; 2]>> {
    let growth = rate.abs();
    let mut amp = S::epsilon().sqrt();
    let max_steps = 4 * sub * mid;
    for _ in 0..80 {
        let mut y = [amp, rate * amp];
        let mut dist = None;
        for k in 0..max_steps {
            let next = rk4_step(rhs, S::zero(), y, h);
            if next[0] >= target {
                let tau = crossing_time(rhs, y, h, target);
                dist = Some(h * S::of_usize(k) + tau);
                break;
            }
            y = next;
        }
        let Some(dist) = dist else {
            return Err(Error::convergence(
                "wave profile",
                "tail branch never reached θ",
            ));
        };
        let shift = dist - width;
        amp *= (growth * shift).exp();
        if !amp.is_finite() || amp <= S::zero() {
            return Err(Error::convergence(
                "wave profile",
                "tail amplitude degenerate",
            ));
        }
        if shift.abs() <= S::epsilon() * S::of(64.0) * width {
            break;
        }
    }
    let mut out = vec![[S::zero(); 2]; mid + 1];
    let mut y = [amp, rate * amp];
    out[0] = y;
    for slot in out.iter_mut().skip(1) {
        for _ in 0..sub {
            y = rk4_step(rhs, S::zero(), y, h);
        }
        *slot = y;
    }
    Ok(out)
}

/// Fraction of the step `h` after which the first component reaches `target`.
fn crossing_time<S: Real>(rhs: &impl Fn(S, [S; 2]) -> [S; 2], y: [S; 2], h: S, target: S) -> S {
    let mut tau = ((target - y[0]) / rhs(S::zero(), y)[0])
        .max(S::zero())
        .min(h);
    for _ in 0..8 {
        let z = rk4_step(rhs, S::zero(), y, tau);
        let slope = rhs(S::zero(), z)[0];
        if slope == S::zero() {
            break;
        }
        tau = (tau - (z[0] - target) / slope).max(S::zero()).min(h);
    }
    tau
}

/// Slope component at the point where the first component reaches `target`
/// during the RK4 step of size `h` starting from `y`.
fn crossing_slope<S: Real>(rhs: &impl Fn(S, [S; 2]) -> [S; 2], y: [S; 2], h: S, target: S) -> S {
    let tau = crossing_time(rhs, y, h, target);
    rk4_step(rhs, S::zero(), y, tau)[1]
}

/// Speed of the planar front by shooting both tails to `φ = θ` and matching slopes.
pub fn wave_speed<S: Real>(nl: &Nonlinearity<S>) -> Result<S> {
    let h = S::of(0.005);
    let too_slow = |c: S| match left_branch(nl, c, h) {
        Crossing::TurnedBack => false,
        Crossing::Reached(p_left) => p_left.abs() > right_branch(nl, c, h).abs(),
    };
    let lo = S::zero();
    if !too_slow(lo) {
        return Err(Error::convergence(
            "wave speed",
            "zero speed already overshoots; mass is not positive",
        ));
    }
    let mut hi = S::one();
    let cap = S::of(1e4);
    while too_slow(hi) {
        hi *= S::of(2.0);
        if hi > cap {
            return Err(Error::convergence(
                "wave speed",
                format!("no bracket for c in [0, {}]", cap.to64()),
            ));
        }
    }
    let (lo, hi) =
        crate::numerics::bisect_predicate(lo, hi, 200, S::epsilon() * S::of(4.0), |c| !too_slow(c));
    Ok((lo + hi) * S::of(0.5))
}

/// Solves the traveling-front problem on `[-z_half_width, z_half_width]`.
pub fn solve_wave<S: Real>(
    nl: &Nonlinearity<S>,
    z_half_width: S,
    n_points: usize,
) -> Result<WaveProfile<S>> {
    if n_points < 9 || n_points.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n_points = {n_points} must be odd and at least 9"
        )));
    }
    if !(z_half_width > S::zero()) {
        return Err(Error::InvalidParameter(
            "z_half_width must be positive".into(),
        ));
    }
    let c = wave_speed(nl)?;
    let (mu_star, mu_lower) = decay_rates(nl, c)?;
    let tail = (-mu_star.min(mu_lower) * z_half_width).exp();
    if tail > S::of(1e-6) {
        return Err(Error::InvalidParameter(format!(
            "half width {z_half_width} leaves tail {tail} above 1e-6"
        )));
    }
    let mid = (n_points - 1) / 2;
    let dz = z_half_width / S::of_usize(mid);
    let sub = 4;
    let h = dz / S::of_usize(sub);
    let theta = nl.theta();

    // behind the front, in deficit variables, integrated left to right
    let rhs_l = |_t: S, y: [S; 2]| [y[1], -c * y[1] + nl.f_from_one(y[0])];
    let left = anchored_branch(
        &rhs_l,
        mu_lower,
        S::one() - theta,
        z_half_width,
        h,
        sub,
        mid,
    )?;
    // ahead of the front, integrated right to left
    let rhs_r = |_t: S, y: [S; 2]| [-y[1], c * y[1] + nl.f(y[0])];
    let right = anchored_branch(&rhs_r, -mu_star, theta, z_half_width, h, sub, mid)?;

    let mut phi = vec![S::zero(); n_points];
    let mut dphi = vec![S::zero(); n_points];
    for k in 0..=mid {
        phi[k] = S::one() - left[k][0];
        dphi[k] = -left[k][1];
        let kr = n_points - 1 - k;
        phi[kr] = right[k][0];
        dphi[kr] = right[k][1];
    }
    phi[mid] = theta;
    dphi[mid] = (-left[mid][1] + right[mid][1]) * S::of(0.5);
    if phi.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::convergence(
            "wave profile",
            "profile is not monotone",
        ));
    }

    let residual_max = sixth_order_residual(nl, c, dz, &phi, &dphi);
    let residual_centered = centered_residual(nl, c, dz, &phi);
    let table = MonotoneCubic::with_slopes(-z_half_width, dz, phi, dphi)?;
    Ok(WaveProfile {
        theta,
        c,
        mu_star,
        mu_lower,
        residual_max,
        residual_centered,
        table,
    })
}

fn sixth_order_residual<S: Real>(nl: &Nonlinearity<S>, c: S, dz: S, phi: &[S], dphi: &[S]) -> S {
    let w = [
        S::of(-1.0 / 60.0),
        S::of(3.0 / 20.0),
        S::of(-3.0 / 4.0),
        S::zero(),
        S::of(3.0 / 4.0),
        S::of(-3.0 / 20.0),
        S::of(1.0 / 60.0),
    ];
    let mut worst = S::zero();
    for k in 3..phi.len() - 3 {
        let mut d2 = S::zero();
        for (m, &wm) in w.iter().enumerate() {
            d2 += wm * dphi[k + m - 3];
        }
        let r = d2 / dz + c * dphi[k] + nl.f(phi[k]);
        worst = worst.max(r.abs());
    }
    worst
}

fn centered_residual<S: Real>(nl: &Nonlinearity<S>, c: S, dz: S, phi: &[S]) -> S {
    let two = S::of(2.0);
    let mut worst = S::zero();
    for k in 1..phi.len() - 1 {
        let d2 = (phi[k + 1] - two * phi[k] + phi[k - 1]) / (dz * dz);
        let d1 = (phi[k + 1] - phi[k - 1]) / (two * dz);
        worst = worst.max((d2 + c * d1 + nl.f(phi[k])).abs());
    }
    worst
}

/// Fitted exponential tails of a wave profile.
#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub slope_ahead: f64,
    pub slope_behind: f64,
    pub mu_star: f64,
    pub mu_lower: f64,
    pub rel_err_ahead: f64,
    pub rel_err_behind: f64,
    /// `c₁ e^{-μ* z} ≤ φ(z) ≤ C₁ e^{-μ* z}` for `z ≥ 0`.
    pub c1: f64,
    pub big_c1: f64,
    /// `c₂ e^{μ_* z} ≤ 1 - φ(z) ≤ C₂ e^{μ_* z}` for `z ≤ 0`.
    pub c2: f64,
    pub big_c2: f64,
    pub within_one_percent: bool,
}

/// Least-squares slope of `ln y` over the samples with `lo ≤ y ≤ hi`.
pub fn fit_log_slope<S: Real>(z: &[S], y: &[S], lo: S, hi: S) -> Result<S> {
    let mut zs = Vec::new();
    let mut ls = Vec::new();
    for (&zk, &yk) in z.iter().zip(y) {
        if yk >= lo && yk <= hi {
            zs.push(zk);
            ls.push(yk.ln());
        }
    }
    if zs.len() < 10 {
        return Err(Error::FitWindow(format!(
            "only {} samples in the tail window [{lo}, {hi}]",
            zs.len()
        )));
    }
    Ok(fit_line(&zs, &ls)?.0)
}

/// Fits both exponential tails and compares with the decay rates.
pub fn wave_tail_check<S: Real>(wp: &WaveProfile<S>) -> Result<TailReport> {
    let z = wp.z_grid();
    let phi = wp.phi_values();
    let deficit: Vec<S> = phi.iter().map(|&p| S::one() - p).collect();
    let (lo, hi) = (S::of(1e-12), S::of(1e-4));
    let ahead = fit_log_slope(&z, phi, lo, hi)?;
    let behind = fit_log_slope(&z, &deficit, lo, hi)?;
    let mut c1 = f64::INFINITY;
    let mut big_c1 = 0.0f64;
    let mut c2 = f64::INFINITY;
    let mut big_c2 = 0.0f64;
    for (k, &zk) in z.iter().enumerate() {
        if zk >= S::zero() && phi[k] > S::zero() {
            let r = (phi[k] * (wp.mu_star * zk).exp()).to64();
            c1 = c1.min(r);
            big_c1 = big_c1.max(r);
        }
        if zk <= S::zero() && deficit[k] > S::zero() {
            let r = (deficit[k] * (-wp.mu_lower * zk).exp()).to64();
            c2 = c2.min(r);
            big_c2 = big_c2.max(r);
        }
    }
    let mu_star = wp.mu_star.to64();
    let mu_lower = wp.mu_lower.to64();
    let rel_err_ahead = ((-ahead.to64()) - mu_star).abs() / mu_star;
    let rel_err_behind = (behind.to64() - mu_lower).abs() / mu_lower;
    Ok(TailReport {
        slope_ahead: ahead.to64(),
        slope_behind: behind.to64(),
        mu_star,
        mu_lower,
        rel_err_ahead,
        rel_err_behind,
        c1,
        big_c1,
        c2,
        big_c2,
        within_one_percent: rel_err_ahead <= 0.01 && rel_err_behind <= 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values_and_extension() {
        let nl = make_cubic(0.25f64).unwrap();
        assert!((nl.f(0.5) - 0.0625).abs() < 1e-15);
        assert!((nl.f(-0.1) - 0.025).abs() < 1e-15);
        assert!((nl.fprime(0.0) + 0.25).abs() < 1e-15);
        assert!((nl.fprime(1.0) + 0.75).abs() < 1e-15);
        assert!(nl.primitive(1.0).abs() < 1e-15);
        assert!(make_cubic(0.5f64).is_err());
        assert!(make_cubic(0.0f64).is_err());
    }

    #[test]
    fn sampled_reconstruction_tracks_cubic() {
        let n = 401;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let u = k as f64 / (n - 1) as f64;
                u * (1.0 - u) * (u - 0.3)
            })
            .collect();
        let nl = Nonlinearity::from_samples(samples).unwrap();
        assert!((nl.theta() - 0.3).abs() < 1e-6);
        assert!((nl.primitive(0.0) - (1.0 / 12.0 - 0.3 / 6.0)).abs() < 1e-7);
        assert!(nl.derivative_lipschitz_estimate().is_finite());
    }

    #[test]
    fn f32_speed_is_close_to_closed_form() {
        let nl = make_cubic(0.25f32).unwrap();
        let c = wave_speed(&nl).unwrap();
        assert!((c - 0.353_553_4).abs() < 1e-4);
    }
}
