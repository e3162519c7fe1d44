//! Funnel domains, the body-fitted `(x₁, η)` grid and the discrete operator.
//!
//! The domain is `{(x₁, x') : |x'| < h(x₁)}` in `ℝᴺ`. Solutions are
//! axisymmetric, so the unknown lives on the meridian half-plane `(x₁, ρ)`
//! with `ρ = |x'|`, mapped to the rectangle `η = ρ / h(x₁) ∈ [0, 1]`.

use serde::Serialize;

use crate::numerics::{bisect_predicate, gauss_legendre8};
use crate::{Error, Real, Result};

/// Funnel geometry with a `C²` wall profile.
#[derive(Clone, Debug)]
pub struct FunnelDomain<S> {
    n_dim: usize,
    radius: S,
    alpha: S,
    l_match: S,
    x_min: S,
    x_max: S,
    a0: S,
    a1: S,
    tan_alpha: S,
    /// Quintic coefficients of `h - R` in the normalized transition variable.
    quintic: [S; 3],
}

fn quintic_coefficients<S: Real>(rise: S, slope_span: S) -> [S; 3] {
    [
        S::of(10.0) * rise - S::of(4.0) * slope_span,
        S::of(-15.0) * rise + S::of(7.0) * slope_span,
        S::of(6.0) * rise - S::of(3.0) * slope_span,
    ]
}

/// Samples `h'` of the quintic transition on `[a0, a1]` and checks `0 ≤ h' ≤ tan α`.
fn quintic_slope_ok<S: Real>(radius: S, alpha: S, l_match: S, a0: S) -> bool {
    let tan = alpha.tan();
    let a1 = l_match * alpha.cos();
    let width = a1 - a0;
    if !(width > S::zero()) {
        return false;
    }
    let rise = l_match * alpha.sin() - radius;
    let [c3, c4, c5] = quintic_coefficients(rise, tan * width);
    let tol = S::of(1e-12) * tan.max(S::one());
    let slope =
        |s: S| (S::of(3.0) * c3 + s * (S::of(4.0) * c4 + s * S::of(5.0) * c5)) * s * s / width;
    let ok = |s: S| {
        let dq = slope(s);
        dq >= -tol && dq <= tan + tol
    };
    // interior extrema of h' solve 20 c5 s² + 12 c4 s + 6 c3 = 0
    let (qa, qb, qc) = (S::of(20.0) * c5, S::of(12.0) * c4, S::of(6.0) * c3);
    let disc = qb * qb - S::of(4.0) * qa * qc;
    if qa != S::zero() && disc >= S::zero() {
        for root in [
            (-qb + disc.sqrt()) / (S::of(2.0) * qa),
            (-qb - disc.sqrt()) / (S::of(2.0) * qa),
        ] {
            if root > S::zero() && root < S::one() && !ok(root) {
                return false;
            }
        }
    }
    let n = 2000;
    (0..=n).all(|k| ok(S::of_usize(k) / S::of_usize(n)))
}

/// Largest admissible transition start `a0 ∈ [0, a1)`, if any.
fn largest_feasible_a0<S: Real>(radius: S, alpha: S, l_match: S) -> Result<S> {
    let tan = alpha.tan();
    let a1 = l_match * alpha.cos();
    let rise = l_match * alpha.sin() - radius;
    if !(rise > S::zero()) {
        return Err(Error::GeometryInfeasible(format!(
            "L sin α - R = {} ≤ 0: the cone never clears the cylinder radius",
            rise
        )));
    }
    // ratio rise / (tan α · width) must lie in [0.4, 0.6]; 0.5 sits in the middle
    let middle = a1 - rise / (S::of(0.5) * tan);
    let start = if middle >= S::zero() {
        middle
    } else {
        S::zero()
    };
    if !quintic_slope_ok(radius, alpha, l_match, start) {
        return Err(Error::GeometryInfeasible(format!(
            "mean slope (L sin α - R)/(L cos α - a0) = {} exceeds tan α = {} for every a0 ≥ 0",
            rise / a1,
            tan
        )));
    }
    let (lo, _) = bisect_predicate(start, a1, 200, S::epsilon() * S::of(4.0), |a0| {
        !quintic_slope_ok(radius, alpha, l_match, a0)
    });
    Ok(lo)
}

/// Builds a funnel domain.
///
/// `alpha = 0` is the straight cylinder `h ≡ R`; `l_match` is then unused
/// beyond the `L > R` check.
pub fn build_domain<S: Real>(
    n_dim: usize,
    radius: S,
    alpha: S,
    l_match: S,
    x_min: S,
    x_max: S,
) -> Result<FunnelDomain<S>> {
    if n_dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "N = {n_dim} must be at least 2"
        )));
    }
    if !(radius > S::zero()) {
        return Err(Error::InvalidParameter(format!(
            "R = {radius} must be positive"
        )));
    }
    if !(alpha >= S::zero() && alpha < S::FRAC_PI_2()) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in [0, π/2)"
        )));
    }
    if !(l_match > radius) {
        return Err(Error::GeometryInfeasible(format!(
            "L = {l_match} must exceed R = {radius}"
        )));
    }
    let a1 = l_match * alpha.cos();
    if !(x_min < -S::one()) {
        return Err(Error::InvalidParameter(format!(
            "x_min = {x_min} must be below -1"
        )));
    }
    if !(x_max > a1 && x_max > S::zero()) {
        return Err(Error::InvalidParameter(format!(
            "x_max = {x_max} must exceed L cos α = {a1}"
        )));
    }
    let tan_alpha = alpha.tan();
    let (a0, quintic) = if alpha == S::zero() {
        (S::zero(), [S::zero(); 3])
    } else {
        let a0 = largest_feasible_a0(radius, alpha, l_match)?;
        let rise = l_match * alpha.sin() - radius;
        (a0, quintic_coefficients(rise, tan_alpha * (a1 - a0)))
    };
    Ok(FunnelDomain {
        n_dim,
        radius,
        alpha,
        l_match,
        x_min,
        x_max,
        a0,
        a1: if alpha == S::zero() { S::zero() } else { a1 },
        tan_alpha,
        quintic,
    })
}

/// Smallest feasible `L` for the quintic transition, inflated by `1 + margin`.
///
/// The cylinder convention is `L = 2R`.
pub fn auto_l<S: Real>(radius: S, alpha: S, margin: S) -> Result<S> {
    if !(radius > S::zero()) {
        return Err(Error::InvalidParameter(format!(
            "R = {radius} must be positive"
        )));
    }
    if !(margin > S::zero() && margin <= S::one()) {
        return Err(Error::InvalidParameter(format!(
            "margin = {margin} must lie in (0, 1]"
        )));
    }
    if alpha == S::zero() {
        return Ok(S::of(2.0) * radius);
    }
    if !(alpha > S::zero() && alpha < S::FRAC_PI_2()) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in [0, π/2)"
        )));
    }
    let feasible = |l: S| l > radius && largest_feasible_a0(radius, alpha, l).is_ok();
    // the quintic family is feasible up to L = R / (0.4 sin α)
    let hi = radius / (S::of(0.4) * alpha.sin());
    if !feasible(hi) {
        return Err(Error::GeometryInfeasible(format!(
            "no feasible L found below {hi} for R = {radius}, alpha = {alpha}"
        )));
    }
    let (_, smallest) = bisect_predicate(radius, hi, 200, S::epsilon() * S::of(16.0), feasible);
    let l = smallest * (S::one() + margin);
    if feasible(l) {
        Ok(l)
    } else {
        Ok(smallest)
    }
}

/// Sampled audit of the wall profile.
#[derive(Clone, Debug, Serialize)]
pub struct DomainAudit {
    pub max_slope_violation: f64,
    pub min_slope: f64,
    pub min_height: f64,
    /// Largest jump of `h''` across the two knots.
    pub curvature_jump: f64,
    pub passed: bool,
}

impl<S: Real> FunnelDomain<S> {
    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn l_match(&self) -> S {
        self.l_match
    }

    pub fn x_min(&self) -> S {
        self.x_min
    }

    pub fn x_max(&self) -> S {
        self.x_max
    }

    /// Start of the transition.
    pub fn a0(&self) -> S {
        self.a0
    }

    /// Start of the exact cone, `L cos α`.
    pub fn a1(&self) -> S {
        self.a1
    }

    pub fn tan_alpha(&self) -> S {
        self.tan_alpha
    }

    pub fn is_cylinder(&self) -> bool {
        self.alpha == S::zero()
    }

    /// Same wall profile with a different truncation window.
    pub fn with_window(&self, x_min: S, x_max: S) -> Result<Self> {
        if !(x_min < -S::one() && x_max > self.a1 && x_max > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "window [{x_min}, {x_max}] must contain [-1, L cos α]"
            )));
        }
        let mut out = self.clone();
        out.x_min = x_min;
        out.x_max = x_max;
        Ok(out)
    }

    fn transition(&self, x: S) -> Option<(S, S)> {
        if self.is_cylinder() || x <= self.a0 || x >= self.a1 {
            None
        } else {
            let width = self.a1 - self.a0;
            Some(((x - self.a0) / width, width))
        }
    }

    /// Wall radius `h(x₁)`.
    pub fn h(&self, x: S) -> S {
        if self.is_cylinder() || x <= self.a0 {
            return self.radius;
        }
        if x >= self.a1 {
            return x * self.tan_alpha;
        }
        let (s, _) = self.transition(x).unwrap_or((S::zero(), S::one()));
        let [c3, c4, c5] = self.quintic;
        self.radius + s * s * s * (c3 + s * (c4 + s * c5))
    }

    pub fn hprime(&self, x: S) -> S {
        if self.is_cylinder() || x <= self.a0 {
            return S::zero();
        }
        if x >= self.a1 {
            return self.tan_alpha;
        }
        let (s, width) = self.transition(x).unwrap_or((S::zero(), S::one()));
        let [c3, c4, c5] = self.quintic;
        s * s * (S::of(3.0) * c3 + s * (S::of(4.0) * c4 + s * S::of(5.0) * c5)) / width
    }

    pub fn hsecond(&self, x: S) -> S {
        match self.transition(x) {
            None => S::zero(),
            Some((s, width)) => {
                let [c3, c4, c5] = self.quintic;
                s * (S::of(6.0) * c3 + s * (S::of(12.0) * c4 + s * S::of(20.0) * c5))
                    / (width * width)
            }
        }
    }

    /// Audits `0 ≤ h' ≤ tan α`, `h > 0` and continuity of `h''` on `samples` points.
    pub fn audit(&self, samples: usize) -> DomainAudit {
        let n = samples.max(2);
        let mut max_violation = f64::NEG_INFINITY;
        let mut min_slope = f64::INFINITY;
        let mut min_height = f64::INFINITY;
        let span = self.x_max - self.x_min;
        let mut check = |x: S| {
            let hp = self.hprime(x).to64();
            max_violation = max_violation.max(hp - self.tan_alpha.to64());
            min_slope = min_slope.min(hp);
            min_height = min_height.min(self.h(x).to64());
        };
        for k in 0..=n {
            check(self.x_min + span * S::of_usize(k) / S::of_usize(n));
        }
        if !self.is_cylinder() {
            let m = 1000;
            for k in 0..=m {
                check(self.a0 + (self.a1 - self.a0) * S::of_usize(k) / S::of_usize(m));
            }
        }
        let nudge = S::epsilon().sqrt() * (self.a1 - self.a0).max(S::epsilon());
        let jump = |x: S| {
            (self.hsecond(x + nudge) - self.hsecond(x - nudge))
                .abs()
                .to64()
        };
        let curvature_jump = if self.is_cylinder() {
            0.0
        } else {
            let scale = self
                .hsecond((self.a0 + self.a1) * S::of(0.5))
                .abs()
                .to64()
                .max(1.0);
            jump(self.a0).max(jump(self.a1)) / scale
        };
        let slope_tol = 1e-12 * self.tan_alpha.to64().max(1.0);
        let passed = max_violation <= slope_tol
            && min_slope >= -1e-12
            && min_height > 0.0
            && curvature_jump < 1e-6;
        DomainAudit {
            max_slope_violation: max_violation.max(0.0),
            min_slope,
            min_height,
            curvature_jump,
            passed,
        }
    }
}

/// Default left truncation, `-max(10, 8/μ_*)`.
pub fn default_x_min<S: Real>(mu_lower: S) -> S {
    -(S::of(10.0).max(S::of(8.0) / mu_lower))
}

/// Default right truncation, `c·t_end + 10/μ* + L cos α`.
pub fn default_x_max<S: Real>(c: S, t_end: S, mu_star: S, l_match: S, alpha: S) -> S {
    c * t_end + S::of(10.0) / mu_star + l_match * alpha.cos()
}

/// Smooth monotone map `ξ ↦ x₁` that clusters nodes around the wall transition.
///
/// The node density is `1/Δ₀ + 1/(s₀ + γ·√((x-x_c)² + w²))`, which is
/// `1/Δ₀` far away and about `1/Δ₀ + 1/Δ_t` inside the transition.
#[derive(Clone, Debug)]
pub struct XMap<S> {
    x_min: S,
    x_max: S,
    far_density: S,
    center: S,
    half_width: S,
    floor: S,
    spread: S,
    uniform: bool,
    /// Breakpoints and cumulative node counts between them.
    breaks: Vec<S>,
    cumulative: Vec<S>,
}

impl<S: Real> XMap<S> {
    /// Map with far-field spacing `nominal` for the given domain.
    pub fn for_domain(dom: &FunnelDomain<S>, nominal: S) -> Self {
        let width = dom.a1() - dom.a0();
        let fine = nominal.min(width / S::of(8.0));
        let uniform = dom.is_cylinder() || fine >= nominal;
        let mut map = XMap {
            x_min: dom.x_min(),
            x_max: dom.x_max(),
            far_density: S::one() / nominal,
            center: (dom.a0() + dom.a1()) * S::of(0.5),
            half_width: width * S::of(0.5),
            floor: S::of(0.4) * fine,
            spread: S::of(0.15),
            uniform,
            breaks: Vec::new(),
            cumulative: Vec::new(),
        };
        map.tabulate();
        map
    }

    /// Uniform map of `[x_min, x_max]`.
    pub fn uniform(x_min: S, x_max: S) -> Self {
        let mut map = XMap {
            x_min,
            x_max,
            far_density: S::one(),
            center: S::zero(),
            half_width: S::one(),
            floor: S::one(),
            spread: S::one(),
            uniform: true,
            breaks: Vec::new(),
            cumulative: Vec::new(),
        };
        map.tabulate();
        map
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn density(&self, x: S) -> S {
        if self.uniform {
            return self.far_density;
        }
        let d = x - self.center;
        self.far_density
            + S::one()
                / (self.floor + self.spread * (d * d + self.half_width * self.half_width).sqrt())
    }

    pub fn density_deriv(&self, x: S) -> S {
        if self.uniform {
            return S::zero();
        }
        let d = x - self.center;
        let root = (d * d + self.half_width * self.half_width).sqrt();
        let den = self.floor + self.spread * root;
        -self.spread * d / (root * den * den)
    }

    fn tabulate(&mut self) {
        let mut breaks = vec![self.x_min];
        let mut cumulative = vec![S::zero()];
        let quarter = S::of(0.25);
        let mut x = self.x_min;
        while x < self.x_max {
            let step = quarter / self.density(x);
            let next = (x + step).min(self.x_max);
            let piece = gauss_legendre8(&|t| self.density(t), x, next);
            cumulative.push(cumulative[cumulative.len() - 1] + piece);
            breaks.push(next);
            x = next;
        }
        self.breaks = breaks;
        self.cumulative = cumulative;
    }

    /// Total node count `∫ density` over the window.
    pub fn total(&self) -> S {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Position with cumulative density `target`.
    fn invert(&self, target: S) -> S {
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(k) => return self.breaks[k],
            Err(k) => k.clamp(1, self.breaks.len() - 1) - 1,
        };
        let (left, right) = (self.breaks[k], self.breaks[k + 1]);
        let base = self.cumulative[k];
        let mut x = left + (target - base) / self.density(left);
        for _ in 0..30 {
            x = x.max(left).min(right);
            let err = base + gauss_legendre8(&|t| self.density(t), left, x) - target;
            let dx = err / self.density(x);
            x -= dx;
            if dx.abs() <= S::epsilon() * S::of(4.0) * (S::one() + x.abs()) {
                break;
            }
        }
        x.max(left).min(right)
    }

    /// Nodes `X(ξ_i)` with `X'` and `X''` for `ξ_i = i`, `i = 0..nx-1`.
    pub fn nodes(&self, nx: usize) -> (Vec<S>, Vec<S>, Vec<S>) {
        let kappa = self.total() / S::of_usize(nx - 1);
        let mut x = Vec::with_capacity(nx);
        let mut xp = Vec::with_capacity(nx);
        let mut xpp = Vec::with_capacity(nx);
        for i in 0..nx {
            let xi = if i == 0 {
                self.x_min
            } else if i == nx - 1 {
                self.x_max
            } else {
                self.invert(kappa * S::of_usize(i))
            };
            let rho = self.density(xi);
            x.push(xi);
            xp.push(kappa / rho);
            xpp.push(-kappa * kappa * self.density_deriv(xi) / (rho * rho * rho));
        }
        (x, xp, xpp)
    }
}

/// Neighbor slot `(di, dj)` in the folded 9-point stencil.
#[inline]
pub fn slot(di: isize, dj: isize) -> usize {
    ((di + 1) * 3 + (dj + 1)) as usize
}

/// Body-fitted grid with the folded stencil of `Δ` (axisymmetric, Neumann closures).
///
/// Node `(i, j)` sits at `x₁ = x[i]`, `η = j·Δη`; the flat index is `i·neta + j`.
#[derive(Clone, Debug)]
pub struct MappedGrid<S> {
    domain: FunnelDomain<S>,
    nx: usize,
    neta: usize,
    x: Vec<S>,
    xp: Vec<S>,
    xpp: Vec<S>,
    h: Vec<S>,
    hp: Vec<S>,
    deta: S,
    weights: Vec<[S; 9]>,
}

/// Builds the grid with the default transition-refined x map.
pub fn build_grid<S: Real>(dom: &FunnelDomain<S>, nx: usize, neta: usize) -> Result<MappedGrid<S>> {
    if nx < 16 || neta < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid {nx} x {neta} below the 16 x 16 minimum"
        )));
    }
    let nominal = (dom.x_max() - dom.x_min()) / S::of_usize(nx - 1);
    let map = XMap::for_domain(dom, nominal);
    Ok(build_grid_with_map(dom, &map, nx, neta))
}

/// Builds the grid on a given x map. Grids built on the same map nest under
/// `nx - 1 ↦ 2(nx - 1)`.
pub fn build_grid_with_map<S: Real>(
    dom: &FunnelDomain<S>,
    map: &XMap<S>,
    nx: usize,
    neta: usize,
) -> MappedGrid<S> {
    let (x, xp, xpp) = map.nodes(nx.max(2));
    let h = x.iter().map(|&v| dom.h(v)).collect::<Vec<_>>();
    let hp = x.iter().map(|&v| dom.hprime(v)).collect::<Vec<_>>();
    let hpp = x.iter().map(|&v| dom.hsecond(v)).collect::<Vec<_>>();
    let deta = S::one() / S::of_usize(neta - 1);
    let mut grid = MappedGrid {
        domain: dom.clone(),
        nx,
        neta,
        x,
        xp,
        xpp,
        h,
        hp,
        deta,
        weights: vec![[S::zero(); 9]; nx * neta],
    };
    grid.assemble(&hpp);
    grid
}

/// Coefficients of `Δ` in `(ξ, η)` at one node.
struct Metric<S> {
    cxx: S,
    cx: S,
    cxe: S,
    cee: S,
    ce: S,
}

impl<S: Real> MappedGrid<S> {
    fn metric(&self, i: usize, eta: S, hpp: S) -> Metric<S> {
        let (h, hp, xp) = (self.h[i], self.hp[i], self.xp[i]);
        let g = eta * hp / h;
        let e = -eta * (hpp / h - S::of(2.0) * hp * hp / (h * h));
        let nm2 = S::of_usize(self.domain.n_dim() - 2);
        let ce = if eta > S::zero() {
            e + nm2 / (eta * h * h)
        } else {
            S::zero()
        };
        Metric {
            cxx: S::one() / (xp * xp),
            cx: -self.xpp[i] / (xp * xp * xp),
            cxe: -S::of(2.0) * g / xp,
            cee: g * g + S::one() / (h * h),
            ce,
        }
    }

    fn assemble(&mut self, hpp: &[S]) {
        let (nx, neta) = (self.nx, self.neta);
        let d = self.deta;
        let half = S::of(0.5);
        let two = S::of(2.0);
        let wall = neta - 1;
        let nm1 = S::of_usize(self.domain.n_dim() - 1);
        for i in 0..nx {
            let face = i == 0 || i == nx - 1;
            for j in 0..neta {
                let eta = d * S::of_usize(j);
                let m = self.metric(i, eta, hpp[i]);
                let mut w = [S::zero(); 9];
                // x part
                if face {
                    let inward = if i == 0 { 1 } else { -1 };
                    w[slot(inward, 0)] += two * m.cxx;
                } else {
                    w[slot(-1, 0)] += m.cxx - half * m.cx;
                    w[slot(1, 0)] += m.cxx + half * m.cx;
                }
                w[slot(0, 0)] -= two * m.cxx;

                if j == 0 {
                    // axis: radial part tends to (N-1) ∂²_ρ
                    let axis = nm1 / (self.h[i] * self.h[i]) * two / (d * d);
                    w[slot(0, 1)] += axis;
                    w[slot(0, 0)] -= axis;
                } else if j == wall {
                    // ghost node from U_η = β U_ξ
                    let beta = self.h[i] * self.hp[i]
                        / ((S::one() + self.hp[i] * self.hp[i]) * self.xp[i]);
                    w[slot(0, -1)] += two * m.cee / (d * d);
                    w[slot(0, 0)] -= two * m.cee / (d * d);
                    if !face {
                        let tangential = m.cee * beta / d + half * m.ce * beta;
                        w[slot(1, 0)] += tangential;
                        w[slot(-1, 0)] -= tangential;
                        let b = m.cxe / d;
                        if b < S::zero() {
                            // D+ξ D-η
                            w[slot(1, 0)] += b;
                            w[slot(0, -1)] += b;
                            w[slot(1, -1)] -= b;
                            w[slot(0, 0)] -= b;
                        } else {
                            // D-ξ D-η
                            w[slot(-1, 0)] -= b;
                            w[slot(0, -1)] -= b;
                            w[slot(-1, -1)] += b;
                            w[slot(0, 0)] += b;
                        }
                    }
                } else {
                    w[slot(0, -1)] += m.cee / (d * d) - half * m.ce / d;
                    w[slot(0, 1)] += m.cee / (d * d) + half * m.ce / d;
                    w[slot(0, 0)] -= two * m.cee / (d * d);
                    if !face {
                        let b = half * m.cxe / d;
                        if b >= S::zero() {
                            w[slot(1, 1)] += b;
                            w[slot(-1, -1)] += b;
                            w[slot(1, 0)] -= b;
                            w[slot(-1, 0)] -= b;
                            w[slot(0, 1)] -= b;
                            w[slot(0, -1)] -= b;
                            w[slot(0, 0)] += two * b;
                        } else {
                            w[slot(1, -1)] -= b;
                            w[slot(-1, 1)] -= b;
                            w[slot(1, 0)] += b;
                            w[slot(-1, 0)] += b;
                            w[slot(0, 1)] += b;
                            w[slot(0, -1)] += b;
                            w[slot(0, 0)] -= two * b;
                        }
                    }
                }
                self.weights[i * neta + j] = w;
            }
        }
    }

    pub fn domain(&self) -> &FunnelDomain<S> {
        &self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn neta(&self) -> usize {
        self.neta
    }

    pub fn len(&self) -> usize {
        self.nx * self.neta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.neta + j
    }

    pub fn x_nodes(&self) -> &[S] {
        &self.x
    }

    /// `dX/dξ` at each x node.
    pub fn x_stretch(&self) -> &[S] {
        &self.xp
    }

    pub fn wall_heights(&self) -> &[S] {
        &self.h
    }

    pub fn wall_slopes(&self) -> &[S] {
        &self.hp
    }

    pub fn deta(&self) -> S {
        self.deta
    }

    pub fn eta(&self, j: usize) -> S {
        self.deta * S::of_usize(j)
    }

    /// Physical radius `ρ = η·h(x₁)` of node `(i, j)`.
    pub fn rho(&self, i: usize, j: usize) -> S {
        self.eta(j) * self.h[i]
    }

    /// Folded stencil weights of node `k`, indexed by [`slot`].
    pub fn weights(&self, k: usize) -> &[S; 9] {
        &self.weights[k]
    }

    /// Smallest x spacing.
    pub fn min_dx(&self) -> S {
        self.x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(S::infinity(), |a, b| a.min(b))
    }

    /// Largest x spacing.
    pub fn max_dx(&self) -> S {
        self.x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(S::zero(), |a, b| a.max(b))
    }

    /// `out = L·u` for the discrete Laplacian with all closures.
    pub fn apply(&self, u: &[S], out: &mut [S]) {
        let neta = self.neta;
        let nx = self.nx;
        for i in 0..nx {
            let di_lo: isize = if i == 0 { 0 } else { -1 };
            let di_hi: isize = if i == nx - 1 { 0 } else { 1 };
            for j in 0..neta {
                let k = i * neta + j;
                let w = &self.weights[k];
                let dj_lo: isize = if j == 0 { 0 } else { -1 };
                let dj_hi: isize = if j == neta - 1 { 0 } else { 1 };
                let mut acc = S::zero();
                for di in di_lo..=di_hi {
                    let base = (k as isize + di * neta as isize) as usize;
                    for dj in dj_lo..=dj_hi {
                        acc += w[slot(di, dj)] * u[(base as isize + dj) as usize];
                    }
                }
                out[k] = acc;
            }
        }
    }

    /// Fills a nodal vector from a function of `(x₁, ρ)`.
    pub fn sample(&self, f: impl Fn(S, S) -> S) -> Vec<S> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.neta {
                out.push(f(self.x[i], self.rho(i, j)));
            }
        }
        out
    }

    /// Quadrature weight of node `(i, j)` for `∫ ρ^{N-2} dρ dx₁` (trapezoid in ξ and η).
    pub fn volume_weight(&self, i: usize, j: usize) -> S {
        let half = S::of(0.5);
        let wi = if i == 0 || i == self.nx - 1 {
            half
        } else {
            S::one()
        };
        let wj = if j == 0 || j == self.neta - 1 {
            half
        } else {
            S::one()
        };
        let rho = self.rho(i, j);
        let n = self.domain.n_dim();
        wi * wj * rho.powi(n as i32 - 2) * self.h[i] * self.xp[i] * self.deta
    }

    /// Bilinear interpolation of `u` at the physical point `(x₁, ρ)`.
    /// Returns `None` outside the computational window or the wall.
    pub fn interpolate(&self, u: &[S], x1: S, rho: S) -> Option<S> {
        if x1 < self.x[0] || x1 > self.x[self.nx - 1] || rho < S::zero() {
            return None;
        }
        let h = self.domain.h(x1);
        let eta = rho / h;
        if eta > S::one() + S::of(1e-12) {
            return None;
        }
        let eta = eta.min(S::one());
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&x1).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(self.nx - 2),
            Err(i) => i.clamp(1, self.nx - 1) - 1,
        };
        let tx = (x1 - self.x[i]) / (self.x[i + 1] - self.x[i]);
        let s = eta / self.deta;
        let j = s.floor().to_usize().unwrap_or(0).min(self.neta - 2);
        let ty = s - S::of_usize(j);
        let v = |a: usize, b: usize| u[a * self.neta + b];
        let one = S::one();
        Some(
            (one - tx) * ((one - ty) * v(i, j) + ty * v(i, j + 1))
                + tx * ((one - ty) * v(i + 1, j) + ty * v(i + 1, j + 1)),
        )
    }

    /// Counts nodes whose stencil has negative off-diagonal weights.
    pub fn monotonicity_audit(&self) -> MonotonicityReport {
        let mut bad = 0usize;
        let mut worst = 0.0f64;
        for w in &self.weights {
            let scale = w[slot(0, 0)].abs().to64().max(f64::MIN_POSITIVE);
            let mut node_bad = false;
            for (s, &v) in w.iter().enumerate() {
                if s != slot(0, 0) && v < S::zero() {
                    let rel = -v.to64() / scale;
                    if rel > 1e-12 {
                        node_bad = true;
                        worst = worst.max(rel);
                    }
                }
            }
            if node_bad {
                bad += 1;
            }
        }
        MonotonicityReport {
            nodes: self.len(),
            negative_nodes: bad,
            worst_relative_weight: worst,
        }
    }
}

/// Result of [`MappedGrid::monotonicity_audit`].
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub nodes: usize,
    pub negative_nodes: usize,
    /// Largest `-w_offdiag / |w_center|` over all nodes.
    pub worst_relative_weight: f64,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.negative_nodes == 0
    }
}

/// Discrete wall-flux residuals for three fields with zero normal derivative.
#[derive(Clone, Debug, Serialize)]
pub struct WallNormalReport {
    pub constant: f64,
    /// `cos(πρ/R)`, only for the cylinder.
    pub cylinder: Option<f64>,
    /// A function of `|x|`, on wall nodes of the exact cone.
    pub radial: Option<f64>,
}

/// Checks the Neumann closure at `η = 1` on fields whose normal derivative vanishes.
///
/// For each wall node the physical flux `ν·∇u` is rebuilt from a one-sided
/// second-order `U_η` and a centered `U_ξ`.
pub fn wall_normal_check<S: Real>(grid: &MappedGrid<S>) -> WallNormalReport {
    let dom = grid.domain();
    let flux = |u: &[S], i: usize| -> S {
        let j = grid.neta() - 1;
        let d = grid.deta();
        let u_eta = (S::of(3.0) * u[grid.index(i, j)] - S::of(4.0) * u[grid.index(i, j - 1)]
            + u[grid.index(i, j - 2)])
            / (S::of(2.0) * d);
        let u_xi = (u[grid.index(i + 1, j)] - u[grid.index(i - 1, j)]) * S::of(0.5);
        let (h, hp, xp) = (grid.h[i], grid.hp[i], grid.xp[i]);
        let u_x = u_xi / xp - hp / h * u_eta;
        let u_rho = u_eta / h;
        (u_rho - hp * u_x) / (S::one() + hp * hp).sqrt()
    };
    let worst = |u: &[S], keep: &dyn Fn(usize) -> bool| -> Option<f64> {
        let mut out: Option<f64> = None;
        for i in 1..grid.nx() - 1 {
            if keep(i) {
                let r = flux(u, i).abs().to64();
                out = Some(out.map_or(r, |m| m.max(r)));
            }
        }
        out
    };
    let ones = vec![S::one(); grid.len()];
    let constant = worst(&ones, &|_| true).unwrap_or(0.0);
    let cylinder = if dom.is_cylinder() {
        let r = dom.radius();
        let u = grid.sample(|_, rho| (S::PI() * rho / r).cos());
        worst(&u, &|_| true)
    } else {
        None
    };
    let radial = if dom.is_cylinder() {
        None
    } else {
        let u = grid.sample(|x, rho| (S::of(0.3) * (x * x + rho * rho).sqrt()).cos());
        let a1 = dom.a1();
        let x = grid.x_nodes().to_vec();
        worst(&u, &|i| x[i - 1] >= a1)
    };
    WallNormalReport {
        constant,
        cylinder,
        radial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funnel45() -> FunnelDomain<f64> {
        build_domain(
            3,
            1.0,
            std::f64::consts::FRAC_PI_4,
            1.5 * 2f64.sqrt(),
            -5.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn flat_and_cone_parts() {
        let d = funnel45();
        assert_eq!(d.h(-5.0), 1.0);
        assert!((d.h(1.5) - 1.5).abs() < 1e-12);
        // the slope excess is quadratic near the boundary, so a0 is pinned to ~1e-5
        assert!((d.a0() - (1.5 - 0.5 / 0.6)).abs() < 1e-4);
        assert!(d.audit(10_000).passed);
    }

    #[test]
    fn steep_match_is_infeasible() {
        let r = build_domain(3, 1.0, std::f64::consts::FRAC_PI_4, 1.01, -5.0, 10.0);
        assert!(matches!(r, Err(Error::GeometryInfeasible(_))));
    }

    #[test]
    fn constant_is_annihilated() {
        let g = build_grid(&funnel45(), 40, 16).unwrap();
        let mut out = vec![0.0; g.len()];
        g.apply(&vec![1.0; g.len()], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn map_nodes_nest_under_doubling() {
        let d = funnel45();
        let map = XMap::for_domain(&d, 0.3);
        assert!(!map.is_uniform());
        let (coarse, _, _) = map.nodes(33);
        let (fine, _, _) = map.nodes(65);
        for (k, &x) in coarse.iter().enumerate() {
            assert!((x - fine[2 * k]).abs() < 1e-10);
        }
    }
}
