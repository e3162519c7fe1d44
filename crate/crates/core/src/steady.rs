//! Stationary problems: the radial ball subsolution and its radius `R₀`, the
//! invasion test, the energy `J = ∫ |∇w|²/2 + F(w)`, the truncated blocking
//! problem, the blocking supersolution, and the stability eigenvalue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{slot, MappedGrid};
use crate::kinetics::Nonlinearity;
use crate::linear::{BandLu, NinePoint};
use crate::numerics::{bisect_predicate, rk4_step};
use crate::solver::Field;
use crate::{Error, Real, Result};

/// Radial solution of `ψ'' + ((N-1)/r)ψ' + f(ψ) = 0`, `ψ'(0) = 0`, `ψ(R₀) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct BallProfile<S> {
    pub n_dim: usize,
    pub r0: S,
    pub dr: S,
    pub psi: Vec<S>,
    pub dpsi: Vec<S>,
    /// Largest radial residual with fourth-order differences.
    pub residual: S,
    /// `R_min = min over peaks of the first-zero radius`, before the scan.
    pub r_min: S,
}

impl<S: Real> BallProfile<S> {
    pub fn peak(&self) -> S {
        self.psi[0]
    }

    /// `ψ(r)` by cubic Hermite interpolation; zero outside the ball.
    pub fn eval(&self, r: S) -> S {
        if r >= self.r0 {
            return S::zero();
        }
        let s = (r.abs() / self.dr).min(S::of_usize(self.psi.len() - 1));
        let k = s.floor().to_usize().unwrap_or(0).min(self.psi.len() - 2);
        let t = s - S::of_usize(k);
        let (one, two, three) = (S::one(), S::of(2.0), S::of(3.0));
        let (t2, t3) = (t * t, t * t * t);
        (two * t3 - three * t2 + one) * self.psi[k]
            + (t3 - two * t2 + t) * self.dr * self.dpsi[k]
            + (three * t2 - two * t3) * self.psi[k + 1]
            + (t3 - t2) * self.dr * self.dpsi[k + 1]
    }
}

fn radial_rhs<S: Real>(nl: &Nonlinearity<S>, n_dim: usize) -> impl Fn(S, [S; 2]) -> [S; 2] + '_ {
    let bend = S::of_usize(n_dim - 1);
    move |r: S, y: [S; 2]| [y[1], -bend / r * y[1] - nl.f(y[0])]
}

/// Series start `ψ ≈ p - f(p) r²/(2N)` away from the singular origin.
fn radial_start<S: Real>(nl: &Nonlinearity<S>, n_dim: usize, peak: S, r: S) -> [S; 2] {
    let n = S::of_usize(n_dim);
    let fp = nl.f(peak);
    [peak - fp * r * r / (S::of(2.0) * n), -fp * r / n]
}

const RADIAL_STEP: f64 = 1e-3;
const RADIAL_LIMIT: f64 = 80.0;

/// First radius where the radial solution with peak `p` vanishes, if it does
/// so while still decreasing.
fn first_zero<S: Real>(nl: &Nonlinearity<S>, n_dim: usize, peak: S) -> Option<S> {
    let h = S::of(RADIAL_STEP);
    let rhs = radial_rhs(nl, n_dim);
    let mut r = h;
    let mut y = radial_start(nl, n_dim, peak, r);
    while r < S::of(RADIAL_LIMIT) {
        let next = rk4_step(&rhs, r, y, h);
        if next[0] <= S::zero() {
            // cubic Hermite root inside the last step
            let (mut lo, mut hi) = (S::zero(), S::one());
            let herm = |t: S| {
                let (t2, t3) = (t * t, t * t * t);
                (S::of(2.0) * t3 - S::of(3.0) * t2 + S::one()) * y[0]
                    + (t3 - S::of(2.0) * t2 + t) * h * y[1]
                    + (S::of(3.0) * t2 - S::of(2.0) * t3) * next[0]
                    + (t3 - t2) * h * next[1]
            };
            for _ in 0..60 {
                let mid = (lo + hi) * S::of(0.5);
                if herm(mid) > S::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(r + h * (lo + hi) * S::of(0.5));
        }
        if next[1] >= S::zero() {
            return None;
        }
        y = next;
        r += h;
    }
    None
}

fn zero_radius<S: Real>(nl: &Nonlinearity<S>, n_dim: usize, peak: S) -> S {
    first_zero(nl, n_dim, peak).unwrap_or(S::infinity())
}

/// Ball subsolution at the smallest radius `R₀` on the scan `0.25·1.25^k`,
/// refined by bisection to 1%.
pub fn ball_subsolution<S: Real>(nl: &Nonlinearity<S>, n_dim: usize) -> Result<BallProfile<S>> {
    if n_dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "N = {n_dim} must be at least 2"
        )));
    }
    let theta = nl.theta();
    let samples = 400;
    let peak_at = |k: usize| theta + (S::one() - theta) * S::of_usize(k) / S::of_usize(samples);
    let mut best = (S::infinity(), 0usize);
    for k in 1..samples {
        let r = zero_radius(nl, n_dim, peak_at(k));
        if r < best.0 {
            best = (r, k);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::convergence(
            "ball subsolution",
            "no peak in (θ, 1) reaches zero",
        ));
    }
    // golden-section refinement of the smallest zero radius
    let (mut a, mut b) = (peak_at(best.1 - 1), peak_at(best.1 + 1));
    let g = S::of(0.5 * (5f64.sqrt() - 1.0));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (zero_radius(nl, n_dim, c), zero_radius(nl, n_dim, d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = zero_radius(nl, n_dim, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = zero_radius(nl, n_dim, d);
        }
        if (b - a).abs() < S::of(1e-12) {
            break;
        }
    }
    let (p_min, r_min) = if fc < fd { (c, fc) } else { (d, fd) };
    let admits = |r: S| r >= r_min;
    let mut scale = S::of(0.25);
    let mut k = 0;
    while !admits(scale) {
        scale *= S::of(1.25);
        k += 1;
        if k > 60 {
            return Err(Error::convergence(
                "ball subsolution",
                "radius scan exhausted",
            ));
        }
    }
    let r0 = if k == 0 {
        scale
    } else {
        bisect_predicate(scale / S::of(1.25), scale, 100, S::of(0.01), admits).1
    };
    // peak on the upper branch with first zero exactly at r0
    let mut hi = p_min;
    let mut step = (S::one() - p_min) * S::of(0.5);
    while zero_radius(nl, n_dim, hi) <= r0 {
        hi = S::one() - step;
        step *= S::of(0.5);
        if step < S::of(1e-15) {
            return Err(Error::convergence(
                "ball subsolution",
                "no peak reaches the scanned radius",
            ));
        }
    }
    let (mut lo, mut hi) = (p_min, hi);
    for _ in 0..200 {
        let mid = (lo + hi) * S::of(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if zero_radius(nl, n_dim, mid) <= r0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let peak = if (zero_radius(nl, n_dim, lo) - r0).abs() <= (zero_radius(nl, n_dim, hi) - r0).abs()
    {
        lo
    } else {
        hi
    };
    tabulate(nl, n_dim, peak, r0, r_min)
}

fn tabulate<S: Real>(
    nl: &Nonlinearity<S>,
    n_dim: usize,
    peak: S,
    r0: S,
    r_min: S,
) -> Result<BallProfile<S>> {
    let steps = (r0 / S::of(RADIAL_STEP))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(8);
    let dr = r0 / S::of_usize(steps);
    let rhs = radial_rhs(nl, n_dim);
    // the first cell starts from the series at a tenth of a step
    let fine = dr / S::of(10.0);
    let mut y = radial_start(nl, n_dim, peak, fine);
    let mut r = fine;
    for _ in 0..9 {
        y = rk4_step(&rhs, r, y, fine);
        r += fine;
    }
    let mut psi = vec![peak, y[0]];
    let mut dpsi = vec![S::zero(), y[1]];
    for k in 1..steps {
        y = rk4_step(&rhs, dr * S::of_usize(k), y, dr);
        psi.push(y[0]);
        dpsi.push(y[1]);
    }
    let bend = S::of_usize(n_dim - 1);
    let mut residual = S::zero();
    let twelve = S::of(12.0);
    for k in 2..psi.len() - 2 {
        let r = dr * S::of_usize(k);
        let d2 = (-psi[k + 2] + S::of(16.0) * psi[k + 1] - S::of(30.0) * psi[k]
            + S::of(16.0) * psi[k - 1]
            - psi[k - 2])
            / (twelve * dr * dr);
        let d1 = (-psi[k + 2] + S::of(8.0) * psi[k + 1] - S::of(8.0) * psi[k - 1] + psi[k - 2])
            / (twelve * dr);
        residual = residual.max((d2 + bend / r * d1 + nl.f(psi[k])).abs());
    }
    Ok(BallProfile {
        n_dim,
        r0,
        dr,
        psi,
        dpsi,
        residual,
        r_min,
    })
}

/// Whether `u ≥ ψ(|x - (center, 0)|)` at every node inside the ball.
pub fn invasion_criterion<S: Real>(
    grid: &MappedGrid<S>,
    u: &Field<S>,
    ball: &BallProfile<S>,
    center: S,
) -> Result<bool> {
    u.matches_grid(grid)?;
    let dom = grid.domain();
    let r0 = ball.r0;
    if center - r0 < dom.x_min() || center + r0 > dom.x_max() {
        return Err(Error::GeometryInfeasible(format!(
            "ball of radius {r0} at x₁ = {center} leaves the window"
        )));
    }
    let slack = S::of(1e-9) * (S::one() + r0);
    for k in 0..=200 {
        let x1 = center - r0 + S::of(2.0) * r0 * S::of_usize(k) / S::of(200.0);
        let half_chord = (r0 * r0 - (x1 - center) * (x1 - center))
            .max(S::zero())
            .sqrt();
        if dom.h(x1) + slack < half_chord {
            return Err(Error::GeometryInfeasible(format!(
                "ball of radius {r0} at x₁ = {center} crosses the wall at x₁ = {x1}"
            )));
        }
    }
    for i in 0..grid.nx() {
        let dx = grid.x_nodes()[i] - center;
        if dx.abs() >= r0 {
            continue;
        }
        for j in 0..grid.neta() {
            let dist = (dx * dx + grid.rho(i, j).powi(2)).sqrt();
            if dist < r0 && u.values[grid.index(i, j)] < ball.eval(dist) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Bilinear (Q1) finite elements on the mapped grid with the weight `ρ^{N-2}`.
struct FeSystem<S> {
    nx: usize,
    neta: usize,
    stiffness: Vec<[S; 9]>,
    mass: Vec<S>,
}

const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

impl<S: Real> FeSystem<S> {
    /// Assembles the cells `(i, j)` for which `keep(i, j)` holds.
    fn assemble(grid: &MappedGrid<S>, keep: impl Fn(usize, usize) -> bool) -> Self {
        let (nx, neta) = (grid.nx(), grid.neta());
        let n = grid.len();
        let mut stiffness = vec![[S::zero(); 9]; n];
        let mut mass = vec![S::zero(); n];
        let power = grid.domain().n_dim() as i32 - 2;
        let g = S::of(0.5 / 3f64.sqrt());
        let half = S::of(0.5);
        let gauss = [half - g, half + g];
        for i in 0..nx - 1 {
            for j in 0..neta - 1 {
                if !keep(i, j) {
                    continue;
                }
                let xs: [S; 4] = CORNERS.map(|(a, _)| grid.x_nodes()[i + a]);
                let rs: [S; 4] = CORNERS.map(|(a, b)| grid.rho(i + a, j + b));
                let mut ke = [[S::zero(); 4]; 4];
                let mut me = [S::zero(); 4];
                for &s in &gauss {
                    for &t in &gauss {
                        let one = S::one();
                        let shape = [(one - s) * (one - t), s * (one - t), s * t, (one - s) * t];
                        let ds = [-(one - t), one - t, t, -t];
                        let dt = [-(one - s), -s, s, one - s];
                        let (mut x_s, mut x_t, mut r_s, mut r_t, mut rho) =
                            (S::zero(), S::zero(), S::zero(), S::zero(), S::zero());
                        for a in 0..4 {
                            x_s += ds[a] * xs[a];
                            x_t += dt[a] * xs[a];
                            r_s += ds[a] * rs[a];
                            r_t += dt[a] * rs[a];
                            rho += shape[a] * rs[a];
                        }
                        let det = x_s * r_t - x_t * r_s;
                        let weight = S::of(0.25) * det.abs() * rho.powi(power);
                        let grad: [(S, S); 4] = std::array::from_fn(|a| {
                            (
                                (ds[a] * r_t - dt[a] * r_s) / det,
                                (-ds[a] * x_t + dt[a] * x_s) / det,
                            )
                        });
                        for a in 0..4 {
                            me[a] += weight * shape[a];
                            for b in 0..4 {
                                ke[a][b] +=
                                    weight * (grad[a].0 * grad[b].0 + grad[a].1 * grad[b].1);
                            }
                        }
                    }
                }
                for (a, &(ai, aj)) in CORNERS.iter().enumerate() {
                    let row = (i + ai) * neta + j + aj;
                    mass[row] += me[a];
                    for (b, &(bi, bj)) in CORNERS.iter().enumerate() {
                        let s = slot(bi as isize - ai as isize, bj as isize - aj as isize);
                        stiffness[row][s] += ke[a][b];
                    }
                }
            }
        }
        Self {
            nx,
            neta,
            stiffness,
            mass,
        }
    }

    fn operator(&self) -> NinePoint<S> {
        NinePoint {
            nx: self.nx,
            neta: self.neta,
            diag: vec![S::zero(); self.mass.len()],
            coupling: self.stiffness.clone(),
        }
    }

    fn energy(&self, k_op: &NinePoint<S>, w: &[S], nl: &Nonlinearity<S>, scratch: &mut [S]) -> S {
        k_op.apply(w, scratch);
        let mut acc = S::zero();
        for k in 0..w.len() {
            acc += S::of(0.5) * w[k] * scratch[k] + self.mass[k] * nl.primitive(w[k]);
        }
        acc
    }

    /// `g = K w - M f(w)`, zeroed on pinned nodes.
    fn gradient(
        &self,
        k_op: &NinePoint<S>,
        w: &[S],
        nl: &Nonlinearity<S>,
        pinned: &[bool],
        g: &mut [S],
    ) {
        k_op.apply(w, g);
        for k in 0..w.len() {
            g[k] = if pinned[k] {
                S::zero()
            } else {
                g[k] - self.mass[k] * nl.f(w[k])
            };
        }
    }

    fn h1_norm(&self, k_op: &NinePoint<S>, v: &[S], scratch: &mut [S]) -> S {
        k_op.apply(v, scratch);
        let mut acc = S::zero();
        for k in 0..v.len() {
            acc += v[k] * scratch[k] + self.mass[k] * v[k] * v[k];
        }
        acc.max(S::zero()).sqrt()
    }
}

/// `J = Σ_cells ∫ |∇w|²/2 + F(w)` over the cells whose centroid `(x₁, ρ)`
/// satisfies `region`, with exact Q1 gradients and lumped `F`.
pub fn energy<S: Real>(
    grid: &MappedGrid<S>,
    w: &[S],
    nl: &Nonlinearity<S>,
    region: impl Fn(S, S) -> bool,
) -> Result<S> {
    if w.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} nodes",
            w.len(),
            grid.len()
        )));
    }
    let fe = FeSystem::assemble(grid, |i, j| {
        let (x1, rho) = cell_centroid(grid, i, j);
        region(x1, rho)
    });
    let op = fe.operator();
    let mut scratch = vec![S::zero(); w.len()];
    Ok(fe.energy(&op, w, nl, &mut scratch))
}

/// Axisymmetric volume `Σ_cells ∫ ρ^{N-2}` of the same cells as [`energy`].
pub fn region_volume<S: Real>(grid: &MappedGrid<S>, region: impl Fn(S, S) -> bool) -> S {
    let fe = FeSystem::assemble(grid, |i, j| {
        let (x1, rho) = cell_centroid(grid, i, j);
        region(x1, rho)
    });
    fe.mass.iter().copied().sum()
}

fn cell_centroid<S: Real>(grid: &MappedGrid<S>, i: usize, j: usize) -> (S, S) {
    let q = S::of(0.25);
    let x = grid.x_nodes();
    let x1 = (x[i] + x[i + 1]) * S::of(0.5);
    let rho =
        (grid.rho(i, j) + grid.rho(i + 1, j) + grid.rho(i, j + 1) + grid.rho(i + 1, j + 1)) * q;
    (x1, rho)
}

/// Options of [`solve_truncated`].
#[derive(Clone, Debug)]
pub struct TruncatedConfig<S> {
    /// Euler-Lagrange residual target.
    pub tol: S,
    pub max_iter: usize,
    /// Position of the Dirichlet face `w = 1`.
    pub face: S,
}

impl<S: Real> Default for TruncatedConfig<S> {
    fn default() -> Self {
        Self {
            tol: S::of(1e-6),
            max_iter: 3000,
            face: -S::one(),
        }
    }
}

/// Local minimizer of the truncated energy together with its history.
#[derive(Clone, Debug, Serialize)]
pub struct SteadyState<S> {
    pub nx: usize,
    pub neta: usize,
    pub values: Vec<S>,
    pub pinned: Vec<bool>,
    pub energy: S,
    /// Energy after every accepted descent step, starting with `J(w₀)`.
    pub energy_history: Vec<f64>,
    /// `max |Δ_h w + f(w)|` over free nodes.
    pub el_residual: S,
    /// `‖w - w₀‖` in the discrete H¹ norm.
    pub h1_dist_to_w0: S,
    pub iterations: usize,
    /// `x₁` of the grid column used as the face `w = 1`.
    pub face_x1: S,
    pub outer_radius: S,
    /// Largest gap between `|x|` at the pinned outer nodes next to free ones and `r`.
    pub arc_deviation: S,
    /// Largest `w` on free nodes adjacent to the outer arc.
    pub arc_max: S,
}

struct TruncatedLayout<S> {
    pinned: Vec<bool>,
    w0: Vec<S>,
    face_col: usize,
    arc_deviation: S,
}

fn truncated_layout<S: Real>(grid: &MappedGrid<S>, r: S, face: S) -> Result<TruncatedLayout<S>> {
    let x = grid.x_nodes();
    let face_col = (0..grid.nx())
        .min_by(|&a, &b| {
            (x[a] - face)
                .abs()
                .partial_cmp(&(x[b] - face).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
    let neta = grid.neta();
    let mut pinned = vec![false; grid.len()];
    let mut w0 = vec![S::zero(); grid.len()];
    let mut outer = vec![false; grid.len()];
    for i in 0..grid.nx() {
        for j in 0..neta {
            let k = grid.index(i, j);
            let radius = (x[i] * x[i] + grid.rho(i, j).powi(2)).sqrt();
            if i <= face_col {
                pinned[k] = true;
                w0[k] = S::one();
            } else if x[i] > S::zero() && radius >= r {
                pinned[k] = true;
                outer[k] = true;
            } else if x[i] <= S::zero() {
                w0[k] = (-x[i]).min(S::one());
            }
        }
    }
    if face_col + 1 >= grid.nx() {
        return Err(Error::InvalidParameter("face leaves no free nodes".into()));
    }
    // pinned zero nodes that touch a free node form the discrete arc
    let mut arc_deviation = S::zero();
    let mut any_arc = false;
    for i in 0..grid.nx() {
        for j in 0..neta {
            let k = grid.index(i, j);
            if !outer[k] {
                continue;
            }
            let touches = neighbours(grid, i, j).any(|m| !pinned[m]);
            if touches {
                any_arc = true;
                let radius = (x[i] * x[i] + grid.rho(i, j).powi(2)).sqrt();
                arc_deviation = arc_deviation.max(radius - r);
            }
        }
    }
    if !any_arc {
        return Err(Error::InvalidParameter(format!(
            "outer radius {r} does not cut the grid; it must lie inside the window"
        )));
    }
    Ok(TruncatedLayout {
        pinned,
        w0,
        face_col,
        arc_deviation,
    })
}

fn neighbours<S: Real>(
    grid: &MappedGrid<S>,
    i: usize,
    j: usize,
) -> impl Iterator<Item = usize> + '_ {
    let (nx, neta) = (grid.nx() as isize, grid.neta() as isize);
    (-1isize..=1).flat_map(move |di| {
        (-1isize..=1).filter_map(move |dj| {
            let (a, b) = (i as isize + di, j as isize + dj);
            if (di, dj) != (0, 0) && a >= 0 && a < nx && b >= 0 && b < neta {
                Some((a * neta + b) as usize)
            } else {
                None
            }
        })
    })
}

/// Minimizes the truncated energy with `w = 1` on the face column nearest
/// `x₁ = -1` and `w = 0` on nodes with `x₁ > 0`, `|x| ≥ r`, starting from
/// `w₀ = min(1, max(0, -x₁))`.
///
/// Each step solves `(K + M) d = -∇J` and backtracks until the Armijo
/// condition holds, so the energy never increases.
pub fn solve_truncated<S: Real>(
    grid: &MappedGrid<S>,
    nl: &Nonlinearity<S>,
    r: S,
    cfg: &TruncatedConfig<S>,
) -> Result<SteadyState<S>> {
    let dom = grid.domain();
    if r < dom.l_match() {
        return Err(Error::InvalidParameter(format!(
            "outer radius {r} below L = {}",
            dom.l_match()
        )));
    }
    let layout = truncated_layout(grid, r, cfg.face)?;
    let pinned = &layout.pinned;
    let fe = FeSystem::assemble(grid, |i, j| {
        CORNERS
            .iter()
            .any(|&(a, b)| !pinned[grid.index(i + a, j + b)])
    });
    let k_op = fe.operator();
    let n = grid.len();
    let mut h1_sys = NinePoint {
        nx: grid.nx(),
        neta: grid.neta(),
        diag: fe.mass.clone(),
        coupling: fe.stiffness.clone(),
    };
    for k in 0..n {
        if pinned[k] {
            h1_sys.diag[k] = S::one();
            h1_sys.coupling[k] = [S::zero(); 9];
        }
    }
    let factors = BandLu::factor(&h1_sys)?;
    let mut w = layout.w0.clone();
    let mut scratch = vec![S::zero(); n];
    let mut g = vec![S::zero(); n];
    let mut dir = vec![S::zero(); n];
    let mut trial = vec![S::zero(); n];
    let mut energy = fe.energy(&k_op, &w, nl, &mut scratch);
    let mut history = vec![energy.to64()];
    // stationarity of the bound-constrained problem: at w = 0 only an
    // inward pull counts, likewise at w = 1
    let residual_of = |w: &[S], g: &[S]| {
        let mut worst = S::zero();
        for k in 0..n {
            if !pinned[k] && fe.mass[k] > S::zero() {
                let r = g[k] / fe.mass[k];
                let v = if w[k] <= S::zero() {
                    (-r).max(S::zero())
                } else if w[k] >= S::one() {
                    r.max(S::zero())
                } else {
                    r.abs()
                };
                worst = worst.max(v);
            }
        }
        worst
    };
    let mut iterations = 0;
    loop {
        fe.gradient(&k_op, &w, nl, pinned, &mut g);
        let residual = residual_of(&w, &g);
        if residual <= cfg.tol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::convergence(
                "truncated minimization",
                format!(
                    "Euler-Lagrange residual {} after {} steps",
                    residual, iterations
                ),
            ));
        }
        iterations += 1;
        for k in 0..n {
            let blocked =
                (w[k] <= S::zero() && g[k] > S::zero()) || (w[k] >= S::one() && g[k] < S::zero());
            dir[k] = if blocked { S::zero() } else { -g[k] };
        }
        factors.solve(&mut dir);
        let mut step = S::one();
        let mut accepted = false;
        for _ in 0..40 {
            let mut slope = S::zero();
            for k in 0..n {
                trial[k] = (w[k] + step * dir[k]).max(S::zero()).min(S::one());
                slope += g[k] * (trial[k] - w[k]);
            }
            let e = fe.energy(&k_op, &trial, nl, &mut scratch);
            if slope < S::zero() && e <= energy + S::of(1e-4) * slope {
                std::mem::swap(&mut w, &mut trial);
                energy = e;
                accepted = true;
                break;
            }
            step *= S::of(0.5);
        }
        if !accepted {
            return Err(Error::convergence(
                "truncated minimization",
                format!("line search stalled at residual {}", residual),
            ));
        }
        history.push(energy.to64());
    }
    let el_residual = residual_of(&w, &g);
    let diff: Vec<S> = w.iter().zip(&layout.w0).map(|(&a, &b)| a - b).collect();
    let h1 = fe.h1_norm(&k_op, &diff, &mut scratch);
    let mut arc_max = S::zero();
    for i in 0..grid.nx() {
        for j in 0..grid.neta() {
            let k = grid.index(i, j);
            if !pinned[k]
                && neighbours(grid, i, j)
                    .any(|m| pinned[m] && grid.x_nodes()[m / grid.neta()] > S::zero())
            {
                arc_max = arc_max.max(w[k]);
            }
        }
    }
    Ok(SteadyState {
        nx: grid.nx(),
        neta: grid.neta(),
        values: w,
        pinned: layout.pinned,
        energy,
        energy_history: history,
        el_residual,
        h1_dist_to_w0: h1,
        iterations,
        face_x1: grid.x_nodes()[layout.face_col],
        outer_radius: r,
        arc_deviation: layout.arc_deviation,
        arc_max,
    })
}

/// `ū = w` right of the face, `1` left of it, as a field at time `time`.
pub fn extend_supersolution<S: Real>(
    grid: &MappedGrid<S>,
    ss: &SteadyState<S>,
    time: S,
) -> Result<Field<S>> {
    if ss.nx != grid.nx() || ss.neta != grid.neta() {
        return Err(Error::GridMismatch(
            "steady state built on another grid".into(),
        ));
    }
    if ss.arc_max > S::of(0.1) {
        return Err(Error::Precondition(format!(
            "w reaches {} next to the outer arc; the truncation radius must grow",
            ss.arc_max
        )));
    }
    let mut values = ss.values.clone();
    for i in 0..grid.nx() {
        if grid.x_nodes()[i] <= ss.face_x1 {
            for j in 0..grid.neta() {
                values[grid.index(i, j)] = S::one();
            }
        }
    }
    Field::new(grid, time, values)
}

/// Options of [`stability_eigenvalue`].
#[derive(Clone, Debug)]
pub struct EigenConfig<S> {
    pub tol: S,
    pub max_iter: usize,
}

impl<S: Real> Default for EigenConfig<S> {
    fn default() -> Self {
        Self {
            tol: S::of(1e-9),
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenReport {
    pub eigenvalue: f64,
    pub shift: f64,
    pub iterations: usize,
    /// `‖(-L - f'(u))v - λv‖∞ / ‖v‖∞` at the returned pair.
    pub residual: f64,
}

/// Principal eigenvalue of `-Δ_h - f'(u)` with the grid's Neumann closures,
/// by inverse iteration shifted below `min(-f'(u))`.
pub fn stability_eigenvalue<S: Real>(
    grid: &MappedGrid<S>,
    u: &Field<S>,
    nl: &Nonlinearity<S>,
    cfg: &EigenConfig<S>,
) -> Result<EigenReport> {
    u.matches_grid(grid)?;
    let n = grid.len();
    let potential: Vec<S> = u.values.iter().map(|&v| -nl.fprime(v)).collect();
    let floor = potential.iter().copied().fold(S::infinity(), S::min);
    let shift = floor - S::of(1e-2);
    let sys = NinePoint {
        nx: grid.nx(),
        neta: grid.neta(),
        diag: potential.iter().map(|&p| p - shift).collect(),
        coupling: (0..n).map(|k| grid.weights(k).map(|w| -w)).collect(),
    };
    let factors = BandLu::factor(&sys)?;
    let mut v = vec![S::one(); n];
    let mut y = vec![S::zero(); n];
    let mut lambda = S::nan();
    let norm = |a: &[S]| a.iter().fold(S::zero(), |m, &x| m.max(x.abs()));
    for it in 1..=cfg.max_iter {
        y.copy_from_slice(&v);
        factors.solve(&mut y);
        // y ≈ v / (λ - σ) along the principal direction
        let num: S = v.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        let den: S = y.iter().map(|&b| b * b).sum();
        let estimate = shift + num / den;
        let scale = norm(&y);
        for k in 0..n {
            v[k] = y[k] / scale;
        }
        let converged = (estimate - lambda).abs() <= cfg.tol * (S::one() + estimate.abs());
        lambda = estimate;
        if converged && it > 2 {
            let mut av = vec![S::zero(); n];
            sys.apply(&v, &mut av);
            let res = (0..n)
                .map(|k| (av[k] - (lambda - shift) * v[k]).abs())
                .fold(S::zero(), S::max);
            return Ok(EigenReport {
                eigenvalue: lambda.to64(),
                shift: shift.to64(),
                iterations: it,
                residual: (res / norm(&v)).to64(),
            });
        }
    }
    Err(Error::convergence(
        "stability eigenvalue",
        format!(
            "no convergence in {} iterations, last estimate {}",
            cfg.max_iter, lambda
        ),
    ))
}

/// Smallest Rayleigh quotient `(ψᵀKψ - Σ M f'(u) ψ²) / Σ M ψ²` over random
/// compactly supported bumps.
pub fn rayleigh_probe<S: Real>(
    grid: &MappedGrid<S>,
    u: &Field<S>,
    nl: &Nonlinearity<S>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    u.matches_grid(grid)?;
    let fe = FeSystem::assemble(grid, |_, _| true);
    let k_op = fe.operator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut psi = vec![S::zero(); n];
    let mut kpsi = vec![S::zero(); n];
    let mut worst = f64::INFINITY;
    let x = grid.x_nodes();
    let (lo, hi) = (x[0].to64(), x[grid.nx() - 1].to64());
    for _ in 0..samples {
        let cx = rng.gen_range(lo..hi);
        let width = rng.gen_range(0.5..4.0);
        let h = grid.domain().h(S::of(cx)).to64();
        let crho = rng.gen_range(0.0..h.max(1e-9));
        for i in 0..grid.nx() {
            for j in 0..grid.neta() {
                let dx = x[i].to64() - cx;
                let dr = grid.rho(i, j).to64() - crho;
                let s = (dx * dx + dr * dr) / (width * width);
                psi[grid.index(i, j)] = S::of(if s < 1.0 { (1.0 - s).powi(3) } else { 0.0 });
            }
        }
        k_op.apply(&psi, &mut kpsi);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let p = psi[k].to64();
            let m = fe.mass[k].to64();
            num += p * kpsi[k].to64() - m * nl.fprime(u.values[k]).to64() * p * p;
            den += m * p * p;
        }
        if den > 0.0 {
            worst = worst.min(num / den);
        }
    }
    Ok(worst)
}

/// Largest `κ` with `κ(t-1)² ≤ F(t) ≤ (1+t²)/κ` at `samples` points of `[lo, hi]`.
pub fn kappa_bound_check<S: Real>(nl: &Nonlinearity<S>, lo: S, hi: S, samples: usize) -> Result<S> {
    if !(hi > lo) || samples < 2 {
        return Err(Error::InvalidParameter(
            "need lo < hi and at least two samples".into(),
        ));
    }
    let mut kappa = S::infinity();
    for k in 0..samples {
        let t = lo + (hi - lo) * S::of_usize(k) / S::of_usize(samples - 1);
        let big_f = nl.primitive(t);
        let d = (t - S::one()) * (t - S::one());
        if d > S::zero() {
            kappa = kappa.min(big_f / d);
        }
        if big_f > S::zero() {
            kappa = kappa.min((S::one() + t * t) / big_f);
        }
    }
    Ok(kappa)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyGapReport {
    /// H¹ radius of the perturbation sphere.
    pub radius: f64,
    pub gaps: Vec<f64>,
    pub min_gap: f64,
    pub reference_energy: f64,
}

/// `J(w₀ + v) - J(w₀)` for random admissible `v` with `‖v‖_{H¹} = radius`.
///
/// Each `v` is a sum of three random smooth bumps centred in the free region,
/// restricted to the cone `x₁ > L cos α` when `cone_only` is set.
#[allow(clippy::too_many_arguments)]
pub fn energy_gap_probe<S: Real>(
    grid: &MappedGrid<S>,
    nl: &Nonlinearity<S>,
    r: S,
    directions: usize,
    radius: S,
    cone_only: bool,
    seed: u64,
) -> Result<EnergyGapReport> {
    let layout = truncated_layout(grid, r, -S::one())?;
    let pinned = &layout.pinned;
    let fe = FeSystem::assemble(grid, |i, j| {
        CORNERS
            .iter()
            .any(|&(a, b)| !pinned[grid.index(i + a, j + b)])
    });
    let k_op = fe.operator();
    let n = grid.len();
    let mut scratch = vec![S::zero(); n];
    let base = fe.energy(&k_op, &layout.w0, nl, &mut scratch);
    let dom = grid.domain();
    let cone_start = dom.l_match() * dom.alpha().cos();
    let x = grid.x_nodes();
    let free: Vec<usize> = (0..n)
        .filter(|&k| !pinned[k] && (!cone_only || x[k / grid.neta()] > cone_start))
        .collect();
    if free.is_empty() {
        return Err(Error::InvalidParameter(
            "no admissible nodes for perturbations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaps = Vec::with_capacity(directions);
    let mut v = vec![S::zero(); n];
    for _ in 0..directions {
        v.iter_mut().for_each(|z| *z = S::zero());
        for _ in 0..3 {
            let centre = free[rng.gen_range(0..free.len())];
            let (ci, cj) = (centre / grid.neta(), centre % grid.neta());
            let (cx, cr) = (x[ci].to64(), grid.rho(ci, cj).to64());
            let width = rng.gen_range(0.5..3.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for &k in &free {
                let (i, j) = (k / grid.neta(), k % grid.neta());
                let dx = x[i].to64() - cx;
                let dr = grid.rho(i, j).to64() - cr;
                let s = (dx * dx + dr * dr) / (width * width);
                if s < 1.0 {
                    v[k] += S::of(sign * (1.0 - s).powi(3));
                }
            }
        }
        let norm = fe.h1_norm(&k_op, &v, &mut scratch);
        if !(norm > S::zero()) {
            gaps.push(0.0);
            continue;
        }
        let trial: Vec<S> = (0..n)
            .map(|k| layout.w0[k] + v[k] * radius / norm)
            .collect();
        gaps.push((fe.energy(&k_op, &trial, nl, &mut scratch) - base).to64());
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EnergyGapReport {
        radius: radius.to64(),
        gaps,
        min_gap,
        reference_energy: base.to64(),
    })
}
