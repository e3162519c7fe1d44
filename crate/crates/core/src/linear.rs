//! Nine-point systems on the `(ξ, η)` lattice and their iterative solution.

use crate::geometry::slot;
use crate::{Error, Real, Result};

/// `out[k] = diag[k]·v[k] + Σ coupling[k][s]·v[neighbour s]` on an
/// `nx × neta` lattice stored row-major in `ξ`.
#[derive(Clone, Debug)]
pub(crate) struct NinePoint<S> {
    pub nx: usize,
    pub neta: usize,
    pub diag: Vec<S>,
    pub coupling: Vec<[S; 9]>,
}

impl<S: Real> NinePoint<S> {
    pub fn apply(&self, v: &[S], out: &mut [S]) {
        let (nx, neta) = (self.nx, self.neta);
        for i in 0..nx {
            let di_lo: isize = if i == 0 { 0 } else { -1 };
            let di_hi: isize = if i == nx - 1 { 0 } else { 1 };
            for j in 0..neta {
                let k = i * neta + j;
                let w = &self.coupling[k];
                let dj_lo: isize = if j == 0 { 0 } else { -1 };
                let dj_hi: isize = if j == neta - 1 { 0 } else { 1 };
                let mut acc = self.diag[k] * v[k];
                for di in di_lo..=di_hi {
                    let base = k as isize + di * neta as isize;
                    for dj in dj_lo..=dj_hi {
                        acc += w[slot(di, dj)] * v[(base + dj) as usize];
                    }
                }
                out[k] = acc;
            }
        }
    }
}

/// Thomas factors of a family of tridiagonal systems laid out along one axis.
#[derive(Clone, Debug)]
struct LineFactors<S> {
    lower: Vec<S>,
    inv_pivot: Vec<S>,
    upper_mod: Vec<S>,
    lines: usize,
    len: usize,
    stride: usize,
    line_stride: usize,
}

impl<S: Real> LineFactors<S> {
    fn factor(
        lower: Vec<S>,
        diag: &[S],
        upper: &[S],
        lines: usize,
        len: usize,
        stride: usize,
        line_stride: usize,
    ) -> Self {
        let mut inv_pivot = vec![S::zero(); diag.len()];
        let mut upper_mod = vec![S::zero(); diag.len()];
        for line in 0..lines {
            let base = line * line_stride;
            let mut prev_upper = S::zero();
            for m in 0..len {
                let k = base + m * stride;
                let pivot = diag[k]
                    - if m > 0 {
                        lower[k] * prev_upper
                    } else {
                        S::zero()
                    };
                inv_pivot[k] = S::one() / pivot;
                upper_mod[k] = upper[k] * inv_pivot[k];
                prev_upper = upper_mod[k];
            }
        }
        Self {
            lower,
            inv_pivot,
            upper_mod,
            lines,
            len,
            stride,
            line_stride,
        }
    }

    fn solve(&self, rhs: &mut [S]) {
        let (len, stride) = (self.len, self.stride);
        for line in 0..self.lines {
            let base = line * self.line_stride;
            let mut prev = S::zero();
            for m in 0..len {
                let k = base + m * stride;
                let v = (rhs[k]
                    - if m > 0 {
                        self.lower[k] * prev
                    } else {
                        S::zero()
                    })
                    * self.inv_pivot[k];
                rhs[k] = v;
                prev = v;
            }
            for m in (0..len.saturating_sub(1)).rev() {
                let k = base + m * stride;
                rhs[k] -= self.upper_mod[k] * rhs[k + stride];
            }
        }
    }
}

/// Alternating-line preconditioner `P = (D + A_η) D⁻¹ (D + A_x)`, where
/// `A_x` holds the `ξ`-neighbour couplings with their share of the diagonal
/// and `A_η` everything else except the corners.
#[derive(Clone, Debug)]
pub(crate) struct LinePreconditioner<S> {
    eta_lines: LineFactors<S>,
    x_lines: LineFactors<S>,
    diag: Vec<S>,
}

impl<S: Real> LinePreconditioner<S> {
    pub fn new(sys: &NinePoint<S>) -> Self {
        let n = sys.diag.len();
        let (nx, neta) = (sys.nx, sys.neta);
        let mut lo_e = vec![S::zero(); n];
        let mut di_e = vec![S::zero(); n];
        let mut up_e = vec![S::zero(); n];
        let mut lo_x = vec![S::zero(); n];
        let mut di_x = vec![S::zero(); n];
        let mut up_x = vec![S::zero(); n];
        for k in 0..n {
            let w = &sys.coupling[k];
            let xdiag = -(w[slot(-1, 0)] + w[slot(1, 0)]);
            lo_x[k] = w[slot(-1, 0)];
            up_x[k] = w[slot(1, 0)];
            di_x[k] = sys.diag[k] + xdiag;
            lo_e[k] = w[slot(0, -1)];
            up_e[k] = w[slot(0, 1)];
            di_e[k] = sys.diag[k] + w[slot(0, 0)] - xdiag;
        }
        Self {
            eta_lines: LineFactors::factor(lo_e, &di_e, &up_e, nx, neta, 1, neta),
            x_lines: LineFactors::factor(lo_x, &di_x, &up_x, neta, nx, neta, 1),
            diag: sys.diag.clone(),
        }
    }

    pub fn apply(&self, v: &mut [S]) {
        self.eta_lines.solve(v);
        for (x, &d) in v.iter_mut().zip(&self.diag) {
            *x *= d;
        }
        self.x_lines.solve(v);
    }
}

/// Work space for [`bicgstab`].
#[derive(Clone, Debug, Default)]
pub(crate) struct Workspace<S> {
    vecs: Vec<Vec<S>>,
}

/// Right-preconditioned BiCGSTAB for `sys·x = b`, starting from `x`.
/// Returns the iteration count.
pub(crate) fn bicgstab<S: Real>(
    sys: &NinePoint<S>,
    pre: &LinePreconditioner<S>,
    b: &[S],
    x: &mut [S],
    tol: S,
    max_iter: usize,
    ws: &mut Workspace<S>,
) -> Result<usize> {
    let n = b.len();
    if ws.vecs.len() != 8 || ws.vecs[0].len() != n {
        ws.vecs = vec![vec![S::zero(); n]; 8];
    }
    let [r, rhat, p, v, s, t, phat, shat] = &mut ws.vecs[..] else {
        unreachable!("eight work vectors")
    };
    let dot = |a: &[S], b: &[S]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<S>();
    let bnorm = dot(b, b).sqrt();
    let target = tol * bnorm.max(S::min_positive_value());
    let restart = |x: &[S], r: &mut Vec<S>| {
        sys.apply(x, r);
        for k in 0..n {
            r[k] = b[k] - r[k];
        }
    };
    restart(x, r);
    rhat.copy_from_slice(r);
    p.iter_mut().for_each(|z| *z = S::zero());
    v.iter_mut().for_each(|z| *z = S::zero());
    let (mut rho, mut alpha, mut omega) = (S::one(), S::one(), S::one());
    let mut residual = dot(r, r).sqrt();
    let mut iters = 0;
    loop {
        if residual <= target {
            return Ok(iters);
        }
        if iters >= max_iter {
            return Err(Error::convergence(
                "linear solve",
                format!(
                    "residual {} after {} iterations (target {})",
                    residual, iters, target
                ),
            ));
        }
        iters += 1;
        let rho_new = dot(rhat, r);
        if rho_new == S::zero() || !rho_new.is_finite() {
            // restart on breakdown
            restart(x, r);
            rhat.copy_from_slice(r);
            p.iter_mut().for_each(|z| *z = S::zero());
            v.iter_mut().for_each(|z| *z = S::zero());
            rho = S::one();
            alpha = S::one();
            omega = S::one();
            residual = dot(r, r).sqrt();
            if !residual.is_finite() {
                return Err(Error::Divergence(
                    "non-finite residual in linear solve".into(),
                ));
            }
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        phat.copy_from_slice(p);
        pre.apply(phat);
        sys.apply(phat, v);
        alpha = rho / dot(rhat, v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let snorm = dot(s, s).sqrt();
        if snorm <= target {
            for k in 0..n {
                x[k] += alpha * phat[k];
            }
            residual = snorm;
            continue;
        }
        shat.copy_from_slice(s);
        pre.apply(shat);
        sys.apply(shat, t);
        let tt = dot(t, t);
        omega = if tt > S::zero() {
            dot(t, s) / tt
        } else {
            S::zero()
        };
        for k in 0..n {
            x[k] += alpha * phat[k] + omega * shat[k];
            r[k] = s[k] - omega * t[k];
        }
        residual = dot(r, r).sqrt();
        if omega == S::zero() {
            rho = S::zero();
        }
    }
}

/// Banded LU factors of a [`NinePoint`] system without pivoting, with
/// half-bandwidth `neta + 1` in the natural ordering.
#[derive(Clone, Debug)]
pub(crate) struct BandLu<S> {
    n: usize,
    half: usize,
    /// Row `k` holds columns `k - half ..= k + half`.
    band: Vec<S>,
}

impl<S: Real> BandLu<S> {
    pub fn factor(sys: &NinePoint<S>) -> Result<Self> {
        let (nx, neta) = (sys.nx, sys.neta);
        let n = nx * neta;
        let half = neta + 1;
        let width = 2 * half + 1;
        let mut band = vec![S::zero(); n * width];
        for i in 0..nx {
            for j in 0..neta {
                let k = i * neta + j;
                band[k * width + half] += sys.diag[k];
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || a >= nx as isize || b < 0 || b >= neta as isize {
                            continue;
                        }
                        let col = (a as usize) * neta + b as usize;
                        band[k * width + (col + half - k)] += sys.coupling[k][slot(di, dj)];
                    }
                }
            }
        }
        for k in 0..n {
            let pivot = band[k * width + half];
            if pivot == S::zero() || !pivot.is_finite() {
                return Err(Error::convergence(
                    "band factorization",
                    format!("zero pivot at row {k}"),
                ));
            }
            let last = (k + half).min(n - 1);
            for row in k + 1..=last {
                let lk = row * width + (k + half - row);
                let factor = band[lk] / pivot;
                if factor == S::zero() {
                    continue;
                }
                band[lk] = factor;
                for col in k + 1..=last {
                    let upper = band[k * width + (col + half - k)];
                    band[row * width + (col + half - row)] -= factor * upper;
                }
            }
        }
        Ok(Self { n, half, band })
    }

    pub fn solve(&self, x: &mut [S]) {
        let (n, half) = (self.n, self.half);
        let width = 2 * half + 1;
        for k in 0..n {
            let mut acc = x[k];
            for col in k.saturating_sub(half)..k {
                acc -= self.band[k * width + (col + half - k)] * x[col];
            }
            x[k] = acc;
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for col in k + 1..=(k + half).min(n - 1) {
                acc -= self.band[k * width + (col + half - k)] * x[col];
            }
            x[k] = acc / self.band[k * width + half];
        }
    }
}
