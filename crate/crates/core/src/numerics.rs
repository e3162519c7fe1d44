//! Small numerical helpers: quadrature, root bracketing, least squares.

use crate::{Error, Real, Result};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<S: Real>(f: &dyn Fn(S) -> S, a: S, b: S, tol: S) -> Result<S> {
    let half = S::of(0.5);
    let m = (a + b) * half;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::NumericalInput(
            "integrand not finite at interval nodes".into(),
        ));
    }
    let whole = (b - a) / S::of(6.0) * (fa + S::of(4.0) * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<S: Real>(
    f: &dyn Fn(S) -> S,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: u32,
) -> Result<S> {
    let half = S::of(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let (flm, frm) = (f(lm), f(rm));
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::NumericalInput("integrand not finite".into()));
    }
    let sixth = S::of(6.0);
    let left = (m - a) / sixth * (fa + S::of(4.0) * flm + fm);
    let right = (b - m) / sixth * (fm + S::of(4.0) * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= S::of(15.0) * tol {
        return Ok(left + right + delta / S::of(15.0));
    }
    Ok(
        simpson_step(f, a, m, fa, flm, fm, left, tol * half, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, tol * half, depth - 1)?,
    )
}

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre8<S: Real>(f: &dyn Fn(S) -> S, a: S, b: S) -> S {
    let half = S::of(0.5);
    let mid = (a + b) * half;
    let rad = (b - a) * half;
    let mut acc = S::zero();
    for k in 0..4 {
        let dx = rad * S::of(GL8_X[k]);
        acc += S::of(GL8_W[k]) * (f(mid - dx) + f(mid + dx));
    }
    acc * rad
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept)`.
pub fn fit_line<S: Real>(x: &[S], y: &[S]) -> Result<(S, S)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::FitWindow(format!(
            "need at least two paired samples, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = S::of_usize(x.len());
    let mx = x.iter().copied().sum::<S>() / n;
    let my = y.iter().copied().sum::<S>() / n;
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx <= S::zero() {
        return Err(Error::FitWindow("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Bisection on a predicate that is `false` at `lo` and `true` at `hi`.
/// Returns the final bracket `(lo, hi)`.
pub fn bisect_predicate<S: Real>(
    mut lo: S,
    mut hi: S,
    max_iter: usize,
    rel_tol: S,
    mut pred: impl FnMut(S) -> bool,
) -> (S, S) {
    let half = S::of(0.5);
    for _ in 0..max_iter {
        let mid = (lo + hi) * half;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        let scale = lo.abs().max(hi.abs()).max(S::one());
        if (hi - lo).abs() <= rel_tol * scale {
            break;
        }
    }
    (lo, hi)
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect_root<S: Real>(
    mut lo: S,
    mut hi: S,
    max_iter: usize,
    abs_tol: S,
    f: impl Fn(S) -> S,
) -> Result<S> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == S::zero() {
        return Ok(lo);
    }
    if fhi == S::zero() {
        return Ok(hi);
    }
    if (flo > S::zero()) == (fhi > S::zero()) {
        return Err(Error::convergence(
            "root bracketing",
            format!("no sign change on [{lo}, {hi}]"),
        ));
    }
    let half = S::of(0.5);
    for _ in 0..max_iter {
        let mid = (lo + hi) * half;
        let fm = f(mid);
        if fm == S::zero() {
            return Ok(mid);
        }
        if (fm > S::zero()) == (flo > S::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= abs_tol {
            break;
        }
    }
    Ok((lo + hi) * half)
}

/// One classical Runge-Kutta step for a planar autonomous system.
#[inline]
pub fn rk4_step<S: Real>(rhs: &impl Fn(S, [S; 2]) -> [S; 2], t: S, y: [S; 2], h: S) -> [S; 2] {
    let half = S::of(0.5);
    let k1 = rhs(t, y);
    let k2 = rhs(
        t + h * half,
        [y[0] + h * half * k1[0], y[1] + h * half * k1[1]],
    );
    let k3 = rhs(
        t + h * half,
        [y[0] + h * half * k2[0], y[1] + h * half * k2[1]],
    );
    let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    let sixth = S::of(1.0 / 6.0);
    [
        y[0] + h * sixth * (k1[0] + S::of(2.0) * (k2[0] + k3[0]) + k4[0]),
        y[1] + h * sixth * (k1[1] + S::of(2.0) * (k2[1] + k3[1]) + k4[1]),
    ]
}
