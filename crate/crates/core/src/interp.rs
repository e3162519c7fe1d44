//! Shape-preserving cubic Hermite interpolation on uniform grids.

use crate::{Error, Real, Result};

/// Piecewise cubic Hermite interpolant on a uniform grid `x0 + k·dx`.
///
/// Slopes are limited with the Fritsch-Carlson rule so that monotone data
/// yields a monotone interpolant.
#[derive(Clone, Debug)]
pub struct MonotoneCubic<S> {
    x0: S,
    dx: S,
    y: Vec<S>,
    d: Vec<S>,
}

impl<S: Real> MonotoneCubic<S> {
    /// Builds the interpolant from values and user-supplied slopes.
    pub fn with_slopes(x0: S, dx: S, y: Vec<S>, mut d: Vec<S>) -> Result<Self> {
        if y.len() < 2 || y.len() != d.len() || !(dx > S::zero()) {
            return Err(Error::InvalidParameter(
                "interpolant needs at least two nodes, matching slopes and dx > 0".into(),
            ));
        }
        limit_slopes(dx, &y, &mut d);
        Ok(Self { x0, dx, y, d })
    }

    /// Builds the interpolant with PCHIP (Fritsch-Butland) slopes.
    pub fn pchip(x0: S, dx: S, y: Vec<S>) -> Result<Self> {
        let n = y.len();
        if n < 3 {
            return Err(Error::InvalidParameter(
                "PCHIP needs at least three nodes".into(),
            ));
        }
        let secant: Vec<S> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / dx).collect();
        let mut d = vec![S::zero(); n];
        for k in 1..n - 1 {
            let (a, b) = (secant[k - 1], secant[k]);
            if a * b > S::zero() {
                d[k] = S::of(2.0) * a * b / (a + b);
            }
        }
        d[0] = end_slope(secant[0], secant[1]);
        d[n - 1] = end_slope(secant[n - 2], secant[n - 3]);
        Self::with_slopes(x0, dx, y, d)
    }

    pub fn x0(&self) -> S {
        self.x0
    }

    pub fn dx(&self) -> S {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_end(&self) -> S {
        self.x0 + self.dx * S::of_usize(self.y.len() - 1)
    }

    pub fn values(&self) -> &[S] {
        &self.y
    }

    pub fn slopes(&self) -> &[S] {
        &self.d
    }

    fn locate(&self, x: S) -> (usize, S) {
        let n = self.y.len();
        let s = ((x - self.x0) / self.dx).max(S::zero());
        let k = s.floor().to_usize().unwrap_or(0).min(n - 2);
        (k, s - S::of_usize(k))
    }

    /// Interpolated value; clamps to the end values outside the grid.
    pub fn eval(&self, x: S) -> S {
        if x <= self.x0 {
            return self.y[0];
        }
        if x >= self.x_end() {
            return self.y[self.y.len() - 1];
        }
        let (k, t) = self.locate(x);
        let (one, two, three) = (S::one(), S::of(2.0), S::of(3.0));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = two * t3 - three * t2 + one;
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.y[k]
            + h10 * self.dx * self.d[k]
            + h01 * self.y[k + 1]
            + h11 * self.dx * self.d[k + 1]
    }

    /// Derivative of the interpolant; zero outside the grid.
    pub fn eval_deriv(&self, x: S) -> S {
        if x < self.x0 || x > self.x_end() {
            return S::zero();
        }
        let (k, t) = self.locate(x);
        let (one, two, three, four, six) =
            (S::one(), S::of(2.0), S::of(3.0), S::of(4.0), S::of(6.0));
        let t2 = t * t;
        let g00 = six * t2 - six * t;
        let g10 = three * t2 - four * t + one;
        let g01 = six * t - six * t2;
        let g11 = three * t2 - two * t;
        (g00 * self.y[k] + g01 * self.y[k + 1]) / self.dx + g10 * self.d[k] + g11 * self.d[k + 1]
    }

    /// Exact integral of the interpolant from `x` to the right end of the grid.
    pub fn integral_to_end(&self, x: S) -> S {
        let x = x.max(self.x0).min(self.x_end());
        let (k, t) = self.locate(x);
        let mut acc = self.cell_integral(k, S::one()) - self.cell_integral(k, t);
        for m in k + 1..self.y.len() - 1 {
            acc += self.cell_integral(m, S::one());
        }
        acc
    }

    /// Integral over cell `k` from its left node to local coordinate `t`.
    fn cell_integral(&self, k: usize, t: S) -> S {
        let half = S::of(0.5);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let i00 = t4 * half - t3 + t;
        let i10 = t4 / S::of(4.0) - S::of(2.0) * t3 / S::of(3.0) + t2 * half;
        let i01 = -t4 * half + t3;
        let i11 = t4 / S::of(4.0) - t3 / S::of(3.0);
        self.dx
            * (i00 * self.y[k]
                + i10 * self.dx * self.d[k]
                + i01 * self.y[k + 1]
                + i11 * self.dx * self.d[k + 1])
    }
}

fn end_slope<S: Real>(near: S, far: S) -> S {
    let d = (S::of(3.0) * near - far) * S::of(0.5);
    if d * near <= S::zero() {
        S::zero()
    } else if near * far <= S::zero() && d.abs() > S::of(3.0) * near.abs() {
        S::of(3.0) * near
    } else {
        d
    }
}

fn limit_slopes<S: Real>(dx: S, y: &[S], d: &mut [S]) {
    let nine = S::of(9.0);
    for k in 0..y.len() - 1 {
        let secant = (y[k + 1] - y[k]) / dx;
        if secant == S::zero() {
            continue;
        }
        let a = d[k] / secant;
        let b = d[k + 1] / secant;
        if a < S::zero() {
            d[k] = S::zero();
        }
        if b < S::zero() {
            d[k + 1] = S::zero();
        }
        let (a, b) = (a.max(S::zero()), b.max(S::zero()));
        let r2 = a * a + b * b;
        if r2 > nine {
            let tau = S::of(3.0) / r2.sqrt();
            d[k] = tau * a * secant;
            d[k + 1] = tau * b * secant;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let x0 = -1.0;
        let dx = 0.25;
        let xs: Vec<f64> = (0..9).map(|k| x0 + dx * k as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| x * x * x + x).collect();
        let d: Vec<f64> = xs.iter().map(|x| 3.0 * x * x + 1.0).collect();
        let p = MonotoneCubic::with_slopes(x0, dx, y, d).unwrap();
        for &x in &[-0.9, -0.3, 0.1, 0.77] {
            assert!((p.eval(x) - (x * x * x + x)).abs() < 1e-14);
            assert!((p.eval_deriv(x) - (3.0 * x * x + 1.0)).abs() < 1e-13);
        }
        let exact = |a: f64| (0.25 + 0.5) - (a.powi(4) / 4.0 + a * a / 2.0);
        assert!((p.integral_to_end(-0.4) - exact(-0.4)).abs() < 1e-14);
    }

    #[test]
    fn pchip_keeps_step_data_monotone() {
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let p = MonotoneCubic::pchip(0.0, 1.0, y).unwrap();
        let mut prev = -1.0;
        for k in 0..=500 {
            let v = p.eval(5.0 * k as f64 / 500.0);
            assert!(v >= prev - 1e-15);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }
}
