//! Entire solution emanating from the planar front.
//!
//! The past is controlled by the subsolution
//! `w⁻(t, x) = φ(x₁ - ct + ξ(t)) - φ(-x₁ - ct + ξ(t))` for `x₁ < 0` (zero for
//! `x₁ ≥ 0`) and the supersolution `w⁺(t, x) = φ(x₁ - ct)`. The solution is
//! the limit of the solutions `u_n` started at `t = -n` from `sup_{s ≤ -n} w⁻(s, ·)`.

use serde::Serialize;

use crate::geometry::{FunnelDomain, MappedGrid};
use crate::kinetics::{Nonlinearity, WaveProfile};
use crate::solver::{integrate, Field, Observer, StepperConfig};
use crate::{Error, Real, Result};

/// Shift amplitude `M` with its validity horizons.
#[derive(Clone, Debug)]
pub struct PastScheme<S> {
    /// Shift amplitude `M`.
    pub m: S,
    /// `T = ln(c / (c + M)) / (μ* c)`.
    pub t_validity: S,
    /// Certified horizon `T' ≤ T`.
    pub t_certified: S,
    /// The run starts at `t = -n_start`.
    pub n_start: S,
    c: S,
    mu_star: S,
    /// Largest sampled residual of `w⁻` on `(-∞, T']` (nonpositive for a subsolution).
    pub certificate_residual: S,
    pub certificate_samples: usize,
}

impl<S: Real> PastScheme<S> {
    /// Scheme with amplitude `m`, certified horizon `min(t_certified, T)` and
    /// default start `max(-T', 20)`.
    pub fn new(wp: &WaveProfile<S>, m: S, t_certified: Option<S>) -> Result<Self> {
        if !(m > S::zero()) {
            return Err(Error::InvalidParameter(format!("M = {m} must be positive")));
        }
        let (c, mu_star) = (wp.c, wp.mu_star);
        let t_validity = (c / (c + m)).ln() / (mu_star * c);
        let t_certified = t_certified.map_or(t_validity, |t| t.min(t_validity));
        Ok(Self {
            m,
            t_validity,
            t_certified,
            n_start: (-t_certified).max(S::of(20.0)),
            c,
            mu_star,
            certificate_residual: S::nan(),
            certificate_samples: 0,
        })
    }

    pub fn with_n_start(mut self, n_start: S) -> Result<Self> {
        if n_start < -self.t_certified {
            return Err(Error::InvalidParameter(format!(
                "n_start = {} must be at least -T' = {}",
                n_start, -self.t_certified
            )));
        }
        self.n_start = n_start;
        Ok(self)
    }

    /// `ξ(t) = ln(c / (c - M e^{μ* c t})) / μ*`.
    pub fn xi(&self, t: S) -> S {
        let e = self.m * (self.mu_star * self.c * t).exp();
        (self.c / (self.c - e)).ln() / self.mu_star
    }

    /// `ξ'(t) = M c e^{μ* c t} / (c - M e^{μ* c t})`.
    pub fn xi_rate(&self, t: S) -> S {
        let e = self.m * (self.mu_star * self.c * t).exp();
        e * self.c / (self.c - e)
    }

    fn check_time(&self, t: S) -> Result<()> {
        if t > self.t_certified {
            return Err(Error::OutOfValidity(format!(
                "t = {} beyond the certified horizon T' = {}",
                t, self.t_certified
            )));
        }
        Ok(())
    }
}

/// The subsolution `w⁻(t, x)`; `rho` is unused since `w⁻` depends on `x₁` only.
pub fn eval_w_minus<S: Real>(
    t: S,
    x1: S,
    _rho: S,
    wp: &WaveProfile<S>,
    ps: &PastScheme<S>,
) -> Result<S> {
    ps.check_time(t)?;
    Ok(w_minus_unchecked(t, x1, wp, ps))
}

fn w_minus_unchecked<S: Real>(t: S, x1: S, wp: &WaveProfile<S>, ps: &PastScheme<S>) -> S {
    if x1 >= S::zero() {
        return S::zero();
    }
    let shift = ps.xi(t);
    let ct = wp.c * t;
    wp.phi(x1 - ct + shift) - wp.phi(-x1 - ct + shift)
}

/// The planar supersolution `φ(x₁ - ct)`.
pub fn eval_w_plus<S: Real>(t: S, x1: S, wp: &WaveProfile<S>) -> S {
    wp.phi(x1 - wp.c * t)
}

/// `∂_t w⁻ - Δw⁻ - f(w⁻)` on the branch `x₁ < 0`, from the front equation
/// `φ'' = -cφ' - f(φ)`.
pub fn subsolution_residual<S: Real>(
    t: S,
    x1: S,
    wp: &WaveProfile<S>,
    nl: &Nonlinearity<S>,
    ps: &PastScheme<S>,
) -> S {
    if x1 >= S::zero() {
        return -nl.f(S::zero());
    }
    let shift = ps.xi(t);
    let ct = wp.c * t;
    let (z1, z2) = (x1 - ct + shift, -x1 - ct + shift);
    let (p1, p2) = (wp.phi(z1), wp.phi(z2));
    ps.xi_rate(t) * (wp.phiprime(z1) - wp.phiprime(z2)) + nl.f(p1) - nl.f(p2) - nl.f(p1 - p2)
}

/// Search grid for [`calibrate_past_scheme`].
#[derive(Clone, Debug)]
pub struct CalibrationScan<S> {
    /// `M = 2^k · c · 10⁻³` for `k = 0..=max_power`.
    pub max_power: u32,
    /// Accepted residual.
    pub tolerance: S,
    pub time_samples: usize,
    pub space_samples: usize,
    /// Each extra step moves `T'` down by `1/(μ* c)`.
    pub max_horizon_steps: usize,
}

impl<S: Real> Default for CalibrationScan<S> {
    fn default() -> Self {
        Self {
            max_power: 20,
            tolerance: S::of(1e-6),
            time_samples: 240,
            space_samples: 400,
            max_horizon_steps: 12,
        }
    }
}

/// Largest residual of `w⁻` on a space-time sample of `(-∞, T'] × {x₁ < 0}`.
pub fn sample_subsolution_residual<S: Real>(
    wp: &WaveProfile<S>,
    nl: &Nonlinearity<S>,
    ps: &PastScheme<S>,
    x_min: S,
    time_samples: usize,
    space_samples: usize,
) -> S {
    let c = wp.c;
    let t_hi = ps.t_certified;
    let t_lo = t_hi - S::of(40.0) / c;
    let mut worst = S::neg_infinity();
    for a in 0..time_samples {
        let t = t_lo + (t_hi - t_lo) * S::of_usize(a) / S::of_usize(time_samples - 1);
        // the interaction lives between the front and the origin
        let x_lo = (c * t - S::of(30.0) / wp.mu_lower).min(x_min);
        for b in 0..space_samples {
            let frac = (S::of_usize(b) + S::of(0.5)) / S::of_usize(space_samples);
            let x1 = x_lo * (S::one() - frac);
            worst = worst.max(subsolution_residual(t, x1, wp, nl, ps));
        }
    }
    worst.max(-nl.f(S::zero()))
}

/// Smallest `M` on the scan for which `w⁻` is a subsolution up to `T'`.
pub fn calibrate_past_scheme<S: Real>(
    wp: &WaveProfile<S>,
    nl: &Nonlinearity<S>,
    dom: &FunnelDomain<S>,
    scan: &CalibrationScan<S>,
) -> Result<PastScheme<S>> {
    let step = S::one() / (wp.mu_star * wp.c);
    let mut best_worst = S::infinity();
    for extra in 0..=scan.max_horizon_steps {
        for k in 0..=scan.max_power {
            let m = S::of(2f64.powi(k as i32)) * wp.c * S::of(1e-3);
            let base = PastScheme::new(wp, m, None)?;
            let t_prime = base.t_validity - step * S::of_usize(extra);
            let mut ps = PastScheme::new(wp, m, Some(t_prime))?;
            let worst = sample_subsolution_residual(
                wp,
                nl,
                &ps,
                dom.x_min(),
                scan.time_samples,
                scan.space_samples,
            );
            best_worst = best_worst.min(worst);
            if worst <= scan.tolerance {
                ps.certificate_residual = worst;
                ps.certificate_samples = scan.time_samples * scan.space_samples;
                return Ok(ps);
            }
        }
    }
    Err(Error::convergence(
        "past-scheme calibration",
        format!("no M passed; smallest worst residual {}", best_worst),
    ))
}

/// `sup_{s ≤ -n} w⁻(s, x₁)` from 64 samples on `[-n - 40/c, -n]` plus the endpoint.
pub fn initial_column<S: Real>(x1: S, wp: &WaveProfile<S>, ps: &PastScheme<S>) -> S {
    let t_end = -ps.n_start;
    let span = S::of(40.0) / wp.c;
    let mut best = w_minus_unchecked(t_end, x1, wp, ps);
    for k in 0..64 {
        let s = t_end - span + span * S::of_usize(k) / S::of(64.0);
        best = best.max(w_minus_unchecked(s, x1, wp, ps));
    }
    best
}

/// Initial field of `u_n` at `t = -n_start`.
pub fn initial_field<S: Real>(
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
    ps: &PastScheme<S>,
) -> Field<S> {
    let column: Vec<S> = grid
        .x_nodes()
        .iter()
        .map(|&x| initial_column(x, wp, ps))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for &v in &column {
        values.extend(std::iter::repeat_n(v, grid.neta()));
    }
    Field {
        nx: grid.nx(),
        neta: grid.neta(),
        time: -ps.n_start,
        values,
    }
}

/// Truncation window for an entire-solution run from `-n_start` to `t_end`.
///
/// The plain defaults assume the front starts near `x₁ = 0`. Here the left
/// face must stay `24/μ_*` behind the front at `t = -n_start` and the right
/// face `20/μ*` ahead of it at `t_end`, otherwise the Neumann faces bend the
/// tails enough to break time monotonicity and the `w⁺` bound at the `1e-8`
/// level.
pub fn entire_window<S: Real>(
    wp: &WaveProfile<S>,
    n_start: S,
    t_end: S,
    l_match: S,
    alpha: S,
) -> (S, S) {
    let c = wp.c;
    let x_min =
        crate::geometry::default_x_min(wp.mu_lower).min(-c * n_start - S::of(24.0) / wp.mu_lower);
    let x_max = crate::geometry::default_x_max(c, t_end, wp.mu_star, l_match, alpha)
        .max(c * t_end + S::of(20.0) / wp.mu_star + l_match * alpha.cos());
    (x_min, x_max)
}

/// Options of [`construct_entire`].
#[derive(Clone, Debug)]
pub struct EntireOptions<S> {
    /// Time between stored snapshots.
    pub history_interval: S,
    /// Only keep snapshots at or after this time.
    pub history_from: S,
}

impl<S: Real> Default for EntireOptions<S> {
    fn default() -> Self {
        Self {
            history_interval: S::one(),
            history_from: S::neg_infinity(),
        }
    }
}

/// Bound checks collected along an entire-solution run.
#[derive(Clone, Debug, Serialize)]
pub struct EntireDiagnostics {
    /// `min (u(t+dt) - u(t))` over nodes and steps.
    pub monotonicity_min: f64,
    /// `(t, x₁, ρ)` where the smallest increment occurs.
    pub monotonicity_worst_at: (f64, f64, f64),
    /// `max (u - φ(x₁ - ct))` over nodes and observations.
    pub w_plus_violation: f64,
    /// `(t, x₁)` where the `w⁺` violation peaks.
    pub w_plus_worst_at: (f64, f64),
    /// `max (w⁻ - u)` over nodes and observations with `t ≤ T'`.
    pub w_minus_violation: f64,
    /// `(t, x₁)` where the `w⁻` violation peaks.
    pub w_minus_worst_at: (f64, f64),
    /// Largest value overshooting 1.
    pub overshoot: f64,
    /// `(t, max_j 1 - u(x_min, ·))` at every observation.
    pub left_deficit: Vec<(f64, f64)>,
    pub steps: usize,
}

/// Entire-solution run: snapshots plus diagnostics.
#[derive(Clone, Debug)]
pub struct EntireRun<S> {
    pub history: Vec<Field<S>>,
    pub diagnostics: EntireDiagnostics,
}

impl<S: Real> EntireRun<S> {
    pub fn last(&self) -> &Field<S> {
        self.history
            .last()
            .expect("history holds the terminal field")
    }
}

struct EntireWatch<'a, S: Real> {
    grid: &'a MappedGrid<S>,
    wp: &'a WaveProfile<S>,
    ps: &'a PastScheme<S>,
    opts: &'a EntireOptions<S>,
    next_snapshot: S,
    history: Vec<Field<S>>,
    diag: EntireDiagnostics,
}

impl<S: Real> EntireWatch<'_, S> {
    fn bounds(&mut self, u: &Field<S>) {
        let neta = self.grid.neta();
        let t = u.time;
        let certified = t <= self.ps.t_certified;
        for (i, &x) in self.grid.x_nodes().iter().enumerate() {
            let upper = eval_w_plus(t, x, self.wp);
            let lower = if certified {
                Some(w_minus_unchecked(t, x, self.wp, self.ps))
            } else {
                None
            };
            for &v in &u.values[i * neta..(i + 1) * neta] {
                let above = (v - upper).to64();
                if above > self.diag.w_plus_violation {
                    self.diag.w_plus_violation = above;
                    self.diag.w_plus_worst_at = (t.to64(), x.to64());
                }
                if let Some(lo) = lower {
                    let below = (lo - v).to64();
                    if below > self.diag.w_minus_violation {
                        self.diag.w_minus_violation = below;
                        self.diag.w_minus_worst_at = (t.to64(), x.to64());
                    }
                }
                self.diag.overshoot = self.diag.overshoot.max((v - S::one()).to64());
            }
        }
        let deficit = u.values[..neta]
            .iter()
            .map(|&v| (S::one() - v).to64())
            .fold(f64::NEG_INFINITY, f64::max);
        self.diag.left_deficit.push((t.to64(), deficit));
    }
}

impl<S: Real> Observer<S> for EntireWatch<'_, S> {
    fn on_step(&mut self, prev: &Field<S>, next: &Field<S>) {
        for (k, (&a, &b)) in prev.values.iter().zip(&next.values).enumerate() {
            let inc = (b - a).to64();
            if inc < self.diag.monotonicity_min {
                self.diag.monotonicity_min = inc;
                let (i, j) = (k / self.grid.neta(), k % self.grid.neta());
                self.diag.monotonicity_worst_at = (
                    next.time.to64(),
                    self.grid.x_nodes()[i].to64(),
                    self.grid.rho(i, j).to64(),
                );
            }
        }
        self.diag.steps += 1;
        let eps = S::of(1e-9) * (S::one() + next.time.abs());
        if next.time >= self.opts.history_from - eps && next.time + eps >= self.next_snapshot {
            self.history.push(next.clone());
            while self.next_snapshot <= next.time + eps {
                self.next_snapshot += self.opts.history_interval;
            }
        }
    }

    fn on_observe(&mut self, u: &Field<S>) {
        self.bounds(u);
    }
}

/// Integrates `u_n` from `t = -n_start` to `t_target`.
#[allow(clippy::too_many_arguments)]
pub fn construct_entire<S: Real>(
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
    nl: &Nonlinearity<S>,
    ps: &PastScheme<S>,
    cfg: &StepperConfig<S>,
    t_target: S,
    opts: &EntireOptions<S>,
) -> Result<EntireRun<S>> {
    if !(opts.history_interval > S::zero()) {
        return Err(Error::InvalidParameter(
            "history_interval must be positive".into(),
        ));
    }
    if ps.n_start < -ps.t_certified {
        return Err(Error::Precondition(format!(
            "n_start = {} below -T' = {}",
            ps.n_start, -ps.t_certified
        )));
    }
    let u0 = initial_field(grid, wp, ps);
    let start = u0.time;
    let mut watch = EntireWatch {
        grid,
        wp,
        ps,
        opts,
        next_snapshot: start + opts.history_interval,
        history: Vec::new(),
        diag: EntireDiagnostics {
            monotonicity_min: f64::INFINITY,
            monotonicity_worst_at: (f64::NAN, f64::NAN, f64::NAN),
            w_plus_violation: f64::NEG_INFINITY,
            w_plus_worst_at: (f64::NAN, f64::NAN),
            w_minus_violation: f64::NEG_INFINITY,
            w_minus_worst_at: (f64::NAN, f64::NAN),
            overshoot: f64::NEG_INFINITY,
            left_deficit: Vec::new(),
            steps: 0,
        },
    };
    watch.bounds(&u0);
    if start >= opts.history_from {
        watch.history.push(u0.clone());
    }
    let traj = integrate(grid, u0, nl, cfg, t_target, &mut [&mut watch])?;
    let mut history = watch.history;
    let last_time = history.last().map(|f| f.time);
    if last_time != Some(traj.field.time) {
        history.push(traj.field);
    }
    Ok(EntireRun {
        history,
        diagnostics: watch.diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{make_cubic, solve_wave};

    #[test]
    fn xi_vanishes_in_the_far_past() {
        let nl = make_cubic(0.25).unwrap();
        let wp = solve_wave(&nl, 40.0, 2001).unwrap();
        let ps = PastScheme::new(&wp, 0.1, None).unwrap();
        assert!(ps.t_validity < 0.0);
        assert!(ps.xi(-400.0) < 1e-12);
        assert!(ps.xi(ps.t_validity) > 0.0);
        assert!(eval_w_minus(ps.t_validity + 1.0, -1.0, 0.0, &wp, &ps).is_err());
        assert_eq!(eval_w_minus(-10.0, 0.5, 0.0, &wp, &ps).unwrap(), 0.0);
    }
}
