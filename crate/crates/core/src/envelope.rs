//! Spherical envelopes around a spreading solution in the conical region.
//!
//! For `t ≥ τ₁`, `x₁ > 0` and `|x| ≥ L` the upper envelope is
//! `φ(|x| - c(t-τ₁+τ) + ((N-1)/c) ln(t-τ₁+τ) + z₁) + δe^{-δϑ(t-τ₁)} + δe^{-μ(|x|-L)}`
//! and the lower one mirrors it with `τ₂`, `z₂` and the correction terms
//! subtracted, with `ϑ(t) = (2/3)(ln(1+t))^{3/2}`.

use serde::Serialize;

use crate::analysis::{delayed_radius_time, Verdict, VerdictKind};
use crate::geometry::MappedGrid;
use crate::kinetics::{Nonlinearity, WaveProfile};
use crate::solver::Field;
use crate::{Error, Real, Result};

/// `ϑ(t) = (2/3)(ln(1+t))^{3/2}`.
pub fn vartheta<S: Real>(t: S) -> S {
    let l = t.ln_1p();
    S::of(2.0 / 3.0) * l * l.sqrt()
}

/// `ϑ'(t) = √(ln(1+t)) / (1+t)`.
pub fn vartheta_rate<S: Real>(t: S) -> S {
    t.ln_1p().sqrt() / (S::one() + t)
}

/// Strict upper bound `√(min(|f'(0)|, |f'(1)|)/2)` on the far-field rate `μ`.
pub fn mu_bound<S: Real>(nl: &Nonlinearity<S>) -> S {
    (nl.slope_at_zero().abs().min(nl.slope_at_one().abs()) * S::of(0.5)).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct Envelope<S> {
    pub tau: S,
    pub tau1: S,
    pub tau2: S,
    pub z1: S,
    pub z2: S,
    pub delta: S,
    pub mu: S,
    pub l_match: S,
    pub n_dim: usize,
}

impl<S: Real> Envelope<S> {
    /// Envelope with both fronts exactly on the delayed radius and the
    /// default `δ = 0.05`, `μ = 0.9·`[`mu_bound`], `τ = 1`.
    pub fn centered(nl: &Nonlinearity<S>, l_match: S, n_dim: usize) -> Self {
        Self {
            tau: S::one(),
            tau1: S::zero(),
            tau2: S::zero(),
            z1: S::zero(),
            z2: S::zero(),
            delta: S::of(0.05),
            mu: S::of(0.9) * mu_bound(nl),
            l_match,
            n_dim,
        }
    }

    fn front_argument(&self, wp: &WaveProfile<S>, t: S, r: S, start: S) -> S {
        let shifted = t - start + self.tau;
        r - wp.c * shifted + S::of_usize(self.n_dim - 1) / wp.c * shifted.ln()
    }

    fn correction(&self, t: S, r: S, start: S) -> S {
        self.delta * (-self.delta * vartheta(t - start)).exp()
            + self.delta * (-self.mu * (r - self.l_match)).exp()
    }

    /// Upper envelope at time `t ≥ τ₁` and distance `r` from the origin.
    pub fn upper(&self, wp: &WaveProfile<S>, t: S, r: S) -> S {
        wp.phi(self.front_argument(wp, t, r, self.tau1) + self.z1)
            + self.correction(t, r, self.tau1)
    }

    /// Lower envelope at time `t ≥ τ₂` and distance `r` from the origin.
    pub fn lower(&self, wp: &WaveProfile<S>, t: S, r: S) -> S {
        wp.phi(self.front_argument(wp, t, r, self.tau2) + self.z2)
            - self.correction(t, r, self.tau2)
    }

    fn validate(&self, nl: &Nonlinearity<S>) -> Result<()> {
        if !(self.delta > S::zero() && self.delta < S::of(0.5)) {
            return Err(Error::InvalidParameter(format!(
                "δ = {} must lie in (0, 1/2)",
                self.delta
            )));
        }
        if !(self.mu > S::zero() && self.mu < mu_bound(nl)) {
            return Err(Error::InvalidParameter(format!(
                "μ = {} must lie in (0, {})",
                self.mu,
                mu_bound(nl)
            )));
        }
        if !(self.tau > S::zero()) {
            return Err(Error::InvalidParameter("τ must be positive".into()));
        }
        Ok(())
    }
}

/// Largest violations of an envelope pair on the sampled region.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCheck {
    /// `max (u - upper)` over samples with `t ≥ τ₁`.
    pub sup_violation: f64,
    /// `max (lower - u)` over samples with `t ≥ τ₂`.
    pub sub_violation: f64,
    pub samples: usize,
    /// `(t, sup violation, sub violation)` per snapshot.
    pub heat_map: Vec<(f64, f64, f64)>,
}

struct Sample<S> {
    snapshot: usize,
    r: S,
    u: S,
}

/// Nodes with `x₁ > 0` and `|x| ≥ L` of every snapshot at or after `t_from`.
fn collect<S: Real>(
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    t_from: S,
) -> Result<Vec<Sample<S>>> {
    let l_match = grid.domain().l_match();
    let mut out = Vec::new();
    for (k, field) in history.iter().enumerate() {
        if field.time < t_from {
            continue;
        }
        field.matches_grid(grid)?;
        for i in 0..grid.nx() {
            let x1 = grid.x_nodes()[i];
            if x1 <= S::zero() {
                continue;
            }
            for j in 0..grid.neta() {
                let rho = grid.rho(i, j);
                let r = (x1 * x1 + rho * rho).sqrt();
                if r >= l_match {
                    out.push(Sample {
                        snapshot: k,
                        r,
                        u: field.values[grid.index(i, j)],
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Violations of `env` on `history`, restricted to `x₁ > 0`, `|x| ≥ L`.
pub fn check_envelope<S: Real>(
    env: &Envelope<S>,
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
) -> Result<EnvelopeCheck> {
    let samples = collect(history, grid, env.tau1.min(env.tau2))?;
    let mut heat: Vec<(f64, f64, f64)> = history
        .iter()
        .map(|f| (f.time.to64(), f64::NEG_INFINITY, f64::NEG_INFINITY))
        .collect();
    for s in &samples {
        let t = history[s.snapshot].time;
        let cell = &mut heat[s.snapshot];
        if t >= env.tau1 {
            cell.1 = cell.1.max((s.u - env.upper(wp, t, s.r)).to64());
        }
        if t >= env.tau2 {
            cell.2 = cell.2.max((env.lower(wp, t, s.r) - s.u).to64());
        }
    }
    heat.retain(|c| c.1.is_finite() || c.2.is_finite());
    Ok(EnvelopeCheck {
        sup_violation: heat.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max),
        sub_violation: heat.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max),
        samples: samples.len(),
        heat_map: heat,
    })
}

/// Fitted envelope pair together with its verification.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub envelope: Envelope<f64>,
    pub check: EnvelopeCheck,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tightest shift `z` such that every sample satisfies the envelope with
/// margin `slack`. `upper` selects the direction of the inequality.
fn tightest_shift<S: Real>(
    env: &Envelope<S>,
    history: &[Field<S>],
    samples: &[Sample<S>],
    wp: &WaveProfile<S>,
    start: S,
    upper: bool,
    slack: S,
) -> Result<Option<S>> {
    let floor = S::of(1e-12);
    let mut best: Option<S> = None;
    for s in samples {
        let t = history[s.snapshot].time;
        if t < start {
            continue;
        }
        let arg = env.front_argument(wp, t, s.r, start);
        let corr = env.correction(t, s.r, start);
        if upper {
            // u - slack ≤ φ(arg + z) + corr  ⇔  z ≤ φ⁻¹(u - slack - corr) - arg
            let need = s.u - slack - corr;
            if need >= S::one() {
                return Ok(None);
            }
            if need > floor {
                let z = wp.inverse(need)? - arg;
                best = Some(best.map_or(z, |b: S| b.min(z)));
            }
        } else {
            // φ(arg + z) - corr ≤ u + slack  ⇔  z ≥ φ⁻¹(u + slack + corr) - arg
            let need = s.u + slack + corr;
            if need <= floor {
                return Ok(None);
            }
            if need < S::one() - floor {
                let z = wp.inverse(need)? - arg;
                best = Some(best.map_or(z, |b: S| b.max(z)));
            }
        }
    }
    Ok(Some(best.unwrap_or(S::zero())))
}

/// Fits `(τ₁, z₁)` then `(τ₂, z₂)` with `δ`, `μ`, `τ` held at their defaults
/// and verifies the pair at tolerance `1e-3`.
///
/// `τᵢ` is taken from `{t_L + k·span/8 : k = 0..4}`, where `t_L` is the first
/// time with `r(t) > L`; the first candidate admitting a finite shift wins and
/// the shift is the tightest one satisfying the envelope with a margin of
/// half the tolerance.
pub fn envelope_fit_and_check<S: Real>(
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
    nl: &Nonlinearity<S>,
    verdict: &Verdict,
) -> Result<EnvelopeReport> {
    let dom = grid.domain();
    if verdict.kind != VerdictKind::Spreading {
        return Err(Error::Precondition(format!(
            "envelopes need a spreading run, verdict is {}",
            verdict.kind
        )));
    }
    if dom.n_dim() < 2 || dom.is_cylinder() {
        return Err(Error::Precondition("envelopes need N ≥ 2 and α > 0".into()));
    }
    let tolerance = S::of(1e-3);
    let mut env = Envelope::centered(nl, dom.l_match(), dom.n_dim());
    env.validate(nl)?;
    let t_l = delayed_radius_time(wp.c, dom.n_dim(), dom.l_match())?;
    let t_first = history
        .iter()
        .map(|f| f.time)
        .find(|&t| t >= t_l)
        .ok_or_else(|| Error::Precondition("history never reaches r(t) > L".into()))?;
    let t_last = history[history.len() - 1].time;
    let span = t_last - t_first;
    let samples = collect(history, grid, t_first)?;
    let candidates: Vec<S> = (0..=4)
        .map(|k| t_first + span * S::of_usize(k) / S::of(8.0))
        .collect();
    let slack = tolerance * S::of(0.5);
    let fit = |upper: bool| -> Result<(S, S)> {
        for &start in &candidates {
            if let Some(z) = tightest_shift(&env, history, &samples, wp, start, upper, slack)? {
                return Ok((start, z));
            }
        }
        Err(Error::convergence(
            "envelope fit",
            format!(
                "no admissible shift for the {} envelope",
                if upper { "upper" } else { "lower" }
            ),
        ))
    };
    let (tau1, z1) = fit(true)?;
    let (tau2, z2) = fit(false)?;
    env.tau1 = tau1;
    env.z1 = z1;
    env.tau2 = tau2;
    env.z2 = z2;
    let check = check_envelope(&env, history, grid, wp)?;
    let passed = check.sup_violation <= tolerance.to64() && check.sub_violation <= tolerance.to64();
    Ok(EnvelopeReport {
        envelope: Envelope {
            tau: env.tau.to64(),
            tau1: env.tau1.to64(),
            tau2: env.tau2.to64(),
            z1: env.z1.to64(),
            z2: env.z2.to64(),
            delta: env.delta.to64(),
            mu: env.mu.to64(),
            l_match: env.l_match.to64(),
            n_dim: env.n_dim,
        },
        check,
        tolerance: tolerance.to64(),
        passed,
    })
}
