//! Post-processing of run histories: spreading/blocking verdicts, level-set
//! tracking against the logarithmically delayed radius, mean speed and local
//! planar-profile checks.

use serde::Serialize;

use crate::geometry::MappedGrid;
use crate::kinetics::{Nonlinearity, WaveProfile};
use crate::numerics::{bisect_predicate, fit_line};
use crate::solver::Field;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Blocked,
    Spreading,
    Undecided,
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            VerdictKind::Blocked => "blocked",
            VerdictKind::Spreading => "spreading",
            VerdictKind::Undecided => "undecided",
        }
    }
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds and probe placement for [`classify`].
#[derive(Clone, Debug)]
pub struct ProbeConfig<S> {
    pub eps_spread: S,
    pub eps_block: S,
    pub eps_steady: S,
    /// Probe distance from the origin; `None` means `L + 5/μ*`.
    pub radius: Option<S>,
    /// Width of the trailing time window used for `‖u_t‖∞`.
    pub trailing_window: S,
}

impl<S: Real> Default for ProbeConfig<S> {
    fn default() -> Self {
        Self {
            eps_spread: S::of(0.05),
            eps_block: S::of(0.05),
            eps_steady: S::of(1e-5),
            radius: None,
            trailing_window: S::of(5.0),
        }
    }
}

impl<S: Real> ProbeConfig<S> {
    pub fn probe_radius(&self, grid: &MappedGrid<S>, wp: &WaveProfile<S>) -> S {
        self.radius
            .unwrap_or_else(|| grid.domain().l_match() + S::of(5.0) / wp.mu_star)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// `(x₁, ρ)` of each far probe.
    pub probe_points: Vec<(f64, f64)>,
    pub probe_values: Vec<f64>,
    /// `max ‖u(t_k) - u(t_{k-1})‖∞ / (t_k - t_{k-1})` over the trailing window.
    pub steady_residual: f64,
    pub time_reached: f64,
}

/// Ray angles from the `x₁`-axis: 9 values uniform in `[0, α - 5°]`, or just
/// the axis when the cone is narrower than that.
pub fn default_ray_angles<S: Real>(alpha: S) -> Vec<S> {
    let top = alpha - S::of(5.0f64.to_radians());
    if top <= S::zero() {
        return vec![S::zero()];
    }
    (0..9).map(|k| top * S::of_usize(k) / S::of(8.0)).collect()
}

/// Far probes at the given distance from the origin along the default rays.
pub fn probe_points<S: Real>(grid: &MappedGrid<S>, radius: S) -> Vec<(S, S)> {
    default_ray_angles(grid.domain().alpha())
        .into_iter()
        .map(|a| (radius * a.cos(), radius * a.sin()))
        .collect()
}

/// Delayed front radius `r(t) = ct - ((N-1)/c) ln t`.
pub fn delayed_radius<S: Real>(c: S, n_dim: usize, t: S) -> S {
    c * t - S::of_usize(n_dim - 1) / c * t.ln()
}

/// First time on the increasing branch of `r` with `r(t) ≥ level`.
pub fn delayed_radius_time<S: Real>(c: S, n_dim: usize, level: S) -> Result<S> {
    let turn = S::of_usize(n_dim - 1) / (c * c);
    let lo = turn.max(S::of(1e-9));
    if delayed_radius(c, n_dim, lo) >= level {
        return Ok(lo);
    }
    let mut hi = lo + (level.abs() + S::one()) / c;
    while delayed_radius(c, n_dim, hi) < level {
        hi = hi + hi;
    }
    let (_, hi) = bisect_predicate(lo, hi, 200, S::of(1e-13), |t| {
        delayed_radius(c, n_dim, t) >= level
    });
    Ok(hi)
}

/// Horizon needed by [`classify`]: the front must pass the probes by `10/c`,
/// both linearly and with the logarithmic delay.
pub fn classify_horizon<S: Real>(c: S, n_dim: usize, probe_radius: S) -> Result<S> {
    let target = probe_radius + S::of(10.0) / c;
    Ok((target / c).max(delayed_radius_time(c, n_dim, target)?))
}

fn trailing_rate<S: Real>(history: &[Field<S>], window: S) -> f64 {
    let n = history.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let t_last = history[n - 1].time;
    let mut worst = 0.0f64;
    let mut k = n - 1;
    loop {
        let (a, b) = (&history[k - 1], &history[k]);
        let dt = (b.time - a.time).to64();
        if dt > 0.0 {
            let jump = a
                .values
                .iter()
                .zip(&b.values)
                .map(|(&p, &q)| (q - p).abs().to64())
                .fold(0.0, f64::max);
            worst = worst.max(jump / dt);
        }
        k -= 1;
        if k == 0 || t_last - history[k].time >= window {
            break;
        }
    }
    worst
}

/// Verdict from the far probes of the terminal field and the trailing `‖u_t‖∞`.
pub fn classify<S: Real>(
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
    cfg: &ProbeConfig<S>,
) -> Result<Verdict> {
    let last = history
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty history".into()))?;
    last.matches_grid(grid)?;
    let radius = cfg.probe_radius(grid, wp);
    let dom = grid.domain();
    let needed = classify_horizon(wp.c, dom.n_dim(), radius)?;
    if last.time < needed {
        return Err(Error::Precondition(format!(
            "history ends at t = {} but the probes at distance {} need t ≥ {}",
            last.time, radius, needed
        )));
    }
    let points = probe_points(grid, radius);
    let mut values = Vec::with_capacity(points.len());
    for &(x1, rho) in &points {
        let v = grid.interpolate(&last.values, x1, rho).ok_or_else(|| {
            Error::InvalidParameter(format!("probe ({x1}, {rho}) lies outside the grid"))
        })?;
        values.push(v.to64());
    }
    let steady = trailing_rate(history, cfg.trailing_window);
    let kind = if values.iter().all(|&v| v >= 1.0 - cfg.eps_spread.to64()) {
        VerdictKind::Spreading
    } else if values.iter().all(|&v| v <= cfg.eps_block.to64()) && steady <= cfg.eps_steady.to64() {
        VerdictKind::Blocked
    } else {
        VerdictKind::Undecided
    };
    Ok(Verdict {
        kind,
        probe_points: points.iter().map(|&(a, b)| (a.to64(), b.to64())).collect(),
        probe_values: values,
        steady_residual: steady,
        time_reached: last.time.to64(),
    })
}

/// `max |Δu + f(u)|` over nodes with `|x| ≥ r_min`.
pub fn steady_residual<S: Real>(
    grid: &MappedGrid<S>,
    u: &Field<S>,
    nl: &Nonlinearity<S>,
    r_min: S,
) -> Result<S> {
    u.matches_grid(grid)?;
    let mut lap = vec![S::zero(); grid.len()];
    grid.apply(&u.values, &mut lap);
    let mut worst = S::zero();
    for i in 0..grid.nx() {
        let x1 = grid.x_nodes()[i];
        for j in 0..grid.neta() {
            let rho = grid.rho(i, j);
            if (x1 * x1 + rho * rho).sqrt() < r_min {
                continue;
            }
            let k = grid.index(i, j);
            worst = worst.max((lap[k] + nl.f(u.values[k])).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LevelSample {
    pub t: f64,
    /// Polar angle of the ray from the `x₁`-axis, in radians.
    pub angle: f64,
    pub rho_lambda: f64,
    pub r_of_t: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelTrace {
    pub lambda: f64,
    pub samples: Vec<LevelSample>,
    /// Ray-time pairs where the level was not bracketed.
    pub missing: usize,
}

impl LevelTrace {
    /// Offsets `e(t)` averaged over rays, in time order.
    pub fn mean_offsets(&self) -> Vec<(f64, f64)> {
        self.mean_by_time(|s| s.offset)
    }

    /// Radii `ρ_λ(t)` averaged over rays, in time order.
    pub fn mean_radii(&self) -> Vec<(f64, f64)> {
        self.mean_by_time(|s| s.rho_lambda)
    }

    fn mean_by_time(&self, pick: impl Fn(&LevelSample) -> f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for s in &self.samples {
            match out.last_mut() {
                Some(last) if last.0 == s.t => {
                    last.1 += pick(s);
                    last.2 += 1;
                }
                _ => out.push((s.t, pick(s), 1)),
            }
        }
        out.into_iter()
            .map(|(t, sum, n)| (t, sum / n as f64))
            .collect()
    }
}

const RAY_STEP: f64 = 0.05;

/// Outermost radius along the ray where `u` drops below `level`, by linear
/// interpolation between ray samples spaced `0.05` apart from `r_start`.
pub fn ray_crossing<S: Real>(
    grid: &MappedGrid<S>,
    u: &[S],
    angle: S,
    r_start: S,
    level: S,
) -> Option<S> {
    let (ca, sa) = (angle.cos(), angle.sin());
    let step = S::of(RAY_STEP);
    let mut samples = Vec::new();
    let mut r = r_start;
    while let Some(v) = grid.interpolate(u, r * ca, r * sa) {
        samples.push((r, v));
        r += step;
    }
    let k = samples.iter().rposition(|&(_, v)| v >= level)?;
    let &(r0, v0) = samples.get(k)?;
    let &(r1, v1) = samples.get(k + 1)?;
    Some(r0 + (v0 - level) / (v0 - v1) * (r1 - r0))
}

/// Level-set radii along rays for every snapshot with `r(t) > L`.
pub fn track_levels<S: Real>(
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    wp: &WaveProfile<S>,
    lambdas: &[S],
    angles: &[S],
) -> Result<Vec<LevelTrace>> {
    let dom = grid.domain();
    let n_dim = dom.n_dim();
    let l_match = dom.l_match();
    let t0 = delayed_radius_time(wp.c, n_dim, l_match)?;
    let mut traces = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda > S::zero() && lambda < S::one()) {
            return Err(Error::InvalidParameter(format!(
                "level {lambda} must lie in (0, 1)"
            )));
        }
        let mut trace = LevelTrace {
            lambda: lambda.to64(),
            samples: Vec::new(),
            missing: 0,
        };
        for field in history.iter().filter(|f| f.time > t0) {
            field.matches_grid(grid)?;
            let r_t = delayed_radius(wp.c, n_dim, field.time);
            for &angle in angles {
                match ray_crossing(grid, &field.values, angle, l_match, lambda) {
                    Some(rho) => trace.samples.push(LevelSample {
                        t: field.time.to64(),
                        angle: angle.to64(),
                        rho_lambda: rho.to64(),
                        r_of_t: r_t.to64(),
                        offset: (rho - r_t).to64(),
                    }),
                    None => trace.missing += 1,
                }
            }
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// Least-squares slope of the ray-averaged radius over `[t_lo, t_hi]`.
pub fn mean_speed(trace: &LevelTrace, c: f64, t_lo: f64, t_hi: f64) -> Result<f64> {
    if t_hi - t_lo < 20.0 / c {
        return Err(Error::FitWindow(format!(
            "window [{t_lo}, {t_hi}] shorter than 20/c = {}",
            20.0 / c
        )));
    }
    let pts: Vec<(f64, f64)> = trace
        .mean_radii()
        .into_iter()
        .filter(|&(t, _)| t >= t_lo && t <= t_hi)
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitWindow(format!(
            "only {} level-set times in [{t_lo}, {t_hi}]",
            pts.len()
        )));
    }
    let (ts, rs): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(fit_line(&ts, &rs)?.0)
}

/// Range and end-to-end drift of the ray-averaged offset over `[t_lo, t_hi]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OffsetStats {
    pub range: f64,
    /// Last minus first offset.
    pub drift: f64,
    pub max_abs: f64,
    pub samples: usize,
}

pub fn offset_stats(trace: &LevelTrace, t_lo: f64, t_hi: f64) -> Result<OffsetStats> {
    let e: Vec<f64> = trace
        .mean_offsets()
        .into_iter()
        .filter(|&(t, _)| t >= t_lo && t <= t_hi)
        .map(|(_, e)| e)
        .collect();
    if e.len() < 2 {
        return Err(Error::FitWindow(format!(
            "fewer than two offsets in [{t_lo}, {t_hi}]"
        )));
    }
    let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OffsetStats {
        range: max - min,
        drift: e[e.len() - 1] - e[0],
        max_abs: max.abs().max(min.abs()),
        samples: e.len(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileSample {
    pub t: f64,
    pub angle: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileReport {
    pub samples: Vec<ProfileSample>,
    pub skipped: usize,
    pub max_deviation: f64,
}

impl ProfileReport {
    /// Largest deviation per sampled time, in time order.
    pub fn by_time(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in &self.samples {
            match out.last_mut() {
                Some(last) if last.0 == s.t => last.1 = last.1.max(s.deviation),
                _ => out.push((s.t, s.deviation)),
            }
        }
        out
    }
}

/// Compares `u` along each ray through the level-set point with the planar
/// profile `φ(s + φ⁻¹(λ))` on `s ∈ [-width/2, width/2]`.
///
/// Samples whose window leaves the grid, or comes closer than `width/2` to
/// the wall, are skipped.
#[allow(clippy::too_many_arguments)]
pub fn local_profile_check<S: Real>(
    history: &[Field<S>],
    grid: &MappedGrid<S>,
    trace: &LevelTrace,
    wp: &WaveProfile<S>,
    sample_times: &[f64],
    width: S,
) -> Result<ProfileReport> {
    let lambda = S::of(trace.lambda);
    let center = wp.inverse(lambda)?;
    let dom = grid.domain();
    let half = width * S::of(0.5);
    let points = 41usize;
    let mut report = ProfileReport {
        samples: Vec::new(),
        skipped: 0,
        max_deviation: 0.0,
    };
    for &want in sample_times {
        let field = history
            .iter()
            .min_by(|a, b| {
                let da = (a.time.to64() - want).abs();
                let db = (b.time.to64() - want).abs();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::InvalidParameter("empty history".into()))?;
        let t = field.time.to64();
        for s in trace.samples.iter().filter(|s| s.t == t) {
            let angle = S::of(s.angle);
            let (ca, sa) = (angle.cos(), angle.sin());
            let rho = S::of(s.rho_lambda);
            let mut worst = S::zero();
            let mut ok = true;
            for k in 0..points {
                let off = -half + width * S::of_usize(k) / S::of_usize(points - 1);
                let (x1, r) = ((rho + off) * ca, (rho + off) * sa);
                let wall_gap = (dom.h(x1) - r) * dom.alpha().cos();
                if wall_gap < half {
                    ok = false;
                    break;
                }
                match grid.interpolate(&field.values, x1, r) {
                    Some(v) => worst = worst.max((v - wp.phi(off + center)).abs()),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                report.max_deviation = report.max_deviation.max(worst.to64());
                report.samples.push(ProfileSample {
                    t,
                    angle: s.angle,
                    deviation: worst.to64(),
                });
            } else {
                report.skipped += 1;
            }
        }
    }
    Ok(report)
}
