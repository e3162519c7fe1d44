//! From a [`RunConfig`] to wave, domain, grid and past scheme, plus the
//! run stages shared by the subcommands.

use funnel_core::analysis::{
    classify, classify_horizon, default_ray_angles, mean_speed, offset_stats, track_levels,
    LevelTrace, OffsetStats, ProbeConfig, Verdict,
};
use funnel_core::entire::{
    calibrate_past_scheme, construct_entire, entire_window, CalibrationScan, EntireOptions,
    EntireRun,
};
use funnel_core::geometry::{auto_l, build_domain, build_grid, default_x_max, default_x_min};
use funnel_core::kinetics::{make_cubic, solve_wave};
use funnel_core::solver::StepperConfig;
use funnel_core::steady::{stability_eigenvalue, EigenConfig, EigenReport};
use funnel_core::{
    FunnelDomain64, MappedGrid64, Nonlinearity64, PastScheme64, StepperConfig64, WaveProfile64,
};

use crate::{CliError, Result, RunConfig};

/// Wave and reaction for a config.
pub fn wave(cfg: &RunConfig) -> Result<(Nonlinearity64, WaveProfile64)> {
    let nl = make_cubic(cfg.theta)?;
    let wp = solve_wave(&nl, cfg.wave_half_width, cfg.wave_points)?;
    Ok((nl, wp))
}

/// Matching point: the configured one or the smallest feasible one with margin.
pub fn l_match(cfg: &RunConfig) -> Result<f64> {
    match cfg.l_match {
        Some(l) => Ok(l),
        None => Ok(auto_l(
            cfg.radius,
            cfg.alpha_deg.to_radians(),
            cfg.l_margin,
        )?),
    }
}

/// Everything a run needs, built in dependency order: a provisional domain
/// for calibrating the past scheme, then the window that scheme implies, then
/// the grid.
#[derive(Clone, Debug)]
pub struct Setup {
    pub cfg: RunConfig,
    pub nl: Nonlinearity64,
    pub wp: WaveProfile64,
    pub domain: FunnelDomain64,
    pub grid: MappedGrid64,
    pub past: PastScheme64,
    pub t_end: f64,
    pub stepper: StepperConfig64,
    pub probe: ProbeConfig<f64>,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let (nl, wp) = wave(cfg)?;
        let alpha = cfg.alpha_deg.to_radians();
        let l = l_match(cfg)?;
        let probe = ProbeConfig {
            eps_spread: cfg.eps_spread,
            eps_block: cfg.eps_block,
            eps_steady: cfg.eps_steady,
            radius: cfg.probe_radius,
            trailing_window: cfg.trailing_window,
        };
        let probe_r = cfg.probe_radius.unwrap_or(l + 5.0 / wp.mu_star);
        let t_end = match cfg.t_end {
            Some(t) => t,
            None => classify_horizon(wp.c, cfg.n_dim, probe_r)?,
        };
        let provisional = build_domain(
            cfg.n_dim,
            cfg.radius,
            alpha,
            l,
            default_x_min(wp.mu_lower),
            default_x_max(wp.c, t_end, wp.mu_star, l, alpha),
        )?;
        let mut past = calibrate_past_scheme(&wp, &nl, &provisional, &CalibrationScan::default())?;
        if let Some(n) = cfg.n_start {
            past = past.with_n_start(n)?;
        }
        let (auto_min, auto_max) = entire_window(&wp, past.n_start, t_end, l, alpha);
        let (x_min, x_max) = (cfg.x_min.unwrap_or(auto_min), cfg.x_max.unwrap_or(auto_max));
        let domain = build_domain(cfg.n_dim, cfg.radius, alpha, l, x_min, x_max)?;
        let nx = cfg
            .nx
            .unwrap_or(((x_max - x_min) / cfg.dx).ceil() as usize + 1);
        let grid = build_grid(&domain, nx, cfg.neta)?;
        let mut stepper = StepperConfig::default_for(&grid);
        if let Some(dt) = cfg.dt {
            stepper.dt = dt;
        }
        stepper.scheme = cfg.scheme;
        stepper.observe_interval = cfg.observe_interval;
        stepper.validate(&grid)?;
        Ok(Self {
            cfg: cfg.clone(),
            nl,
            wp,
            domain,
            grid,
            past,
            t_end,
            stepper,
            probe,
        })
    }

    pub fn entire(&self) -> Result<EntireRun<f64>> {
        let opts = EntireOptions {
            history_interval: self.cfg.history_interval,
            history_from: f64::NEG_INFINITY,
        };
        Ok(construct_entire(
            &self.grid,
            &self.wp,
            &self.nl,
            &self.past,
            &self.stepper,
            self.t_end,
            &opts,
        )?)
    }

    pub fn classify(&self, run: &EntireRun<f64>) -> Result<Verdict> {
        Ok(classify(&run.history, &self.grid, &self.wp, &self.probe)?)
    }

    pub fn levels(&self, run: &EntireRun<f64>, lambdas: &[f64]) -> Result<Vec<LevelTrace>> {
        let angles = default_ray_angles(self.domain.alpha());
        Ok(track_levels(
            &run.history,
            &self.grid,
            &self.wp,
            lambdas,
            &angles,
        )?)
    }

    /// Offset statistics and fitted speed over the last half of the run.
    pub fn late_window(&self, trace: &LevelTrace) -> Result<(OffsetStats, f64)> {
        let (lo, hi) = (self.t_end / 2.0, self.t_end);
        Ok((
            offset_stats(trace, lo, hi)?,
            mean_speed(trace, self.wp.c, lo, hi)?,
        ))
    }

    pub fn eigenvalue(&self, u: &funnel_core::Field64) -> Result<EigenReport> {
        Ok(stability_eigenvalue(
            &self.grid,
            u,
            &self.nl,
            &EigenConfig::default(),
        )?)
    }
}

/// Maps an undecided verdict to its exit status.
pub fn require_decided(verdict: &Verdict) -> Result<()> {
    if verdict.kind == funnel_core::analysis::VerdictKind::Undecided {
        Err(CliError::Undecided)
    } else {
        Ok(())
    }
}
