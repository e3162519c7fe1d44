//! Line-oriented run configuration.
//!
//! ```text
//! # comments run to the end of the line
//! [model]
//! theta = 0.25
//! geometry.alpha_deg = 30     # dotted keys work anywhere
//! ```
//!
//! Keys outside a section may also use the short names `theta`, `N`, `R`,
//! `alpha_deg`, `L`, `nx`, `neta`, `dt`, `t_end`, `scheme` and `observers`.

use std::fmt::Write as _;

use funnel_core::solver::Scheme;

use crate::CliError;

/// What `run` does after the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfterVerdict {
    Nothing,
    Levelsets,
    Steady,
}

impl AfterVerdict {
    pub fn name(self) -> &'static str {
        match self {
            AfterVerdict::Nothing => "none",
            AfterVerdict::Levelsets => "levelsets",
            AfterVerdict::Steady => "steady",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub theta: f64,
    pub n_dim: usize,
    pub radius: f64,
    pub alpha_deg: f64,
    /// `None` selects the smallest feasible `L` inflated by `l_margin`.
    pub l_match: Option<f64>,
    pub l_margin: f64,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    /// `None` derives the count from `dx`.
    pub nx: Option<usize>,
    pub dx: f64,
    pub neta: usize,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub scheme: Scheme,
    pub observe_interval: f64,
    pub n_start: Option<f64>,
    pub history_interval: f64,
    pub front_at: f64,
    pub eps_spread: f64,
    pub eps_block: f64,
    pub eps_steady: f64,
    pub probe_radius: Option<f64>,
    pub trailing_window: f64,
    pub lambdas: Vec<f64>,
    pub after: AfterVerdict,
    pub steady_r: Option<f64>,
    pub gap_directions: usize,
    pub gap_radius: f64,
    pub wave_half_width: f64,
    pub wave_points: usize,
    pub r_list: Vec<f64>,
    pub alpha_list: Vec<f64>,
    pub workers: usize,
    pub out_dir: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            n_dim: 3,
            radius: 1.0,
            alpha_deg: 0.0,
            l_match: None,
            l_margin: 0.5,
            x_min: None,
            x_max: None,
            nx: None,
            dx: 0.25,
            neta: 32,
            dt: None,
            t_end: None,
            scheme: Scheme::ImexBe,
            observe_interval: 0.5,
            n_start: None,
            history_interval: 1.0,
            front_at: -5.0,
            eps_spread: 0.05,
            eps_block: 0.05,
            eps_steady: 1e-5,
            probe_radius: None,
            trailing_window: 5.0,
            lambdas: vec![0.5],
            after: AfterVerdict::Nothing,
            steady_r: None,
            gap_directions: 16,
            gap_radius: 0.1,
            wave_half_width: 40.0,
            wave_points: 8001,
            r_list: Vec::new(),
            alpha_list: Vec::new(),
            workers: 1,
            out_dir: "out".into(),
            seed: 0,
        }
    }
}

/// Canonical keys in serialization order.
const KEYS: &[&str] = &[
    "model.theta",
    "model.N",
    "geometry.R",
    "geometry.alpha_deg",
    "geometry.L",
    "geometry.L_margin",
    "geometry.x_min",
    "geometry.x_max",
    "grid.nx",
    "grid.dx",
    "grid.neta",
    "time.dt",
    "time.t_end",
    "time.scheme",
    "time.observe_interval",
    "entire.n_start",
    "entire.history_interval",
    "simulate.front_at",
    "classify.eps_spread",
    "classify.eps_block",
    "classify.eps_steady",
    "classify.probe_radius",
    "classify.trailing_window",
    "levelsets.lambdas",
    "run.after",
    "steady.r",
    "steady.gap_directions",
    "steady.gap_radius",
    "wave.half_width",
    "wave.points",
    "sweep.R_list",
    "sweep.alpha_list",
    "sweep.workers",
    "output.dir",
    "output.seed",
];

fn canonical(key: &str) -> Option<&'static str> {
    let alias = match key {
        "theta" => "model.theta",
        "N" | "n_dim" => "model.N",
        "R" => "geometry.R",
        "alpha_deg" | "alpha" => "geometry.alpha_deg",
        "L" => "geometry.L",
        "nx" => "grid.nx",
        "neta" => "grid.neta",
        "dt" => "time.dt",
        "t_end" => "time.t_end",
        "scheme" => "time.scheme",
        "observers" => "time.observe_interval",
        "seed" => "output.seed",
        "workers" => "sweep.workers",
        other => other,
    };
    KEYS.iter().copied().find(|k| *k == alias)
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn real(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "not finite"));
    }
    Ok(x)
}

fn auto_real(key: &str, v: &str) -> Result<Option<f64>, CliError> {
    if v == "auto" {
        Ok(None)
    } else {
        real(key, v).map(Some)
    }
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse()
        .map_err(|_| bad(key, v, "not a nonnegative integer"))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| real(key, p.trim())).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |x| x.to_string())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut seen: Vec<&'static str> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("line {}: unterminated section", n + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let full = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let name = canonical(&full)
                .or_else(|| {
                    if section.is_empty() {
                        None
                    } else {
                        canonical(key)
                    }
                })
                .ok_or_else(|| CliError::Config(format!("line {}: unknown key {full:?}", n + 1)))?;
            if seen.contains(&name) {
                return Err(CliError::Config(format!(
                    "line {}: {name} given twice",
                    n + 1
                )));
            }
            seen.push(name);
            cfg.set(name, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &'static str, v: &str) -> Result<(), CliError> {
        match key {
            "model.theta" => self.theta = real(key, v)?,
            "model.N" => self.n_dim = count(key, v)?,
            "geometry.R" => self.radius = real(key, v)?,
            "geometry.alpha_deg" => self.alpha_deg = real(key, v)?,
            "geometry.L" => self.l_match = auto_real(key, v)?,
            "geometry.L_margin" => self.l_margin = real(key, v)?,
            "geometry.x_min" => self.x_min = auto_real(key, v)?,
            "geometry.x_max" => self.x_max = auto_real(key, v)?,
            "grid.nx" => {
                self.nx = if v == "auto" {
                    None
                } else {
                    Some(count(key, v)?)
                };
            }
            "grid.dx" => self.dx = real(key, v)?,
            "grid.neta" => self.neta = count(key, v)?,
            "time.dt" => self.dt = auto_real(key, v)?,
            "time.t_end" => self.t_end = auto_real(key, v)?,
            "time.scheme" => {
                self.scheme = v
                    .parse()
                    .map_err(|_| bad(key, v, "expected imex-be or explicit-rk2"))?
            }
            "time.observe_interval" => self.observe_interval = real(key, v)?,
            "entire.n_start" => self.n_start = auto_real(key, v)?,
            "entire.history_interval" => self.history_interval = real(key, v)?,
            "simulate.front_at" => self.front_at = real(key, v)?,
            "classify.eps_spread" => self.eps_spread = real(key, v)?,
            "classify.eps_block" => self.eps_block = real(key, v)?,
            "classify.eps_steady" => self.eps_steady = real(key, v)?,
            "classify.probe_radius" => self.probe_radius = auto_real(key, v)?,
            "classify.trailing_window" => self.trailing_window = real(key, v)?,
            "levelsets.lambdas" => self.lambdas = list(key, v)?,
            "run.after" => {
                self.after = match v {
                    "none" => AfterVerdict::Nothing,
                    "levelsets" => AfterVerdict::Levelsets,
                    "steady" => AfterVerdict::Steady,
                    _ => return Err(bad(key, v, "expected none, levelsets or steady")),
                }
            }
            "steady.r" => self.steady_r = auto_real(key, v)?,
            "steady.gap_directions" => self.gap_directions = count(key, v)?,
            "steady.gap_radius" => self.gap_radius = real(key, v)?,
            "wave.half_width" => self.wave_half_width = real(key, v)?,
            "wave.points" => self.wave_points = count(key, v)?,
            "sweep.R_list" => self.r_list = list(key, v)?,
            "sweep.alpha_list" => self.alpha_list = list(key, v)?,
            "sweep.workers" => self.workers = count(key, v)?,
            "output.dir" => self.out_dir = v.to_string(),
            "output.seed" => self.seed = v.parse().map_err(|_| bad(key, v, "not a u64"))?,
            _ => unreachable!("key list and setter agree"),
        }
        Ok(())
    }

    /// Range checks on every key.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |key: &str, why: String| Err(CliError::Config(format!("{key}: {why}")));
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return fail(
                "model.theta",
                format!("{} must lie in (0, 1/2)", self.theta),
            );
        }
        if !(2..=10).contains(&self.n_dim) {
            return fail("model.N", format!("{} must lie in 2..=10", self.n_dim));
        }
        if !(self.radius > 0.0) {
            return fail("geometry.R", format!("{} must be positive", self.radius));
        }
        if !(self.alpha_deg >= 0.0 && self.alpha_deg < 90.0) {
            return fail(
                "geometry.alpha_deg",
                format!("{} must lie in [0, 90)", self.alpha_deg),
            );
        }
        if let Some(l) = self.l_match {
            if !(l > self.radius) {
                return fail("geometry.L", format!("{l} must exceed R = {}", self.radius));
            }
        }
        if !(self.l_margin > 0.0 && self.l_margin <= 1.0) {
            return fail(
                "geometry.L_margin",
                format!("{} must lie in (0, 1]", self.l_margin),
            );
        }
        if let Some(x) = self.x_min {
            if !(x < -1.0) {
                return fail("geometry.x_min", format!("{x} must be below -1"));
            }
        }
        if let Some(x) = self.x_max {
            if !(x > 0.0) {
                return fail("geometry.x_max", format!("{x} must be positive"));
            }
        }
        if let Some(nx) = self.nx {
            if nx < 16 {
                return fail("grid.nx", format!("{nx} is below the minimum 16"));
            }
        }
        if !(self.dx > 0.0) {
            return fail("grid.dx", format!("{} must be positive", self.dx));
        }
        if self.neta < 16 {
            return fail(
                "grid.neta",
                format!("{} is below the minimum 16", self.neta),
            );
        }
        for (key, v) in [
            ("time.dt", self.dt),
            ("time.t_end", self.t_end),
            ("steady.r", self.steady_r),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return fail(key, format!("{v} must be positive"));
                }
            }
        }
        if let Some(r) = self.probe_radius {
            if !(r > 0.0) {
                return fail("classify.probe_radius", format!("{r} must be positive"));
            }
        }
        if let Some(n) = self.n_start {
            if !(n > 0.0) {
                return fail("entire.n_start", format!("{n} must be positive"));
            }
        }
        for (key, v) in [
            ("time.observe_interval", self.observe_interval),
            ("entire.history_interval", self.history_interval),
            ("classify.eps_steady", self.eps_steady),
            ("classify.trailing_window", self.trailing_window),
            ("steady.gap_radius", self.gap_radius),
            ("wave.half_width", self.wave_half_width),
        ] {
            if !(v > 0.0) {
                return fail(key, format!("{v} must be positive"));
            }
        }
        for (key, v) in [
            ("classify.eps_spread", self.eps_spread),
            ("classify.eps_block", self.eps_block),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return fail(key, format!("{v} must lie in (0, 1)"));
            }
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return fail(
                "levelsets.lambdas",
                "levels must be nonempty and lie in (0, 1)".into(),
            );
        }
        if self.wave_points < 9 || self.wave_points.is_multiple_of(2) {
            return fail(
                "wave.points",
                format!("{} must be odd and at least 9", self.wave_points),
            );
        }
        if self.r_list.iter().any(|&r| !(r > 0.0)) {
            return fail("sweep.R_list", "radii must be positive".into());
        }
        if self.alpha_list.iter().any(|&a| !(0.0..90.0).contains(&a)) {
            return fail("sweep.alpha_list", "angles must lie in [0, 90)".into());
        }
        if self.workers == 0 {
            return fail("sweep.workers", "at least one worker".into());
        }
        if self.out_dir.is_empty() {
            return fail("output.dir", "must not be empty".into());
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &key in KEYS {
            let value = match key {
                "model.theta" => self.theta.to_string(),
                "model.N" => self.n_dim.to_string(),
                "geometry.R" => self.radius.to_string(),
                "geometry.alpha_deg" => self.alpha_deg.to_string(),
                "geometry.L" => fmt_opt(self.l_match),
                "geometry.L_margin" => self.l_margin.to_string(),
                "geometry.x_min" => fmt_opt(self.x_min),
                "geometry.x_max" => fmt_opt(self.x_max),
                "grid.nx" => self.nx.map_or_else(|| "auto".into(), |n| n.to_string()),
                "grid.dx" => self.dx.to_string(),
                "grid.neta" => self.neta.to_string(),
                "time.dt" => fmt_opt(self.dt),
                "time.t_end" => fmt_opt(self.t_end),
                "time.scheme" => self.scheme.name().into(),
                "time.observe_interval" => self.observe_interval.to_string(),
                "entire.n_start" => fmt_opt(self.n_start),
                "entire.history_interval" => self.history_interval.to_string(),
                "simulate.front_at" => self.front_at.to_string(),
                "classify.eps_spread" => self.eps_spread.to_string(),
                "classify.eps_block" => self.eps_block.to_string(),
                "classify.eps_steady" => self.eps_steady.to_string(),
                "classify.probe_radius" => fmt_opt(self.probe_radius),
                "classify.trailing_window" => self.trailing_window.to_string(),
                "levelsets.lambdas" => fmt_list(&self.lambdas),
                "run.after" => self.after.name().into(),
                "steady.r" => fmt_opt(self.steady_r),
                "steady.gap_directions" => self.gap_directions.to_string(),
                "steady.gap_radius" => self.gap_radius.to_string(),
                "wave.half_width" => self.wave_half_width.to_string(),
                "wave.points" => self.wave_points.to_string(),
                "sweep.R_list" => fmt_list(&self.r_list),
                "sweep.alpha_list" => fmt_list(&self.alpha_list),
                "sweep.workers" => self.workers.to_string(),
                "output.dir" => self.out_dir.clone(),
                "output.seed" => self.seed.to_string(),
                _ => unreachable!("every key is printed"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
