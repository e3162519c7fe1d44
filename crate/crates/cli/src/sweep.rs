//! Parameter sweeps over `(R, α)` and the resulting phase diagram.

use rayon::prelude::*;
use serde::Serialize;

use funnel_core::analysis::VerdictKind;

use crate::artifacts::{num, OutDir};
use crate::pipeline::Setup;
use crate::{CliError, Result, RunConfig};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PhasePoint {
    #[serde(rename = "R")]
    pub radius: f64,
    pub alpha_deg: f64,
    pub verdict: VerdictKind,
    /// Fitted speed of the 0.5 level over the last half of the run.
    pub mean_speed: f64,
    /// Largest far-probe value at the final time.
    pub far_field_max: f64,
    pub eigenvalue: f64,
    /// Set when the run failed; the verdict is then `Undecided`.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AngleColumn {
    pub alpha_deg: f64,
    /// Verdict changes along increasing `R`, undecided points skipped.
    pub transitions: usize,
    /// No spreading point lies below a blocked one.
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct OpennessReport {
    /// Spreading points whose decided lattice neighbours are all blocked.
    pub isolated_spreading: Vec<(f64, f64)>,
    pub columns: Vec<AngleColumn>,
    /// Monotone patterns in `R` are an empirical expectation, not a guarantee.
    pub note: &'static str,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PhaseDiagram {
    pub points: Vec<PhasePoint>,
    pub openness: OpennessReport,
}

/// One point of the sweep; failures are recorded, not propagated.
pub fn run_point(base: &RunConfig, radius: f64, alpha_deg: f64) -> PhasePoint {
    let mut cfg = base.clone();
    cfg.radius = radius;
    cfg.alpha_deg = alpha_deg;
    cfg.l_match = None;
    let failed = |e: CliError| PhasePoint {
        radius,
        alpha_deg,
        verdict: VerdictKind::Undecided,
        mean_speed: f64::NAN,
        far_field_max: f64::NAN,
        eigenvalue: f64::NAN,
        error: Some(e.to_string()),
    };
    let attempt = || -> Result<PhasePoint> {
        let setup = Setup::new(&cfg)?;
        let run = setup.entire()?;
        let verdict = setup.classify(&run)?;
        let mean_speed = if verdict.kind == VerdictKind::Spreading {
            setup
                .levels(&run, &[0.5])
                .and_then(|traces| setup.late_window(&traces[0]))
                .map_or(f64::NAN, |(_, speed)| speed)
        } else {
            f64::NAN
        };
        let eigenvalue = setup
            .eigenvalue(run.last())
            .map_or(f64::NAN, |e| e.eigenvalue);
        Ok(PhasePoint {
            radius,
            alpha_deg,
            verdict: verdict.kind,
            mean_speed,
            far_field_max: verdict
                .probe_values
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            eigenvalue,
            error: None,
        })
    };
    attempt().unwrap_or_else(failed)
}

fn openness(points: &[PhasePoint], radii: &[f64], angles: &[f64]) -> OpennessReport {
    let at = |i: usize, j: usize| {
        points
            .iter()
            .find(|p| p.radius == radii[i] && p.alpha_deg == angles[j])
            .map(|p| p.verdict)
    };
    let mut isolated = Vec::new();
    for i in 0..radii.len() {
        for j in 0..angles.len() {
            if at(i, j) != Some(VerdictKind::Spreading) {
                continue;
            }
            let mut neighbours = Vec::new();
            if i > 0 {
                neighbours.push(at(i - 1, j));
            }
            if i + 1 < radii.len() {
                neighbours.push(at(i + 1, j));
            }
            if j > 0 {
                neighbours.push(at(i, j - 1));
            }
            if j + 1 < angles.len() {
                neighbours.push(at(i, j + 1));
            }
            let decided: Vec<VerdictKind> = neighbours
                .into_iter()
                .flatten()
                .filter(|&v| v != VerdictKind::Undecided)
                .collect();
            if !decided.is_empty() && decided.iter().all(|&v| v == VerdictKind::Blocked) {
                isolated.push((radii[i], angles[j]));
            }
        }
    }
    let columns = (0..angles.len())
        .map(|j| {
            let seq: Vec<VerdictKind> = (0..radii.len())
                .filter_map(|i| at(i, j))
                .filter(|&v| v != VerdictKind::Undecided)
                .collect();
            let transitions = seq.windows(2).filter(|w| w[0] != w[1]).count();
            let monotone = !seq
                .windows(2)
                .any(|w| w[0] == VerdictKind::Spreading && w[1] == VerdictKind::Blocked);
            AngleColumn {
                alpha_deg: angles[j],
                transitions,
                monotone,
            }
        })
        .collect();
    OpennessReport {
        isolated_spreading: isolated,
        columns,
        note: "monotone blocked-to-spreading order in R is an empirical expectation",
    }
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Runs every `(R, α)` pair of the config on `cfg.workers` threads.
pub fn sweep(cfg: &RunConfig) -> Result<PhaseDiagram> {
    cfg.validate()?;
    let (radii, angles) = (sorted_unique(&cfg.r_list), sorted_unique(&cfg.alpha_list));
    if radii.is_empty() || angles.is_empty() {
        return Err(CliError::Config(
            "sweep.R_list and sweep.alpha_list must be nonempty".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = cfg
        .r_list
        .iter()
        .flat_map(|&r| cfg.alpha_list.iter().map(move |&a| (r, a)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let mut points: Vec<PhasePoint> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(r, a)| run_point(cfg, r, a))
            .collect()
    });
    points.sort_by(|p, q| {
        p.radius
            .total_cmp(&q.radius)
            .then(p.alpha_deg.total_cmp(&q.alpha_deg))
    });
    points.dedup_by(|p, q| p.radius == q.radius && p.alpha_deg == q.alpha_deg);
    let openness = openness(&points, &radii, &angles);
    Ok(PhaseDiagram { points, openness })
}

pub const PHASE_COLUMNS: [&str; 5] = ["R", "alpha_deg", "verdict", "mean_speed", "eigenvalue"];

pub fn phase_rows(diagram: &PhaseDiagram) -> Vec<Vec<String>> {
    diagram
        .points
        .iter()
        .map(|p| {
            vec![
                num(p.radius),
                num(p.alpha_deg),
                p.verdict.name().to_string(),
                num(p.mean_speed),
                num(p.eigenvalue),
            ]
        })
        .collect()
}

/// `phase.csv`, `phase.json` and `phase.svg`.
pub fn write(diagram: &PhaseDiagram, out: &OutDir) -> Result<()> {
    let csv = out.csv("phase.csv", &PHASE_COLUMNS, &phase_rows(diagram))?;
    out.json("phase.json", diagram)?;
    let svg = crate::svg::render(&csv, crate::svg::PlotKind::Phase)?;
    out.text("phase.svg", &svg)?;
    Ok(())
}
