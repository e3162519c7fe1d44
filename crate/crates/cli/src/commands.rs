//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns the paths it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;

use funnel_core::analysis::{Verdict, VerdictKind};
use funnel_core::entire::EntireRun;
use funnel_core::envelope::envelope_fit_and_check;
use funnel_core::geometry::build_domain;
use funnel_core::solver::{integrate, Field};
use funnel_core::steady::{ball_subsolution, energy_gap_probe, solve_truncated, TruncatedConfig};
use funnel_core::Field64;

use crate::artifacts::{num, OutDir};
use crate::config::AfterVerdict;
use crate::pipeline::{self, require_decided, Setup};
use crate::svg::{self, PlotKind};
use crate::sweep;
use crate::{CliError, Result, RunConfig};

/// Where artifacts go and whether progress is reported on stderr.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: OutDir,
    pub quiet: bool,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>, quiet: bool) -> Self {
        Self {
            out: OutDir::new(out),
            quiet,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

#[derive(Serialize)]
struct WaveSummary {
    theta: f64,
    c: f64,
    mu_star: f64,
    mu_lower: f64,
    residual_max: f64,
}

pub fn wave(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let (_, wp) = pipeline::wave(cfg)?;
    let rows: Vec<Vec<String>> = wp
        .z_grid()
        .iter()
        .zip(wp.phi_values())
        .zip(wp.phiprime_values())
        .map(|((&z, &p), &dp)| vec![num(z), num(p), num(dp)])
        .collect();
    ctx.note(format!("wave: c = {:.10}, mu* = {:.6}", wp.c, wp.mu_star));
    Ok(vec![
        ctx.out
            .csv("wave_profile.csv", &["z", "phi", "phiprime"], &rows)?,
        ctx.out.json(
            "wave.json",
            &WaveSummary {
                theta: wp.theta,
                c: wp.c,
                mu_star: wp.mu_star,
                mu_lower: wp.mu_lower,
                residual_max: wp.residual_max,
            },
        )?,
    ])
}

#[derive(Serialize)]
struct GeomSummary {
    #[serde(rename = "R")]
    radius: f64,
    alpha_deg: f64,
    #[serde(rename = "L")]
    l_match: Option<f64>,
    a0: Option<f64>,
    a1: Option<f64>,
    feasible: bool,
    max_slope_violation: Option<f64>,
    error: Option<String>,
}

/// Wall profile on `[-10, L cos α + 10]`. With `check`, an infeasible
/// geometry is an error after the summary is written.
pub fn geom(cfg: &RunConfig, check: bool, ctx: &Context) -> Result<Vec<PathBuf>> {
    let alpha = cfg.alpha_deg.to_radians();
    let built = pipeline::l_match(cfg).and_then(|l| {
        let x_max = (l * alpha.cos()).max(cfg.radius) + 10.0;
        Ok((
            l,
            build_domain(cfg.n_dim, cfg.radius, alpha, l, -10.0, x_max)?,
        ))
    });
    let mut written = Vec::new();
    match built {
        Ok((l, dom)) => {
            let audit = dom.audit(4000);
            let n = 801;
            let rows: Vec<Vec<String>> = (0..n)
                .map(|k| {
                    let x = dom.x_min() + (dom.x_max() - dom.x_min()) * k as f64 / (n - 1) as f64;
                    vec![num(x), num(dom.h(x)), num(dom.hprime(x))]
                })
                .collect();
            written.push(
                ctx.out
                    .csv("geom_wall.csv", &["x1", "h", "hprime"], &rows)?,
            );
            written.push(ctx.out.json(
                "geom.json",
                &GeomSummary {
                    radius: cfg.radius,
                    alpha_deg: cfg.alpha_deg,
                    l_match: Some(l),
                    a0: Some(dom.a0()),
                    a1: Some(dom.a1()),
                    feasible: audit.passed,
                    max_slope_violation: Some(audit.max_slope_violation),
                    error: None,
                },
            )?);
            if check && !audit.passed {
                return Err(funnel_core::Error::GeometryInfeasible(format!(
                    "wall audit failed: slope violation {:e}, curvature jump {:e}",
                    audit.max_slope_violation, audit.curvature_jump
                ))
                .into());
            }
        }
        Err(e) => {
            written.push(ctx.out.json(
                "geom.json",
                &GeomSummary {
                    radius: cfg.radius,
                    alpha_deg: cfg.alpha_deg,
                    l_match: cfg.l_match,
                    a0: None,
                    a1: None,
                    feasible: false,
                    max_slope_violation: None,
                    error: Some(e.to_string()),
                },
            )?);
            if check {
                return Err(e);
            }
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct SimulateSummary {
    t_end: f64,
    dt: f64,
    scheme: &'static str,
    steps: usize,
    nx: usize,
    neta: usize,
    min: f64,
    max: f64,
}

/// Plain initial-value run from the planar front centred at `simulate.front_at`.
pub fn simulate(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let wp = &setup.wp;
    let u0 = Field::from_fn(&setup.grid, 0.0, |x, _| wp.phi(x - cfg.front_at));
    ctx.note(format!(
        "simulate: {} x {} nodes to t = {:.3}",
        setup.grid.nx(),
        setup.grid.neta(),
        setup.t_end
    ));
    let traj = integrate(
        &setup.grid,
        u0,
        &setup.nl,
        &setup.stepper,
        setup.t_end,
        &mut [],
    )?;
    let field = traj.field;
    let csv = ctx.out.snapshot("field_final.csv", &setup.grid, &field)?;
    let bin = ctx.out.path("field_final.bin");
    let file = std::fs::File::create(&bin).map_err(|e| CliError::io(&bin, e))?;
    funnel_core::snapshot::write_binary(&field, std::io::BufWriter::new(file))?;
    Ok(vec![
        csv,
        bin,
        ctx.out.json(
            "simulate.json",
            &SimulateSummary {
                t_end: setup.t_end,
                dt: setup.stepper.dt,
                scheme: setup.stepper.scheme.name(),
                steps: traj.steps,
                nx: field.nx,
                neta: field.neta,
                min: field.min(),
                max: field.max(),
            },
        )?,
    ])
}

#[derive(Serialize)]
struct EntireSummary {
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "T")]
    t_validity: f64,
    #[serde(rename = "T_prime")]
    t_certified: f64,
    n_start: f64,
    t_end: f64,
    x_min: f64,
    x_max: f64,
    nx: usize,
    neta: usize,
    dt: f64,
    monotonicity_min: f64,
    w_plus_violation: f64,
    w_minus_violation: f64,
    overshoot: f64,
    steps: usize,
    sup_violation: Option<f64>,
    sub_violation: Option<f64>,
    envelope_passed: Option<bool>,
}

fn run_entire(setup: &Setup, ctx: &Context) -> Result<EntireRun<f64>> {
    ctx.note(format!(
        "entire: {} x {} nodes on [{:.2}, {:.2}], t in [{:.2}, {:.2}], dt {}",
        setup.grid.nx(),
        setup.grid.neta(),
        setup.domain.x_min(),
        setup.domain.x_max(),
        -setup.past.n_start,
        setup.t_end,
        setup.stepper.dt
    ));
    setup.entire()
}

fn entire_summary(setup: &Setup, run: &EntireRun<f64>) -> EntireSummary {
    let d = &run.diagnostics;
    EntireSummary {
        m: setup.past.m,
        t_validity: setup.past.t_validity,
        t_certified: setup.past.t_certified,
        n_start: setup.past.n_start,
        t_end: setup.t_end,
        x_min: setup.domain.x_min(),
        x_max: setup.domain.x_max(),
        nx: setup.grid.nx(),
        neta: setup.grid.neta(),
        dt: setup.stepper.dt,
        monotonicity_min: d.monotonicity_min,
        w_plus_violation: d.w_plus_violation,
        w_minus_violation: d.w_minus_violation,
        overshoot: d.overshoot,
        steps: d.steps,
        sup_violation: None,
        sub_violation: None,
        envelope_passed: None,
    }
}

pub fn entire(cfg: &RunConfig, check_envelopes: bool, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let run = run_entire(&setup, ctx)?;
    let mut summary = entire_summary(&setup, &run);
    if check_envelopes {
        let verdict = setup.classify(&run)?;
        let report =
            envelope_fit_and_check(&run.history, &setup.grid, &setup.wp, &setup.nl, &verdict)?;
        summary.sup_violation = Some(report.check.sup_violation);
        summary.sub_violation = Some(report.check.sub_violation);
        summary.envelope_passed = Some(report.passed);
    }
    Ok(vec![
        ctx.out
            .snapshot("field_final.csv", &setup.grid, run.last())?,
        ctx.out.json("entire.json", &summary)?,
    ])
}

pub fn classify(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let run = run_entire(&setup, ctx)?;
    let verdict = setup.classify(&run)?;
    ctx.note(format!("verdict: {}", verdict.kind));
    let written = vec![ctx.out.json("verdict.json", &verdict)?];
    require_decided(&verdict)?;
    Ok(written)
}

#[derive(Serialize)]
struct LevelSummary {
    lambda: f64,
    missing: usize,
    offset_range: Option<f64>,
    offset_drift: Option<f64>,
    offset_max_abs: Option<f64>,
    mean_speed: Option<f64>,
    c: f64,
    error: Option<String>,
}

#[derive(Serialize)]
struct LevelsetsSummary {
    t_end: f64,
    levels: Vec<LevelSummary>,
}

fn level_name(lambda: f64) -> String {
    format!("levels_{lambda}.csv")
}

fn write_levels(
    setup: &Setup,
    run: &EntireRun<f64>,
    lambdas: &[f64],
    svg: Option<&Path>,
    ctx: &Context,
) -> Result<Vec<PathBuf>> {
    let traces = setup.levels(run, lambdas)?;
    let mut written = Vec::new();
    let mut levels = Vec::new();
    for trace in &traces {
        let rows: Vec<Vec<String>> = trace
            .samples
            .iter()
            .map(|s| {
                vec![
                    num(s.t),
                    num(s.angle),
                    num(s.rho_lambda),
                    num(s.r_of_t),
                    num(s.offset),
                ]
            })
            .collect();
        let path = ctx.out.csv(
            &level_name(trace.lambda),
            &["t", "angle", "rho_lambda", "r_of_t", "offset"],
            &rows,
        )?;
        if let (Some(target), true) = (svg, levels.is_empty()) {
            let body = svg::render(&path, PlotKind::Offsets)?;
            std::fs::write(target, body).map_err(|e| CliError::io(target, e))?;
            written.push(target.to_path_buf());
        }
        written.push(path);
        let summary = match setup.late_window(trace) {
            Ok((stats, speed)) => LevelSummary {
                lambda: trace.lambda,
                missing: trace.missing,
                offset_range: Some(stats.range),
                offset_drift: Some(stats.drift),
                offset_max_abs: Some(stats.max_abs),
                mean_speed: Some(speed),
                c: setup.wp.c,
                error: None,
            },
            Err(e) => LevelSummary {
                lambda: trace.lambda,
                missing: trace.missing,
                offset_range: None,
                offset_drift: None,
                offset_max_abs: None,
                mean_speed: None,
                c: setup.wp.c,
                error: Some(e.to_string()),
            },
        };
        levels.push(summary);
    }
    written.push(ctx.out.json(
        "levelsets.json",
        &LevelsetsSummary {
            t_end: setup.t_end,
            levels,
        },
    )?);
    Ok(written)
}

pub fn levelsets(cfg: &RunConfig, svg: Option<&Path>, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let run = run_entire(&setup, ctx)?;
    write_levels(&setup, &run, &cfg.lambdas, svg, ctx)
}

#[derive(Serialize)]
struct SteadySummary {
    outer_radius: f64,
    energy: f64,
    h1_dist_to_w0: f64,
    el_residual: f64,
    iterations: usize,
    arc_deviation: f64,
    arc_max: f64,
    energy_monotone: bool,
    eigenvalue: Option<f64>,
    min_energy_gap: Option<f64>,
}

fn steady_stage(setup: &Setup, ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &setup.cfg;
    let r = cfg.steady_r.unwrap_or(4.0 * setup.domain.l_match());
    ctx.note(format!("steady: truncated problem at r = {r:.4}"));
    let ss = solve_truncated(&setup.grid, &setup.nl, r, &TruncatedConfig::default())?;
    let field = Field {
        nx: ss.nx,
        neta: ss.neta,
        time: 0.0,
        values: ss.values.clone(),
    };
    let eigenvalue = setup.eigenvalue(&field).ok().map(|e| e.eigenvalue);
    let gap = energy_gap_probe(
        &setup.grid,
        &setup.nl,
        r,
        cfg.gap_directions,
        cfg.gap_radius,
        false,
        cfg.seed,
    )
    .ok()
    .map(|g| g.min_gap);
    let energy_monotone = ss.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(vec![
        ctx.out.snapshot("steady_state.csv", &setup.grid, &field)?,
        ctx.out.json(
            "steady.json",
            &SteadySummary {
                outer_radius: ss.outer_radius,
                energy: ss.energy,
                h1_dist_to_w0: ss.h1_dist_to_w0,
                el_residual: ss.el_residual,
                iterations: ss.iterations,
                arc_deviation: ss.arc_deviation,
                arc_max: ss.arc_max,
                energy_monotone,
                eigenvalue,
                min_energy_gap: gap,
            },
        )?,
    ])
}

pub fn steady(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    steady_stage(&Setup::new(cfg)?, ctx)
}

#[derive(Serialize)]
struct BallSummary {
    theta: f64,
    #[serde(rename = "N")]
    n_dim: usize,
    #[serde(rename = "R0")]
    r0: f64,
    peak: f64,
    residual: f64,
}

pub fn ball(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let (nl, _) = pipeline::wave(cfg)?;
    let ball = ball_subsolution(&nl, cfg.n_dim)?;
    ctx.note(format!(
        "ball: R0 = {:.6}, peak {:.6}",
        ball.r0,
        ball.peak()
    ));
    let rows: Vec<Vec<String>> = ball
        .psi
        .iter()
        .zip(&ball.dpsi)
        .enumerate()
        .map(|(k, (&p, &dp))| vec![num(k as f64 * ball.dr), num(p), num(dp)])
        .collect();
    Ok(vec![
        ctx.out
            .csv("ball_profile.csv", &["r", "psi", "dpsi"], &rows)?,
        ctx.out.json(
            "ball.json",
            &BallSummary {
                theta: cfg.theta,
                n_dim: cfg.n_dim,
                r0: ball.r0,
                peak: ball.peak(),
                residual: ball.residual,
            },
        )?,
    ])
}

/// Stability eigenvalue of a stored field on the grid the config describes.
pub fn eig(cfg: &RunConfig, state: &Path, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let file = std::fs::File::open(state).map_err(|e| CliError::io(state, e))?;
    let field: Field64 = funnel_core::snapshot::read_csv(std::io::BufReader::new(file))?;
    field.matches_grid(&setup.grid)?;
    let report = setup.eigenvalue(&field)?;
    ctx.note(format!("eigenvalue: {:.8}", report.eigenvalue));
    Ok(vec![ctx.out.json("eig.json", &report)?])
}

pub fn sweep(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    ctx.note(format!(
        "sweep: {} x {} points on {} workers",
        cfg.r_list.len(),
        cfg.alpha_list.len(),
        cfg.workers
    ));
    let diagram = sweep::sweep(cfg)?;
    sweep::write(&diagram, &ctx.out)?;
    Ok(["phase.csv", "phase.json", "phase.svg"]
        .iter()
        .map(|n| ctx.out.path(n))
        .collect())
}

/// SVG of an artifact; defaults to `<out>/<input stem>.svg`.
pub fn plot(
    input: &Path,
    kind: PlotKind,
    output: Option<&Path>,
    ctx: &Context,
) -> Result<Vec<PathBuf>> {
    let body = svg::render(input, kind)?;
    match output {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| CliError::io(path, e))?;
            Ok(vec![path.to_path_buf()])
        }
        None => {
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
            Ok(vec![ctx.out.text(&format!("{stem}.svg"), &body)?])
        }
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    theta: f64,
    #[serde(rename = "N")]
    n_dim: usize,
    #[serde(rename = "R")]
    radius: f64,
    alpha_deg: f64,
    #[serde(rename = "L")]
    l_match: f64,
    c: f64,
    mu_star: f64,
    verdict: &'a Verdict,
    monotonicity_min: f64,
    w_plus_violation: f64,
    after: &'static str,
}

/// Geometry, wave, entire solution, verdict, then the configured follow-up.
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<Vec<PathBuf>> {
    let setup = Setup::new(cfg)?;
    let entire_run = run_entire(&setup, ctx)?;
    let verdict = setup.classify(&entire_run)?;
    ctx.note(format!("verdict: {}", verdict.kind));
    let mut written = vec![
        ctx.out.text("config.txt", &cfg.to_text())?,
        ctx.out.json(
            "summary.json",
            &RunSummary {
                theta: cfg.theta,
                n_dim: cfg.n_dim,
                radius: cfg.radius,
                alpha_deg: cfg.alpha_deg,
                l_match: setup.domain.l_match(),
                c: setup.wp.c,
                mu_star: setup.wp.mu_star,
                verdict: &verdict,
                monotonicity_min: entire_run.diagnostics.monotonicity_min,
                w_plus_violation: entire_run.diagnostics.w_plus_violation,
                after: cfg.after.name(),
            },
        )?,
        ctx.out
            .snapshot("field_final.csv", &setup.grid, entire_run.last())?,
    ];
    match cfg.after {
        AfterVerdict::Nothing => {}
        AfterVerdict::Levelsets if verdict.kind == VerdictKind::Spreading => {
            written.extend(write_levels(&setup, &entire_run, &cfg.lambdas, None, ctx)?)
        }
        AfterVerdict::Steady if verdict.kind == VerdictKind::Blocked => {
            written.extend(steady_stage(&setup, ctx)?)
        }
        AfterVerdict::Levelsets | AfterVerdict::Steady => ctx.note(format!(
            "skipping {} after a {} verdict",
            cfg.after.name(),
            verdict.kind
        )),
    }
    require_decided(&verdict)?;
    Ok(written)
}
