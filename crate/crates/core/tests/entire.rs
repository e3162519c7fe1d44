use funnel_core::entire::{
    calibrate_past_scheme, construct_entire, entire_window, eval_w_minus, eval_w_plus,
    initial_column, initial_field, sample_subsolution_residual, subsolution_residual,
    CalibrationScan, EntireOptions, PastScheme,
};
use funnel_core::envelope::{mu_bound, vartheta, vartheta_rate};
use funnel_core::geometry::{build_domain, build_grid, default_x_max, default_x_min};
use funnel_core::kinetics::{make_cubic, solve_wave};
use funnel_core::solver::StepperConfig;
use funnel_core::{Error, FunnelDomain64, Nonlinearity64, PastScheme64, WaveProfile64};
use proptest::prelude::*;

fn setup() -> (Nonlinearity64, WaveProfile64) {
    let nl = make_cubic(0.25).unwrap();
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    (nl, wp)
}

fn cylinder_domain(wp: &WaveProfile64) -> FunnelDomain64 {
    build_domain(
        3,
        1.0,
        0.0,
        2.0,
        default_x_min(wp.mu_lower),
        default_x_max(wp.c, 10.0, wp.mu_star, 2.0, 0.0),
    )
    .unwrap()
}

fn calibrated(nl: &Nonlinearity64, wp: &WaveProfile64) -> PastScheme64 {
    calibrate_past_scheme(wp, nl, &cylinder_domain(wp), &CalibrationScan::default()).unwrap()
}

#[test]
fn subsolution_vanishes_ahead_of_origin_and_fills_behind() {
    let (_, wp) = setup();
    let ps = PastScheme::new(&wp, 0.5, None).unwrap();
    let t = ps.t_certified - 5.0;
    for x in [0.0, 0.5, 3.0, 100.0] {
        assert_eq!(eval_w_minus(t, x, 0.0, &wp, &ps).unwrap(), 0.0);
    }
    assert!(1.0 - eval_w_minus(t, -200.0, 0.0, &wp, &ps).unwrap() < 1e-10);
    for k in 1..400 {
        let x = -0.25 * k as f64;
        let lower = eval_w_minus(t, x, 0.3, &wp, &ps).unwrap();
        assert!(
            lower >= -1e-15 && lower <= eval_w_plus(t, x, &wp) + 1e-15,
            "x {x}"
        );
    }
}

#[test]
fn subsolution_is_refused_past_certified_horizon() {
    let (_, wp) = setup();
    let ps = PastScheme::new(&wp, 0.5, None).unwrap();
    assert!(matches!(
        eval_w_minus(ps.t_certified + 1.0, -1.0, 0.0, &wp, &ps),
        Err(Error::OutOfValidity(_))
    ));
    assert!(PastScheme::new(&wp, 0.0, None).is_err());
    assert!(ps.clone().with_n_start(-ps.t_certified - 1.0).is_err());
    assert!(ps.with_n_start(50.0).is_ok());
}

#[test]
fn horizon_formula() {
    let (_, wp) = setup();
    let m = 1.448;
    let ps = PastScheme::new(&wp, m, None).unwrap();
    let expected = (wp.c / (wp.c + m)).ln() / (wp.mu_star * wp.c);
    assert!((ps.t_validity - expected).abs() < 1e-12);
    // at T the shift blows up: M e^{μ* c T} = c²/(c + M) < c
    assert!(ps.xi(ps.t_validity).is_finite());
    assert!(PastScheme::new(&wp, m, Some(0.0)).unwrap().t_certified <= ps.t_validity);
}

#[test]
fn residual_matches_finite_differences() {
    // ∂_t w - ∂²_x w - f(w): w⁻ depends on x₁ only, so the Laplacian is ∂²_x.
    let (nl, wp) = setup();
    let ps = PastScheme::new(&wp, 0.4, None).unwrap();
    let (dt, dx) = (1e-4, 1e-3);
    let w = |t: f64, x: f64| eval_w_minus(t, x, 0.0, &wp, &ps).unwrap();
    for t in [
        ps.t_certified - 1.0,
        ps.t_certified - 10.0,
        ps.t_certified - 30.0,
    ] {
        for k in 1..60 {
            let x = -0.5 * k as f64;
            let dudt = (w(t + dt, x) - w(t - dt, x)) / (2.0 * dt);
            let uxx = (w(t, x + dx) - 2.0 * w(t, x) + w(t, x - dx)) / (dx * dx);
            let oracle = dudt - uxx - nl.f(w(t, x));
            let got = subsolution_residual(t, x, &wp, &nl, &ps);
            assert!(
                (got - oracle).abs() < 1e-4,
                "t {t}, x {x}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn calibration_certifies_the_subsolution() {
    let (nl, wp) = setup();
    let ps = calibrated(&nl, &wp);
    assert!(ps.certificate_residual <= 1e-6);
    assert!(ps.t_certified <= ps.t_validity);
    assert!((ps.m - 1.448).abs() < 0.01, "M = {}", ps.m);
    assert_eq!(ps.n_start, 20.0);
    // denser resample on an independent grid
    let dense = sample_subsolution_residual(&wp, &nl, &ps, -30.0, 601, 997);
    assert!(dense <= 1e-6, "dense residual {dense:e}");
}

#[test]
fn initial_data_is_the_sampled_supremum() {
    let (nl, wp) = setup();
    let ps = calibrated(&nl, &wp);
    let t_end = -ps.n_start;
    let span = 40.0 / wp.c;
    for k in 0..200 {
        let x = -60.0 + 0.3 * k as f64;
        let oracle = (0..=4096)
            .map(|s| t_end - span + span * s as f64 / 4096.0)
            .map(|s| eval_w_minus(s, x, 0.0, &wp, &ps).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let got = initial_column(x, &wp, &ps);
        assert!(
            got <= oracle + 1e-12 && oracle - got < 1e-3,
            "x {x}: {got} vs {oracle}"
        );
        assert!(got >= eval_w_minus(t_end, x, 0.0, &wp, &ps).unwrap());
        assert!(got <= eval_w_plus(t_end, x, &wp) + 1e-12);
    }
}

#[test]
fn window_covers_the_front_history() {
    let (_, wp) = setup();
    let (lo, hi) = entire_window(&wp, 30.0, 100.0, 2.0, 0.3);
    assert!(lo <= -30.0 * wp.c - 24.0 / wp.mu_lower);
    assert!(hi >= 100.0 * wp.c + 20.0 / wp.mu_star + 2.0 * 0.3f64.cos());
}

#[test]
fn vartheta_is_slow() {
    assert_eq!(vartheta(0.0), 0.0);
    // ϑ' behaves like √t at the origin, so the difference quotient starts at t = 0.25
    for k in 1..400 {
        let t = 0.25 * k as f64;
        let h = 1e-6;
        let fd = (vartheta(t + h) - vartheta(t - h)) / (2.0 * h);
        assert!((vartheta_rate(t) - fd).abs() < 1e-4, "t {t}");
        assert!(vartheta_rate(t) < 1.0);
    }
    let nl = make_cubic(0.25).unwrap();
    assert!((mu_bound(&nl) - 0.125f64.sqrt()).abs() < 1e-12);
}

#[test]
fn cylinder_run_stays_between_barriers() {
    let (nl, wp) = setup();
    let ps = calibrated(&nl, &wp);
    let t_target = 10.0;
    let (lo, hi) = entire_window(&wp, ps.n_start, t_target, 2.0, 0.0);
    let dom = build_domain(3, 1.0, 0.0, 2.0, lo, hi).unwrap();
    let nx = ((hi - lo) / 0.25).ceil() as usize + 1;
    let grid = build_grid(&dom, nx, 16).unwrap();
    let mut cfg = StepperConfig::default_for(&grid);
    cfg.dt = 0.025;
    let u0 = initial_field(&grid, &wp, &ps);
    assert_eq!(u0.time, -ps.n_start);
    let opts = EntireOptions {
        history_interval: 5.0,
        history_from: 0.0,
    };
    let run = construct_entire(&grid, &wp, &nl, &ps, &cfg, t_target, &opts).unwrap();
    let d = &run.diagnostics;
    assert_eq!(run.last().time, t_target);
    assert_eq!(run.history.len(), 3);
    assert!(
        d.monotonicity_min >= -1e-8,
        "monotonicity {:e}",
        d.monotonicity_min
    );
    assert!(d.w_plus_violation <= 1e-5, "w+ {:e}", d.w_plus_violation);
    assert!(d.w_minus_violation <= 1e-5, "w- {:e}", d.w_minus_violation);
    assert!(d.overshoot <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_increases(m in 0.01f64..3.0, back in 0.0f64..60.0) {
        let (_, wp) = setup_cached();
        let ps = PastScheme::new(wp, m, None).unwrap();
        let t = ps.t_certified - back;
        prop_assert!(ps.xi(t) > 0.0 && ps.xi_rate(t) > 0.0);
        let h = 1e-5;
        let fd = (ps.xi(t) - ps.xi(t - h)) / h;
        prop_assert!((fd - ps.xi_rate(t)).abs() <= 1e-4 * (1.0 + fd.abs()));
    }
}

fn setup_cached() -> &'static (Nonlinearity64, WaveProfile64) {
    static CELL: std::sync::OnceLock<(Nonlinearity64, WaveProfile64)> = std::sync::OnceLock::new();
    CELL.get_or_init(setup)
}
