use funnel_core::analysis::{
    classify, classify_horizon, default_ray_angles, delayed_radius, delayed_radius_time,
    local_profile_check, mean_speed, offset_stats, probe_points, ray_crossing, steady_residual,
    track_levels, ProbeConfig, VerdictKind,
};
use funnel_core::geometry::{auto_l, build_domain, build_grid};
use funnel_core::kinetics::{make_cubic, solve_wave};
use funnel_core::solver::Field;
use funnel_core::{Error, Field64, MappedGrid64, Nonlinearity64, WaveProfile64};

const N_DIM: usize = 3;

struct Fixture {
    nl: Nonlinearity64,
    wp: WaveProfile64,
    grid: MappedGrid64,
    angles: Vec<f64>,
}

fn fixture() -> Fixture {
    let nl = make_cubic(0.25).unwrap();
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    let alpha = 30f64.to_radians();
    let l = auto_l(1.0, alpha, 0.5).unwrap();
    let dom = build_domain(N_DIM, 1.0, alpha, l, -10.0, 60.0).unwrap();
    let grid = build_grid(&dom, 281, 64).unwrap();
    Fixture {
        nl,
        wp,
        grid,
        angles: default_ray_angles(alpha),
    }
}

/// Snapshots of `u(t, x) = φ(|x| - radius(t))` at the given times.
fn spherical(fx: &Fixture, times: &[f64], radius: impl Fn(f64) -> f64) -> Vec<Field64> {
    times
        .iter()
        .map(|&t| {
            let front = radius(t);
            Field::from_fn(&fx.grid, t, |x, r| {
                fx.wp.phi((x * x + r * r).sqrt() - front)
            })
        })
        .collect()
}

fn times(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

/// Least-squares slope, written out independently of the library fit.
fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mt, mr) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mr)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    cov / var
}

#[test]
fn delayed_radius_inverts() {
    let c: f64 = 0.35;
    for level in [1.0f64, 5.0, 30.0, 100.0] {
        let t = delayed_radius_time(c, N_DIM, level).unwrap();
        assert!((delayed_radius(c, N_DIM, t) - level).abs() < 1e-9);
        assert!(t >= 2.0 / (c * c));
    }
    let horizon = classify_horizon(c, N_DIM, 9.0).unwrap();
    assert!(delayed_radius(c, N_DIM, horizon) >= 9.0 + 10.0 / c - 1e-9);
    assert!(c * horizon >= 9.0 + 10.0 / c - 1e-9);
}

#[test]
fn rays_stay_inside_the_cone() {
    let angles = default_ray_angles(30f64.to_radians());
    assert_eq!(angles.len(), 9);
    assert_eq!(angles[0], 0.0);
    assert!((angles[8] - 25f64.to_radians()).abs() < 1e-12);
    assert_eq!(default_ray_angles(3f64.to_radians()), vec![0.0]);
    let fx = fixture();
    for (x1, rho) in probe_points(&fx.grid, 9.0) {
        assert!((x1.hypot(rho) - 9.0).abs() < 1e-12);
        assert!(rho < fx.grid.domain().h(x1));
    }
}

#[test]
fn exact_spherical_front_has_constant_offset() {
    let fx = fixture();
    let c = fx.wp.c;
    let r = |t: f64| delayed_radius(c, N_DIM, t);
    let history = spherical(&fx, &times(100.0, 160.0, 4.0), r);
    let traces = track_levels(&history, &fx.grid, &fx.wp, &[0.25, 0.5, 0.9], &fx.angles).unwrap();
    for trace in &traces {
        let expected = fx.wp.inverse(trace.lambda).unwrap();
        assert_eq!(trace.missing, 0);
        let stats = offset_stats(trace, 100.0, 160.0).unwrap();
        assert!(
            stats.range < 0.02,
            "λ {}: range {}",
            trace.lambda,
            stats.range
        );
        for s in &trace.samples {
            assert!(
                (s.offset - expected).abs() < 0.02,
                "λ {}: {:?}",
                trace.lambda,
                s
            );
        }
    }
    // φ(0) = θ puts the θ-level exactly on the delayed radius
    let at_theta = &traces[0];
    assert!(at_theta.samples.iter().all(|s| s.offset.abs() < 0.02));
}

#[test]
fn mean_speed_of_synthetic_fronts() {
    let fx = fixture();
    let c = fx.wp.c;
    let window = times(100.0, 160.0, 4.0);

    let linear = spherical(&fx, &window, |t| c * t - 10.0);
    let trace = &track_levels(&linear, &fx.grid, &fx.wp, &[0.5], &fx.angles).unwrap()[0];
    let speed = mean_speed(trace, c, 100.0, 160.0).unwrap();
    assert!((speed - c).abs() / c < 0.02, "speed {speed}");

    let delayed = spherical(&fx, &window, |t| delayed_radius(c, N_DIM, t));
    let trace = &track_levels(&delayed, &fx.grid, &fx.wp, &[0.5], &fx.angles).unwrap()[0];
    let oracle: Vec<(f64, f64)> = window
        .iter()
        .map(|&t| (t, delayed_radius(c, N_DIM, t)))
        .collect();
    let speed = mean_speed(trace, c, 100.0, 160.0).unwrap();
    assert!(
        (speed - ls_slope(&oracle)).abs() < 1e-3,
        "speed {speed} vs {}",
        ls_slope(&oracle)
    );

    let parked = spherical(&fx, &window, |_| 30.0);
    let trace = &track_levels(&parked, &fx.grid, &fx.wp, &[0.5], &fx.angles).unwrap()[0];
    assert!(mean_speed(trace, c, 100.0, 160.0).unwrap().abs() < 1e-12);

    assert!(matches!(
        mean_speed(trace, c, 100.0, 110.0),
        Err(Error::FitWindow(_))
    ));
    assert!(matches!(
        offset_stats(trace, 500.0, 600.0),
        Err(Error::FitWindow(_))
    ));
}

#[test]
fn crossing_along_a_ray() {
    let fx = fixture();
    let field = Field::from_fn(&fx.grid, 0.0, |x, r| {
        fx.wp.phi((x * x + r * r).sqrt() - 20.0)
    });
    let angle = 10f64.to_radians();
    let at = ray_crossing(&fx.grid, &field.values, angle, 3.0, 0.25).unwrap();
    assert!((at - 20.0).abs() < 0.02, "crossing {at}");
    assert!(ray_crossing(&fx.grid, &field.values, angle, 3.0, 1.5).is_none());
}

#[test]
fn verdicts_of_constant_histories() {
    let fx = fixture();
    let cfg = ProbeConfig::default();
    let needed = classify_horizon(fx.wp.c, N_DIM, cfg.probe_radius(&fx.grid, &fx.wp)).unwrap();
    let hist = |value: f64| -> Vec<Field64> {
        times(needed - 10.0, needed, 1.0)
            .into_iter()
            .map(|t| Field::constant(&fx.grid, t, value))
            .collect()
    };
    let blocked = classify(&hist(0.0), &fx.grid, &fx.wp, &cfg).unwrap();
    assert_eq!(blocked.kind, VerdictKind::Blocked);
    assert_eq!(blocked.steady_residual, 0.0);
    assert_eq!(blocked.probe_values.len(), 9);
    assert_eq!(
        classify(&hist(1.0), &fx.grid, &fx.wp, &cfg).unwrap().kind,
        VerdictKind::Spreading
    );
    assert_eq!(
        classify(&hist(0.5), &fx.grid, &fx.wp, &cfg).unwrap().kind,
        VerdictKind::Undecided
    );

    // probes near zero but still moving
    let mut creeping = hist(0.0);
    for (k, f) in creeping.iter_mut().enumerate() {
        f.values.iter_mut().for_each(|v| *v = 1e-3 * k as f64);
    }
    assert_eq!(
        classify(&creeping, &fx.grid, &fx.wp, &cfg).unwrap().kind,
        VerdictKind::Undecided
    );

    let short = vec![Field::constant(&fx.grid, needed - 1.0, 0.0)];
    assert!(matches!(
        classify(&short, &fx.grid, &fx.wp, &cfg),
        Err(Error::Precondition(_))
    ));
    assert!(classify::<f64>(&[], &fx.grid, &fx.wp, &cfg).is_err());
}

#[test]
fn classification_is_deterministic() {
    let fx = fixture();
    let cfg = ProbeConfig::default();
    let c = fx.wp.c;
    let needed = classify_horizon(c, N_DIM, cfg.probe_radius(&fx.grid, &fx.wp)).unwrap();
    let history = spherical(&fx, &times(needed - 10.0, needed, 2.0), |t| {
        delayed_radius(c, N_DIM, t)
    });
    let a = classify(&history, &fx.grid, &fx.wp, &cfg).unwrap();
    let b = classify(&history, &fx.grid, &fx.wp, &cfg).unwrap();
    assert_eq!(a.kind, VerdictKind::Spreading);
    assert_eq!(a.probe_values, b.probe_values);
    assert_eq!(a.steady_residual, b.steady_residual);
}

#[test]
fn local_profile_of_spherical_front() {
    let fx = fixture();
    let c = fx.wp.c;
    let window = times(100.0, 160.0, 10.0);
    let history = spherical(&fx, &window, |t| delayed_radius(c, N_DIM, t));
    let trace = &track_levels(&history, &fx.grid, &fx.wp, &[0.5], &fx.angles).unwrap()[0];
    let report = local_profile_check(&history, &fx.grid, trace, &fx.wp, &window, 0.0).unwrap();
    assert!(!report.samples.is_empty());
    assert!(
        report.max_deviation < 1e-3,
        "zero width: {}",
        report.max_deviation
    );
    let report = local_profile_check(&history, &fx.grid, trace, &fx.wp, &window, 4.0).unwrap();
    assert!(
        report.max_deviation < 5e-3,
        "width 4: {}",
        report.max_deviation
    );
    assert_eq!(report.by_time().len(), window.len());
}

#[test]
fn equilibria_have_no_steady_residual() {
    let fx = fixture();
    for value in [0.0, 0.25, 1.0] {
        let u = Field::constant(&fx.grid, 0.0, value);
        let res = steady_residual(&fx.grid, &u, &fx.nl, 0.0).unwrap();
        assert!(res < 1e-10, "{value}: {res:e}");
    }
    let bump = Field::from_fn(&fx.grid, 0.0, |x, r| (-(x * x + r * r)).exp());
    let near = steady_residual(&fx.grid, &bump, &fx.nl, 0.0).unwrap();
    let far = steady_residual(&fx.grid, &bump, &fx.nl, 8.0).unwrap();
    assert!(near > 0.1 && far < 1e-12);
}
