use funnel_core::analysis::{delayed_radius, Verdict, VerdictKind};
use funnel_core::envelope::{check_envelope, envelope_fit_and_check, Envelope};
use funnel_core::geometry::{auto_l, build_domain, build_grid};
use funnel_core::kinetics::{make_cubic, solve_wave};
use funnel_core::solver::Field;
use funnel_core::{Error, Field64};

fn verdict(kind: VerdictKind, t: f64) -> Verdict {
    Verdict {
        kind,
        probe_points: Vec::new(),
        probe_values: Vec::new(),
        steady_residual: 0.0,
        time_reached: t,
    }
}

#[test]
fn exact_delayed_front_is_enveloped() {
    let nl = make_cubic(0.25).unwrap();
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    let alpha = 30f64.to_radians();
    let l = auto_l(1.0, alpha, 0.5).unwrap();
    let dom = build_domain(3, 1.0, alpha, l, -10.0, 60.0).unwrap();
    let grid = build_grid(&dom, 281, 64).unwrap();
    let c = wp.c;
    let history: Vec<Field64> = (0..=40)
        .map(|k| {
            let t = 40.0 + 3.0 * k as f64;
            let front = delayed_radius(c, 3, t);
            Field::from_fn(&grid, t, |x, r| wp.phi((x * x + r * r).sqrt() - front))
        })
        .collect();

    let report = envelope_fit_and_check(
        &history,
        &grid,
        &wp,
        &nl,
        &verdict(VerdictKind::Spreading, 160.0),
    )
    .unwrap();
    assert!(report.passed, "{:?}", report.check.heat_map.last());
    assert!(report.check.sup_violation <= report.tolerance);
    assert!(report.check.sub_violation <= report.tolerance);
    assert!(report.envelope.tau1 >= 0.0 && report.envelope.tau2 >= 0.0);

    // the check recomputed from the fitted parameters agrees
    let again = check_envelope(&report.envelope, &history, &grid, &wp).unwrap();
    assert_eq!(again.sup_violation, report.check.sup_violation);
    assert_eq!(again.sub_violation, report.check.sub_violation);

    // an envelope pushed far ahead of the front no longer bounds it from below
    let mut ahead = report.envelope.clone();
    ahead.z2 -= 20.0;
    assert!(
        check_envelope(&ahead, &history, &grid, &wp)
            .unwrap()
            .sub_violation
            > 0.5
    );
}

#[test]
fn envelope_pair_is_ordered() {
    let nl = make_cubic(0.25).unwrap();
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    let env = Envelope::centered(&nl, 2.0, 3);
    for k in 0..50 {
        let t = 1.0 + 4.0 * k as f64;
        for m in 0..80 {
            let r = 2.0 + 0.5 * m as f64;
            assert!(env.upper(&wp, t, r) >= env.lower(&wp, t, r));
        }
    }
}

#[test]
fn blocked_runs_are_refused() {
    let nl = make_cubic(0.25).unwrap();
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    let alpha = 30f64.to_radians();
    let dom = build_domain(3, 1.0, alpha, auto_l(1.0, alpha, 0.5).unwrap(), -10.0, 30.0).unwrap();
    let grid = build_grid(&dom, 161, 32).unwrap();
    let history = vec![Field::constant(&grid, 100.0, 0.0)];
    for kind in [VerdictKind::Blocked, VerdictKind::Undecided] {
        assert!(matches!(
            envelope_fit_and_check(&history, &grid, &wp, &nl, &verdict(kind, 100.0)),
            Err(Error::Precondition(_))
        ));
    }
}
