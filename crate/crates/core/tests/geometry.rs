use std::f64::consts::FRAC_PI_4;

use approx::assert_abs_diff_eq;
use funnel_core::geometry::{
    auto_l, build_domain, build_grid, build_grid_with_map, slot, wall_normal_check, XMap,
};
use funnel_core::{Error, FunnelDomain64, MappedGrid64};
use proptest::prelude::*;

fn funnel45(x_min: f64, x_max: f64) -> FunnelDomain64 {
    build_domain(3, 1.0, FRAC_PI_4, 1.5 * 2f64.sqrt(), x_min, x_max).unwrap()
}

/// Separable test field `X(x₁)·P(ρ)` with its exact axisymmetric Laplacian.
struct Manufactured {
    name: &'static str,
    u: fn(f64, f64) -> f64,
    lap: fn(f64, f64, usize) -> f64,
}

/// `P'' + (N-2)/ρ·P'` for `P = cos(aρ)`, with the axis limit.
fn radial_cos(a: f64, rho: f64, n: usize) -> f64 {
    let bend = if rho.abs() < 1e-12 {
        -a * a
    } else {
        -a * (a * rho).sin() / rho
    };
    -a * a * (a * rho).cos() + (n as f64 - 2.0) * bend
}

/// `P'' + (N-2)/ρ·P'` for `P = exp(-bρ²)`.
fn radial_gauss(b: f64, rho: f64, n: usize) -> f64 {
    (-2.0 * b * (n as f64 - 1.0) + 4.0 * b * b * rho * rho) * (-b * rho * rho).exp()
}

fn fields() -> Vec<Manufactured> {
    vec![
        Manufactured {
            name: "sin-cos",
            u: |x, r| (0.3 * x).sin() * (0.4 * r).cos(),
            lap: |x, r, n| {
                -0.09 * (0.3 * x).sin() * (0.4 * r).cos() + (0.3 * x).sin() * radial_cos(0.4, r, n)
            },
        },
        Manufactured {
            name: "gauss-quadratic",
            u: |x, r| (-x * x / 20.0).exp() * (1.0 + r * r),
            lap: |x, r, n| {
                let g = (-x * x / 20.0).exp();
                let gpp = (x * x / 100.0 - 0.1) * g;
                gpp * (1.0 + r * r) + g * 2.0 * (n as f64 - 1.0)
            },
        },
        Manufactured {
            name: "cos-gauss",
            u: |x, r| (0.2 * x).cos() * (-0.1 * r * r).exp(),
            lap: |x, r, n| {
                -0.04 * (0.2 * x).cos() * (-0.1 * r * r).exp()
                    + (0.2 * x).cos() * radial_gauss(0.1, r, n)
            },
        },
        Manufactured {
            name: "linear-gauss",
            u: |x, r| x * (-0.05 * r * r).exp(),
            lap: |x, r, n| x * radial_gauss(0.05, r, n),
        },
        Manufactured {
            name: "exp-cos",
            u: |x, r| (0.1 * x).exp() * (0.3 * r).cos(),
            lap: |x, r, n| {
                0.01 * (0.1 * x).exp() * (0.3 * r).cos() + (0.1 * x).exp() * radial_cos(0.3, r, n)
            },
        },
    ]
}

/// Half-width of the band around each wall knot left out of the error norm.
/// `h'''` jumps at the knots, so the truncation error is O(1) on the straddling
/// columns and decays only with the distance to the knot next to them.
const KNOT_BAND: f64 = 0.3;

/// Max interior residual of the discrete operator over every `stride`-th node,
/// skipping the boundary rows and the columns near a wall knot. A stride of 2
/// on a doubled grid compares the same physical nodes as the coarse grid.
fn interior_error(grid: &MappedGrid64, field: &Manufactured, stride: usize) -> f64 {
    let dom = grid.domain();
    let u = grid.sample(field.u);
    let mut lu = vec![0.0; grid.len()];
    grid.apply(&u, &mut lu);
    let x = grid.x_nodes();
    let mut worst = 0.0f64;
    for i in (stride..grid.nx() - 1).step_by(stride) {
        let near = |knot: f64| (x[i] - knot).abs() < KNOT_BAND;
        if !dom.is_cylinder() && (near(dom.a0()) || near(dom.a1())) {
            continue;
        }
        for j in (0..grid.neta() - 1).step_by(stride) {
            let exact = (field.lap)(x[i], grid.rho(i, j), dom.n_dim());
            worst = worst.max((lu[grid.index(i, j)] - exact).abs());
        }
    }
    worst
}

#[test]
fn flat_part_and_cone_part() {
    let dom = funnel45(-10.0, 10.0);
    assert_eq!(dom.h(-5.0), 1.0);
    assert_abs_diff_eq!(dom.h(1.5), 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(dom.h(7.0), 7.0, epsilon = 1e-12);
}

#[test]
fn short_matching_point_is_infeasible() {
    let err = build_domain(3, 1.0, FRAC_PI_4, 1.01, -10.0, 10.0).unwrap_err();
    assert!(matches!(err, Error::GeometryInfeasible(_)), "{err}");
}

#[test]
fn auto_matching_point_is_feasible() {
    let l = auto_l(1.0, FRAC_PI_4, 0.5).unwrap();
    assert!(build_domain(3, 1.0, FRAC_PI_4, l, -10.0, 10.0).is_ok());
    assert_eq!(auto_l(1.0, 0.0, 0.5).unwrap(), 2.0);
    assert_eq!(auto_l(0.3, 0.0, 0.5).unwrap(), 0.6);
    let steep = 75f64.to_radians();
    let l = auto_l(0.2, steep, 0.5).unwrap();
    let dom = build_domain(3, 0.2, steep, l, -10.0, 10.0).unwrap();
    assert!(dom.audit(10_000).passed);
}

#[test]
fn auto_matching_point_is_near_minimal() {
    // a feasibility bisection of its own over L
    let alpha = FRAC_PI_4;
    let feasible = |l: f64| build_domain(3, 1.0, alpha, l, -10.0, 10.0).is_ok();
    // the quintic wall family stops being feasible beyond L = R / (0.4 sin α)
    let (mut lo, mut hi) = (1.0 + 1e-9, 1.0 / (0.4 * alpha.sin()));
    assert!(feasible(hi) && !feasible(lo));
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let l = auto_l(1.0, alpha, 0.5).unwrap();
    assert!(
        (l - 1.5 * hi).abs() < 1e-6 * hi,
        "auto {l}, oracle {}",
        1.5 * hi
    );
}

#[test]
fn grid_below_minimum_is_rejected() {
    let dom = funnel45(-10.0, 10.0);
    assert!(matches!(
        build_grid(&dom, 8, 32),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        build_grid(&dom, 32, 8),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn cylinder_stencil_is_separable() {
    let dom = build_domain(3, 1.0, 0.0, 2.0, -10.0, 10.0).unwrap();
    let grid = build_grid(&dom, 81, 17).unwrap();
    for k in 0..grid.len() {
        let w = grid.weights(k);
        for (di, dj) in [(-1, -1), (-1, 1), (1, -1), (1, 1)] {
            assert_eq!(w[slot(di, dj)], 0.0, "node {k}");
        }
    }
    assert!(grid.monotonicity_audit().is_monotone());
}

#[test]
fn constants_are_annihilated() {
    for alpha in [0.0, FRAC_PI_4, 80f64.to_radians()] {
        let l = auto_l(1.0, alpha, 0.5).unwrap();
        let dom = build_domain(3, 1.0, alpha, l, -10.0, 20.0).unwrap();
        let grid = build_grid(&dom, 121, 24).unwrap();
        let mut out = vec![0.0; grid.len()];
        grid.apply(&vec![0.7; grid.len()], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-11), "alpha {alpha}");
    }
}

#[test]
fn quadratic_has_laplacian_six() {
    let dom = funnel45(-10.0, 10.0);
    let coarse = build_grid(&dom, 161, 33).unwrap();
    let q = Manufactured {
        name: "x²+ρ²",
        u: |x, r| x * x + r * r,
        lap: |_, _, n| 2.0 + 2.0 * (n as f64 - 1.0),
    };
    let err = interior_error(&coarse, &q, 1);
    assert!(err < 0.05, "{}: {err}", q.name);
    let cylinder = build_domain(3, 1.0, 0.0, 2.0, -10.0, 10.0).unwrap();
    let grid = build_grid(&cylinder, 161, 33).unwrap();
    assert!(interior_error(&grid, &q, 1) < 1e-9);
}

#[test]
fn five_fields_converge_at_second_order() {
    for alpha in [0.0, FRAC_PI_4] {
        let l = auto_l(1.0, alpha, 0.5).unwrap();
        let dom = build_domain(3, 1.0, alpha, l, -10.0, 10.0).unwrap();
        let map = XMap::for_domain(&dom, 20.0 / 64.0);
        let coarse = build_grid_with_map(&dom, &map, 129, 65);
        let fine = build_grid_with_map(&dom, &map, 257, 129);
        for field in fields() {
            let (ec, ef) = (
                interior_error(&coarse, &field, 1),
                interior_error(&fine, &field, 2),
            );
            let order = (ec / ef).log2();
            assert!(
                order >= 1.9,
                "alpha {alpha}, {}: {ec:e} -> {ef:e}, order {order}",
                field.name
            );
        }
    }
}

#[test]
fn wall_flux_of_neutral_fields() {
    let cylinder = build_domain(3, 1.0, 0.0, 2.0, -10.0, 10.0).unwrap();
    let report = |neta: usize| wall_normal_check(&build_grid(&cylinder, 81, neta).unwrap());
    let (coarse, fine) = (report(33), report(65));
    assert!(coarse.constant < 1e-12);
    let (c, f) = (coarse.cylinder.unwrap(), fine.cylinder.unwrap());
    assert!(c < 1e-2 && c / f > 3.0, "cylinder {c:e} -> {f:e}");
    assert!(coarse.radial.is_none());

    let cone = funnel45(-10.0, 30.0);
    let report = |nx: usize, neta: usize| wall_normal_check(&build_grid(&cone, nx, neta).unwrap());
    let (coarse, fine) = (report(201, 33), report(401, 65));
    assert!(coarse.constant < 1e-12);
    let (c, f) = (coarse.radial.unwrap(), fine.radial.unwrap());
    assert!(c / f > 3.0, "radial {c:e} -> {f:e}");
}

#[test]
fn map_is_injective_and_wall_positive() {
    let dom = build_domain(
        3,
        0.05,
        80f64.to_radians(),
        auto_l(0.05, 80f64.to_radians(), 0.5).unwrap(),
        -20.0,
        40.0,
    )
    .unwrap();
    let grid = build_grid(&dom, 241, 32).unwrap();
    assert!(grid.x_nodes().windows(2).all(|w| w[1] > w[0]));
    assert!(grid.wall_heights().iter().all(|&h| h > 0.0));
    for i in 0..grid.nx() {
        for j in 1..grid.neta() {
            assert!(grid.rho(i, j) > grid.rho(i, j - 1));
        }
    }
}

#[test]
fn volume_weights_integrate_cylinder_volume() {
    // ∫ρ dρ dx₁ over [-10, 10] × [0, 1] is 10 in N = 3
    let dom = build_domain(3, 1.0, 0.0, 2.0, -10.0, 10.0).unwrap();
    let grid = build_grid(&dom, 101, 65).unwrap();
    let total: f64 = (0..grid.nx())
        .flat_map(|i| (0..grid.neta()).map(move |j| (i, j)))
        .map(|(i, j)| grid.volume_weight(i, j))
        .sum();
    assert_abs_diff_eq!(total, 10.0, epsilon = 1e-3);
}

#[test]
fn interpolation_reproduces_bilinear_data() {
    let dom = funnel45(-10.0, 10.0);
    let grid = build_grid(&dom, 81, 33).unwrap();
    let u = grid.sample(|x, _| 2.0 * x + 1.0);
    let v = grid.interpolate(&u, 3.3, 1.0).unwrap();
    assert_abs_diff_eq!(v, 7.6, epsilon = 1e-10);
    assert!(grid.interpolate(&u, 3.3, 10.0).is_none());
    assert!(grid.interpolate(&u, -11.0, 0.0).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wall_slope_stays_in_budget(
        radius in 0.05f64..3.0,
        alpha_deg in 1.0f64..85.0,
        margin in 0.05f64..1.0,
    ) {
        let alpha = alpha_deg.to_radians();
        let l = auto_l(radius, alpha, margin).unwrap();
        let dom = build_domain(3, radius, alpha, l, -10.0, l + 10.0).unwrap();
        let audit = dom.audit(10_000);
        prop_assert!(audit.passed, "{:?}", audit);
        prop_assert!(audit.max_slope_violation <= 1e-12 * alpha.tan().max(1.0));
        prop_assert!(audit.min_slope >= -1e-12);
        prop_assert!(audit.min_height > 0.0);
        prop_assert_eq!(dom.h(-1.0), radius);
        let far = l * alpha.cos() + 1.0;
        prop_assert!((dom.h(far) - far * alpha.tan()).abs() < 1e-9 * far.max(1.0));
    }
}
