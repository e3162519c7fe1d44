use approx::assert_abs_diff_eq;
use funnel_core::kinetics::{
    decay_rates, fit_log_slope, make_cubic, mass, solve_wave, wave_tail_check,
};
use funnel_core::Nonlinearity64;
use proptest::prelude::*;

fn cubic(theta: f64) -> Nonlinearity64 {
    make_cubic(theta).unwrap()
}

/// Composite Simpson on a fixed number of panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Closed-form front of the cubic, shifted so that it equals θ at 0.
fn huxley(theta: f64, z: f64) -> f64 {
    let shift = std::f64::consts::SQRT_2 * (1.0 / theta - 1.0).ln();
    1.0 / (1.0 + ((z + shift) / std::f64::consts::SQRT_2).exp())
}

#[test]
fn cubic_point_values() {
    let nl = cubic(0.25);
    assert_abs_diff_eq!(nl.f(0.5), 0.0625, epsilon = 1e-15);
    assert_abs_diff_eq!(nl.f(-0.1), 0.025, epsilon = 1e-15);
    assert_abs_diff_eq!(nl.f(1.2), -0.75 * 0.2, epsilon = 1e-15);
}

#[test]
fn theta_outside_mass_range_is_rejected() {
    for theta in [0.0, 0.5, 0.7, -0.1, f64::NAN] {
        assert!(make_cubic(theta).is_err(), "theta {theta}");
    }
}

#[test]
fn mass_matches_simpson_oracle() {
    for theta in [0.1, 0.25, 0.4] {
        let nl = cubic(theta);
        let oracle = simpson(|u| u * (1.0 - u) * (u - theta), 0.0, 1.0, 2000);
        assert_abs_diff_eq!(mass(&nl).unwrap(), oracle, epsilon = 1e-10);
    }
    assert_abs_diff_eq!(mass(&cubic(0.25)).unwrap(), 1.0 / 24.0, epsilon = 1e-10);
    assert_abs_diff_eq!(
        mass(&cubic(0.1)).unwrap(),
        1.0 / 12.0 - 1.0 / 60.0,
        epsilon = 1e-10
    );
}

#[test]
fn mass_vanishes_towards_balanced_case() {
    let m = mass(&cubic(0.4999)).unwrap();
    assert!(m > 0.0 && m < 2e-5, "mass {m}");
}

#[test]
fn wave_speed_matches_closed_form() {
    for theta in [0.1, 0.25, 0.4] {
        let wp = solve_wave(&cubic(theta), 40.0, 8001).unwrap();
        let exact = (1.0 - 2.0 * theta) / std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(wp.c, exact, epsilon = 1e-6);
    }
}

#[test]
fn closed_form_front_solves_the_ode() {
    // The oracle itself: substitute into φ'' + cφ' + f(φ) with centred differences.
    let theta = 0.25;
    let nl = cubic(theta);
    let c = (1.0 - 2.0 * theta) / std::f64::consts::SQRT_2;
    let h = 1e-3;
    let worst = (-400..=400)
        .map(|k| {
            let z = k as f64 * 0.05;
            let (m, p, q) = (huxley(theta, z - h), huxley(theta, z), huxley(theta, z + h));
            ((q - 2.0 * p + m) / (h * h) + c * (q - m) / (2.0 * h) + nl.f(p)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "residual {worst}");
}

#[test]
fn wave_profile_matches_closed_form_front() {
    let theta = 0.25;
    let wp = solve_wave(&cubic(theta), 40.0, 8001).unwrap();
    assert_eq!(wp.phi(0.0), theta);
    for k in -300..=300 {
        let z = k as f64 * 0.1;
        assert_abs_diff_eq!(wp.phi(z), huxley(theta, z), epsilon = 1e-6);
    }
}

#[test]
fn profile_is_decreasing_with_correct_limits() {
    let wp = solve_wave(&cubic(0.25), 40.0, 8001).unwrap();
    let phi = wp.phi_values();
    assert!(phi.windows(2).all(|w| w[1] <= w[0]));
    assert!(wp.phiprime_values().iter().all(|&d| d <= 0.0));
    assert!(1.0 - phi[0] < 1e-10 && *phi.last().unwrap() < 1e-10);
}

#[test]
fn ode_residual_is_small_on_default_grid() {
    let nl = cubic(0.25);
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    assert!(wp.residual_max < 1e-6, "residual {}", wp.residual_max);
    let (z, phi) = (wp.z_grid(), wp.phi_values());
    let dz = z[1] - z[0];
    let worst = (1..phi.len() - 1)
        .map(|k| {
            let d2 = (phi[k + 1] - 2.0 * phi[k] + phi[k - 1]) / (dz * dz);
            let d1 = (phi[k + 1] - phi[k - 1]) / (2.0 * dz);
            (d2 + wp.c * d1 + nl.f(phi[k])).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "centred residual {worst}");
}

#[test]
fn solve_wave_is_deterministic() {
    let nl = cubic(0.3);
    let a = solve_wave(&nl, 40.0, 8001).unwrap();
    let b = solve_wave(&nl, 40.0, 8001).unwrap();
    assert_abs_diff_eq!(a.c, b.c, epsilon = 1e-12);
    assert_eq!(a.phi_values(), b.phi_values());
}

#[test]
fn speed_is_positive_across_thetas() {
    for k in 1..=9 {
        let theta = 0.05 * k as f64;
        let nl = cubic(theta);
        assert!(mass(&nl).unwrap() > 0.0);
        let wp = solve_wave(&nl, 40.0, 8001).unwrap();
        assert!(wp.c > 0.0, "theta {theta}: c {}", wp.c);
    }
}

#[test]
fn decay_rates_at_quarter() {
    let nl = cubic(0.25);
    let (ahead, behind) = decay_rates(&nl, 0.3535534).unwrap();
    let exact = 1.0 / std::f64::consts::SQRT_2;
    assert_abs_diff_eq!(ahead, exact, epsilon = 1e-6);
    assert_abs_diff_eq!(behind, exact, epsilon = 1e-6);
}

#[test]
fn tail_fit_matches_exact_exponent() {
    let wp = solve_wave(&cubic(0.25), 40.0, 8001).unwrap();
    let report = wave_tail_check(&wp).unwrap();
    let exact = 1.0 / std::f64::consts::SQRT_2;
    assert!((-report.slope_ahead - exact).abs() / exact < 0.01);
    assert!((report.slope_behind - exact).abs() / exact < 0.01);
    assert!(report.within_one_percent);
    assert!(report.c1 <= report.big_c1 && report.c2 <= report.big_c2);
}

#[test]
fn tail_fit_of_exact_exponential() {
    let z: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
    let y: Vec<f64> = z.iter().map(|&s| (-s).exp()).collect();
    assert_abs_diff_eq!(
        fit_log_slope(&z, &y, 1e-12, 1.0).unwrap(),
        -1.0,
        epsilon = 1e-12
    );
}

#[test]
fn tail_fit_at_small_theta_is_self_consistent() {
    let nl = cubic(0.1);
    let wp = solve_wave(&nl, 40.0, 8001).unwrap();
    let report = wave_tail_check(&wp).unwrap();
    let (ahead, behind) = decay_rates(&nl, wp.c).unwrap();
    assert!((-report.slope_ahead - ahead).abs() / ahead < 0.01);
    assert!((report.slope_behind - behind).abs() / behind < 0.01);
}

proptest! {
    #[test]
    fn zeros_and_sign_pattern(theta in 0.02f64..0.48) {
        let nl = cubic(theta);
        prop_assert_eq!(nl.f(0.0), 0.0);
        prop_assert_eq!(nl.f(1.0), 0.0);
        prop_assert!(nl.f(theta).abs() < 1e-16);
        prop_assert!(nl.fprime(0.0) < 0.0 && nl.fprime(1.0) < 0.0 && nl.fprime(theta) > 0.0);
        for k in 1..1000 {
            let u = k as f64 / 1000.0;
            if (u - theta).abs() < 1e-9 {
                continue;
            }
            prop_assert_eq!(nl.f(u) > 0.0, u > theta, "u = {}", u);
        }
    }

    #[test]
    fn extension_is_continuously_differentiable(theta in 0.02f64..0.48) {
        let nl = cubic(theta);
        let h = 1e-7;
        for edge in [0.0, 1.0] {
            let left = (nl.f(edge) - nl.f(edge - h)) / h;
            let right = (nl.f(edge + h) - nl.f(edge)) / h;
            prop_assert!((left - right).abs() < 1e-5);
            prop_assert!((nl.fprime(edge - 1e-3) - nl.fprime(edge + 1e-3)).abs() < 1e-2);
        }
    }

    #[test]
    fn primitive_vanishes_at_one_and_differentiates_to_minus_f(theta in 0.02f64..0.48, t in -1.5f64..2.5) {
        let nl = cubic(theta);
        prop_assert!(nl.primitive(1.0).abs() < 1e-14);
        let h = 1e-5;
        let slope = (nl.primitive(t + h) - nl.primitive(t - h)) / (2.0 * h);
        prop_assert!((slope + nl.f(t)).abs() < 1e-6);
    }

    #[test]
    fn mu_star_exceeds_speed(theta in 0.02f64..0.48, c in 0.01f64..2.0) {
        let (ahead, behind) = decay_rates(&cubic(theta), c).unwrap();
        prop_assert!(ahead > c && behind > 0.0);
    }
}
