//! Cross-oracle tests for the characteristic-function routes: closed form
//! vs numerical Riccati vs constant-parameter formula, plus the structural
//! identities every route must satisfy.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tdheston::charfn::{
    b_closed_constant_eta, cf_coeffs, char_fn, heston_constant_cf, riccati_solve_numeric,
    LinearParams, Route,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Draw a valid parameter set with eta1 = 0 (desk-scale ranges).
fn random_closed_params(rng: &mut StdRng, t_max: f64) -> LinearParams {
    let kappa2 = rng.gen_range(0.3..3.0);
    let kappa1 = rng.gen_range(-0.4 * kappa2 / t_max..1.0);
    let theta2 = rng.gen_range(0.01..0.09);
    let theta1 = rng.gen_range(-0.4 * theta2 / t_max..0.05);
    let eta2 = rng.gen_range(0.1..0.6);
    let rho2 = rng.gen_range(-0.8..0.3);
    let lo = (-1.0 - rho2) / t_max * 0.9;
    let hi = (1.0 - rho2) / t_max * 0.9;
    let rho1 = rng.gen_range(lo..hi);
    LinearParams { kappa1, kappa2, theta1, theta2, eta1: 0.0, eta2, rho1, rho2 }
}

#[test]
fn closed_b_matches_riccati_time_dependent() {
    // the non-degenerate g1 branch against the ODE ground truth
    let p = LinearParams {
        kappa1: 0.5,
        kappa2: 1.0,
        theta1: 0.0,
        theta2: 0.04,
        eta1: 0.0,
        eta2: 0.4,
        rho1: 0.1,
        rho2: -0.3,
    };
    for &(om, tau) in &[
        (2.0, 1.0),
        (1.0, 0.25),
        (-3.0, 1.7),
        (7.5, 2.0),
        (0.3, 0.8),
        (-12.0, 1.2),
    ] {
        let b = b_closed_constant_eta(&p, c(om, 0.0), tau).unwrap();
        let oracle = riccati_solve_numeric(&p, c(om, 0.0), tau, 1e-11).unwrap();
        let err = (b - oracle.b).norm() / (1.0 + oracle.b.norm());
        assert!(
            err <= 1e-7,
            "omega={om} tau={tau}: closed {b} vs riccati {} (rel err {err:.3e})",
            oracle.b
        );
    }
}

#[test]
fn closed_b_matches_riccati_random_draws() {
    let mut rng = StdRng::seed_from_u64(0xC0FFEE);
    let mut checked = 0;
    for _ in 0..60 {
        let p = random_closed_params(&mut rng, 2.0);
        let omega = c(rng.gen_range(-40.0..40.0), 0.0);
        let tau = rng.gen_range(0.05..2.0);
        let b = match b_closed_constant_eta(&p, omega, tau) {
            Ok(b) => b,
            Err(e) => panic!("closed form failed on {p:?} omega={omega} tau={tau}: {e}"),
        };
        let oracle = riccati_solve_numeric(&p, omega, tau, 1e-11).unwrap();
        let err = (b - oracle.b).norm() / (1.0 + oracle.b.norm());
        assert!(
            err <= 1e-6,
            "{p:?} omega={omega} tau={tau}: rel err {err:.3e}"
        );
        checked += 1;
    }
    assert_eq!(checked, 60);
}

#[test]
fn constant_reduction_all_routes_agree() {
    // kappa1 = theta1 = eta1 = rho1 = 0: closed form, Riccati and the
    // classic constant-parameter formula must coincide
    let (kappa, theta, eta, rho) = (2.0, 0.04, 0.3, -0.5);
    let p = LinearParams::constant(kappa, theta, eta, rho);
    for &om in &[0.5, 1.5, 8.0, -4.0] {
        for &tau in &[0.1, 0.9, 2.0] {
            let omega = c(om, 0.0);
            let classic = heston_constant_cf(kappa, theta, eta, rho, omega, tau);
            let ode = riccati_solve_numeric(&p, omega, tau, 1e-11).unwrap();
            let closed = cf_coeffs(&p, omega, tau, Route::Closed).unwrap();
            for (x, y, what) in [
                (classic.b, ode.b, "classic/ode B"),
                (classic.a, ode.a, "classic/ode A"),
                (closed.b, ode.b, "closed/ode B"),
                (closed.a, ode.a, "closed/ode A"),
            ] {
                assert!(
                    (x - y).norm() <= 1e-8 * (1.0 + y.norm()),
                    "{what} mismatch at omega={om} tau={tau}: {x} vs {y}"
                );
            }
        }
    }
}

#[test]
fn heston_constant_cf_cross_oracle_example() {
    let v = heston_constant_cf(2.0, 0.04, 0.3, -0.5, c(1.5, 0.0), 0.5);
    let ode = riccati_solve_numeric(
        &LinearParams::constant(2.0, 0.04, 0.3, -0.5),
        c(1.5, 0.0),
        0.5,
        1e-11,
    )
    .unwrap();
    assert!((v.a - ode.a).norm() < 1e-9);
    assert!((v.b - ode.b).norm() < 1e-9);
}

#[test]
fn riccati_matches_classic_formula_example() {
    // (kappa=2, theta=0.04, eta=0.3, rho=-0.5, omega=1, tau=1)
    let p = LinearParams::constant(2.0, 0.04, 0.3, -0.5);
    let ode = riccati_solve_numeric(&p, c(1.0, 0.0), 1.0, 1e-11).unwrap();
    let classic = heston_constant_cf(2.0, 0.04, 0.3, -0.5, c(1.0, 0.0), 1.0);
    assert!((ode.a - classic.a).norm() < 1e-9);
    assert!((ode.b - classic.b).norm() < 1e-9);
}

#[test]
fn martingale_identity_all_routes_random_params() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..25 {
        let mut p = random_closed_params(&mut rng, 2.0);
        let tau = rng.gen_range(0.1..2.0);
        // closed / auto / numeric with eta1 = 0
        for route in [Route::Auto, Route::Closed, Route::Numeric] {
            let v = cf_coeffs(&p, c(0.0, -1.0), tau, route).unwrap();
            assert!(v.a.norm() <= 1e-9, "A(-i) = {} on {route:?}", v.a);
            assert!(v.b.norm() <= 1e-9, "B(-i) = {} on {route:?}", v.b);
            let f0 = char_fn(&p, 0.4, 0.05, tau, c(0.0, 0.0), route).unwrap();
            assert!((f0 - c(1.0, 0.0)).norm() <= 1e-9, "f(0) != 1 on {route:?}");
        }
        // heun route with a linear eta
        p.eta1 = rng.gen_range(0.05..0.2);
        for route in [Route::Auto, Route::Heun, Route::Numeric] {
            let v = cf_coeffs(&p, c(0.0, -1.0), tau, route).unwrap();
            assert!(v.a.norm() <= 1e-9);
            assert!(v.b.norm() <= 1e-9);
        }
    }
}

#[test]
fn hermitian_symmetry_of_char_fn() {
    let p = LinearParams {
        kappa1: 0.3,
        kappa2: 1.2,
        theta1: 0.01,
        theta2: 0.05,
        eta1: 0.0,
        eta2: 0.35,
        rho1: 0.05,
        rho2: -0.4,
    };
    for route in [Route::Closed, Route::Numeric] {
        for &om in &[0.7, 3.0, 11.0] {
            let fp = char_fn(&p, 0.2, 0.04, 1.3, c(om, 0.0), route).unwrap();
            let fm = char_fn(&p, 0.2, 0.04, 1.3, c(-om, 0.0), route).unwrap();
            assert!(
                (fm - fp.conj()).norm() <= 1e-9 * (1.0 + fp.norm()),
                "f(-w) != conj f(w) at omega={om} on {route:?}"
            );
        }
    }
}

#[test]
fn char_fn_bounded_by_one_for_real_omega() {
    let p = LinearParams {
        kappa1: 0.4,
        kappa2: 0.9,
        theta1: 0.0,
        theta2: 0.06,
        eta1: 0.1,
        eta2: 0.3,
        rho1: 0.0,
        rho2: -0.6,
    };
    for &om in &[0.25, 1.0, 5.0, 20.0, 60.0] {
        let f = char_fn(&p, 0.1, 0.05, 1.5, c(om, 0.0), Route::Numeric).unwrap();
        assert!(f.norm() <= 1.0 + 1e-9, "|f({om})| = {} > 1", f.norm());
    }
}

#[test]
fn initial_conditions_exact_on_every_route() {
    let mut p = random_closed_params(&mut StdRng::seed_from_u64(3), 1.0);
    for route in [Route::Auto, Route::Closed, Route::Numeric] {
        let v = cf_coeffs(&p, c(2.5, 0.0), 0.0, route).unwrap();
        assert_eq!(v.a, c(0.0, 0.0));
        assert_eq!(v.b, c(0.0, 0.0));
        assert_eq!(v.c, c(0.0, 2.5));
    }
    p.eta1 = 0.15;
    let v = cf_coeffs(&p, c(2.5, 0.0), 0.0, Route::Heun).unwrap();
    assert_eq!(v.a, c(0.0, 0.0));
    assert_eq!(v.b, c(0.0, 0.0));
}

#[test]
fn series_engine_agrees_with_kummer_built_solution() {
    // Solve the linearized constant-eta D-equation two ways at tau = 0.5:
    // by the tau-domain series engine and by the Kummer-form closed B.
    let p = LinearParams {
        kappa1: 0.7,
        kappa2: 1.1,
        theta1: 0.0,
        theta2: 0.04,
        eta1: 0.0,
        eta2: 0.45,
        rho1: 0.15,
        rho2: -0.35,
    };
    let omega = c(1.8, 0.0);
    let tau = 0.5;
    use tdheston::specfun::{Poly, PolyCoeffOde, SeriesPolicy};
    let alpha = tdheston::charfn::riccati_alpha(omega);
    let eta = p.eta2;
    let gamma = 0.5 * eta * eta;
    let g1 = c(p.kappa1, 0.0) - c(0.0, p.rho1 * eta) * omega;
    let g2 = c(p.kappa2, 0.0) - c(0.0, p.rho2 * eta) * omega;
    // D'' + (g1 t + g2) D' + alpha gamma D = 0, D(0)=1, D'(0)=0
    let ode = PolyCoeffOde {
        leading: Poly::constant(c(1.0, 0.0)),
        p: Poly(vec![g2, g1]),
        q: Poly::constant(alpha * gamma),
    };
    let sol = ode
        .solve_series(c(1.0, 0.0), c(0.0, 0.0), &SeriesPolicy::default())
        .unwrap();
    let (d, dp) = sol.eval(c(tau, 0.0)).unwrap();
    let b_series = -dp / (gamma * d);
    let b_kummer = b_closed_constant_eta(&p, omega, tau).unwrap();
    assert!(
        (b_series - b_kummer).norm() <= 1e-10 * (1.0 + b_kummer.norm()),
        "series {b_series} vs kummer {b_kummer}"
    );
}
