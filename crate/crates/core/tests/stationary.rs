use mflq_core::model::{Horizon, ModelParams, Signal};
use mflq_core::stationary::{
    build_csplitting, detect_variant, ms_stable, solve_Pi, solve_stationary, solve_stationary_P,
    solve_stationary_k_general, solve_stationary_offsets, stationary_gains, KRoute,
    StationaryOptions, Variant, AXIS_TOL,
};
use mflq_core::{linalg, riccati, Error};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn scalar(a: f64, b: f64, q: f64, r: f64) -> ModelParams {
    let mut p = ModelParams::zeros(1, 1, Horizon::Infinite);
    p.a[(0, 0)] = a;
    p.b[(0, 0)] = b;
    p.q[(0, 0)] = q;
    p.r[(0, 0)] = r;
    p
}

fn opts() -> StationaryOptions {
    StationaryOptions::default()
}

fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "bracket does not straddle a root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn scalar_are_matches_quadratic_root() {
    let params = scalar(1.0, 1.0, 1.0, 1.0);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    // 2 a P - P^2 b^2 / r + q = 0, positive root.
    let (a, q) = (1.0_f64, 1.0_f64);
    let root = a + (a * a + q).sqrt();
    assert!((2.0 * a * root - root * root + q).abs() < 1e-12);
    assert!((p[(0, 0)] - (1.0 + 2.0_f64.sqrt())).abs() <= 1e-10, "{}", p[(0, 0)]);
}

#[test]
fn scalar_are_with_state_noise_matches_bisection() {
    let (a, b, c, d, q, r) = (0.3, 1.0, 0.4, 0.5, 1.0, 1.0);
    let mut params = scalar(a, b, q, r);
    params.c[(0, 0)] = c;
    params.d[(0, 0)] = d;
    let p = solve_stationary_P(&params, &opts()).unwrap()[(0, 0)];
    let resid = |x: f64| (2.0 * a + c * c) * x - (b * x + c * d * x).powi(2) / (r + d * d * x) + q;
    assert!(resid(p).abs() <= 1e-10, "residual {}", resid(p));
    // The residual is positive at 0 and eventually negative; the stabilizing
    // root is the one crossed from above.
    let oracle = bisect(0.0, 100.0, resid);
    assert!((p - oracle).abs() <= 1e-9, "{p} vs {oracle}");
}

#[test]
fn zero_state_weight_gives_zero_p() {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.a = m(2, 2, &[-1.0, 0.3, 0.0, -0.5]);
    params.b = m(2, 1, &[1.0, 0.5]);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    assert_eq!(p, DMatrix::zeros(2, 2));
}

#[test]
fn stationary_p_properties_n2() {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.a = m(2, 2, &[0.2, 1.0, -0.3, 0.1]);
    params.b = m(2, 1, &[1.0, 0.4]);
    params.c = m(2, 2, &[0.2, 0.0, 0.1, 0.1]);
    params.d = m(2, 1, &[0.3, 0.0]);
    params.c0 = m(2, 2, &[0.1, 0.0, 0.0, 0.2]);
    params.d0 = m(2, 1, &[0.0, 0.2]);
    params.q = m(2, 2, &[1.0, 0.2, 0.2, 0.5]);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    assert!(linalg::asymmetry(&p) <= 1e-10);
    assert!(linalg::min_sym_eigenvalue(&p) >= -1e-9);
    assert!(riccati::p_rhs(&params, &p).norm() <= 1e-8);
}

#[test]
fn unstabilizable_pair_is_rejected() {
    // b = 0 and a > 0: no feedback can stabilize.
    let params = scalar(0.5, 0.0, 1.0, 1.0);
    let err = solve_stationary_P(&params, &opts()).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { .. } | Error::NotStabilizing(_)), "{err}");
}

#[test]
fn ms_stable_scalar_sign_test() {
    let s = |a: f64, c: f64, c0: f64| {
        ms_stable(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, c),
            &DMatrix::from_element(1, 1, c0),
        )
    };
    assert!(s(-1.0, 0.0, 0.0));
    assert!(!s(-0.5, 1.0, 0.5));
    // Exactly on the boundary: 2a + c^2 + c0^2 = 0.
    assert!(!s(-0.5, 1.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (a, c, c0) = (
            rng.random_range(-2.0..1.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        );
        assert_eq!(s(a, c, c0), 2.0 * a + c * c + c0 * c0 < 0.0);
    }
}

/// Euler-Maruyama estimate of `E|x(T)|^2` for `dx = A x dt + C x dW + C0 x dW0`
/// with `x(0)` uniform on the circle of radius `sqrt 2`, so `E x(0) x(0)^T = I`.
fn mc_second_moment(a: &DMatrix<f64>, c: &DMatrix<f64>, c0: &DMatrix<f64>, t: f64) -> f64 {
    let steps = 2000;
    let dt = t / steps as f64;
    let sq = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let paths = 4000;
    let mut acc = 0.0;
    for _ in 0..paths {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut x = DVector::from_vec(vec![theta.cos(), theta.sin()]) * 2.0_f64.sqrt();
        for _ in 0..steps {
            let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sq;
            let dw0: f64 = rng.sample::<f64, _>(StandardNormal) * sq;
            x = &x + a * &x * dt + c * &x * dw + c0 * &x * dw0;
        }
        acc += x.norm_squared();
    }
    acc / paths as f64
}

#[test]
fn ms_stable_agrees_with_monte_carlo_growth() {
    let a = m(2, 2, &[-0.5, 0.4, 0.0, -0.6]);
    let c = m(2, 2, &[0.3, 0.0, 0.2, 0.3]);
    let c0 = m(2, 2, &[0.2, 0.0, 0.0, 0.2]);
    // Stable case: second moment decays from E|x0|^2 = 2.
    assert!(ms_stable(&a, &c, &c0));
    let decayed = mc_second_moment(&a, &c, &c0, 10.0);
    assert!(decayed < 0.5, "second moment {decayed}");
    // An unstable drift mode with the same noise: typical paths grow too, so
    // a modest sample resolves the growth.
    let a_up = m(2, 2, &[0.15, 0.4, 0.0, -0.6]);
    assert!(!ms_stable(&a_up, &c, &c0));
    let grown = mc_second_moment(&a_up, &c, &c0, 4.0);
    assert!(grown > 4.0, "second moment {grown}");
    // Deterministic n = 2: matches the sign of the abscissa of A (+) A.
    let z = DMatrix::zeros(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..0.6));
        let absc = linalg::spectral_abscissa(&a).unwrap();
        if absc.abs() > 1e-6 {
            assert_eq!(ms_stable(&a, &z, &z), absc < 0.0);
        }
    }
}

#[test]
fn worked_splitting_instance() {
    let params = scalar(0.0, 1.0, 1.0, 1.0);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    assert!((p[(0, 0)] - 1.0).abs() <= 1e-12);
    let cs = build_csplitting(&params, &p, Variant::A).unwrap();
    assert_eq!(cs.m, m(2, 2, &[0.0, -1.0, -1.0, 0.0]));
    assert_eq!((cs.eigen_split.stable, cs.eigen_split.unstable), (1, 1));
    let pi = solve_Pi(&params, &p, Variant::A).unwrap();
    assert!((pi[(0, 0)] - 1.0).abs() <= 1e-12);
    assert!(cs.residual(&pi) <= 1e-12);
}

#[test]
fn decoupled_hamiltonian_pairs_eigenvalues() {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.a = m(2, 2, &[0.1, 1.0, 0.0, -0.4]);
    params.b = m(2, 1, &[0.0, 1.0]);
    params.q = DMatrix::identity(2, 2);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    let cs = build_csplitting(&params, &p, Variant::A).unwrap();
    assert!(cs.is_splitting());
    let mut re: Vec<f64> = cs.eigenvalues.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    for i in 0..2 {
        assert!((re[i] + re[3 - i]).abs() < 1e-10, "{re:?}");
    }
    // Decoupled: Pi coincides with P.
    let pi = solve_Pi(&params, &p, Variant::A).unwrap();
    assert!((&pi - &p).norm() < 1e-8);
}

#[test]
fn null_problem_has_zero_pi() {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.a = -DMatrix::identity(2, 2);
    params.b = m(2, 1, &[1.0, 1.0]);
    params.q = DMatrix::identity(2, 2);
    params.gamma = DMatrix::identity(2, 2);
    let p = solve_stationary_P(&params, &opts()).unwrap();
    let pi = solve_Pi(&params, &p, Variant::A).unwrap();
    assert!(pi.norm() < 1e-12, "{pi}");
}

#[test]
fn non_scalar_common_noise_is_a_precondition_error() {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.c0 = m(2, 2, &[0.1, 0.0, 0.0, 0.2]);
    let p = DMatrix::zeros(2, 2);
    assert!(matches!(
        build_csplitting(&params, &p, Variant::A),
        Err(Error::Precondition(_))
    ));
    params.d0 = m(2, 1, &[1.0, 0.0]);
    params.c0 = DMatrix::identity(2, 2) * 0.1;
    assert!(matches!(
        build_csplitting(&params, &p, Variant::A),
        Err(Error::Precondition(_))
    ));
    assert_eq!(detect_variant(&params), None);
}

#[test]
fn imaginary_axis_eigenvalues_refuse_to_split() {
    let params = scalar(0.0, 0.0, 0.0, 1.0);
    let p = DMatrix::zeros(1, 1);
    let cs = build_csplitting(&params, &p, Variant::A).unwrap();
    assert_eq!(cs.eigen_split.boundary, 2);
    assert!(matches!(
        solve_Pi(&params, &p, Variant::A),
        Err(Error::NoSplitting { .. })
    ));
}

/// Symmetric data `C = D = 0`, `C0 = k I`, `D0 = 0`, `G = l I`, `F = F0 = 0`,
/// `Gamma = gamma I`: the `Pi` equation is the symmetric ARE with drift
/// `A + (l + k^2)/2 I`, no state noise and weight `Q (1 - gamma)`.
#[test]
fn symmetric_case_routes_agree() {
    let (l, k, gamma) = (0.1, 0.2, 0.3);
    let mut params = ModelParams::zeros(2, 2, Horizon::Infinite);
    params.a = m(2, 2, &[-0.2, 0.5, 0.1, 0.3]);
    params.b = m(2, 2, &[1.0, 0.0, 0.3, 0.8]);
    params.r = m(2, 2, &[1.0, 0.1, 0.1, 0.5]);
    params.q = m(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    params.c0 = DMatrix::identity(2, 2) * k;
    params.g = DMatrix::identity(2, 2) * l;
    params.gamma = DMatrix::identity(2, 2) * gamma;
    let p = solve_stationary_P(&params, &opts()).unwrap();
    let pi = solve_Pi(&params, &p, Variant::A).unwrap();

    let mut sym = params.clone();
    sym.a = &params.a + DMatrix::identity(2, 2) * (0.5 * (l + k * k));
    sym.c0 = DMatrix::zeros(2, 2);
    sym.g = DMatrix::zeros(2, 2);
    sym.q = &params.q * (1.0 - gamma);
    sym.gamma = DMatrix::zeros(2, 2);
    let pi_sym = solve_stationary_P(&sym, &opts()).unwrap();
    assert!((&pi - &pi_sym).amax() <= 1e-8, "{pi} vs {pi_sym}");
}

#[test]
fn eigen_split_is_similarity_invariant() {
    let mut params = ModelParams::zeros(3, 1, Horizon::Infinite);
    params.a = m(3, 3, &[0.1, 0.4, 0.0, -0.2, 0.0, 0.5, 0.3, 0.1, -0.6]);
    params.b = m(3, 1, &[1.0, 0.0, 0.5]);
    params.g = m(3, 3, &[0.1, 0.0, 0.0, 0.2, 0.0, 0.1, 0.0, 0.0, 0.1]);
    params.q = DMatrix::identity(3, 3);
    params.c0 = DMatrix::identity(3, 3) * 0.2;
    let p = solve_stationary_P(&params, &opts()).unwrap();
    let cs = build_csplitting(&params, &p, Variant::A).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let raw = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let q = raw.qr().q();
        let sim = q.transpose() * &cs.m * &q;
        let eigs = linalg::eigenvalues(&sim).unwrap();
        let stable = eigs.iter().filter(|z| z.re < -AXIS_TOL).count();
        let unstable = eigs.iter().filter(|z| z.re > AXIS_TOL).count();
        assert_eq!((stable, unstable), (cs.eigen_split.stable, cs.eigen_split.unstable));
    }
}

#[test]
fn scalar_offset_matches_direct_formula() {
    let (a, b, g, r, q, gamma, f, eta) = (-0.2, 1.0, 0.3, 0.5, 1.0, 0.4, 1.0, 0.0);
    let mut params = scalar(a, b, q, r);
    params.g[(0, 0)] = g;
    params.gamma[(0, 0)] = gamma;
    params.drift_offset = Signal::constant(&[f]);
    params.target = Signal::constant(&[eta]);
    let sol = solve_stationary(&params, &opts()).unwrap();
    let pi = sol.p[(0, 0)] + sol.k[(0, 0)];
    // Offset equation with C = C0 = D = D0 = 0: (a - b^2 Pi / r) phi + Pi f - q eta = 0.
    let phi = -(pi * f - q * eta) / (a - b * b * pi / r);
    assert!((sol.phi_bar[0] - phi).abs() <= 1e-12 * phi.abs().max(1.0));
    assert!(sol.residuals.phi <= 1e-12);
}

#[test]
fn zero_offsets_give_zero_phi() {
    let params = scalar(0.5, 1.0, 1.0, 1.0);
    let sol = solve_stationary(&params, &opts()).unwrap();
    assert_eq!(sol.phi_bar[0], 0.0);
}

fn coupled_n2() -> ModelParams {
    let mut params = ModelParams::zeros(2, 1, Horizon::Infinite);
    params.a = m(2, 2, &[-0.3, 0.4, 0.1, -0.2]);
    params.b = m(2, 1, &[1.0, 0.5]);
    params.g = m(2, 2, &[0.1, 0.0, 0.05, 0.1]);
    params.c = m(2, 2, &[0.1, 0.0, 0.0, 0.1]);
    params.d = m(2, 1, &[0.2, 0.1]);
    params.f = m(2, 2, &[0.0, 0.05, 0.0, 0.0]);
    params.c0 = DMatrix::identity(2, 2) * 0.15;
    params.f0 = m(2, 2, &[0.05, 0.0, 0.0, 0.0]);
    params.q = m(2, 2, &[1.0, 0.2, 0.2, 0.8]);
    params.gamma = m(2, 2, &[0.3, 0.0, 0.1, 0.2]);
    params.drift_offset = Signal::constant(&[0.5, -0.2]);
    params.noise_offset = Signal::constant(&[0.1, 0.2]);
    params.common_noise_offset = Signal::constant(&[0.3, 0.0]);
    params.target = Signal::constant(&[1.0, 0.5]);
    params
}

#[test]
fn n2_offset_substitution_residual() {
    let params = coupled_n2();
    let sol = solve_stationary(&params, &opts()).unwrap();
    assert_eq!(sol.k_route, KRoute::Split(Variant::A));
    let drift = riccati::phi_rhs(&params, &sol.p, &sol.k, &sol.phi_bar, 0.0);
    assert!(drift.norm() <= 1e-10, "{drift}");
    let again = solve_stationary_offsets(&params, &sol.p, &sol.k).unwrap();
    assert_eq!(again, sol.phi_bar);
}

#[test]
fn split_and_general_routes_agree_on_k() {
    let params = coupled_n2();
    let sol = solve_stationary(&params, &opts()).unwrap();
    let pi = sol.pi.as_ref().unwrap();
    // K is defined as Pi - P, so the difference vanishes identically.
    assert_eq!(pi - &sol.p - &sol.k, DMatrix::zeros(2, 2));
    assert!(sol.residuals.k <= 1e-8 && sol.residuals.p <= 1e-8);
    let general = solve_stationary_k_general(&params, &sol.p, &opts()).unwrap();
    assert!(general.certified);
    assert!((&general.k - &sol.k).amax() <= 1e-8);
    assert!(sol.is_certified());
}

#[test]
fn general_route_with_control_in_common_noise() {
    let mut params = coupled_n2();
    params.d0 = m(2, 1, &[0.1, 0.0]);
    assert_eq!(detect_variant(&params), None);
    let sol = solve_stationary(&params, &opts()).unwrap();
    assert_eq!(sol.k_route, KRoute::General);
    assert!(sol.pi.is_none());
    assert!(sol.k_certified);
    assert!(sol.residuals.k <= 1e-8);
}

#[test]
fn gains_annihilate_the_stationarity_identity() {
    let params = coupled_n2();
    let sol = solve_stationary(&params, &opts()).unwrap();
    let (ls, _, _) = sol.law.gains(0);
    let (ups, phi) = riccati::upsilon_phi(&params, &sol.p);
    assert!((phi + ups * ls).amax() <= 1e-10);
}

#[test]
fn null_problem_has_zero_gains() {
    let params = scalar(-1.0, 1.0, 0.0, 1.0);
    let sol = solve_stationary(&params, &opts()).unwrap();
    let (ls, lm, c) = sol.law.gains(0);
    assert_eq!((ls[(0, 0)], lm[(0, 0)], c[0]), (0.0, 0.0, 0.0));
}

#[test]
fn indefinite_weight_cites_assumption() {
    let params = scalar(-1.0, 1.0, 0.0, -1.0);
    let z = DMatrix::zeros(1, 1);
    let err = stationary_gains(&params, &z, &z, &DVector::zeros(1)).unwrap_err();
    assert!(err.to_string().contains("(A6)"), "{err}");
}

#[test]
fn finite_horizon_is_rejected() {
    let mut params = scalar(1.0, 1.0, 1.0, 1.0);
    params.horizon = Horizon::Finite(1.0);
    assert!(matches!(
        solve_stationary(&params, &opts()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn long_horizon_second_moment_stays_bounded() {
    let (a, b, c, c0, g, sigma, sigma0, f) = (0.5, 1.0, 0.2, 0.1, 0.1, 0.3, 0.2, 0.5);
    let mut params = scalar(a, b, 1.0, 1.0);
    params.c[(0, 0)] = c;
    params.c0[(0, 0)] = c0;
    params.g[(0, 0)] = g;
    params.gamma[(0, 0)] = 0.3;
    params.drift_offset = Signal::constant(&[f]);
    params.noise_offset = Signal::constant(&[sigma]);
    params.common_noise_offset = Signal::constant(&[sigma0]);
    params.target = Signal::constant(&[1.0]);
    let sol = solve_stationary(&params, &opts()).unwrap();
    assert!(sol.loops.deviation_loop && sol.loops.mean_field_loop);
    let (ls, lm, off) = sol.law.gains(0);
    let (ls, lm, off) = (ls[(0, 0)], lm[(0, 0)], off[0]);

    let dt: f64 = 0.01;
    let steps = 20_000;
    let sq = dt.sqrt();
    let paths = 1000;
    let mut second = vec![0.0; steps / 1000 + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..paths {
        let (mut x, mut xb) = (0.0_f64, 0.0_f64);
        for s in 0..steps {
            if s % 1000 == 0 {
                second[s / 1000] += x * x;
            }
            let u = ls * (x - xb) + lm * xb + off;
            let ub = lm * xb + off;
            let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sq;
            let dw0: f64 = rng.sample::<f64, _>(StandardNormal) * sq;
            let x_next = x + (a * x + b * u + g * xb + f) * dt + (c * x + sigma) * dw
                + (c0 * x + sigma0) * dw0;
            xb += ((a + g) * xb + b * ub + f) * dt + (c0 * xb + sigma0) * dw0;
            x = x_next;
        }
        second[steps / 1000] += x * x;
    }
    for v in second.iter_mut() {
        *v /= paths as f64;
    }
    assert!(second.iter().all(|v| v.is_finite()));
    let early: f64 = second[5..11].iter().sum::<f64>() / 6.0;
    let late: f64 = second[15..21].iter().sum::<f64>() / 6.0;
    assert!((late / early - 1.0).abs() < 0.2, "{early} vs {late}");
}
