use mflq_core::model::{
    cross_term_transform, discount_transform, presets, Horizon, ModelParams, Signal,
};
use mflq_core::riccati::{solve_riccati, RangePolicy, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `-W' = (2a + c^2 - rho) W - b^2 W^2 / r + q`, `W(T) = h`, by RK4 on a fine
/// grid. `W(0) x^2` is the optimal discounted cost from `x` at time zero.
fn discounted_value(a: f64, b: f64, c: f64, q: f64, r: f64, h: f64, rho: f64, t: f64) -> f64 {
    let rhs = |w: f64| (2.0 * a + c * c - rho) * w - b * b * w * w / r + q;
    let steps = 200_000;
    let dt = t / steps as f64;
    let mut w = h;
    for _ in 0..steps {
        let k1 = rhs(w);
        let k2 = rhs(w + 0.5 * dt * k1);
        let k3 = rhs(w + 0.5 * dt * k2);
        let k4 = rhs(w + dt * k3);
        w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

#[test]
fn discounted_model_matches_discounted_value_function() {
    let (a, b, c, q, r, h, rho, t) = (0.3, 1.2, 0.4, 2.0, 0.5, 1.5, 0.8, 2.0);
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let mut params = ModelParams::zeros(1, 1, Horizon::Finite(t));
    params.a = s(a);
    params.b = s(b);
    params.c = s(c);
    params.q = s(q);
    params.r = s(r);
    params.h = s(h);
    let out = discount_transform(&params, rho).unwrap();
    let grid = TimeGrid::new(t, 2000).unwrap();
    let sol = solve_riccati(&out, &grid, RangePolicy::Strict).unwrap();
    let expected = discounted_value(a, b, c, q, r, h, rho, t);
    assert!(
        (sol.p[0][(0, 0)] - expected).abs() <= 1e-9 * expected.abs(),
        "{} vs {expected}",
        sol.p[0][(0, 0)]
    );
}

#[test]
fn discounted_offsets_decay() {
    let mut params = presets::paper_sec4();
    params.drift_offset = Signal::constant(&[1.0, -2.0]);
    params.terminal_target = DVector::from_vec(vec![3.0, 1.0]);
    let rho = 0.4;
    let out = discount_transform(&params, rho).unwrap();
    for t in [0.0, 1.5, 10.0] {
        let f = out.drift_offset.eval(t);
        let scale = (-0.5 * rho * t).exp();
        assert!((f[0] - scale).abs() < 1e-14 && (f[1] + 2.0 * scale).abs() < 1e-14);
    }
    let e = (-0.5 * rho * 10.0_f64).exp();
    assert!((out.terminal_target[0] - 3.0 * e).abs() < 1e-14);
    assert!(discount_transform(&ModelParams::zeros(1, 1, Horizon::Infinite), rho).is_err());
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn cross_term_model_has_the_same_dynamics_and_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, r) = (2, 2);
    let mut params = ModelParams::zeros(n, r, Horizon::Finite(1.0));
    params.a = random_matrix(&mut rng, n, n);
    params.b = random_matrix(&mut rng, n, r);
    params.g = random_matrix(&mut rng, n, n);
    params.c = random_matrix(&mut rng, n, n);
    params.d = random_matrix(&mut rng, n, r);
    params.f = random_matrix(&mut rng, n, n);
    params.c0 = random_matrix(&mut rng, n, n);
    params.d0 = random_matrix(&mut rng, n, r);
    params.f0 = random_matrix(&mut rng, n, n);
    params.gamma = random_matrix(&mut rng, n, n);
    params.q = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
    params.r = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 1.0]);
    params.drift_offset = Signal::constant(&[0.3, -0.2]);
    params.noise_offset = Signal::constant(&[0.1, 0.4]);
    params.common_noise_offset = Signal::constant(&[-0.5, 0.2]);
    params.target = Signal::constant(&[1.0, -1.0]);
    let s = random_matrix(&mut rng, n, r) * 0.5;
    let (out, shift) = cross_term_transform(&params, &s).unwrap();

    for _ in 0..50 {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let xa = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let v = DVector::from_fn(r, |_, _| rng.random_range(-3.0..3.0));
        let t = rng.random_range(0.0..1.0);
        let u = shift.to_transformed(&v, &x, &xa, t);

        let coeffs = |m: &ModelParams, ctl: &DVector<f64>| {
            [
                &m.a * &x + &m.b * ctl + &m.g * &xa + m.drift_offset.eval(t),
                &m.c * &x + &m.d * ctl + &m.f * &xa + m.noise_offset.eval(t),
                &m.c0 * &x + &m.d0 * ctl + &m.f0 * &xa + m.common_noise_offset.eval(t),
            ]
        };
        for (orig, new) in coeffs(&params, &v).iter().zip(coeffs(&out, &u).iter()) {
            assert!((orig - new).amax() < 1e-10);
        }

        let e = &x - &params.gamma * &xa - params.target.eval(t);
        let cost_orig = (e.transpose() * &params.q * &e)[0]
            + 2.0 * (e.transpose() * &s * &v)[0]
            + (v.transpose() * &params.r * &v)[0];
        let cost_new = (e.transpose() * &out.q * &e)[0] + (u.transpose() * &out.r * &u)[0];
        assert!((cost_orig - cost_new).abs() < 1e-10 * cost_orig.abs().max(1.0));
        assert!((shift.to_original(&u, &x, &xa, t) - &v).amax() < 1e-12);
    }
}
