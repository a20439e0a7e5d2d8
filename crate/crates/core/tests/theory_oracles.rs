//! Oracle equivalence of the closed-form kernel and the tanh quadrature:
//! independent reference integration must reproduce both to tight tolerances.

mod common;

use sigprop::{mlp_update, relu_kernel_f, Activation, GeometryState, MlpParams};

#[test]
fn relu_kernel_matches_quadrature_on_101_grid() {
    let mut worst = 0.0f64;
    let mut worst_rho = 0.0f64;
    for k in 0..=100 {
        let rho = -1.0 + 2.0 * k as f64 / 100.0;
        let quad = 2.0 * common::relu_cross_moment_oracle(rho);
        let closed = relu_kernel_f(rho).unwrap();
        let dev = (quad - closed).abs();
        if dev > worst {
            worst = dev;
            worst_rho = rho;
        }
    }
    assert!(
        worst <= 1e-6,
        "worst |quadrature - closed form| = {worst:.3e} at rho = {worst_rho}"
    );
}

#[test]
fn relu_kernel_example_value() {
    // rho = 0.5 reference value, cross-checked against the quadrature oracle.
    let closed = relu_kernel_f(0.5).unwrap();
    let quad = 2.0 * common::relu_cross_moment_oracle(0.5);
    assert!((closed - 0.60900).abs() < 1e-5);
    assert!((closed - quad).abs() < 1e-9);
}

#[test]
fn tanh_mlp_update_matches_trapezoid_oracle() {
    // sigma_w = 2.5, sigma_b^2 = 0.1; inputs (q, rho) from the stated matrix.
    let mlp = MlpParams::new(6.25, 0.1, Activation::Tanh, 64).unwrap();
    for &q in &[0.25, 1.0, 4.0] {
        for &rho in &[0.0, 0.5, 0.9, 1.0] {
            let state = GeometryState::new(q, rho * q).unwrap();
            let out = mlp_update(state, &mlp).unwrap();

            let q1 = mlp.sigma_w2 * q + mlp.sigma_b2;
            let p1 = mlp.sigma_w2 * rho * q + mlp.sigma_b2;
            let rho1 = (p1 / q1).min(1.0);
            let (second, cross) = common::tanh_moments_trapezoid(q1.sqrt(), rho1);
            let q2 = mlp.sigma_w2 * second + mlp.sigma_b2;
            let p2 = mlp.sigma_w2 * cross + mlp.sigma_b2;

            assert!(
                (out.q() - q2).abs() <= 1e-8,
                "q = {q}, rho = {rho}: q2 {} vs oracle {q2}",
                out.q()
            );
            assert!(
                (out.p() - p2).abs() <= 1e-8,
                "q = {q}, rho = {rho}: p2 {} vs oracle {p2}",
                out.p()
            );
        }
    }
}

#[test]
fn tanh_fig_example_point() {
    // (q = 1, p = 0.5) with sigma_w = 2.5, sigma_b^2 = 0.1: quadrature and the
    // dense-grid oracle agree to 1e-8.
    let mlp = MlpParams::new(6.25, 0.1, Activation::Tanh, 64).unwrap();
    let out = mlp_update(GeometryState::new(1.0, 0.5).unwrap(), &mlp).unwrap();
    let q1: f64 = 6.35;
    let rho1 = (6.25 * 0.5 + 0.1) / q1;
    let (second, cross) = common::tanh_moments_trapezoid(q1.sqrt(), rho1);
    assert!((out.q() - (6.25 * second + 0.1)).abs() <= 1e-8);
    assert!((out.p() - (6.25 * cross + 0.1)).abs() <= 1e-8);
}

#[test]
fn tanh_sigma_one_matrix_also_matches() {
    let mlp = MlpParams::new(1.0, 0.1, Activation::Tanh, 64).unwrap();
    for &q in &[0.25, 1.0, 4.0] {
        for &rho in &[0.0, 0.9] {
            let state = GeometryState::new(q, rho * q).unwrap();
            let out = mlp_update(state, &mlp).unwrap();
            let q1 = q + 0.1;
            let rho1 = (rho * q + 0.1) / q1;
            let (second, cross) = common::tanh_moments_trapezoid(q1.sqrt(), rho1);
            assert!((out.q() - (second + 0.1)).abs() <= 1e-8, "q={q} rho={rho}");
            assert!((out.p() - (cross + 0.1)).abs() <= 1e-8, "q={q} rho={rho}");
        }
    }
}
