//! Cross-module checks of the simulator against the closed-form maps.

use sigprop::sim::rng::{derive_stream, tag};
use sigprop::{
    attention_forward, beta_critical, generate_sequence, layer_norm_apply, measure_geometry,
    run_sa_phase_experiment, sa_update, AttentionParams, GeometryState,
};

/// Empirical single-layer similarity update converges toward the asymptotic
/// map as the sequence grows, at a point away from the transition.
#[test]
fn single_layer_similarity_converges_in_t() {
    let rho = 0.3;
    let beta = 1.0; // beta_c(0.3) = 1.690, |beta - beta_c| = 0.41 > 0.2 beta_c
    let d = 256;
    let theory = sa_update(
        GeometryState::normalized(rho).unwrap(),
        &AttentionParams::new(beta, 1024, false).unwrap(),
    )
    .unwrap()
    .rho();
    assert_eq!(theory, 1.0);

    let mut devs = Vec::new();
    for &t in &[256usize, 1024, 4096] {
        let cells = run_sa_phase_experiment(d, t, &[beta], &[rho], 4, 314).unwrap();
        devs.push((cells[0].sa_rho - theory).abs());
    }
    assert!(
        devs[0] > devs[1] && devs[1] > devs[2],
        "deviations not shrinking with T: {devs:?}"
    );
}

/// Above the transition the empirical update sits near the asymptotic value
/// already at moderate T.
#[test]
fn single_layer_above_transition_tracks_theory() {
    let rho = 0.3;
    let beta = 2.5;
    assert!(beta > beta_critical(rho).unwrap());
    let theory = sa_update(
        GeometryState::normalized(rho).unwrap(),
        &AttentionParams::new(beta, 2048, false).unwrap(),
    )
    .unwrap()
    .rho();
    let cells = run_sa_phase_experiment(256, 2048, &[beta], &[rho], 4, 11).unwrap();
    assert!(
        (cells[0].sa_rho - theory).abs() < 0.08,
        "empirical {} vs theory {theory}",
        cells[0].sa_rho
    );
}

/// At beta = 0 uniform attention maps every token near the mean token: the
/// output similarity approaches 1 up to O(1/sqrt(T)) corrections.
#[test]
fn zero_beta_output_similarity_near_one() {
    let (d, t) = (128, 1024);
    let mut x_rng = derive_stream(5, &[tag::PHASE_SEQ, 0, 0, 0]);
    let batch = generate_sequence(0.3, t, d, &mut x_rng).unwrap();
    let normed = layer_norm_apply(&batch).unwrap();
    let mut w_rng = derive_stream(5, &[tag::PHASE_WEIGHTS, 0, 0, 0]);
    let (out, _) = attention_forward(&normed, 0.0, 1.0, &mut w_rng).unwrap();
    let g = measure_geometry(&out).unwrap();
    assert!(g.rho_mean > 0.99, "rho = {}", g.rho_mean);
}

/// Below the transition the cross-overlap of two attention rows is the
/// uniform-row value 1/T.
#[test]
fn small_beta_cross_overlap_is_one_over_t() {
    let (d, t) = (256usize, 512usize);
    let mut x_rng = derive_stream(21, &[tag::PHASE_SEQ, 0, 0, 0]);
    let batch = generate_sequence(0.2, t, d, &mut x_rng).unwrap();
    let normed = layer_norm_apply(&batch).unwrap();
    let mut w_rng = derive_stream(21, &[tag::PHASE_WEIGHTS, 0, 0, 0]);
    let (_, stats) = attention_forward(&normed, 0.1, 1.0, &mut w_rng).unwrap();
    let expected = 1.0 / t as f64;
    assert!(
        (stats.cross_overlap - expected).abs() < 0.2 * expected,
        "cross overlap {} vs 1/T = {expected}",
        stats.cross_overlap
    );
}

/// Finite-size attention update at rho = 0: empirical single-layer similarity
/// against the corrected map at T = 1024.
#[test]
fn finite_size_update_tracks_empirical_at_rho_zero() {
    let (d, t) = (512usize, 1024usize);
    let beta = 1.0;
    let cells = run_sa_phase_experiment(d, t, &[beta], &[0.0], 4, 77).unwrap();
    let theory_fs = sa_update(
        GeometryState::normalized(0.0).unwrap(),
        &AttentionParams::new(beta, t, true).unwrap(),
    )
    .unwrap()
    .rho();
    assert!(
        (cells[0].sa_rho - theory_fs).abs() < 0.05,
        "empirical {} vs finite-size theory {theory_fs}",
        cells[0].sa_rho
    );
}

/// A single tanh block with a strong attention residual: the simulated
/// similarity change matches the theory map within 0.05 at d = 512.
#[test]
fn tanh_block_matches_theory_map() {
    use sigprop::{block_forward, block_update, Activation, BlockParams, MlpParams};
    let (d, t) = (512usize, 64usize);
    let params = BlockParams::new(
        AttentionParams::new(0.02, t, false).unwrap(),
        MlpParams::new(6.25, 0.1, Activation::Tanh, 64).unwrap(),
        6.0,
        1.0,
        1.0,
    )
    .unwrap();
    let rho0 = 0.1;
    let theory = block_update(GeometryState::normalized(rho0).unwrap(), &params)
        .unwrap()
        .rho();
    let mut acc = 0.0;
    let n = 8;
    for s in 0..n {
        let mut x_rng = derive_stream(31, &[tag::SEQUENCE, s, 0]);
        let batch = generate_sequence(rho0, t, d, &mut x_rng).unwrap();
        let mut w_rng = derive_stream(31, &[tag::WEIGHTS, s, 1]);
        let (out, _) = block_forward(&batch, &params, &mut w_rng).unwrap();
        acc += measure_geometry(&out).unwrap().rho_mean;
    }
    let empirical = acc / n as f64;
    assert!(
        (empirical - theory).abs() < 0.05,
        "empirical {empirical} vs theory {theory}"
    );
}

/// Generated sequences recover their target similarity within 3/sqrt(d) for
/// every tested target.
#[test]
fn generated_similarity_concentrates() {
    let d = 512;
    for (i, &rho) in [0.0, 0.1, 0.5, 0.9].iter().enumerate() {
        let mut rng = derive_stream(99, &[tag::SEQUENCE, i as u64, 0]);
        let batch = generate_sequence(rho, 256, d, &mut rng).unwrap();
        let g = measure_geometry(&batch).unwrap();
        assert!(
            (g.rho_mean - rho).abs() < 3.0 / (d as f64).sqrt(),
            "target {rho}: got {}",
            g.rho_mean
        );
    }
}
