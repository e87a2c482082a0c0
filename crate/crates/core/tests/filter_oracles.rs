mod oracles;

use nalgebra::{DMatrix, DVector};
use oracles::cases::{kalman_gap, random_tracking_problem};
use oracles::{gaussian_matrix, gaussian_vector, random_spd, rng};
use proxwarm_core::filter::{multinomial_indices, ut_lambda};
use proxwarm_core::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_psd(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> DMatrix<f64> {
    // Rank-deficient on purpose for n > 1.
    let g = gaussian_matrix(r, n, n.saturating_sub(1).max(1));
    &g * g.transpose()
}

#[test]
fn ut_is_exact_for_the_identity_map() {
    let mut r = rng(1);
    for n in 1..=8 {
        let x = gaussian_vector(&mut r, n);
        let a1 = random_psd(&mut r, n);
        let a2 = random_psd(&mut r, n);
        let out = unscented_transform(&x, &a1, &a2, |v| v.clone(), 0.1).unwrap();
        assert!((&out.mean - &x).amax() <= 1e-10, "n = {n}");
        assert!((&out.output_cov - (&a1 + &a2)).amax() <= 1e-10, "n = {n}");
        assert!((&out.cross_cov - &a1).amax() <= 1e-10, "n = {n}");
    }
}

#[test]
fn ut_is_exact_for_affine_maps() {
    let mut r = rng(2);
    let n = 5;
    let x = gaussian_vector(&mut r, n);
    let a1 = random_spd(&mut r, n, 0.1);
    let m = gaussian_matrix(&mut r, 3, n);
    let c = gaussian_vector(&mut r, 3);
    let out = unscented_transform(&x, &a1, &DMatrix::zeros(3, 3), |v| &m * v + &c, 0.1).unwrap();
    assert!((&out.mean - (&m * &x + &c)).amax() <= 1e-9);
    assert!((&out.output_cov - &m * &a1 * m.transpose()).amax() <= 1e-9);
    assert!((&out.cross_cov - &a1 * m.transpose()).amax() <= 1e-9);
}

#[test]
fn ut_lambda_for_four_states() {
    let lambda = ut_lambda(4, 0.1);
    assert!((lambda + 3.96).abs() < 1e-12);
    assert!((4.0 + lambda - 0.04).abs() < 1e-12);
}

#[test]
fn softplus_mean_matches_monte_carlo() {
    let mut r = rng(3);
    let x = DVector::from_vec(vec![0.3, -0.5]);
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
    let phi = |v: &DVector<f64>| v.map(softplus);
    let ut = unscented_transform(&x, &a, &DMatrix::zeros(2, 2), phi, 0.1).unwrap();
    let root = a.clone().cholesky().unwrap().l();
    let samples = 1_000_000;
    let mut acc = DVector::zeros(2);
    for _ in 0..samples {
        let z = DVector::from_fn(2, |_, _| r.sample::<f64, _>(StandardNormal));
        acc += phi(&(&x + &root * z));
    }
    let mc = acc / samples as f64;
    for i in 0..2 {
        assert!((ut.mean[i] - mc[i]).abs() <= 0.05 * mc[i].abs(), "component {i}: ut {} mc {}", ut.mean[i], mc[i]);
    }
}

#[test]
fn psd_root_reconstructs_random_matrices() {
    let mut r = rng(4);
    for n in 1..=10 {
        let a = random_psd(&mut r, n);
        let s = matrix_sqrt_psd(&a).unwrap();
        let err = (&s * s.transpose() - &a).norm();
        assert!(err <= 1e-8 * (1.0 + a.norm()));
    }
}

#[test]
fn virtual_system_blocks() {
    let p = build_benchmark(&preset_scenario("two-agent").unwrap()).unwrap();
    let sys = build_virtual_system(&p, 10.0).unwrap();
    let (nx, nu) = (p.nx(), p.nu());
    assert_eq!(sys.transition.view((0, 0), (nx, nx)), p.a.view((0, 0), (nx, nx)));
    assert_eq!(sys.transition.view((0, nx), (nx, nu)), p.b.view((0, 0), (nx, nu)));
    assert_eq!(sys.transition.rows(nx, nu).amax(), 0.0);
    assert_eq!(sys.process_cov.view((0, 0), (nx, nx)).amax(), 0.0);
    assert_eq!(sys.targets.len(), p.horizon);
    for (k, t) in sys.targets.iter().enumerate() {
        assert_eq!(t.rows(0, p.ny()), p.reference[k].rows(0, p.ny()));
        assert!(t.rows(p.ny(), t.len() - p.ny()).iter().all(|&v| v == -10.0));
    }
}

#[test]
fn process_and_measurement_blocks_match_dense_inverses() {
    let p = random_tracking_problem(5, 4, 3, 2, 5);
    let sys = build_virtual_system(&p, 10.0).unwrap();
    let (nx, nu, ny) = (p.nx(), p.nu(), p.ny());
    let r_inv = p.r.clone().try_inverse().unwrap();
    let q_inv = p.q.clone().try_inverse().unwrap();
    assert!((sys.process_cov.view((nx, nx), (nu, nu)) - r_inv).amax() <= 1e-10);
    assert!((sys.measurement_cov.view((0, 0), (ny, ny)) - q_inv).amax() <= 1e-10);
}

#[test]
fn output_top_block_is_linear() {
    let p = build_benchmark(&preset_scenario("two-agent").unwrap()).unwrap();
    let sys = build_virtual_system(&p, 10.0).unwrap();
    let mut r = rng(6);
    for _ in 0..20 {
        let xi = gaussian_vector(&mut r, sys.dim()) * 5.0;
        let out = sys.output(&xi);
        let cx = &p.c * xi.rows(0, p.nx());
        assert_eq!(out.rows(0, p.ny()).into_owned(), cx);
        assert!(out.rows(p.ny(), out.len() - p.ny()).iter().all(|&v| v > 0.0));
    }
}

#[test]
fn single_particle_without_noise_is_a_kalman_filter() {
    let gap = kalman_gap(1e-24);
    assert!(gap <= 1e-8, "max deviation {gap:e}");
}

#[test]
fn resampling_frequencies_match_weights() {
    let weights = [0.05, 0.3, 0.1, 0.15, 0.4];
    let mut r = rng(10);
    let rounds = 10_000;
    let mut counts = [0usize; 5];
    for _ in 0..rounds {
        for j in multinomial_indices(&weights, std::iter::repeat_with(|| r.random::<f64>())) {
            counts[j] += 1;
        }
    }
    let total = (rounds * weights.len()) as f64;
    for (j, &w) in weights.iter().enumerate() {
        let freq = counts[j] as f64 / total;
        let se = (w * (1.0 - w) / total).sqrt();
        assert!((freq - w).abs() <= 3.0 * se, "index {j}: {freq} vs {w}");
    }
}

fn two_agent_ensemble(seed: u64) -> ParticleEnsemble {
    let p = build_benchmark(&preset_scenario("two-agent").unwrap()).unwrap();
    let sys = build_virtual_system(&p, 10.0).unwrap();
    particle_filter(&sys, &FilterConfig::new(sys.dim(), seed)).unwrap()
}

#[test]
fn weights_are_normalized_and_histories_complete() {
    let ens = two_agent_ensemble(3);
    assert_eq!(ens.len(), 30);
    assert_eq!(ens.horizon(), 30);
    for row in &ens.weights {
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert!(row.iter().all(|&w| w >= 0.0));
    }
    for cov in &ens.covariances {
        assert!((cov - cov.transpose()).amax() <= 1e-9);
    }
    for traj in ensemble_to_trajectories(&ens) {
        assert_eq!(traj.horizon(), 30);
        assert_eq!(traj.states[0].len(), 8);
        assert_eq!(traj.inputs[0].len(), 4);
    }
}

#[test]
fn filter_is_deterministic_across_thread_counts() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| two_agent_ensemble(17))
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a, two_agent_ensemble(18));
}

#[test]
fn ensemble_json_round_trip() {
    let ens = two_agent_ensemble(5);
    let back = ParticleEnsemble::from_json(&ens.to_json().unwrap()).unwrap();
    assert_eq!(back, ens);
}
