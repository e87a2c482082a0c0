//! Constraint-aware particle filter over a [`VirtualSystem`].
//!
//! Each particle carries a Gaussian (mean, covariance) pair that is advanced
//! by an unscented Kalman update toward the targets, then perturbed by a
//! sample scaled by the posterior covariance. Weights follow the Gaussian
//! innovation likelihood, and full particle histories are resampled
//! multinomially when `kappa * sum(w^2) >= 1`.
//!
//! The filter starts from `xi_0` and produces `xi_1..xi_N`, using the target
//! for step `k + 1` when advancing from step `k`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::VirtualSystem;
use super::ut::{matrix_sqrt_psd, unscented_transform};
use crate::error::{Error, Result};
use crate::problem::Trajectory;
use crate::serde_mat;

/// Regularization added to the innovation covariance before factoring.
pub const INNOVATION_REGULARIZATION: f64 = 1e-9;

const STREAM_NOISE: u64 = 1;
const STREAM_RESAMPLE: u64 = 2;

/// Counter-based RNG stream keyed by `(seed, domain, a, b)`.
pub fn stream_rng(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Clone, Debug)]
pub struct FilterConfig {
    pub particles: usize,
    pub kappa: f64,
    /// Variance of the per-step sampling perturbation.
    pub alpha_sampling: f64,
    /// Initial mean `xi_0`; `None` uses `[xhat_1; 0]`, or zero with `paper_init`.
    pub initial_mean: Option<DVector<f64>>,
    pub initial_cov: DMatrix<f64>,
    pub seed: u64,
    /// Unscented-transform spread parameter.
    pub theta: f64,
    /// Start every particle at `xi_0 = 0`.
    pub paper_init: bool,
}

impl FilterConfig {
    /// Defaults for a system of stacked dimension `dim`: 30 particles,
    /// `kappa = 12`, `alpha = 5e-3`, identity initial covariance.
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            particles: 30,
            kappa: 12.0,
            alpha_sampling: 5e-3,
            initial_mean: None,
            initial_cov: DMatrix::identity(dim, dim),
            seed,
            theta: 0.1,
            paper_init: false,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let m = self.particles;
        if m == 0 {
            return Err(Error::param("particles", "must be at least 1"));
        }
        // A single particle has no admissible kappa in (1, m); accept any kappa > 1.
        if !(self.kappa > 1.0 && (m == 1 || self.kappa < m as f64)) {
            return Err(Error::param("kappa", format!("must lie in (1, {m})")));
        }
        if !(self.alpha_sampling > 0.0 && self.alpha_sampling < 1.0) {
            return Err(Error::param("alpha_sampling", "must lie in (0, 1)"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param("theta", "must lie in (0, 1]"));
        }
        if self.initial_cov.shape() != (dim, dim) {
            return Err(Error::dim("initial_cov", format!("{dim}x{dim}"), format!("{:?}", self.initial_cov.shape())));
        }
        let asym = (&self.initial_cov - self.initial_cov.transpose()).amax();
        if asym > 1e-9 * (1.0 + self.initial_cov.amax()) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let min_eig = self.initial_cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 * (1.0 + self.initial_cov.amax()) {
            return Err(Error::param("initial_cov", "must be positive semidefinite"));
        }
        if let Some(mean) = &self.initial_mean {
            if mean.len() != dim {
                return Err(Error::dim("initial_mean", dim, mean.len()));
            }
        }
        Ok(())
    }
}

/// Sampled trajectories with per-step normalized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub seed: u64,
    pub nx: usize,
    pub nu: usize,
    /// `particles[i][k]` is `xi_{k+1}` of particle `i`.
    pub particles: Vec<Vec<Vec<f64>>>,
    /// `weights[k][i]`, normalized over `i` for every step.
    pub weights: Vec<Vec<f64>>,
    /// Final posterior covariance of each particle.
    #[serde(with = "cov_list")]
    pub covariances: Vec<DMatrix<f64>>,
    /// Steps (1-based) after which the ensemble was resampled.
    pub resampled_at: Vec<usize>,
}

mod cov_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Vec<f64>>> = v.iter().map(serde_mat::rows_of).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        use serde::de::Error as _;
        Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .iter()
            .map(|rows| serde_mat::from_rows(rows, 0).map_err(D::Error::custom))
            .collect()
    }
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.weights.len()
    }

    /// Stacked trajectory of particle `i`.
    pub fn stacked(&self, i: usize) -> Vec<DVector<f64>> {
        self.particles[i].iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Splits every particle into a state/input trajectory.
pub fn ensemble_to_trajectories(ensemble: &ParticleEnsemble) -> Vec<Trajectory> {
    (0..ensemble.len())
        .map(|i| {
            Trajectory::from_stacked(&ensemble.stacked(i), ensemble.nx)
                .expect("particle dimension equals nx + nu")
        })
        .collect()
}

/// Draws one index per particle with `P(j = l) = weights[l]` by inverse CDF.
pub fn multinomial_indices(weights: &[f64], uniforms: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    uniforms
        .take(weights.len())
        .map(|u| {
            let target = u * total;
            let j = cdf.partition_point(|&c| c <= target);
            let mut j = j.min(weights.len() - 1);
            // Never land on a zero-weight particle through round-off.
            while weights[j] == 0.0 && j > 0 {
                j -= 1;
            }
            j
        })
        .collect()
}

/// `kappa * sum(w^2) >= 1`.
pub fn should_resample(weights: &[f64], kappa: f64) -> bool {
    kappa * weights.iter().map(|w| w * w).sum::<f64>() >= 1.0
}

struct StepOutput {
    next: DVector<f64>,
    cov: DMatrix<f64>,
    log_weight: f64,
}

fn advance_particle(
    system: &VirtualSystem,
    config: &FilterConfig,
    xi: &DVector<f64>,
    cov: &DMatrix<f64>,
    prior_weight: f64,
    step: usize,
    particle: usize,
) -> Result<StepOutput> {
    let a = &system.transition;
    let mean = a * xi;
    let mut pred_cov = a * cov * a.transpose() + &system.process_cov;
    pred_cov = (&pred_cov + pred_cov.transpose()) * 0.5;

    let ut = unscented_transform(&mean, &pred_cov, &system.measurement_cov, |v| system.output(v), config.theta)?;
    let l = ut.mean.len();
    let u = &ut.output_cov + DMatrix::identity(l, l) * INNOVATION_REGULARIZATION;
    let u = (&u + u.transpose()) * 0.5;
    let chol = u
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovation { step, particle })?;

    // K = V U^-1, computed as (U^-1 V^T)^T.
    let gain = chol.solve(&ut.cross_cov.transpose()).transpose();
    let mut post_cov = &pred_cov - &gain * &u * gain.transpose();
    post_cov = (&post_cov + post_cov.transpose()) * 0.5;

    let innovation = &system.targets[step - 1] - &ut.mean;
    let whitened = chol.l().solve_lower_triangular(&innovation).ok_or(Error::SingularInnovation { step, particle })?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();

    let mut rng = stream_rng(config.seed, STREAM_NOISE, particle as u64, step as u64);
    let scale = config.alpha_sampling.sqrt();
    let z = DVector::from_fn(mean.len(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let root = matrix_sqrt_psd(&post_cov)?;
    let next = mean + &gain * innovation + root * z;

    let log_weight = prior_weight.ln() - 0.5 * log_det - 0.5 * whitened.norm_squared();
    Ok(StepOutput {
        next,
        cov: post_cov,
        log_weight,
    })
}

/// Runs the constraint-aware particle filter.
pub fn particle_filter(system: &VirtualSystem, config: &FilterConfig) -> Result<ParticleEnsemble> {
    let dim = system.dim();
    config.validate(dim)?;
    let m = config.particles;
    let horizon = system.horizon();

    let xi0 = match (&config.initial_mean, config.paper_init) {
        (Some(mean), _) => mean.clone(),
        (None, true) => DVector::zeros(dim),
        (None, false) => {
            let mut v = DVector::zeros(dim);
            v.rows_mut(0, system.nx()).copy_from(&system.problem.initial_state);
            v
        }
    };

    // histories[i][s] = xi_s for s = 0..=k
    let mut histories: Vec<Vec<DVector<f64>>> = vec![vec![xi0]; m];
    let mut covs: Vec<DMatrix<f64>> = vec![config.initial_cov.clone(); m];
    let mut weights: Vec<Vec<f64>> = vec![vec![1.0 / m as f64; m]];
    let mut resampled_at = Vec::new();

    for k in 0..horizon {
        let step = k + 1;
        let outputs: Vec<Result<StepOutput>> = (0..m)
            .into_par_iter()
            .map(|i| advance_particle(system, config, &histories[i][k], &covs[i], weights[k][i], step, i))
            .collect();
        let mut log_w = Vec::with_capacity(m);
        for (i, out) in outputs.into_iter().enumerate() {
            let out = out?;
            histories[i].push(out.next);
            covs[i] = out.cov;
            log_w.push(out.log_weight);
        }

        let max = log_w.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::WeightUnderflow { step });
        }
        let raw: Vec<f64> = log_w
            .iter()
            .map(|&lw| if lw.is_finite() { (lw - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::WeightUnderflow { step });
        }
        let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();

        if should_resample(&w, config.kappa) {
            let mut rng = stream_rng(config.seed, STREAM_RESAMPLE, step as u64, 0);
            let picks = multinomial_indices(&w, std::iter::repeat_with(|| rng.random::<f64>()));
            let old_hist = histories.clone();
            let old_covs = covs.clone();
            for (i, &j) in picks.iter().enumerate() {
                histories[i] = old_hist[j].clone();
                covs[i] = old_covs[j].clone();
            }
            w = vec![1.0 / m as f64; m];
            resampled_at.push(step);
        }
        weights.push(w);
    }

    let particles = histories
        .into_iter()
        .map(|h| h.into_iter().skip(1).map(|v| v.as_slice().to_vec()).collect())
        .collect();
    weights.remove(0);
    Ok(ParticleEnsemble {
        seed: config.seed,
        nx: system.nx(),
        nu: system.problem.nu(),
        particles,
        weights,
        covariances: covs,
        resampled_at,
    })
}
