#![allow(dead_code)]

use clwe_core::domainflow::{discriminator_objective, generator_objective, GenTargetMode, LossWeights};
use clwe_core::linalg::gaussian_matrix;
use clwe_core::nets::grad_check;
use clwe_core::{AlignmentModel, Parameters, TrainConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DIM: usize = 8;
pub const LATENT: usize = 6;
pub const BATCH: usize = 5;
/// Central-difference step. Larger steps straddle leaky-ReLU kinks in the
/// critics more often.
pub const FD_EPS: f64 = 1e-5;

/// Small model with every tensor perturbed away from its initialization.
pub fn random_model(seed: u64) -> AlignmentModel {
    let config = TrainConfig {
        latent_dim: LATENT,
        disc_hidden: vec![7, 5],
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = AlignmentModel::init(&config, DIM, &mut rng);
    for (_, t) in model.mapping.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for (_, t) in model.critics.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.2 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    model
}

pub fn batches(seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (gaussian_matrix(BATCH, DIM, &mut rng), gaussian_matrix(BATCH, DIM, &mut rng))
}

/// Largest relative error over the discriminator objective and the
/// generator objective under several loss weightings, which isolates the
/// adversarial, cycle and reconstruction contributions.
pub fn worst_grad_error(seed: u64, z: f64, probes: usize) -> f64 {
    let model = random_model(seed);
    let (xs, xt) = batches(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;

    let (_, dg) = discriminator_objective(&model.mapping, &model.critics, xs.view(), xt.view(), z, false, &mut rng).unwrap();
    let report = grad_check(
        &model.critics,
        &dg,
        |c| {
            let mut r = ChaCha8Rng::seed_from_u64(0);
            discriminator_objective(&model.mapping, c, xs.view(), xt.view(), z, false, &mut r)
                .unwrap()
                .0
                .adv_total
        },
        probes,
        FD_EPS,
        seed,
    );
    worst = worst.max(report.max_rel_err);

    for mode in [GenTargetMode::Literal, GenTargetMode::Classic] {
        for (l1, l2) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (5.0, 1.0)] {
            let weights = LossWeights {
                lambda_cyc: l1,
                lambda_rec: l2,
            };
            let (_, g) = generator_objective(&model.mapping, &model.critics, xs.view(), xt.view(), z, mode, weights).unwrap();
            let report = grad_check(
                &model.mapping,
                &g,
                |m| {
                    generator_objective(m, &model.critics, xs.view(), xt.view(), z, mode, weights)
                        .unwrap()
                        .0
                        .total
                },
                probes,
                FD_EPS,
                seed + 1,
            );
            worst = worst.max(report.max_rel_err);
        }
    }
    worst
}
