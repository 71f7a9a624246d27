use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Parameters;

/// Outcome of a finite-difference gradient probe.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat indices of the probed scalars.
    pub probes: Vec<usize>,
}

/// Denominator floor for the relative error, so that near-zero gradients
/// are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

/// Compares `analytic` against central differences of `loss` at `params` on
/// `probe_count` scalars chosen by `seed`.
pub fn grad_check<P, F>(params: &P, analytic: &P, loss: F, probe_count: usize, eps: f64, seed: u64) -> GradCheckReport
where
    P: Parameters,
    F: Fn(&P) -> f64,
{
    let total = params.num_params();
    let flat_grad: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.data.iter().copied()).collect();
    assert_eq!(flat_grad.len(), total, "gradient layout must match parameters");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<usize> = (0..probe_count).map(|_| rng.random_range(0..total)).collect();

    let mut work = params.clone();
    let mut max_rel_err: f64 = 0.0;
    for &k in &probes {
        let orig = get(&work, k);
        set(&mut work, k, orig + eps);
        let up = loss(&work);
        set(&mut work, k, orig - eps);
        let down = loss(&work);
        set(&mut work, k, orig);
        let numeric = (up - down) / (2.0 * eps);
        let a = flat_grad[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel_err = max_rel_err.max(rel);
    }
    GradCheckReport { max_rel_err, probes }
}

fn get<P: Parameters>(p: &P, mut k: usize) -> f64 {
    for t in p.tensors() {
        if k < t.data.len() {
            return t.data[k];
        }
        k -= t.data.len();
    }
    unreachable!("probe index out of range")
}

fn set<P: Parameters>(p: &mut P, mut k: usize, value: f64) {
    for (_, t) in p.tensors_mut() {
        if k < t.len() {
            t[k] = value;
            return;
        }
        k -= t.len();
    }
    unreachable!("probe index out of range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{Dense, Generator};
    use ndarray::{array, Array2};

    #[test]
    fn quadratic_loss_matches() {
        // loss = 0.5·‖W·x‖², ∂/∂W = (W·x)·xᵀ
        let x = array![1.0, 2.0];
        let g = Generator::new(array![[0.3, -1.2], [2.0, 0.7]]);
        let loss = |p: &Generator| 0.5 * p.weight.dot(&x).mapv(|v| v * v).sum();
        let wx = g.weight.dot(&x);
        let grad = Generator::new(Array2::from_shape_fn((2, 2), |(i, j)| wx[i] * x[j]));
        let report = grad_check(&g, &grad, loss, 20, 1e-4, 1);
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn identity_weight_hand_derivative() {
        let x = array![1.0, 2.0];
        let g = Generator::identity(2);
        let wx = g.weight.dot(&x);
        let grad = Array2::from_shape_fn((2, 2), |(i, j)| wx[i] * x[j]);
        assert_eq!(grad, array![[1.0, 2.0], [2.0, 4.0]]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let d = Dense::zeros(3, 2);
        let report = grad_check(&d, &d.zeros_like(), |_| 4.2, 10, 1e-4, 3);
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn probes_follow_seed() {
        let d = Dense::zeros(5, 4);
        let a = grad_check(&d, &d, |_| 0.0, 8, 1e-4, 11).probes;
        let b = grad_check(&d, &d, |_| 0.0, 8, 1e-4, 11).probes;
        assert_eq!(a, b);
    }
}
