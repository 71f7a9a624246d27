use rand::Rng;
use rand_distr::{Beta, Distribution};

/// Curriculum for the domain variable `z`.
///
/// `z ~ Beta(α(t), 1)` with `α(t) = exp((t − T/2) / (T/4))`, so early draws
/// concentrate near the source domain (`z ≈ 0`) and late draws near the
/// target (`z ≈ 1`). Inside the fine-tune window `z` is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZSchedule {
    pub total_iterations: u64,
    /// First iteration of the fine-tune window.
    pub finetune_start: u64,
    pub beta_b: f64,
}

impl ZSchedule {
    pub fn new(total_iterations: u64, finetune_iterations: u64) -> Self {
        assert!(total_iterations > 0, "schedule needs at least one iteration");
        ZSchedule {
            total_iterations,
            finetune_start: total_iterations.saturating_sub(finetune_iterations),
            beta_b: 1.0,
        }
    }

    /// Schedule over `epochs` epochs with `z = 1` during the last
    /// `finetune_epochs` of them.
    pub fn from_epochs(epochs: u64, iterations_per_epoch: u64, finetune_epochs: u64) -> Self {
        ZSchedule::new(epochs * iterations_per_epoch, finetune_epochs * iterations_per_epoch)
    }

    pub fn alpha(&self, t: u64) -> f64 {
        let total = self.total_iterations as f64;
        ((t as f64 - 0.5 * total) / (0.25 * total)).exp()
    }

    pub fn in_finetune(&self, t: u64) -> bool {
        t >= self.finetune_start
    }

    /// Analytic mean of the draw at iteration `t` outside the fine-tune
    /// window, `α / (α + β)`.
    pub fn mean(&self, t: u64) -> f64 {
        let a = self.alpha(t);
        a / (a + self.beta_b)
    }

    /// Draws `z` for iteration `t` (clamped to `[0, T]`).
    pub fn sample_z<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> f64 {
        let t = t.min(self.total_iterations);
        if self.in_finetune(t) {
            return 1.0;
        }
        self.sample_beta(t, rng)
    }

    /// Beta draw at iteration `t` ignoring the fine-tune window.
    pub fn sample_beta<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> f64 {
        let beta = Beta::new(self.alpha(t), self.beta_b).expect("α > 0 and β > 0");
        beta.sample(rng).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_values() {
        let s = ZSchedule::new(1000, 0);
        assert!((s.alpha(500) - 1.0).abs() < 1e-15);
        assert!((s.alpha(1000) - 2f64.exp()).abs() < 1e-12);
        assert!((s.alpha(0) - (-2f64).exp()).abs() < 1e-15);
        assert!((s.mean(1000) - 0.8808).abs() < 1e-4);
        assert!((s.mean(0) - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn finetune_window_forces_one() {
        let s = ZSchedule::from_epochs(10, 3125, 3);
        assert_eq!(s.total_iterations, 31_250);
        assert_eq!(s.finetune_start, 7 * 3125);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in s.finetune_start..s.finetune_start + 50 {
            assert_eq!(s.sample_z(t, &mut rng), 1.0);
        }
        let z = s.sample_z(s.finetune_start - 1, &mut rng);
        assert!((0.0..=1.0).contains(&z));
    }

    #[test]
    fn draws_stay_in_unit_interval() {
        let s = ZSchedule::new(100, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..=100 {
            for _ in 0..50 {
                let z = s.sample_z(t, &mut rng);
                assert!((0.0..=1.0).contains(&z));
            }
        }
    }
}
