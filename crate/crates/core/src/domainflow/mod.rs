//! Interpolated generators and the domain-flow objective.
//!
//! A generator maps a latent batch `h` to `z·W·h + (1 − z)·h`, i.e. into the
//! intermediate domain at position `z` between source (`z = 0`) and target
//! (`z = 1`). The adversarial distance to each endpoint is weighted by the
//! opposite endpoint's share (`z` for the target critic, `1 − z` for the
//! source critic), and the source critic is trained towards `1 − z` rather
//! than 0 on interpolated samples.

mod losses;
mod schedule;

pub use losses::{
    adversarial_loss, bce, cycle_loss, discriminator_objective, generator_objective, interpolate, reconstruction_loss,
    total_loss, CriticParams, Direction, GenTargetMode, InterpolatedBatch, LossBreakdown, LossWeights, MappingParams,
    Side, PROB_CLAMP,
};
pub use schedule::ZSchedule;
