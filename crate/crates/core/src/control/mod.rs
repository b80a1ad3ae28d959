//! Control-branch abstraction and control-strength strategies.
//!
//! Low strengths mostly reshape structure; high strengths also impose the
//! texture domain of the control training data. The fixed strategy uses a
//! single middle value, the adaptive one searches candidates by pose error.

mod adaptive;
mod strength;
mod sweep;

pub use adaptive::{adaptive_strength, AdaptiveAttempt, AdaptiveOutcome};
pub use strength::{scale_control, AdaptiveConfig, ControlStrength, StrengthStrategy};
pub use sweep::{phase_sweep, PhaseSweepReport, RowMetrics, SweepRow};

use crate::diffusion::Conditioning;
use crate::error::Result;
use crate::grid::LatentGrid;

/// Auxiliary encoder producing one residual per denoiser block from a control
/// image (a normalized depth map here). Block count and shapes are fixed for a
/// given base denoiser.
pub trait ControlBranch: Sync {
    fn features(&self, control: &LatentGrid, x_t: &LatentGrid, t: usize, cond: &Conditioning) -> Result<Vec<LatentGrid>>;
}
