//! Forward noising and the deterministic DDIM update.

use crate::error::{Error, Result};
use crate::grid::LatentGrid;
use crate::rng::{self, Rng};

use super::NoiseSchedule;

/// Draws `x_t ~ N(sqrt(alpha_bar[t]) * x0, (1 - alpha_bar[t]) I)` from `seed`.
pub fn forward_noise(x0: &LatentGrid, t: usize, schedule: &NoiseSchedule, seed: u64) -> Result<LatentGrid> {
    let mut rng = rng::rng(seed);
    forward_noise_rng(x0, t, schedule, &mut rng).map(|(xt, _)| xt)
}

/// Like [`forward_noise`] but draws from a caller-owned stream and returns the noise used.
pub fn forward_noise_rng(
    x0: &LatentGrid,
    t: usize,
    schedule: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<(LatentGrid, LatentGrid)> {
    // range check before consuming randomness
    schedule.alpha_bar(t)?;
    let noise = LatentGrid::standard_normal(x0.shape(), rng);
    let xt = forward_noise_with(x0, t, schedule, &noise)?;
    Ok((xt, noise))
}

/// Forward noising with an explicit noise grid.
pub fn forward_noise_with(
    x0: &LatentGrid,
    t: usize,
    schedule: &NoiseSchedule,
    noise: &LatentGrid,
) -> Result<LatentGrid> {
    let ab = schedule.alpha_bar(t)?;
    x0.axpby(ab.sqrt(), noise, (1.0 - ab).sqrt())
}

/// Deterministic DDIM step from `t_from` down to `t_to`.
pub fn ddim_step(
    x_t: &LatentGrid,
    eps_pred: &LatentGrid,
    t_from: usize,
    t_to: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentGrid> {
    if t_to >= t_from {
        return Err(Error::StepOrdering { from: t_from, to: t_to });
    }
    let ab_from = schedule.alpha_bar(t_from)?;
    let ab_to = schedule.alpha_bar(t_to)?;
    ddim_update(x_t, eps_pred, ab_from, ab_to).map_err(|e| match e {
        Error::SingularSchedule { .. } => Error::SingularSchedule { t: t_from },
        other => other,
    })
}

/// The DDIM update expressed directly in `alpha_bar` values:
/// `x0_hat = (x_t - sqrt(1 - ab_from) eps) / sqrt(ab_from)`,
/// `x_to = sqrt(ab_to) x0_hat + sqrt(1 - ab_to) eps`.
pub fn ddim_update(x_t: &LatentGrid, eps_pred: &LatentGrid, ab_from: f64, ab_to: f64) -> Result<LatentGrid> {
    x_t.ensure_same_shape(eps_pred)?;
    if !(ab_from > 0.0) {
        return Err(Error::SingularSchedule { t: 0 });
    }
    let sa_from = ab_from.sqrt();
    let sb_from = (1.0 - ab_from).sqrt();
    let sa_to = ab_to.sqrt();
    let sb_to = (1.0 - ab_to).sqrt();
    let x0_hat = x_t.axpby(1.0 / sa_from, eps_pred, -sb_from / sa_from)?;
    x0_hat.axpby(sa_to, eps_pred, sb_to)
}

/// Clean-sample estimate `x0_hat` implied by a noise prediction at `t`.
pub fn predict_x0(x_t: &LatentGrid, eps_pred: &LatentGrid, t: usize, schedule: &NoiseSchedule) -> Result<LatentGrid> {
    let ab = schedule.alpha_bar(t)?;
    if !(ab > 0.0) {
        return Err(Error::SingularSchedule { t });
    }
    x_t.axpby(1.0 / ab.sqrt(), eps_pred, -(1.0 - ab).sqrt() / ab.sqrt())
}
