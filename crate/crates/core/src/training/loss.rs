use ndarray::Zip;

use crate::error::{Error, Result};
use crate::grid::{LatentGrid, Mask};

fn check(eps_true: &LatentGrid, eps_pred: &LatentGrid, m: &Mask) -> Result<f64> {
    eps_true.ensure_same_shape(eps_pred)?;
    if eps_true.spatial() != m.dim() {
        return Err(Error::shape(eps_true.spatial(), m.dim()));
    }
    let total = m.count();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total as f64)
}

/// `|| (m / sum(m)) * (eps_true - eps_pred) ||^2`.
///
/// `sum(m)` counts spatial cells; the mask is broadcast over channels.
pub fn inpaint_loss(eps_true: &LatentGrid, eps_pred: &LatentGrid, m: &Mask) -> Result<f64> {
    let norm = check(eps_true, eps_pred, m)?;
    let mut acc = 0.0;
    Zip::indexed(eps_true.data()).and(eps_pred.data()).for_each(|(_, y, x), &a, &b| {
        if m.get(y, x) {
            let r = (a - b) / norm;
            acc += r * r;
        }
    });
    Ok(acc)
}

/// Loss and its gradient with respect to `eps_pred`.
pub fn inpaint_loss_grad(eps_true: &LatentGrid, eps_pred: &LatentGrid, m: &Mask) -> Result<(f64, LatentGrid)> {
    let norm = check(eps_true, eps_pred, m)?;
    let inv2 = 1.0 / (norm * norm);
    let (c, h, w) = eps_true.shape();
    let mut grad = LatentGrid::zeros(c, h, w);
    let mut acc = 0.0;
    Zip::indexed(grad.data_mut())
        .and(eps_true.data())
        .and(eps_pred.data())
        .for_each(|(_, y, x), g, &a, &b| {
            if m.get(y, x) {
                let r = a - b;
                acc += (r / norm) * (r / norm);
                *g = -2.0 * inv2 * r;
            }
        });
    Ok((acc, grad))
}
