use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KidConfig {
    pub subset_size: usize,
    pub subsets: usize,
    pub seed: u64,
}

impl Default for KidConfig {
    fn default() -> Self {
        Self {
            subset_size: 100,
            subsets: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KidEstimate {
    pub mean: f64,
    /// Standard deviation across subsets.
    pub std: f64,
}

/// `(x . y / d + 1)^3`.
pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / d + 1.0).powi(3)
}

/// Unbiased squared MMD between two feature sets under the polynomial kernel.
pub fn mmd2_unbiased(x: &[&[f64]], y: &[&[f64]]) -> Result<f64> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::InsufficientData {
            count: m.min(n),
            needed: 2,
        });
    }
    let within = |s: &[&[f64]]| {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                acc += polynomial_kernel(s[i], s[j]);
            }
        }
        2.0 * acc / (s.len() * (s.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for a in x {
        for b in y {
            cross += polynomial_kernel(a, b);
        }
    }
    Ok(within(x) + within(y) - 2.0 * cross / (m * n) as f64)
}

/// Squared MMD averaged over random equal-size subsets of both sets.
pub fn kid(a: &[Vec<f64>], b: &[Vec<f64>], config: &KidConfig) -> Result<KidEstimate> {
    if config.subsets == 0 || config.subset_size < 2 {
        return Err(Error::Config("KID needs at least one subset of size >= 2".into()));
    }
    if a.len() < config.subset_size || b.len() < config.subset_size {
        return Err(Error::Config(format!(
            "KID subset size {} exceeds sample counts ({}, {})",
            config.subset_size,
            a.len(),
            b.len()
        )));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|f| f.len() != d) {
        return Err(Error::Config("feature dimensions differ".into()));
    }
    let mut r = rng::rng(config.seed);
    let mut values = Vec::with_capacity(config.subsets);
    for _ in 0..config.subsets {
        let xa: Vec<&[f64]> = sample(&mut r, a.len(), config.subset_size).iter().map(|i| &a[i][..]).collect();
        let xb: Vec<&[f64]> = sample(&mut r, b.len(), config.subset_size).iter().map(|i| &b[i][..]).collect();
        values.push(mmd2_unbiased(&xa, &xb)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(KidEstimate { mean, std: var.sqrt() })
}
