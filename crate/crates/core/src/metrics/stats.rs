use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian fit of a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Streaming one-pass (Welford) mean and scatter matrix. Partial
/// accumulators merge associatively, so shards can run independently.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), x.len()));
        }
        let x = DVector::from_column_slice(x);
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.scatter.ger(1.0, &delta, &delta2, 1.0);
        Ok(())
    }

    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        if other.mean.len() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), other.mean.len()));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        self.scatter += &other.scatter;
        self.scatter.ger(na * nb / n, &delta, &delta, 1.0);
        self.mean += &delta * (nb / n);
        self.count += other.count;
        Ok(())
    }

    /// Mean and unbiased sample covariance, symmetrized.
    pub fn finish(&self) -> Result<FeatureStats> {
        if self.count < 2 {
            return Err(Error::InsufficientData {
                count: self.count,
                needed: 2,
            });
        }
        let cov = &self.scatter / (self.count as f64 - 1.0);
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(FeatureStats {
            mean: self.mean.clone(),
            covariance: cov,
            count: self.count,
        })
    }
}

pub fn accumulate_stats<'a, I>(features: I) -> Result<FeatureStats>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut it = features.into_iter().peekable();
    let dim = it.peek().map(|f| f.len()).unwrap_or(0);
    let mut acc = StatsAccumulator::new(dim);
    for f in it {
        acc.push(f)?;
    }
    acc.finish()
}
