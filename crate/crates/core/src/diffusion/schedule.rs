use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative signal fractions `alpha_bar[t]` for `t` in `0..=T`.
///
/// Serialized as a bare JSON array of the `alpha_bar` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub const DEFAULT_STEPS: usize = 1000;
    pub const DEFAULT_BETA_START: f64 = 1e-4;
    pub const DEFAULT_BETA_END: f64 = 0.02;

    /// Betas linear in `t` from `beta_start` (t = 1) to `beta_end` (t = T).
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("need at least one diffusion step".into()));
        }
        if !(0.0..1.0).contains(&beta_start) || !(0.0..1.0).contains(&beta_end) {
            return Err(Error::InvalidSchedule(format!(
                "betas must lie in [0, 1), got {beta_start}..{beta_end}"
            )));
        }
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for t in 1..=steps {
            let frac = if steps == 1 { 0.0 } else { (t - 1) as f64 / (steps - 1) as f64 };
            let beta = beta_start + (beta_end - beta_start) * frac;
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Self::from_alpha_bar(alpha_bar)
    }

    pub fn from_alpha_bar(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 {
            return Err(Error::InvalidSchedule("need alpha_bar for t = 0 and at least one step".into()));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::InvalidSchedule(format!("alpha_bar[0] must be 1, got {}", alpha_bar[0])));
        }
        for (t, pair) in alpha_bar.windows(2).enumerate() {
            if !(pair[1] <= pair[0]) {
                return Err(Error::InvalidSchedule(format!("alpha_bar increases at t = {}", t + 1)));
            }
        }
        let last = *alpha_bar.last().unwrap();
        if !(last > 0.0) {
            return Err(Error::InvalidSchedule(format!("alpha_bar[T] must be positive, got {last}")));
        }
        Ok(Self { alpha_bar })
    }

    /// Total number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bar
            .get(t)
            .copied()
            .ok_or(Error::TimestepRange { t, max: self.steps() })
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha_bar
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(Self::DEFAULT_STEPS, Self::DEFAULT_BETA_START, Self::DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

impl TryFrom<Vec<f64>> for NoiseSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_alpha_bar(v)
    }
}

impl From<NoiseSchedule> for Vec<f64> {
    fn from(s: NoiseSchedule) -> Self {
        s.alpha_bar
    }
}

/// The DDIM subsequence `tau_1 < ... < tau_S` of timesteps visited while sampling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestepPlan {
    taus: Vec<usize>,
}

impl TimestepPlan {
    pub const DEFAULT_STEPS: usize = 50;

    /// Uniform spacing: `tau_i = 1 + (i - 1) * T / S`.
    pub fn uniform(total_steps: usize, sampling_steps: usize) -> Result<Self> {
        if sampling_steps == 0 || sampling_steps > total_steps {
            return Err(Error::InvalidPlan(format!(
                "sampling steps must be in 1..={total_steps}, got {sampling_steps}"
            )));
        }
        let taus = (0..sampling_steps)
            .map(|i| 1 + i * total_steps / sampling_steps)
            .collect();
        Self::from_taus(taus, total_steps)
    }

    pub fn from_taus(taus: Vec<usize>, total_steps: usize) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::InvalidPlan("empty plan".into()));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPlan("timesteps must be strictly increasing".into()));
        }
        if taus[0] < 1 || *taus.last().unwrap() > total_steps {
            return Err(Error::InvalidPlan(format!("timesteps must lie in 1..={total_steps}")));
        }
        Ok(Self { taus })
    }

    pub fn taus(&self) -> &[usize] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Largest timestep, where sampling starts.
    pub fn first(&self) -> usize {
        *self.taus.last().unwrap()
    }

    /// `(t_from, t_to)` pairs in sampling order, ending with `(tau_1, 0)`.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self.taus.windows(2).rev().map(|w| (w[1], w[0])).collect();
        out.push((self.taus[0], 0));
        out
    }
}
