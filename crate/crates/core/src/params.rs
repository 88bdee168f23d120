use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of an interacting urn system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of urns `N`.
    pub n_urns: usize,
    /// Initial red balls per urn `a`.
    pub red_init: u64,
    /// Initial white balls per urn `b`.
    pub white_init: u64,
    /// Mean-field coupling weight in `[0, 1]`.
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(n_urns: usize, red_init: u64, white_init: u64, alpha: f64) -> Result<Self> {
        let params = Self {
            n_urns,
            red_init,
            white_init,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_urns == 0 {
            return Err(Error::InvalidParams("n_urns must be ≥ 1".into()));
        }
        if self.red_init == 0 {
            return Err(Error::InvalidParams("red_init must be ≥ 1".into()));
        }
        if self.white_init == 0 {
            return Err(Error::InvalidParams("white_init must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParams("alpha must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Total initial balls per urn, `m = a + b`.
    pub fn total_init(&self) -> u64 {
        self.red_init + self.white_init
    }

    /// Initial red fraction `a / m`, which is also `E[Z_t(i)]` for every `t`.
    pub fn mean_fraction(&self) -> f64 {
        self.red_init as f64 / self.total_init() as f64
    }

    /// `a/m - a²/m²`, the variance of a single draw at the initial fraction.
    pub fn bernoulli_variance(&self) -> f64 {
        let p = self.mean_fraction();
        p - p * p
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(self.n_urns, self.red_init, self.white_init, alpha)
    }

    pub fn with_n_urns(self, n_urns: usize) -> Result<Self> {
        Self::new(n_urns, self.red_init, self.white_init, self.alpha)
    }
}
