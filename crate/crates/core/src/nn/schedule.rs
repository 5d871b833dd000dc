use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-decayed learning rate and linearly annealed KL weight, both keyed by
/// epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub base_lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub kl_anneal_epochs: usize,
    pub total_epochs: usize,
}

impl Schedule {
    /// 10000 epochs at 0.001, decayed by 0.1 every 2500; KL weight ramps over
    /// the first 2500.
    pub fn paper() -> Schedule {
        Schedule { base_lr: 0.001, decay_factor: 0.1, decay_every: 2500, kl_anneal_epochs: 2500, total_epochs: 10000 }
    }

    /// The same schedule compressed to 2000 epochs.
    pub fn desk() -> Schedule {
        Schedule::paper().compressed(2000)
    }

    /// Scales every epoch count so the schedule spans `total_epochs`.
    pub fn compressed(&self, total_epochs: usize) -> Schedule {
        let scale = |e: usize| ((e * total_epochs) / self.total_epochs).max(1);
        Schedule {
            decay_every: scale(self.decay_every),
            kl_anneal_epochs: scale(self.kl_anneal_epochs),
            total_epochs,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.decay_factor > 0.0)
            || self.decay_every == 0
            || self.kl_anneal_epochs == 0
            || self.total_epochs == 0
        {
            return Err(Error::Config(format!("schedule fields must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.decay_factor.powi((epoch / self.decay_every) as i32)
    }

    pub fn kl_weight(&self, epoch: usize) -> f64 {
        (epoch as f64 / self.kl_anneal_epochs as f64).min(1.0)
    }

    /// `(lr, kl_weight)` at `epoch`, which must lie in `0..total_epochs`.
    pub fn at(&self, epoch: usize) -> Result<(f64, f64)> {
        if epoch >= self.total_epochs {
            return Err(Error::Range(format!("epoch {epoch} outside 0..{}", self.total_epochs)));
        }
        Ok((self.lr(epoch), self.kl_weight(epoch)))
    }
}
