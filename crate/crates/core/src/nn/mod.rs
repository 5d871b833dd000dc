//! Dense-network numeric core: batched forward/backward passes over fixed
//! stacks of affine layers, the VAE loss terms, Adam, and the epoch
//! schedules. Everything is generic over `f32` (training) and `f64`
//! (gradient checking).

mod adam;
mod dense;
mod loss;
mod schedule;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, Cache, DenseNet, Gradients, Layer, OutputGrad};
pub use loss::{bce, kl_divergence, reparameterize, vae_loss, VaeLoss, PROB_CLAMP};
pub use schedule::Schedule;

/// Floating-point element type of a network.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + Debug
    + Default
    + Send
    + Sync
    + Sum
    + AddAssign
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}
