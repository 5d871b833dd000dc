use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::dense::{DenseNet, Gradients};
use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment accumulators for every parameter block of a net.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first: Vec<(Array2<T>, Array1<T>)>,
    second: Vec<(Array2<T>, Array1<T>)>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &DenseNet<T>, config: AdamConfig) -> AdamState<T> {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect::<Vec<_>>()
        };
        AdamState { config, first: zeros(), second: zeros(), step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` from `grads` at learning rate `lr`.
    /// Nothing is modified if any gradient entry is non-finite.
    pub fn step(&mut self, net: &mut DenseNet<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        if grads.layers.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "{} gradient blocks for {} optimizer blocks",
                grads.layers.len(),
                self.first.len()
            )));
        }
        for (k, ((gw, gb), (mw, mb))) in grads.layers.iter().zip(&self.first).enumerate() {
            if gw.dim() != mw.dim() || gb.dim() != mb.dim() {
                return Err(Error::Shape(format!("layer {k}: gradient shape does not match parameters")));
            }
            if let Some(block) = non_finite(gw.iter(), gb.iter()) {
                return Err(Error::Numerical(format!("non-finite gradient in layer {k} {block}")));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - c.beta1.powi(t);
        let correction2 = 1.0 - c.beta2.powi(t);
        let cast = |v: f64| T::from_f64(v).unwrap();
        let (b1, b2, eps) = (cast(c.beta1), cast(c.beta2), cast(c.eps));
        let (one_b1, one_b2) = (cast(1.0 - c.beta1), cast(1.0 - c.beta2));
        let step_size = cast(lr / correction1);
        let sqrt_c2 = cast(correction2.sqrt());
        let layers = net.layers_mut();
        for (k, layer) in layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[k];
            let (mw, mb) = &mut self.first[k];
            let (vw, vb) = &mut self.second[k];
            update(
                layer.weight.as_slice_mut().expect("contiguous weights"),
                gw.as_slice().expect("contiguous gradient"),
                mw.as_slice_mut().unwrap(),
                vw.as_slice_mut().unwrap(),
                [b1, b2, one_b1, one_b2, eps, step_size, sqrt_c2],
            );
            update(
                layer.bias.as_slice_mut().expect("contiguous bias"),
                gb.as_slice().expect("contiguous gradient"),
                mb.as_slice_mut().unwrap(),
                vb.as_slice_mut().unwrap(),
                [b1, b2, one_b1, one_b2, eps, step_size, sqrt_c2],
            );
        }
        Ok(())
    }
}

fn non_finite<'a, T: Real>(
    w: impl Iterator<Item = &'a T>,
    b: impl Iterator<Item = &'a T>,
) -> Option<&'static str> {
    let mut w = w;
    let mut b = b;
    if w.any(|v| !v.is_finite()) {
        Some("weight")
    } else if b.any(|v| !v.is_finite()) {
        Some("bias")
    } else {
        None
    }
}

#[inline]
fn update<T: Real>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], k: [T; 7]) {
    let [b1, b2, one_b1, one_b2, eps, step_size, sqrt_c2] = k;
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        // lr * m_hat / (sqrt(v_hat) + eps), with the corrections folded in.
        let denom = v[i].sqrt() / sqrt_c2 + eps;
        params[i] = params[i] - step_size * m[i] / denom;
    }
}
