use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Activation> {
        match code {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply<T: Real>(self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::None => {}
        }
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// One affine layer: `y = act(x W^T + b)` with `W` stored out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Real> Layer<T> {
    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

/// A fixed stack of dense layers.
#[derive(Debug, Clone)]
pub struct DenseNet<T> {
    layers: Vec<Layer<T>>,
    revision: u64,
}

/// Networks are equal when their parameters are; the revision counter only
/// guards caches.
impl<T: PartialEq> PartialEq for DenseNet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    revision: u64,
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<T>>,
    /// Post-activation output of each layer.
    outputs: Vec<Array2<T>>,
}

/// Where the upstream gradient attaches.
#[derive(Debug, Clone, Copy)]
pub enum OutputGrad<'a, T> {
    /// Gradient with respect to the final (post-activation) output.
    Output(ArrayView2<'a, T>),
    /// Gradient with respect to the final layer's pre-activation values; used
    /// when the loss is fused with a sigmoid output.
    PreActivation(ArrayView2<'a, T>),
}

/// Parameter gradients, one `(weight, bias)` pair per layer, plus the
/// gradient with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
    pub input: Array2<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &DenseNet<T>, batch: usize) -> Gradients<T> {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
            input: Array2::zeros((batch, net.input_size())),
        }
    }
}

impl<T: Real> DenseNet<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<DenseNet<T>> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape(format!(
                    "layer {k}: bias length {} != output size {}",
                    l.bias.len(),
                    l.outputs()
                )));
            }
            if k > 0 && l.inputs() != layers[k - 1].outputs() {
                return Err(Error::Shape(format!(
                    "layer {k} expects {} inputs but layer {} produces {}",
                    l.inputs(),
                    k - 1,
                    layers[k - 1].outputs()
                )));
            }
        }
        Ok(DenseNet { layers, revision: 0 })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    /// `sizes` lists the input size followed by each layer's output size.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<DenseNet<T>> {
        if sizes.len() != activations.len() + 1 {
            return Err(Error::Shape(format!(
                "{} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    T::from_f64(rng.random_range(-limit..limit)).unwrap()
                });
                Layer { weight, bias: Array1::zeros(fan_out), activation }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        if input.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Batched forward pass over the rows of `input`, keeping the activations.
    pub fn forward(&self, input: ArrayView2<T>) -> Result<(Array2<T>, Cache<T>)> {
        self.check_input(&input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            layer.activation.apply(&mut z);
            inputs.push(x);
            x = z.clone();
            outputs.push(z);
        }
        Ok((x, Cache { revision: self.revision, inputs, outputs }))
    }

    /// Forward pass without a cache.
    pub fn infer(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&input)?;
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            layer.activation.apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    pub fn infer_one(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Backpropagates `grad` through the cached activations. Gradients are
    /// summed over the batch rows.
    pub fn backward(&self, cache: &Cache<T>, grad: OutputGrad<'_, T>) -> Result<Gradients<T>> {
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::Cache { cache: cache.revision, net: self.revision });
        }
        let last = self.layers.len() - 1;
        let expected = cache.outputs[last].dim();
        let (mut delta, pre) = match grad {
            OutputGrad::Output(g) => (g.to_owned(), false),
            OutputGrad::PreActivation(g) => (g.to_owned(), true),
        };
        if delta.dim() != expected {
            return Err(Error::Shape(format!("output gradient {:?} != output {:?}", delta.dim(), expected)));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for k in (0..=last).rev() {
            let layer = &self.layers[k];
            if !(pre && k == last) {
                let out = &cache.outputs[k];
                match layer.activation {
                    Activation::Relu => {
                        ndarray::Zip::from(&mut delta).and(out).for_each(|d, &o| {
                            if o <= T::zero() {
                                *d = T::zero();
                            }
                        });
                    }
                    Activation::Sigmoid => {
                        ndarray::Zip::from(&mut delta).and(out).for_each(|d, &o| *d = *d * o * (T::one() - o));
                    }
                    Activation::None => {}
                }
            }
            let dw = delta.t().dot(&cache.inputs[k]);
            let db = delta.sum_axis(Axis(0));
            layers.push((dw, db));
            delta = delta.dot(&layer.weight);
        }
        layers.reverse();
        Ok(Gradients { layers, input: delta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: f64, b: f64, act: Activation) -> DenseNet<f64> {
        DenseNet::new(vec![Layer { weight: array![[w]], bias: array![b], activation: act }]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::new(vec![Layer {
            weight: Array2::<f64>::eye(3),
            bias: Array1::zeros(3),
            activation: Activation::None,
        }])
        .unwrap();
        let x = array![[1.5, -2.0, 0.25]];
        let (y, _) = net.forward(x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let net = single(2.0, 1.0, Activation::Relu);
        let (y, _) = net.forward(array![[-3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0]]);
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let net = DenseNet::new(vec![Layer {
            weight: Array2::<f32>::zeros((4, 3)),
            bias: Array1::zeros(4),
            activation: Activation::Sigmoid,
        }])
        .unwrap();
        assert!(net.infer_one(&[1.0, -7.0, 3.0]).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let net = single(1.0, 0.0, Activation::None);
        assert!(matches!(net.forward(array![[1.0, 2.0]].view()), Err(Error::Shape(_))));
        let bad = vec![
            Layer { weight: Array2::<f64>::zeros((2, 3)), bias: Array1::zeros(2), activation: Activation::Relu },
            Layer { weight: Array2::<f64>::zeros((1, 4)), bias: Array1::zeros(1), activation: Activation::None },
        ];
        assert!(matches!(DenseNet::new(bad), Err(Error::Shape(_))));
    }

    #[test]
    fn affine_gradient_of_output_is_input_and_one() {
        let net = DenseNet::new(vec![Layer {
            weight: array![[0.3, -0.7]],
            bias: array![0.1],
            activation: Activation::None,
        }])
        .unwrap();
        let x = array![[2.0, 5.0]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, OutputGrad::Output(array![[1.0]].view())).unwrap();
        assert_eq!(g.layers[0].0, x);
        assert_eq!(g.layers[0].1, array![1.0]);
        assert_eq!(g.input, array![[0.3, -0.7]]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: DenseNet<f64> =
            DenseNet::init(&[4, 5, 3], &[Activation::Relu, Activation::Sigmoid], &mut rng).unwrap();
        let x = Array2::from_shape_fn((2, 4), |(i, j)| (i + j) as f64 * 0.3 - 0.5);
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, OutputGrad::Output(Array2::zeros((2, 3)).view())).unwrap();
        for (w, b) in &g.layers {
            assert!(w.iter().chain(b.iter()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = single(1.0, 0.0, Activation::None);
        let (_, cache) = net.forward(array![[1.0]].view()).unwrap();
        net.layers_mut()[0].bias[0] = 2.0;
        let err = net.backward(&cache, OutputGrad::Output(array![[1.0]].view())).unwrap_err();
        assert!(matches!(err, Error::Cache { .. }));
    }

    #[test]
    fn init_respects_glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net: DenseNet<f32> = DenseNet::init(&[30, 20], &[Activation::None], &mut rng).unwrap();
        let limit = (6.0f32 / 50.0).sqrt();
        assert!(net.layers()[0].weight.iter().all(|w| w.abs() <= limit));
        assert!(net.layers()[0].bias.iter().all(|&b| b == 0.0));
        assert_eq!(net.param_count(), 30 * 20 + 20);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert!((sigmoid(0.0f32) - 0.5).abs() < 1e-7);
    }
}
