//! Dense layers and stacks of them with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use super::params::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// One affine layer `activation(W·x + b)`.
///
/// `weights` is stored input-major (`[in × out]`, row `j` holds the outgoing
/// weights of input `j`) so that sparse inputs touch contiguous rows and every
/// pass reduces to `axpy`/`dot` over those rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    /// `weights` must be `[in × out]`.
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        let layer = DenseLayer {
            weights,
            bias,
            activation,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Matrix::zeros(in_dim, out_dim),
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights in `±√(6/(in+out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim, activation);
        fill_glorot(&mut layer.weights, rng);
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.out_dim() {
            return Err(Error::shape(format!(
                "bias has {} entries for a layer with {} outputs",
                self.bias.len(),
                self.out_dim()
            )));
        }
        if !self.weights.is_finite() || self.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("layer parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        // Zero inputs contribute nothing; fingerprints are mostly zero.
        let mut z = self.bias.clone();
        for (j, &v) in x.iter().enumerate() {
            if v != T::zero() {
                axpy(v, self.weights.row(j), &mut z);
            }
        }
        for zi in &mut z {
            *zi = self.activation.apply(*zi);
        }
        Ok(z)
    }

    /// Accumulates parameter gradients into `grads` given the layer input,
    /// its output, and `∂L/∂output`. Returns `∂L/∂input` when requested.
    pub fn backward(
        &self,
        input: &[T],
        output: &[T],
        grad_output: &[T],
        grads: &mut DenseLayer<T>,
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        debug_assert_eq!(output.len(), self.out_dim());
        debug_assert_eq!(grad_output.len(), self.out_dim());
        let grad_z: Vec<T> = grad_output
            .iter()
            .zip(output)
            .map(|(&g, &y)| g * self.activation.derivative_from_output(y))
            .collect();

        axpy(T::one(), &grad_z, &mut grads.bias);
        for (j, &v) in input.iter().enumerate() {
            if v != T::zero() {
                axpy(v, &grad_z, grads.weights.row_mut(j));
            }
        }

        want_input_grad.then(|| {
            (0..self.in_dim())
                .map(|j| dot(self.weights.row(j), &grad_z))
                .collect()
        })
    }
}

/// `activation(W·x + b)` for a single layer.
pub fn dense_forward<T: Scalar>(
    x: &[T],
    weights: &Matrix<T>,
    bias: &[T],
    activation: Activation,
) -> Result<Vec<T>> {
    if bias.len() != weights.rows() {
        return Err(Error::shape(format!(
            "bias has {} entries for a layer with {} outputs",
            bias.len(),
            weights.rows()
        )));
    }
    let z = weights.matvec(x)?;
    Ok(z
        .into_iter()
        .zip(bias)
        .map(|(zi, &bi)| activation.apply(zi + bi))
        .collect())
}

pub(crate) fn fill_glorot<T: Scalar, R: Rng + ?Sized>(m: &mut Matrix<T>, rng: &mut R) {
    let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    for w in m.as_mut_slice() {
        *w = T::lit(rng.gen_range(-limit..=limit));
    }
}

/// Feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Per-layer activations recorded by [`Mlp::forward_trace`]; entry 0 is the input.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds the input")
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for layer in &layers {
            layer.validate()?;
        }
        Ok(Mlp { layers })
    }

    /// `dims` lists every width from input to output; hidden layers use relu,
    /// the output layer `output_activation`.
    pub fn glorot<R: Rng + ?Sized>(
        dims: &[usize],
        output_activation: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output widths");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n {
                    output_activation
                } else {
                    Activation::Relu
                };
                DenseLayer::glorot(dims[k], dims[k + 1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim(), l.activation))
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.in_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::out_dim));
        dims
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer.forward(&a)?;
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<Trace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Backpropagates `∂L/∂output` through the recorded trace, accumulating
    /// into `grads` (an [`Mlp::zeros_like`] buffer).
    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad_output: &[T],
        grads: &mut Mlp<T>,
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        let mut grad = grad_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let need = k > 0 || want_input_grad;
            match self.layers[k].backward(
                &trace.activations[k],
                &trace.activations[k + 1],
                &grad,
                &mut grads.layers[k],
                need,
            ) {
                Some(g) => grad = g,
                None => return None,
            }
        }
        Some(grad)
    }
}

impl<T: Scalar> Parameters<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}
