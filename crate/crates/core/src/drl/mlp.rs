//! Fully connected networks with batched forward and backward passes.
//!
//! Batches are stored column-wise: an input batch is `in × B`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => z.max(S::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative<S: Scalar>(self, z: S, a: S) -> S {
        match self {
            Activation::Relu => {
                if z > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Tanh => S::one() - a * a,
            Activation::Linear => S::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<S: Scalar> {
    /// `out × in` weights.
    pub w: DMatrix<S>,
    pub b: DVector<S>,
    pub activation: Activation,
}

impl<S: Scalar> Layer<S> {
    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S: Scalar> {
    pub layers: Vec<Layer<S>>,
}

/// Parameter gradients laid out like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S: Scalar> {
    pub w: Vec<DMatrix<S>>,
    pub b: Vec<DVector<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|x| x.is_finite_value()))
            && self.b.iter().all(|b| b.iter().all(|x| x.is_finite_value()))
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Clone, Debug)]
pub struct Trace<S: Scalar> {
    inputs: Vec<DMatrix<S>>,
    pre: Vec<DMatrix<S>>,
    pub output: DMatrix<S>,
}

impl<S: Scalar> Mlp<S> {
    pub fn new(layers: Vec<Layer<S>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.outputs() {
                return Err(Error::dims(format!("layer {i}: bias length {} for {} outputs", l.b.len(), l.outputs())));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::dims(format!(
                    "layer {i} takes {} inputs but layer {} emits {}",
                    l.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// All-zero network with the given layer widths (`sizes[0]` is the input).
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::build(sizes, activations, |_| S::zero())
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init<R: Rng>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        Self::build(sizes, activations, |fan_in| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            S::lit(rng.random_range(-bound..=bound))
        })
    }

    fn build(sizes: &[usize], activations: &[Activation], mut draw: impl FnMut(usize) -> S) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidParameter("layer width 0".into()));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, &act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            let w = DMatrix::from_fn(fan_out, fan_in, |_, _| draw(fan_in));
            let b = DVector::from_fn(fan_out, |_, _| draw(fan_in));
            layers.push(Layer { w, b, activation: act });
        }
        Mlp::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn same_shape(&self, other: &Mlp<S>) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.w.shape() == b.w.shape() && a.activation == b.activation)
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.w.as_slice());
            out.extend_from_slice(l.b.as_slice());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[S]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dims(format!("{} parameters for a network with {}", flat.len(), self.num_params())));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|x| x.is_finite_value())
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(Error::dims(format!("input of length {rows} for a network expecting {}", self.input_dim())));
        }
        Ok(())
    }

    pub fn forward_trace(&self, x: &DMatrix<S>) -> Result<Trace<S>> {
        self.check_input(x.nrows())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for l in &self.layers {
            let mut z = &l.w * &current;
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            let a = z.map(|v| l.activation.apply(v));
            inputs.push(current);
            pre.push(z);
            current = a;
        }
        Ok(Trace {
            inputs,
            pre,
            output: current,
        })
    }

    pub fn forward_batch(&self, x: &DMatrix<S>) -> Result<DMatrix<S>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward(&self, x: &DVector<S>) -> Result<DVector<S>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x.as_slice()))?;
        Ok(out.column(0).into_owned())
    }

    /// Backpropagates `∂L/∂output` (`out × B`) through a recorded pass,
    /// returning parameter gradients and `∂L/∂input`.
    pub fn backward(&self, trace: &Trace<S>, grad_output: &DMatrix<S>) -> (Gradients<S>, DMatrix<S>) {
        let n = self.layers.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n];
        let mut gb = vec![DVector::zeros(0); n];
        let mut upstream = grad_output.clone();
        let mut output = trace.output.clone();
        for i in (0..n).rev() {
            let l = &self.layers[i];
            let z = &trace.pre[i];
            let dz = upstream.zip_zip_map(z, &output, |g, zv, av| g * l.activation.derivative(zv, av));
            gw[i] = &dz * trace.inputs[i].transpose();
            gb[i] = DVector::from_fn(dz.nrows(), |r, _| dz.row(r).sum());
            upstream = l.w.transpose() * &dz;
            output = trace.inputs[i].clone();
        }
        (Gradients { w: gw, b: gb }, upstream)
    }
}

/// `a = tanh(W_o · relu(W_h s + b_h) + b_o)` for a standard actor.
pub fn actor_forward<S: Scalar>(actor: &Mlp<S>, s: &DVector<S>) -> Result<DVector<S>> {
    actor.forward(s)
}

/// Critic value of the concatenated input `(s, a)`.
pub fn critic_forward<S: Scalar>(critic: &Mlp<S>, s: &DVector<S>, a: &DVector<S>) -> Result<S> {
    let mut x = DVector::zeros(s.len() + a.len());
    x.rows_mut(0, s.len()).copy_from(s);
    x.rows_mut(s.len(), a.len()).copy_from(a);
    Ok(critic.forward(&x)?[0])
}
