use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Mat, ParamCollection};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply_tape(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Layer widths (input first, output last) plus activations.
///
/// Parameters live in a [`ParamCollection`] under `"{prefix}{i}.w"` (in×out)
/// and `"{prefix}{i}.b"` (1×out), so several networks can share a collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub prefix: String,
}

impl Mlp {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: Activation) -> Self {
        Self {
            widths,
            hidden,
            output,
            prefix: "l".into(),
        }
    }

    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("empty mlp")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn names(&self, layer: usize) -> (String, String) {
        (
            format!("{}{layer}.w", self.prefix),
            format!("{}{layer}.b", self.prefix),
        )
    }

    /// Adds freshly initialised weights (uniform ±1/√fan_in) and zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, params: &mut ParamCollection, rng: &mut R) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config("an mlp needs at least input and output widths".into()));
        }
        for layer in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.widths[layer], self.widths[layer + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
            let (wn, bn) = self.names(layer);
            params.insert(wn, w)?;
            params.insert(bn, Mat::zeros((1, fan_out)))?;
        }
        Ok(())
    }

    fn layer_indices(&self, params: &ParamCollection) -> Result<Vec<(usize, usize)>> {
        (0..self.num_layers())
            .map(|layer| {
                let (wn, bn) = self.names(layer);
                let w = params
                    .index_of(&wn)
                    .ok_or_else(|| Error::Config(format!("missing parameter `{wn}`")))?;
                let b = params
                    .index_of(&bn)
                    .ok_or_else(|| Error::Config(format!("missing parameter `{bn}`")))?;
                let want = (self.widths[layer], self.widths[layer + 1]);
                if params.value(w).dim() != want || params.value(b).dim() != (1, want.1) {
                    return Err(Error::Shape(format!("layer {layer} does not match widths {:?}", self.widths)));
                }
                Ok((w, b))
            })
            .collect()
    }

    /// Records the forward pass for a batch (rows = samples).
    pub fn forward(&self, params: &ParamCollection, input: Var, tape: &mut Tape) -> Result<Var> {
        self.forward_impl(params, input, tape, false)
    }

    /// Forward pass that treats the weights as constants.
    pub fn forward_detached(&self, params: &ParamCollection, input: Var, tape: &mut Tape) -> Result<Var> {
        self.forward_impl(params, input, tape, true)
    }

    fn forward_impl(&self, params: &ParamCollection, input: Var, tape: &mut Tape, detached: bool) -> Result<Var> {
        let (_, cols) = tape.shape(input);
        if cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "mlp expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        let layers = self.layer_indices(params)?;
        let mut x = input;
        for (i, (w, b)) in layers.into_iter().enumerate() {
            let (w, b) = if detached {
                (tape.param_detached(params, w), tape.param_detached(params, b))
            } else {
                (tape.param(params, w), tape.param(params, b))
            };
            let h = tape.matmul(x, w)?;
            let h = tape.add_row(h, b)?;
            let act = if i + 1 == self.num_layers() {
                self.output
            } else {
                self.hidden
            };
            x = act.apply_tape(tape, h);
        }
        Ok(x)
    }

    /// Untaped single-sample evaluation for acting in environments.
    pub fn infer(&self, params: &ParamCollection, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "mlp expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let layers = self.layer_indices(params)?;
        let mut x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row");
        for (i, (w, b)) in layers.into_iter().enumerate() {
            let mut h = x.dot(params.value(w));
            h += params.value(b);
            let act = if i + 1 == self.num_layers() {
                self.output
            } else {
                self.hidden
            };
            h.mapv_inplace(|v| act.apply(v));
            x = h;
        }
        Ok(x.into_raw_vec_and_offset().0)
    }
}
