use ntpt_engine::{NodeId, ParamMut, Tape, Tensor};
use rand::Rng;

use crate::error::{Error, Result};
use crate::terpret::IntDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputSpec {
    /// Flattened tensor of the given width.
    Tensor(usize),
    /// Integer marginal, fed as its probability vector.
    Int(IntDomain),
}

impl InputSpec {
    pub fn width(self) -> usize {
        match self {
            InputSpec::Tensor(w) => w,
            InputSpec::Int(d) => d.size(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputSpec {
    /// Softmax over an integer domain.
    Int(IntDomain),
    /// Linear map from the last hidden layer.
    Tensor(usize),
}

impl OutputSpec {
    pub fn width(self) -> usize {
        match self {
            OutputSpec::Int(d) => d.size(),
            OutputSpec::Tensor(w) => w,
        }
    }
}

/// Shape of a fully connected network: inputs are concatenated, hidden layers
/// use ReLU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeuralFunctionSpec {
    inputs: Vec<InputSpec>,
    output: OutputSpec,
    hidden: Vec<usize>,
}

impl NeuralFunctionSpec {
    pub fn new(inputs: Vec<InputSpec>, output: OutputSpec, hidden: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Library("a neural function needs at least one input".into()));
        }
        if hidden.contains(&0) || inputs.iter().any(|i| i.width() == 0) || output.width() == 0 {
            return Err(Error::Library("layer widths must be positive".into()));
        }
        Ok(NeuralFunctionSpec { inputs, output, hidden })
    }

    /// 28x28 image to a digit class, two hidden layers of 256.
    pub fn digit_classifier() -> Self {
        Self::image_classifier(10)
    }

    /// 28x28 image to one of the four operators.
    pub fn operator_classifier() -> Self {
        Self::image_classifier(4)
    }

    pub fn image_classifier(classes: usize) -> Self {
        NeuralFunctionSpec::new(
            vec![InputSpec::Tensor(crate::tasks::IMAGE_PIXELS)],
            OutputSpec::Int(IntDomain::new(classes).expect("classes >= 1")),
            vec![256, 256],
        )
        .expect("valid spec")
    }

    pub fn inputs(&self) -> &[InputSpec] {
        &self.inputs
    }

    pub fn output(&self) -> OutputSpec {
        self.output
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn input_width(&self) -> usize {
        self.inputs.iter().map(|i| i.width()).sum()
    }

    /// `(fan_in, fan_out)` of each layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_width()];
        widths.extend(&self.hidden);
        widths.push(self.output.width());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// A learnable network with weights `[w0, b0, w1, b1, ..]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralFunction {
    name: String,
    spec: NeuralFunctionSpec,
    weights: Vec<Tensor>,
    param_names: Vec<String>,
    pub(crate) steps: u64,
    pub(crate) created_by: String,
}

impl NeuralFunction {
    /// He-uniform weights, zero biases.
    pub fn init(name: &str, spec: NeuralFunctionSpec, rng: &mut impl Rng) -> Self {
        let mut weights = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(Tensor::new([fan_in, fan_out], w).expect("shape"));
            weights.push(Tensor::zeros([fan_out]));
        }
        Self::from_weights(name, spec, weights).expect("consistent shapes")
    }

    pub fn zeros(name: &str, spec: NeuralFunctionSpec) -> Self {
        let weights = spec
            .layer_dims()
            .into_iter()
            .flat_map(|(i, o)| [Tensor::zeros([i, o]), Tensor::zeros([o])])
            .collect();
        Self::from_weights(name, spec, weights).expect("consistent shapes")
    }

    pub fn from_weights(name: &str, spec: NeuralFunctionSpec, weights: Vec<Tensor>) -> Result<Self> {
        let dims = spec.layer_dims();
        if weights.len() != 2 * dims.len() {
            return Err(Error::Library(format!("`{name}` has {} weight tensors, expected {}", weights.len(), 2 * dims.len())));
        }
        for (l, (i, o)) in dims.iter().enumerate() {
            if weights[2 * l].shape() != [*i, *o] || weights[2 * l + 1].shape() != [*o] {
                return Err(Error::Library(format!("`{name}` layer {l} has inconsistent shapes")));
            }
        }
        let param_names = (0..dims.len()).flat_map(|l| [format!("{name}/w{l}"), format!("{name}/b{l}")]).collect();
        Ok(NeuralFunction { name: name.to_string(), spec, weights, param_names, steps: 0, created_by: String::new() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> &NeuralFunctionSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    /// Tape names of the weight tensors.
    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Optimizer steps that updated this function.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Task that introduced this function.
    pub fn created_by(&self) -> &str {
        &self.created_by
    }

    /// Record the network on `tape`. `inputs` are `[batch, width]` nodes in
    /// spec order. Weights enter by name, so every call site shares them.
    pub fn forward(&self, tape: &mut Tape, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() != self.spec.inputs.len() {
            return Err(Error::Library(format!(
                "`{}` takes {} inputs, got {}",
                self.name,
                self.spec.inputs.len(),
                inputs.len()
            )));
        }
        for (i, (&id, s)) in inputs.iter().zip(&self.spec.inputs).enumerate() {
            let shape = tape.value(id).shape();
            if shape.len() != 2 || shape[1] != s.width() {
                return Err(Error::Library(format!(
                    "input {i} of `{}` has shape {shape:?}, expected width {}",
                    self.name,
                    s.width()
                )));
            }
        }
        let h = if inputs.len() == 1 { inputs[0] } else { tape.concat(inputs)? };
        self.layers(tape, h)
    }

    fn layers(&self, tape: &mut Tape, mut h: NodeId) -> Result<NodeId> {
        let layers = self.weights.len() / 2;
        for l in 0..layers {
            let w = tape.param(&self.param_names[2 * l], &self.weights[2 * l]);
            let b = tape.param(&self.param_names[2 * l + 1], &self.weights[2 * l + 1]);
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = if l + 1 < layers {
                tape.relu(z)?
            } else {
                match self.spec.output {
                    OutputSpec::Int(_) => tape.softmax(z)?,
                    OutputSpec::Tensor(_) => z,
                }
            };
        }
        Ok(h)
    }

    /// Output rows for a `[batch, input_width]` tensor holding the inputs
    /// already concatenated, without gradients.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.spec.input_width() {
            return Err(Error::Library(format!(
                "`{}` expects rows of width {}, got shape {:?}",
                self.name,
                self.spec.input_width(),
                x.shape()
            )));
        }
        let mut tape = Tape::new();
        let id = tape.leaf(x.clone());
        let out = self.layers(&mut tape, id)?;
        Ok(tape.value(out).clone())
    }

    /// Argmax class of each row.
    pub fn classify(&self, x: &Tensor) -> Result<Vec<usize>> {
        let p = self.predict(x)?;
        Ok((0..p.rows()).map(|r| p.argmax_row(r)).collect())
    }

    pub fn params_mut<'a>(&'a mut self, group: &'a str) -> impl Iterator<Item = ParamMut<'a>> + 'a {
        self.param_names
            .iter()
            .zip(self.weights.iter_mut())
            .map(move |(name, value)| ParamMut { name, group: Some(group), value })
    }
}
