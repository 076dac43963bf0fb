//! Minimal dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector. Each layer stores its weights
//! row-major with shape `(fan_out, fan_in)` followed by its `fan_out` biases.
//! Every entry of a layer is confined to `[-2/sqrt(fan_in), 2/sqrt(fan_in)]`.

mod cached;
mod network;

pub use cached::CachedEvaluator;
pub use network::{Network, Scalar};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Silu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Silu => z * sigmoid(z),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Silu => "silu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "silu" => Ok(Activation::Silu),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Architecture of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub task: Task,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        activation: Activation,
        task: Task,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_widths,
            activation,
            task,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `k`-class classifier with ReLU hidden layers.
    pub fn classifier(input_dim: usize, hidden_widths: &[usize], num_classes: usize) -> Result<Self> {
        Self::new(
            input_dim,
            hidden_widths.to_vec(),
            Activation::Relu,
            Task::Classification { num_classes },
        )
    }

    /// Scalar-output regressor with ReLU hidden layers.
    pub fn regressor(input_dim: usize, hidden_widths: &[usize]) -> Result<Self> {
        Self::new(input_dim, hidden_widths.to_vec(), Activation::Relu, Task::Regression)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if let Task::Classification { num_classes } = self.task {
            if num_classes < 2 {
                return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        match self.task {
            Task::Classification { num_classes } => num_classes,
            Task::Regression => 1,
        }
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_widths {
            dims.push((fan_in, w));
            fan_in = w;
        }
        dims.push((fan_in, self.output_dim()));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| (fan_in + 1) * fan_out)
            .sum()
    }

    /// Half-width of the box for every parameter entry.
    pub fn bounds(&self) -> Vec<f64> {
        let mut bounds = Vec::with_capacity(self.parameter_count());
        for (fan_in, fan_out) in self.layer_dims() {
            let b = 2.0 / (fan_in as f64).sqrt();
            bounds.extend(std::iter::repeat_n(b, (fan_in + 1) * fan_out));
        }
        bounds
    }

    /// Draws every entry uniformly on its box interval.
    pub fn init_params(&self, seed: u64) -> ParameterVector {
        let bounds = self.bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = bounds.iter().map(|&b| rng.random_range(-b..=b)).collect();
        ParameterVector {
            values,
            bounds,
            velocities: None,
        }
    }
}

/// Flattened trainable parameters with their symmetric box half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    /// Entry `i` must stay in `[-bounds[i], bounds[i]]`.
    pub bounds: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, bounds: Vec<f64>) -> Result<Self> {
        if values.len() != bounds.len() {
            return Err(Error::Shape(format!(
                "{} values but {} bounds",
                values.len(),
                bounds.len()
            )));
        }
        Ok(Self {
            values,
            bounds,
            velocities: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn in_box(&self) -> bool {
        self.values
            .iter()
            .zip(&self.bounds)
            .all(|(v, b)| v.abs() <= *b)
    }

    /// Zero velocities, allocating them if absent.
    pub fn velocities_mut(&mut self) -> &mut Vec<f64> {
        let n = self.values.len();
        self.velocities.get_or_insert_with(|| vec![0.0; n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major input matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    dim: usize,
    targets: Targets,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, dim: usize, targets: Targets) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("input dimension must be >= 1".into()));
        }
        if inputs.len() != dim * targets.len() {
            return Err(Error::Shape(format!(
                "{} input values do not form {} rows of width {dim}",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Self {
            inputs,
            dim,
            targets,
        })
    }

    pub fn classification(inputs: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        Self::new(inputs, dim, Targets::Labels(labels))
    }

    pub fn regression(inputs: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(inputs, dim, Targets::Values(values))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
        }
        let targets = match &self.targets {
            Targets::Labels(l) => Targets::Labels(indices.iter().map(|&i| l[i]).collect()),
            Targets::Values(v) => Targets::Values(indices.iter().map(|&i| v[i]).collect()),
        };
        Batch {
            inputs,
            dim: self.dim,
            targets,
        }
    }
}
