use super::{sigmoid, Batch, NetworkSpec, Targets, Task};
use crate::{Error, Result};

/// Scalar functionals of a network over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    /// Mean softmax cross-entropy (classification) or mean squared error.
    Loss,
    /// Fraction of rows whose argmax logit equals the label.
    Accuracy,
    /// Mean of `sigmoid(alpha * margin)`, where the margin is the correct
    /// logit minus the largest incorrect logit.
    SmoothedAccuracy { alpha: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    #[inline]
    pub fn weight<'p>(&self, params: &'p [f64], row: usize) -> &'p [f64] {
        let start = self.offset + row * self.fan_in;
        &params[start..start + self.fan_in]
    }

    #[inline]
    pub fn bias(&self, params: &[f64], row: usize) -> f64 {
        params[self.offset + self.fan_in * self.fan_out + row]
    }

    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

/// `bias + w . x`, summed left to right. Shared by every forward path so
/// cached and full evaluations agree bit for bit.
#[inline]
pub(crate) fn preact(w: &[f64], bias: f64, x: &[f64]) -> f64 {
    let mut s = bias;
    for (wi, xi) in w.iter().zip(x) {
        s += wi * xi;
    }
    s
}

/// Cross-entropy of one row of logits, `logsumexp(l) - l[label]`.
#[inline]
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let (imax, m) = argmax(logits);
    let mut rest = 0.0;
    for (j, &l) in logits.iter().enumerate() {
        if j != imax {
            rest += (l - m).exp();
        }
    }
    m + rest.ln_1p() - logits[label]
}

/// First index of the largest entry.
#[inline]
pub(crate) fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut m = v[0];
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > m {
            m = x;
            best = j;
        }
    }
    (best, m)
}

/// Correct logit minus the largest incorrect one, plus the index of that
/// incorrect logit (lowest index on ties).
#[inline]
pub(crate) fn margin(logits: &[f64], label: usize) -> (f64, usize) {
    let mut rival = usize::MAX;
    let mut m = f64::NEG_INFINITY;
    for (j, &l) in logits.iter().enumerate() {
        if j != label && (rival == usize::MAX || l > m) {
            m = l;
            rival = j;
        }
    }
    (logits[label] - m, rival)
}

/// An evaluable network: a validated spec plus its parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<LayerShape>,
    n_params: usize,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut offset = 0;
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = LayerShape {
                    fan_in,
                    fan_out,
                    offset,
                };
                offset += l.len();
                l
            })
            .collect();
        Ok(Self {
            spec,
            layers,
            n_params: offset,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn task(&self) -> Task {
        self.spec.task
    }

    pub fn parameter_count(&self) -> usize {
        self.n_params
    }

    pub(crate) fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    /// Returns `(layer, row, column)` for a flat parameter index; `column`
    /// is `None` for a bias.
    pub(crate) fn locate(&self, index: usize) -> (usize, usize, Option<usize>) {
        for (l, shape) in self.layers.iter().enumerate() {
            let local = index.wrapping_sub(shape.offset);
            if index >= shape.offset && local < shape.len() {
                let nw = shape.fan_in * shape.fan_out;
                return if local < nw {
                    (l, local / shape.fan_in, Some(local % shape.fan_in))
                } else {
                    (l, local - nw, None)
                };
            }
        }
        panic!("parameter index {index} out of range");
    }

    pub fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.dim() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} features, network expects {}",
                batch.dim(),
                self.spec.input_dim
            )));
        }
        match (self.spec.task, batch.targets()) {
            (Task::Classification { num_classes }, Targets::Labels(labels)) => {
                if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
                    return Err(Error::Shape(format!(
                        "label {bad} outside [0, {num_classes})"
                    )));
                }
                Ok(())
            }
            (Task::Regression, Targets::Values(_)) => Ok(()),
            _ => Err(Error::Shape("batch targets do not match task".into())),
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Shape(format!(
                "{} parameters given, network has {}",
                params.len(),
                self.n_params
            )));
        }
        Ok(())
    }

    /// Forward pass of a single row. `zs[l]` receives layer `l`
    /// pre-activations; `acts[l]` its activations (the last layer is linear).
    fn forward_row(&self, params: &[f64], x: &[f64], zs: &mut [Vec<f64>], acts: &mut [Vec<f64>]) {
        let last = self.layers.len() - 1;
        for (l, shape) in self.layers.iter().enumerate() {
            let (prev, rest) = acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            let z = &mut zs[l];
            let a = &mut rest[0];
            for j in 0..shape.fan_out {
                z[j] = preact(shape.weight(params, j), shape.bias(params, j), input);
                a[j] = if l == last {
                    z[j]
                } else {
                    self.spec.activation.apply(z[j])
                };
            }
        }
    }

    fn buffers(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let zs: Vec<Vec<f64>> = self.layers.iter().map(|s| vec![0.0; s.fan_out]).collect();
        (zs.clone(), zs)
    }

    /// Row-major `(n, output_dim)` outputs.
    pub fn forward(&self, params: &[f64], batch: &Batch) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        let (mut zs, mut acts) = self.buffers();
        let out = self.spec.output_dim();
        let mut result = Vec::with_capacity(batch.len() * out);
        for i in 0..batch.len() {
            self.forward_row(params, batch.row(i), &mut zs, &mut acts);
            result.extend_from_slice(zs.last().unwrap());
        }
        Ok(result)
    }

    pub fn value(&self, params: &[f64], batch: &Batch, scalar: Scalar) -> Result<f64> {
        let out = self.spec.output_dim();
        let outputs = self.forward(params, batch)?;
        let n = batch.len() as f64;
        let v = match (scalar, batch.targets()) {
            (Scalar::Loss, Targets::Labels(labels)) => {
                outputs
                    .chunks_exact(out)
                    .zip(labels)
                    .map(|(l, &c)| cross_entropy(l, c))
                    .sum::<f64>()
                    / n
            }
            (Scalar::Loss, Targets::Values(values)) => {
                outputs
                    .iter()
                    .zip(values)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>()
                    / n
            }
            (Scalar::Accuracy, Targets::Labels(labels)) => {
                outputs
                    .chunks_exact(out)
                    .zip(labels)
                    .filter(|(l, &c)| argmax(l).0 == c)
                    .count() as f64
                    / n
            }
            (Scalar::SmoothedAccuracy { alpha }, Targets::Labels(labels)) => {
                outputs
                    .chunks_exact(out)
                    .zip(labels)
                    .map(|(l, &c)| sigmoid(alpha * margin(l, c).0))
                    .sum::<f64>()
                    / n
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "accuracy requires a classification task".into(),
                ))
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("loss"))
        }
    }

    /// Mean cross-entropy or MSE over `batch`.
    pub fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        self.value(params, batch, Scalar::Loss)
    }

    pub fn accuracy(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        self.value(params, batch, Scalar::Accuracy)
    }

    pub fn smoothed_accuracy(&self, params: &[f64], batch: &Batch, alpha: f64) -> Result<f64> {
        self.value(params, batch, Scalar::SmoothedAccuracy { alpha })
    }

    pub fn gradient(&self, params: &[f64], batch: &Batch, scalar: Scalar) -> Result<Vec<f64>> {
        self.value_and_gradient(params, batch, scalar).map(|(_, g)| g)
    }

    /// Scalar value and its exact gradient by reverse accumulation.
    pub fn value_and_gradient(
        &self,
        params: &[f64],
        batch: &Batch,
        scalar: Scalar,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        self.check_batch(batch)?;
        if scalar == Scalar::Accuracy {
            return Err(Error::NotDifferentiable("hard accuracy"));
        }
        if !self.spec.task.is_classification() && scalar != Scalar::Loss {
            return Err(Error::InvalidConfig(
                "smoothed accuracy requires a classification task".into(),
            ));
        }

        let n = batch.len() as f64;
        let (mut zs, mut acts) = self.buffers();
        let mut deltas: Vec<Vec<f64>> = zs.clone();
        let mut grad = vec![0.0; self.n_params];
        let mut total = 0.0;
        let last = self.layers.len() - 1;

        for i in 0..batch.len() {
            let x = batch.row(i);
            self.forward_row(params, x, &mut zs, &mut acts);
            let out = &zs[last];
            let d_out = &mut deltas[last];

            match (scalar, batch.targets()) {
                (Scalar::Loss, Targets::Labels(labels)) => {
                    let c = labels[i];
                    total += cross_entropy(out, c);
                    let (_, m) = argmax(out);
                    let mut sum = 0.0;
                    for (d, &l) in d_out.iter_mut().zip(out.iter()) {
                        *d = (l - m).exp();
                        sum += *d;
                    }
                    for d in d_out.iter_mut() {
                        *d /= sum * n;
                    }
                    d_out[c] -= 1.0 / n;
                }
                (Scalar::Loss, Targets::Values(values)) => {
                    let r = out[0] - values[i];
                    total += r * r;
                    d_out[0] = 2.0 * r / n;
                }
                (Scalar::SmoothedAccuracy { alpha }, Targets::Labels(labels)) => {
                    let c = labels[i];
                    let (dl, rival) = margin(out, c);
                    let s = sigmoid(alpha * dl);
                    total += s;
                    let ds = alpha * s * (1.0 - s) / n;
                    d_out.iter_mut().for_each(|d| *d = 0.0);
                    d_out[c] = ds;
                    d_out[rival] = -ds;
                }
                _ => unreachable!("checked above"),
            }

            for l in (0..=last).rev() {
                let shape = self.layers[l];
                let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
                let (lower, upper) = deltas.split_at_mut(l);
                let delta = &upper[0];
                let bias_base = shape.offset + shape.fan_in * shape.fan_out;
                for (j, &dj) in delta.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    let row = shape.offset + j * shape.fan_in;
                    for (g, &xi) in grad[row..row + shape.fan_in].iter_mut().zip(input) {
                        *g += dj * xi;
                    }
                    grad[bias_base + j] += dj;
                }
                if l > 0 {
                    let prev = &mut lower[l - 1];
                    for (k, p) in prev.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for (j, &dj) in delta.iter().enumerate() {
                            s += params[shape.offset + j * shape.fan_in + k] * dj;
                        }
                        *p = s * self.spec.activation.derivative(zs[l - 1][k]);
                    }
                }
            }
        }
        let value = total / n;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok((value, grad))
    }
}
