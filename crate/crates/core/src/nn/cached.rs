//! Forward-pass cache for single-parameter moves.
//!
//! Changing one entry of layer `l` only changes one unit of layer `l` and
//! everything downstream, so a proposal recomputes that unit plus layers
//! `l+1..` from cached activations. Every value is recomputed from scratch
//! with the same summation order as [`Network::forward`], so cached and
//! full evaluations are bit-identical and no rounding drift accumulates.

use super::network::{argmax, cross_entropy, preact, Network};
use super::{Batch, Targets};
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct LayerCache {
    /// Per layer, row-major `(n, fan_out)` pre-activations.
    z: Vec<Vec<f64>>,
    /// Per hidden layer, activations; empty for the output layer.
    a: Vec<Vec<f64>>,
}

impl LayerCache {
    fn new(net: &Network, n: usize) -> Self {
        let last = net.layers().len() - 1;
        let z = net.layers().iter().map(|s| vec![0.0; n * s.fan_out]).collect();
        let a = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, s)| if l == last { Vec::new() } else { vec![0.0; n * s.fan_out] })
            .collect();
        Self { z, a }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    index: usize,
    old: f64,
    layer: usize,
    train_loss: f64,
    test_metric: f64,
}

/// Tracks `(train loss, test metric)` of a network under single-entry moves.
///
/// The test metric is accuracy for classification and mean squared error
/// for regression.
#[derive(Debug, Clone)]
pub struct CachedEvaluator<'a> {
    net: &'a Network,
    train: &'a Batch,
    test: &'a Batch,
    params: Vec<f64>,
    current: [LayerCache; 2],
    proposal: [LayerCache; 2],
    train_loss: f64,
    test_metric: f64,
    pending: Option<Pending>,
}

impl<'a> CachedEvaluator<'a> {
    pub fn new(net: &'a Network, train: &'a Batch, test: &'a Batch, params: Vec<f64>) -> Result<Self> {
        net.check_batch(train)?;
        net.check_batch(test)?;
        if params.len() != net.parameter_count() {
            return Err(Error::Shape("parameter length mismatch".into()));
        }
        let current = [LayerCache::new(net, train.len()), LayerCache::new(net, test.len())];
        let proposal = current.clone();
        let mut ev = Self {
            net,
            train,
            test,
            params,
            current,
            proposal,
            train_loss: 0.0,
            test_metric: 0.0,
            pending: None,
        };
        let [cur_train, cur_test] = &mut ev.current;
        fill(net, &ev.params, train, None, cur_train, 0, None);
        fill(net, &ev.params, test, None, cur_test, 0, None);
        ev.train_loss = train_loss(net, train, &ev.current[0]);
        ev.test_metric = test_metric(net, test, &ev.current[1]);
        if !ev.train_loss.is_finite() || !ev.test_metric.is_finite() {
            return Err(Error::NonFinite("initial loss"));
        }
        Ok(ev)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn train_loss(&self) -> f64 {
        self.train_loss
    }

    pub fn test_metric(&self) -> f64 {
        self.test_metric
    }

    /// Evaluates the network with entry `index` set to `value`. The move is
    /// held pending until [`accept`](Self::accept) or
    /// [`reject`](Self::reject). A non-finite result is rejected on the spot.
    pub fn propose(&mut self, index: usize, value: f64) -> Result<(f64, f64)> {
        assert!(self.pending.is_none(), "previous proposal not resolved");
        let (layer, row, _) = self.net.locate(index);
        let old = self.params[index];
        self.params[index] = value;
        for k in 0..2 {
            let batch = if k == 0 { self.train } else { self.test };
            fill(
                self.net,
                &self.params,
                batch,
                Some(&self.current[k]),
                &mut self.proposal[k],
                layer,
                Some(row),
            );
        }
        let tl = train_loss(self.net, self.train, &self.proposal[0]);
        let tm = test_metric(self.net, self.test, &self.proposal[1]);
        if !tl.is_finite() || !tm.is_finite() {
            self.params[index] = old;
            return Err(Error::NonFinite("proposal loss"));
        }
        self.pending = Some(Pending {
            index,
            old,
            layer,
            train_loss: tl,
            test_metric: tm,
        });
        Ok((tl, tm))
    }

    pub fn accept(&mut self) {
        let p = self.pending.take().expect("no pending proposal");
        for k in 0..2 {
            let (cur, prop) = (&mut self.current[k], &mut self.proposal[k]);
            for l in p.layer..cur.z.len() {
                std::mem::swap(&mut cur.z[l], &mut prop.z[l]);
                std::mem::swap(&mut cur.a[l], &mut prop.a[l]);
            }
        }
        self.train_loss = p.train_loss;
        self.test_metric = p.test_metric;
    }

    pub fn reject(&mut self) {
        let p = self.pending.take().expect("no pending proposal");
        self.params[p.index] = p.old;
    }
}

/// Recomputes layers `start..` into `out`. With `row = Some(j)` only unit
/// `j` of layer `start` is recomputed, the rest copied from `cur`.
fn fill(
    net: &Network,
    params: &[f64],
    batch: &Batch,
    cur: Option<&LayerCache>,
    out: &mut LayerCache,
    start: usize,
    row: Option<usize>,
) {
    let layers = net.layers();
    let last = layers.len() - 1;
    let act = net.spec().activation;
    let n = batch.len();
    for l in start..layers.len() {
        let shape = layers[l];
        let fo = shape.fan_out;
        let fi = shape.fan_in;
        let (out_lower, out_upper) = out.a.split_at_mut(l);
        let a_out = &mut out_upper[0];
        let z_out = &mut out.z[l];
        let input_of = |s: usize| -> &[f64] {
            if l == 0 {
                batch.row(s)
            } else if l == start {
                let a = &cur.expect("partial fill needs a current cache").a[l - 1];
                &a[s * fi..(s + 1) * fi]
            } else {
                &out_lower[l - 1][s * fi..(s + 1) * fi]
            }
        };
        match (l == start, row) {
            (true, Some(j)) => {
                let c = cur.expect("partial fill needs a current cache");
                z_out.copy_from_slice(&c.z[l]);
                a_out.copy_from_slice(&c.a[l]);
                let w = shape.weight(params, j);
                let b = shape.bias(params, j);
                for s in 0..n {
                    let z = preact(w, b, input_of(s));
                    z_out[s * fo + j] = z;
                    if l != last {
                        a_out[s * fo + j] = act.apply(z);
                    }
                }
            }
            _ => {
                for s in 0..n {
                    let input = input_of(s);
                    for j in 0..fo {
                        let z = preact(shape.weight(params, j), shape.bias(params, j), input);
                        z_out[s * fo + j] = z;
                        if l != last {
                            a_out[s * fo + j] = act.apply(z);
                        }
                    }
                }
            }
        }
    }
}

fn train_loss(net: &Network, batch: &Batch, cache: &LayerCache) -> f64 {
    mean_loss(net, batch, cache.z.last().unwrap())
}

fn mean_loss(net: &Network, batch: &Batch, out: &[f64]) -> f64 {
    let k = net.spec().output_dim();
    let n = batch.len() as f64;
    match batch.targets() {
        Targets::Labels(labels) => {
            out.chunks_exact(k)
                .zip(labels)
                .map(|(l, &c)| cross_entropy(l, c))
                .sum::<f64>()
                / n
        }
        Targets::Values(values) => {
            out.iter()
                .zip(values)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>()
                / n
        }
    }
}

fn test_metric(net: &Network, batch: &Batch, cache: &LayerCache) -> f64 {
    let out = cache.z.last().unwrap();
    match batch.targets() {
        Targets::Labels(labels) => {
            let k = net.spec().output_dim();
            out.chunks_exact(k)
                .zip(labels)
                .filter(|(l, &c)| argmax(l).0 == c)
                .count() as f64
                / batch.len() as f64
        }
        Targets::Values(_) => mean_loss(net, batch, out),
    }
}
