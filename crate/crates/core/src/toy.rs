//! A quadratic well `U(θ) = Σ θ_i²` on the box `[-b, b]^d`.
//!
//! Collective variables are `x = ln U` and a constant `y = 0.5`. While
//! `√U <= b` the volume with `U <= u` scales as `u^(d/2)`, so the entropy
//! as a function of `x` has slope `d/2`. Used as an exactly solvable
//! target for the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wlmc::{Cv, MoveSystem};
use crate::Result;

pub const TOY_Y: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticWell {
    theta: Vec<f64>,
    bound: f64,
    energy: f64,
    pending: Option<(usize, f64, f64)>,
}

impl QuadraticWell {
    /// `dim` coordinates drawn uniformly from `[-bound, bound]`.
    pub fn new(dim: usize, bound: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..dim).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::from_values(theta, bound)
    }

    pub fn from_values(theta: Vec<f64>, bound: f64) -> Self {
        let energy = energy(&theta);
        Self { theta, bound, energy, pending: None }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        self.pending = None;
        &mut self.theta
    }

    pub fn bound_value(&self) -> f64 {
        self.bound
    }

    /// `Σ θ_i²`, recomputed from scratch.
    pub fn energy(&self) -> f64 {
        energy(&self.theta)
    }

    /// Slope of the exact entropy in `x = ln U` below the box corners.
    pub fn exact_slope(&self) -> f64 {
        self.dim() as f64 / 2.0
    }
}

fn energy(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t * t).sum()
}

fn to_cv(u: f64) -> Cv {
    Cv { x: u.ln(), y: TOY_Y }
}

impl MoveSystem for QuadraticWell {
    fn len(&self) -> usize {
        self.theta.len()
    }

    fn value(&self, i: usize) -> f64 {
        self.theta[i]
    }

    fn bound(&self, _: usize) -> f64 {
        self.bound
    }

    fn cv(&self) -> Cv {
        to_cv(self.energy)
    }

    fn propose(&mut self, i: usize, v: f64) -> Result<Cv> {
        let old = self.theta[i];
        self.theta[i] = v;
        // full recompute keeps the energy free of accumulated rounding
        let e = energy(&self.theta);
        self.theta[i] = old;
        self.pending = Some((i, v, e));
        Ok(to_cv(e))
    }

    fn accept(&mut self) {
        if let Some((i, v, e)) = self.pending.take() {
            self.theta[i] = v;
            self.energy = e;
        }
    }

    fn reject(&mut self) {
        self.pending = None;
    }

    fn values(&self) -> Vec<f64> {
        self.theta.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propose_accept_reject() {
        let mut w = QuadraticWell::from_values(vec![0.5, -0.5], 1.0);
        assert_eq!(w.cv().x, 0.5f64.ln());
        let cv = w.propose(0, 1.0).unwrap();
        assert_eq!(cv.x, 1.25f64.ln());
        w.reject();
        assert_eq!(w.theta(), &[0.5, -0.5]);
        w.propose(1, 0.0).unwrap();
        w.accept();
        assert_eq!(w.theta(), &[0.5, 0.0]);
        assert_eq!(w.cv().x, 0.25f64.ln());
    }

    #[test]
    fn init_in_box() {
        let w = QuadraticWell::new(10, 0.3, 1);
        assert!(w.theta().iter().all(|t| t.abs() <= 0.3));
        assert_eq!(w.exact_slope(), 5.0);
    }
}
