//! Finitely supported signed measures `ξ = Σ w_i δ_{x_i}`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernels::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: weights.len(),
            });
        }
        if let Some(first) = support.first() {
            if let Some(p) = support.iter().find(|p| p.dim() != first.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: p.dim(),
                });
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(DiscreteMeasure { support, weights })
    }

    /// Uniform weights `1/n` on the given points (repeats are kept as separate atoms).
    pub fn empirical(support: Vec<Point>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn dirac(x: Point) -> Self {
        DiscreteMeasure {
            support: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total mass is one within `1e-10` and all weights are `≥ −1e-12`.
    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= 1e-10 && self.weights.iter().all(|&w| w >= -1e-12)
    }

    /// Merges repeated support points, summing their weights (order of first appearance).
    pub fn merged(&self) -> Self {
        let mut b = WeightedSupport::default();
        for (p, &w) in self.support.iter().zip(&self.weights) {
            b.add(p.coords(), w);
        }
        b.to_measure()
    }
}

/// Incrementally built measure whose atoms are unique points.
#[derive(Clone, Debug, Default)]
pub struct WeightedSupport {
    coords: Vec<Vec<f64>>,
    weights: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
}

impl WeightedSupport {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn find(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&bits(x)).copied()
    }

    /// Adds `w` to the atom at `x`, creating it if needed; returns the atom index.
    pub fn add(&mut self, x: &[f64], w: f64) -> usize {
        let key = bits(x);
        if let Some(&i) = self.index.get(&key) {
            self.weights[i] += w;
            i
        } else {
            let i = self.coords.len();
            self.coords.push(x.to_vec());
            self.weights.push(w);
            self.index.insert(key, i);
            i
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.weights.len());
        self.weights.copy_from_slice(weights);
    }

    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure {
            support: self
                .coords
                .iter()
                .map(|c| Point::new(c.clone()).expect("finite coordinates"))
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|c| c.to_bits()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_sums_repeated_atoms() {
        let p = |c: f64| Point::new(vec![c]).unwrap();
        let m = DiscreteMeasure::new(vec![p(0.0), p(1.0), p(0.0)], vec![0.25, 0.5, 0.25]).unwrap();
        let merged = m.merged();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.weights(), &[0.5, 0.5]);
        assert!(merged.is_probability());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let p = Point::new(vec![0.0]).unwrap();
        assert!(DiscreteMeasure::new(vec![p], vec![]).is_err());
    }

    #[test]
    fn weighted_support_scaling() {
        let mut s = WeightedSupport::default();
        s.add(&[0.0, 1.0], 1.0);
        s.scale(0.5);
        let i = s.add(&[1.0, 0.0], 0.5);
        assert_eq!(i, 1);
        assert_eq!(s.add(&[0.0, 1.0], 0.25), 0);
        assert_eq!(s.weights(), &[0.75, 0.5]);
    }
}
