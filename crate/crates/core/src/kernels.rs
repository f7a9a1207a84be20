//! Kernels and their pointwise evaluation.
//!
//! Three families are supported: the product of one-dimensional Matérn 3/2
//! covariances, the Gaussian (RBF) kernel and the distance kernel
//! `K(x, y) = -‖x - y‖`. Only the first two are strictly positive definite;
//! the distance kernel is kept for evaluation of probability measures.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::TargetMeasure;

/// A point of `R^d` with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter(
                "point must have at least one coordinate".into(),
            ));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate {c}"
            )));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Bit pattern of the coordinates, used for exact-equality hashing.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|c| c.to_bits()).collect()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `∏_i (1 + √3θ|x_i − y_i|) exp(−√3θ|x_i − y_i|)`.
    Matern32Product,
    /// `exp(−θ‖x − y‖²)`.
    GaussianRbf,
    /// `−‖x − y‖`.
    Distance,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Matern32Product => "matern32_product",
            KernelFamily::GaussianRbf => "gaussian_rbf",
            KernelFamily::Distance => "distance",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel family plus bandwidth. Evaluation is a pure function of the spec and the two points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Bandwidth; ignored by the distance kernel.
    pub theta: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: f64) -> Result<Self> {
        if family != KernelFamily::Distance && !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive and finite, got {theta}"
            )));
        }
        Ok(KernelSpec { family, theta })
    }

    pub fn matern32(theta: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern32Product, theta)
    }

    pub fn gaussian(theta: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianRbf, theta)
    }

    pub fn distance() -> Self {
        KernelSpec {
            family: KernelFamily::Distance,
            theta: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    /// `K(x, y) ≥ 0` everywhere.
    pub fn is_positive(&self) -> bool {
        !matches!(self.family, KernelFamily::Distance)
    }

    /// Strictly positive definite (usable by the construction algorithms).
    pub fn is_spd(&self) -> bool {
        !matches!(self.family, KernelFamily::Distance)
    }

    pub fn require_spd(&self) -> Result<()> {
        if self.is_spd() {
            Ok(())
        } else {
            Err(Error::NotSpd(self.name()))
        }
    }

    /// The constant value of `K(x, x)`; all supported families have a constant diagonal.
    pub fn diag_value(&self) -> f64 {
        match self.family {
            KernelFamily::Matern32Product | KernelFamily::GaussianRbf => 1.0,
            KernelFamily::Distance => 0.0,
        }
    }

    /// Uniform bound K̄ on `K(x, x)`.
    pub fn diag_bound(&self) -> f64 {
        self.diag_value()
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        Ok(self.eval_slices(x, y))
    }

    /// Unchecked evaluation on raw coordinates; both slices must have the same length.
    #[inline]
    pub fn eval_slices(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self.family {
            KernelFamily::Matern32Product => {
                let a = 3f64.sqrt() * self.theta;
                let mut prod = 1.0;
                let mut sum = 0.0;
                for (xi, yi) in x.iter().zip(y) {
                    let t = a * (xi - yi).abs();
                    prod *= 1.0 + t;
                    sum += t;
                }
                prod * (-sum).exp()
            }
            KernelFamily::GaussianRbf => (-self.theta * squared_distance(x, y)).exp(),
            KernelFamily::Distance => -squared_distance(x, y).sqrt(),
        }
    }

    /// Identifier used to key per-kernel caches.
    pub(crate) fn cache_key(&self) -> (KernelFamily, u64) {
        (self.family, self.theta.to_bits())
    }
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// The reduced kernel `K_µ(x, y) = K(x, y) − P_{K,µ}(x) − P_{K,µ}(y) + E_K(µ)`.
pub fn reduced_eval(k: &KernelSpec, target: &TargetMeasure, x: &Point, y: &Point) -> Result<f64> {
    let kxy = k.eval(x, y)?;
    let px = target.potential(k, x)?;
    let py = target.potential(k, y)?;
    let e = target.energy(k)?;
    Ok(kxy - px - py + e)
}
