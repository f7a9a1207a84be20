//! Direct MMD evaluation, theoretical bound curves, covering radius and the
//! distance-kernel evaluation metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::kernels::{squared_distance, KernelSpec};
use crate::linalg::Mc2Interval;
use crate::measure::{DiscreteMeasure, WeightedSupport};
use crate::target::TargetMeasure;

fn check_measure(m: &DiscreteMeasure, t: &TargetMeasure, k: &KernelSpec) -> Result<()> {
    if let Some(p) = m.support().iter().find(|p| p.dim() != t.dim()) {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: p.dim(),
        });
    }
    if !k.is_spd() && (m.total_mass() - 1.0).abs() > 1e-10 {
        return Err(Error::MassNotOne(m.total_mass()));
    }
    Ok(())
}

/// `MMD²(µ, ξ) = wᵀK_n w − 2wᵀp_n(µ) + E_K(µ)`.
pub fn mmd_squared(m: &DiscreteMeasure, t: &TargetMeasure, k: &KernelSpec) -> Result<f64> {
    check_measure(m, t, k)?;
    let e = t.energy(k)?;
    let (pts, w) = (m.support(), m.weights());
    let quad: f64 = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            (0..pts.len())
                .map(|j| w[i] * w[j] * k.eval_slices(&pts[i], &pts[j]))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let lin: f64 = pts
        .iter()
        .zip(w)
        .map(|(x, wi)| wi * t.potential_unchecked(k, x))
        .sum();
    Ok(quad - 2.0 * lin + e)
}

/// `wᵀ K_{µ,n} w`, valid for measures of total mass one.
pub fn mmd_squared_reduced(m: &DiscreteMeasure, t: &TargetMeasure, k: &KernelSpec) -> Result<f64> {
    check_measure(m, t, k)?;
    if (m.total_mass() - 1.0).abs() > 1e-10 {
        return Err(Error::MassNotOne(m.total_mass()));
    }
    let e = t.energy(k)?;
    let pts = m.support();
    let w = m.weights();
    let pot: Vec<f64> = pts.iter().map(|x| t.potential_unchecked(k, x)).collect();
    let mut s = 0.0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            s += w[i] * w[j] * (k.eval_slices(&pts[i], &pts[j]) - pot[i] - pot[j] + e);
        }
    }
    Ok(s)
}

/// Direct MMD² evaluation along a growing support, caching the Gram matrix of the
/// atoms so each evaluation costs `O(n²)` arithmetic but no repeated kernel calls.
pub struct MmdEvaluator<'a> {
    kernel: KernelSpec,
    target: &'a TargetMeasure,
    energy: f64,
    gram: Vec<Vec<f64>>,
    pot: Vec<f64>,
}

impl<'a> MmdEvaluator<'a> {
    pub fn new(kernel: KernelSpec, target: &'a TargetMeasure) -> Result<Self> {
        Ok(MmdEvaluator {
            energy: target.energy(&kernel)?,
            kernel,
            target,
            gram: Vec::new(),
            pot: Vec::new(),
        })
    }

    /// MMD² of the measure held by `support`; atoms are appended to the cache as they appear.
    pub fn mmd2(&mut self, support: &WeightedSupport) -> f64 {
        while self.gram.len() < support.len() {
            let i = self.gram.len();
            let x = support.point(i);
            let row: Vec<f64> = (0..=i)
                .map(|j| self.kernel.eval_slices(x, support.point(j)))
                .collect();
            self.gram.push(row);
            self.pot
                .push(self.target.potential_unchecked(&self.kernel, x));
        }
        let w = support.weights();
        let mut quad = 0.0;
        for i in 0..w.len() {
            let row = &self.gram[i];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * w[j];
            }
            quad += w[i] * (2.0 * acc + row[i] * w[i]);
        }
        let lin: f64 = w.iter().zip(&self.pot).map(|(a, b)| a * b).sum();
        quad - 2.0 * lin + self.energy
    }
}

/// Convergence bounds, one per construction and step rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    KhInvK,
    KhTwoOverKPlus1,
    KhOptimal,
    GmInvK,
    GmTwoOverKPlus1,
    GmOptimal,
    IwoSimplex,
    IwoSumOne,
    IwoUnconstrained,
    SbqUnconstrained,
    SbqSumOne,
    SbqCoordDescent,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 12] = [
        BoundMethod::KhInvK,
        BoundMethod::KhTwoOverKPlus1,
        BoundMethod::KhOptimal,
        BoundMethod::GmInvK,
        BoundMethod::GmTwoOverKPlus1,
        BoundMethod::GmOptimal,
        BoundMethod::IwoSimplex,
        BoundMethod::IwoSumOne,
        BoundMethod::IwoUnconstrained,
        BoundMethod::SbqUnconstrained,
        BoundMethod::SbqSumOne,
        BoundMethod::SbqCoordDescent,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BoundMethod::KhInvK => "kh_inv_k",
            BoundMethod::KhTwoOverKPlus1 => "kh_two_over_kplus1",
            BoundMethod::KhOptimal => "kh_optimal",
            BoundMethod::GmInvK => "gm_inv_k",
            BoundMethod::GmTwoOverKPlus1 => "gm_two_over_kplus1",
            BoundMethod::GmOptimal => "gm_optimal",
            BoundMethod::IwoSimplex => "kh_iwo_i",
            BoundMethod::IwoSumOne => "kh_iwo_ii",
            BoundMethod::IwoUnconstrained => "kh_iwo_iii",
            BoundMethod::SbqUnconstrained => "sbq_unconstrained",
            BoundMethod::SbqSumOne => "sbq_sum_one",
            BoundMethod::SbqCoordDescent => "sbq_coord_descent",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == tag)
            .ok_or_else(|| Error::UnknownMethod(tag.to_string()))
    }
}

/// Constants entering the bound of one method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundSpec {
    pub method: BoundMethod,
    pub a_c: f64,
    pub b_c: f64,
    pub kbar: f64,
    pub kbar_c: f64,
    pub mc2: Mc2Interval,
    pub positive: bool,
}

impl BoundSpec {
    /// `A_C = (K̄_C^{1/2} + τ_{1/2})²` and `B_C = 4K̄_C`, or `K̄_C + τ_{1/2}²` and `2K̄_C`
    /// for positive kernels.
    pub fn new(
        method: BoundMethod,
        kernel: &KernelSpec,
        kbar_c: f64,
        tau_half: f64,
        mc2: Mc2Interval,
    ) -> Self {
        let positive = kernel.is_positive();
        let (a_c, b_c) = if positive {
            (kbar_c + tau_half * tau_half, 2.0 * kbar_c)
        } else {
            ((kbar_c.sqrt() + tau_half).powi(2), 4.0 * kbar_c)
        };
        BoundSpec {
            method,
            a_c,
            b_c,
            kbar: kernel.diag_bound(),
            kbar_c,
            mc2,
            positive,
        }
    }

    /// The `n`-dependent part of the bound, without `M_C²`.
    pub fn term(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.method {
            BoundMethod::KhInvK => self.b_c * (2.0 + nf.ln()) / (nf + 1.0),
            BoundMethod::GmInvK => self.a_c * (1.0 + nf.ln()) / nf,
            BoundMethod::KhTwoOverKPlus1
            | BoundMethod::KhOptimal
            | BoundMethod::GmTwoOverKPlus1
            | BoundMethod::GmOptimal
            | BoundMethod::IwoSimplex
            | BoundMethod::IwoSumOne
            | BoundMethod::SbqSumOne => 4.0 * self.b_c / (nf + 3.0),
            BoundMethod::IwoUnconstrained
            | BoundMethod::SbqUnconstrained
            | BoundMethod::SbqCoordDescent => 4.0 * self.kbar / (nf + 13.0 / 3.0),
        }
    }

    /// The sharper bound that holds when the optimal measure on `𝒳_C` is the sum-one
    /// optimum (all `ω̂^C_i ≥ 0`); `None` where no such bound exists or `n` is too small.
    pub fn conditional_term(&self, n: usize) -> Option<f64> {
        let nf = n as f64;
        match self.method {
            BoundMethod::KhInvK
            | BoundMethod::KhOptimal
            | BoundMethod::GmInvK
            | BoundMethod::GmOptimal
            | BoundMethod::IwoSimplex => Some(self.b_c / nf),
            BoundMethod::IwoSumOne | BoundMethod::SbqSumOne if n >= 2 => {
                Some(self.b_c / (nf + 2.0))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub n: usize,
    /// `M_C²` upper end plus the bound term.
    pub upper: f64,
    /// `M_C²` lower end plus the bound term.
    pub lower: f64,
    /// Advisory conditional bound (upper `M_C²` end), where defined.
    pub conditional: Option<f64>,
}

pub fn bound_curve(b: &BoundSpec, n_max: usize) -> Vec<BoundPoint> {
    (1..=n_max)
        .map(|n| {
            let t = b.term(n);
            BoundPoint {
                n,
                upper: b.mc2.upper + t,
                lower: b.mc2.lower + t,
                conditional: b.conditional_term(n).map(|c| b.mc2.upper + c),
            }
        })
        .collect()
}

/// Grid approximation of the covering radius `max_{x ∈ box} min_i ‖x − x_i‖`, using
/// `g` points per axis including both endpoints. Returns a lower approximation.
pub fn covering_radius(design: &[Vec<f64>], lower: &[f64], upper: &[f64], g: usize) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::InvalidParameter(
            "covering radius of an empty design".into(),
        ));
    }
    let d = lower.len();
    if d == 0 || upper.len() != d || g < 2 {
        return Err(Error::InvalidParameter(
            "covering radius needs a box and g ≥ 2".into(),
        ));
    }
    if let Some(p) = design.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let total = (g as u64)
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter(format!("grid of {g}^{d} points is too large")))?;
    let max_sq = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for i in 0..d {
                let c = (idx % g as u64) as f64 / (g - 1) as f64;
                idx /= g as u64;
                x[i] = lower[i] + (upper[i] - lower[i]) * c;
            }
            design
                .iter()
                .map(|p| squared_distance(&x, p))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(max_sq.sqrt())
}

/// MMD under the distance kernel between the uniform measure on a candidate set and `ξ`.
pub struct DistanceMetric {
    points: Vec<Vec<f64>>,
    energy: f64,
}

impl DistanceMetric {
    pub fn new(cs: &CandidateSet) -> Self {
        let points: Vec<Vec<f64>> = cs.points().map(|p| p.to_vec()).collect();
        let k = KernelSpec::distance();
        let c = points.len() as f64;
        let total: f64 = points
            .par_iter()
            .map(|x| points.iter().map(|y| k.eval_slices(x, y)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum();
        DistanceMetric {
            energy: total / (c * c),
            points,
        }
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let k = KernelSpec::distance();
        self.points.iter().map(|y| k.eval_slices(x, y)).sum::<f64>() / self.points.len() as f64
    }

    pub fn squared(&self, m: &DiscreteMeasure) -> Result<f64> {
        if (m.total_mass() - 1.0).abs() > 1e-10 {
            return Err(Error::MassNotOne(m.total_mass()));
        }
        let k = KernelSpec::distance();
        let (pts, w) = (m.support(), m.weights());
        let mut quad = 0.0;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                quad += w[i] * w[j] * k.eval_slices(&pts[i], &pts[j]);
            }
        }
        let lin: f64 = pts
            .iter()
            .zip(w)
            .map(|(x, wi)| wi * self.potential(x))
            .sum();
        Ok(quad - 2.0 * lin + self.energy)
    }

    pub fn distance(&self, m: &DiscreteMeasure) -> Result<f64> {
        Ok(self.squared(m)?.max(0.0).sqrt())
    }
}

/// `MMD_{K_D}(µ_C, ξ)` with `K_D(x, y) = −‖x − y‖` and `µ_C` uniform on the candidates.
pub fn mmd_distance_metric(m: &DiscreteMeasure, cs: &CandidateSet) -> Result<f64> {
    DistanceMetric::new(cs).distance(m)
}
