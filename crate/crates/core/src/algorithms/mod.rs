//! Greedy constructions of quantisation measures.
//!
//! Every construction implements [`Construction`] and is registered by name in
//! a [`Registry`]. Starting a construction on a [`Problem`] yields a
//! [`Stepper`], which advances one support point per call to
//! [`Stepper::step`] and exposes the running state for tracing and audits.

mod iwo;
mod olwo;
mod one_step;
mod sbq;

pub mod baseline;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateSet, CandidateSource};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::measure::{DiscreteMeasure, WeightedSupport};
use crate::metrics::BoundMethod;
use crate::target::TargetMeasure;

pub use iwo::{IwoVariant, KhIwo};
pub use olwo::olwo_curve;
pub use one_step::{GmOptimal, GmPredefined, KhOptimal, KhPredefined};
pub use sbq::{Sbq, SbqVariant};

/// Tolerance below which an optimal step is treated as zero.
pub const ZERO_STEP_TOL: f64 = 1e-14;

/// Everything a construction needs: kernel, target and candidate set.
#[derive(Clone, Debug)]
pub struct Problem {
    pub kernel: KernelSpec,
    pub target: TargetMeasure,
    pub candidates: CandidateSet,
    /// When set, a fresh iid candidate set is drawn at every iteration.
    pub resample: Option<CandidateSource>,
    pub beta_floor: f64,
}

impl Problem {
    pub fn new(
        kernel: KernelSpec,
        target: TargetMeasure,
        candidates: CandidateSet,
    ) -> Result<Self> {
        kernel.require_spd()?;
        if candidates.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: candidates.dim(),
            });
        }
        Ok(Problem {
            beta_floor: 1e-12 * kernel.diag_bound(),
            kernel,
            target,
            candidates,
            resample: None,
        })
    }

    pub fn with_resampling(mut self, source: CandidateSource) -> Self {
        self.resample = Some(source);
        self
    }
}

/// Step-size sequence for the predefined-step constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `α_k = 1/k`.
    InvK,
    /// `α_k = 2/(k+1)`.
    #[serde(rename = "two_over_kplus1")]
    TwoOverKPlus1,
    /// Explicit `α_1, α_2, …` with `α_1 = 1`.
    Custom(Vec<f64>),
}

impl StepRule {
    pub fn alpha(&self, k: usize) -> Result<f64> {
        match self {
            StepRule::InvK => Ok(1.0 / k as f64),
            StepRule::TwoOverKPlus1 => Ok(2.0 / (k as f64 + 1.0)),
            StepRule::Custom(seq) => seq.get(k - 1).copied().ok_or_else(|| {
                Error::InvalidParameter(format!("custom step sequence has no entry for k = {k}"))
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StepRule::Custom(seq) = self {
            match seq.first() {
                Some(1.0) => {}
                _ => {
                    return Err(Error::Config(
                        "custom step sequence must start with 1".into(),
                    ))
                }
            }
            if seq.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::Config("custom step sizes must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> &'static str {
        match self {
            StepRule::InvK => "inv_k",
            StepRule::TwoOverKPlus1 => "two_over_kplus1",
            StepRule::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The optimal kernel-herding step vanished: the current measure attains `M_C`.
    OptimalStepZero,
    /// Every per-candidate greedy step vanished.
    AllStepsZero,
    /// Weight-optimised herding, sum-one: the best score is no better than the last point's.
    NoImprovement,
    /// Weight-optimised herding, unconstrained: the best score `min S − P` is nonnegative.
    NonnegativeScore,
    /// No admissible candidate is left.
    CandidatesExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::OptimalStepZero => "optimal_step_zero",
            StopReason::AllStepsZero => "all_steps_zero",
            StopReason::NoImprovement => "no_improvement",
            StopReason::NonnegativeScore => "nonnegative_score",
            StopReason::CandidatesExhausted => "candidates_exhausted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Iteration number, starting at 1.
    pub k: usize,
    /// Index of the selected point in the candidate set of this iteration.
    pub chosen_index: usize,
    /// Step size (one-step-ahead methods) or appended weight (coordinate descent).
    pub alpha: Option<f64>,
    /// Value of the selection criterion at the chosen candidate.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Advanced(StepInfo),
    Stopped(StopReason),
}

/// Largest relative discrepancy between running and recomputed state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditReport {
    pub max_rel_err: f64,
}

/// A running construction.
pub trait Stepper {
    fn step(&mut self) -> Result<Step>;

    /// Number of completed iterations.
    fn iteration(&self) -> usize;

    /// Current measure: unique atoms with their weights.
    fn support(&self) -> &WeightedSupport;

    fn measure(&self) -> DiscreteMeasure {
        self.support().to_measure()
    }

    /// MMD² read from the recursively maintained state.
    fn mmd2_recursive(&self) -> f64;

    /// Recomputes the running state from the support and compares.
    fn audit(&self) -> Result<AuditReport>;

    /// Candidates skipped because their Schur complement fell below the floor.
    fn beta_floor_hits(&self) -> usize {
        0
    }
}

/// A construction procedure, selectable by name.
pub trait Construction: Send + Sync {
    /// Registry name plus variant, e.g. `kh[inv_k]`.
    fn label(&self) -> String;

    /// Whether the method only looks one step ahead (and so accepts candidate resampling).
    fn one_step_ahead(&self) -> bool;

    /// Bound row this run is checked against, if any.
    fn bound_method(&self) -> Option<BoundMethod>;

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>>;
}

/// Construction parameters as read from a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodParams {
    pub step_rule: Option<StepRule>,
    pub variant: Option<String>,
    /// Duality-gap tolerance for simplex-constrained weights.
    pub qp_tol: f64,
    /// Enables the stopping rules of the sum-one and unconstrained weight-optimised herding.
    pub stopping_rule: bool,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            step_rule: None,
            variant: None,
            qp_tol: 1e-10,
            stopping_rule: true,
        }
    }
}

pub type Factory = fn(&MethodParams) -> Result<Box<dyn Construction>>;

/// Name → factory map of the available constructions.
pub struct Registry {
    entries: BTreeMap<&'static str, Factory>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn create(&self, name: &str, params: &MethodParams) -> Result<Box<dyn Construction>> {
        let factory = self
            .entries
            .get(name)
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))?;
        factory(params)
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register("kh", |p| {
            let rule = p.step_rule.clone().unwrap_or(StepRule::InvK);
            rule.validate()?;
            Ok(Box::new(KhPredefined { rule }))
        });
        r.register("kh_optimal", |_| Ok(Box::new(KhOptimal)));
        r.register("gm", |p| {
            let rule = p.step_rule.clone().unwrap_or(StepRule::InvK);
            rule.validate()?;
            Ok(Box::new(GmPredefined { rule }))
        });
        r.register("gm_optimal", |_| Ok(Box::new(GmOptimal)));
        r.register("kh_iwo", |p| {
            let variant = IwoVariant::parse(p.variant.as_deref().unwrap_or("ii_sum_one"))?;
            Ok(Box::new(KhIwo {
                variant,
                qp_tol: p.qp_tol,
                stopping_rule: p.stopping_rule,
            }))
        });
        r.register("sbq", |p| {
            let variant = SbqVariant::parse(p.variant.as_deref().unwrap_or("unconstrained"))?;
            Ok(Box::new(Sbq { variant }))
        });
        r
    }
}

/// Index of the smallest `score(i)` over admissible `i`; NaN scores are inadmissible
/// and the smallest index wins ties, independently of the thread count.
pub(crate) fn par_argmin<F>(n: usize, score: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync,
{
    (0..n)
        .into_par_iter()
        .filter_map(|i| score(i).filter(|v| !v.is_nan()).map(|v| (i, v)))
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
}

/// Index of the largest `score(i)` with the same tie rule as [`par_argmin`].
pub(crate) fn par_argmax<F>(n: usize, score: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync,
{
    par_argmin(n, |i| score(i).map(|v| -v)).map(|(i, v)| (i, -v))
}

/// `Σ_a w_a K(a, x^{(i)})` for every candidate.
pub(crate) fn potential_of_support(cs: &CandidateSet, support: &WeightedSupport) -> Vec<f64> {
    let k = *cs.kernel();
    (0..cs.len())
        .into_par_iter()
        .map(|i| {
            let x = cs.point(i);
            (0..support.len())
                .map(|a| support.weights()[a] * k.eval_slices(support.point(a), x))
                .sum()
        })
        .collect()
}

pub(crate) fn rel_err(running: f64, direct: f64) -> f64 {
    (running - direct).abs() / direct.abs().max(1.0)
}
