//! One-step-ahead constructions: kernel herding and greedy MMD minimisation with
//! predefined or optimal step sizes. Each iteration mixes the current measure with
//! one Dirac, `ξ_k = (1 − α_k) ξ_{k−1} + α_k δ_{x_k}`, in `O(C)` work.

use std::borrow::Cow;

use rayon::prelude::*;

use super::{
    par_argmin, potential_of_support, rel_err, AuditReport, Construction, Problem, Step, StepInfo,
    StepRule, Stepper, StopReason, ZERO_STEP_TOL,
};
use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::measure::WeightedSupport;
use crate::metrics::BoundMethod;

#[derive(Clone, Debug, PartialEq)]
enum Rule {
    KhPredefined(StepRule),
    KhOptimal,
    GmPredefined(StepRule),
    GmOptimal,
}

/// Kernel herding with a predefined step sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct KhPredefined {
    pub rule: StepRule,
}

/// Kernel herding with the optimal (line-search) step.
#[derive(Clone, Debug, PartialEq)]
pub struct KhOptimal;

/// Greedy MMD minimisation with a predefined step sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct GmPredefined {
    pub rule: StepRule,
}

/// Greedy MMD minimisation jointly over the point and the step.
#[derive(Clone, Debug, PartialEq)]
pub struct GmOptimal;

impl Construction for KhPredefined {
    fn label(&self) -> String {
        format!("kh[{}]", self.rule.tag())
    }

    fn one_step_ahead(&self) -> bool {
        true
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        match self.rule {
            StepRule::InvK => Some(BoundMethod::KhInvK),
            StepRule::TwoOverKPlus1 => Some(BoundMethod::KhTwoOverKPlus1),
            StepRule::Custom(_) => None,
        }
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        Ok(Box::new(OneStepState::new(
            problem,
            Rule::KhPredefined(self.rule.clone()),
        )))
    }
}

impl Construction for KhOptimal {
    fn label(&self) -> String {
        "kh_optimal".into()
    }

    fn one_step_ahead(&self) -> bool {
        true
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        Some(BoundMethod::KhOptimal)
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        Ok(Box::new(OneStepState::new(problem, Rule::KhOptimal)))
    }
}

impl Construction for GmPredefined {
    fn label(&self) -> String {
        format!("gm[{}]", self.rule.tag())
    }

    fn one_step_ahead(&self) -> bool {
        true
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        match self.rule {
            StepRule::InvK => Some(BoundMethod::GmInvK),
            StepRule::TwoOverKPlus1 => Some(BoundMethod::GmTwoOverKPlus1),
            StepRule::Custom(_) => None,
        }
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        Ok(Box::new(OneStepState::new(
            problem,
            Rule::GmPredefined(self.rule.clone()),
        )))
    }
}

impl Construction for GmOptimal {
    fn label(&self) -> String {
        "gm_optimal".into()
    }

    fn one_step_ahead(&self) -> bool {
        true
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        Some(BoundMethod::GmOptimal)
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        Ok(Box::new(OneStepState::new(problem, Rule::GmOptimal)))
    }
}

/// Running state `S_k(x) = P_{K,ξ_k}(x)` on the candidates, `Q_k = E_K(ξ_k)` and
/// `R_k = Σ_i w_i P_{K,µ}(x_i)`.
struct OneStepState<'a> {
    problem: &'a Problem,
    rule: Rule,
    cs: Cow<'a, CandidateSet>,
    s: Vec<f64>,
    q: f64,
    r: f64,
    k: usize,
    support: WeightedSupport,
}

impl<'a> OneStepState<'a> {
    fn new(problem: &'a Problem, rule: Rule) -> Self {
        let c = problem.candidates.len();
        OneStepState {
            problem,
            rule,
            cs: Cow::Borrowed(&problem.candidates),
            s: vec![0.0; c],
            q: 0.0,
            r: 0.0,
            k: 0,
            support: WeightedSupport::default(),
        }
    }

    /// Per-candidate optimal step: `α(x) = clamp(A(x)/B(x), 0, 1)` and the MMD² change `α²B − 2αA`.
    fn optimal_step(&self, i: usize) -> (f64, f64, f64) {
        let cs = &self.cs;
        let a = self.q - self.r + cs.pot()[i] - self.s[i];
        let b = self.q - 2.0 * self.s[i] + cs.diag()[i];
        let alpha = if b > 0.0 {
            (a / b).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (alpha, a, b)
    }
}

impl Stepper for OneStepState<'_> {
    fn step(&mut self) -> Result<Step> {
        let k = self.k + 1;
        if let Some(src) = &self.problem.resample {
            if k >= 2 {
                let fresh = src.resample(k, &self.problem.target, &self.problem.kernel)?;
                self.s = potential_of_support(&fresh, &self.support);
                self.cs = Cow::Owned(fresh);
            }
        }
        let cs = &*self.cs;
        let (s, pot, diag) = (&self.s, cs.pot(), cs.diag());
        let c = cs.len();
        let herding_pick =
            || par_argmin(c, |i| Some(s[i] - pot[i])).expect("non-empty candidate set");
        let (j, alpha, score) = match &self.rule {
            Rule::KhPredefined(rule) => {
                let (j, v) = herding_pick();
                (j, rule.alpha(k)?, v)
            }
            Rule::GmPredefined(rule) => {
                let a = rule.alpha(k)?;
                let (j, v) = par_argmin(c, |i| {
                    Some(2.0 * (1.0 - a) * s[i] + a * diag[i] - 2.0 * pot[i])
                })
                .expect("non-empty candidate set");
                (j, a, v)
            }
            Rule::KhOptimal => {
                let (j, v) = herding_pick();
                if k == 1 {
                    (j, 1.0, v)
                } else {
                    let (_, a, b) = self.optimal_step(j);
                    if a <= ZERO_STEP_TOL {
                        return Ok(Step::Stopped(StopReason::OptimalStepZero));
                    }
                    if !(b > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "non-positive curvature {b:e} in the optimal step; the kernel is not positive definite on the candidates"
                        )));
                    }
                    let alpha = (a / b).min(1.0);
                    if alpha <= ZERO_STEP_TOL {
                        return Ok(Step::Stopped(StopReason::OptimalStepZero));
                    }
                    (j, alpha, v)
                }
            }
            Rule::GmOptimal => {
                if k == 1 {
                    let (j, v) = par_argmin(c, |i| Some(diag[i] - 2.0 * pot[i]))
                        .expect("non-empty candidate set");
                    (j, 1.0, v)
                } else {
                    let max_alpha = (0..c)
                        .into_par_iter()
                        .map(|i| self.optimal_step(i).0)
                        .reduce(|| 0.0, f64::max);
                    if max_alpha <= ZERO_STEP_TOL {
                        return Ok(Step::Stopped(StopReason::AllStepsZero));
                    }
                    let (j, v) = par_argmin(c, |i| {
                        let (al, a, b) = self.optimal_step(i);
                        Some(al * al * b - 2.0 * al * a)
                    })
                    .expect("non-empty candidate set");
                    (j, self.optimal_step(j).0, v)
                }
            }
        };
        let xj = cs.point(j).to_vec();
        let s_old = self.s[j];
        let col = cs.kernel_column(&xj);
        self.s
            .par_iter_mut()
            .zip(col.par_iter())
            .for_each(|(si, ci)| *si = (1.0 - alpha) * *si + alpha * ci);
        self.r = (1.0 - alpha) * self.r + alpha * pot[j];
        self.q = (1.0 - alpha) * (1.0 - alpha) * self.q
            + 2.0 * alpha * (1.0 - alpha) * s_old
            + alpha * alpha * diag[j];
        self.support.scale(1.0 - alpha);
        self.support.add(&xj, alpha);
        self.k = k;
        Ok(Step::Advanced(StepInfo {
            k,
            chosen_index: j,
            alpha: Some(alpha),
            score,
        }))
    }

    fn iteration(&self) -> usize {
        self.k
    }

    fn support(&self) -> &WeightedSupport {
        &self.support
    }

    fn mmd2_recursive(&self) -> f64 {
        self.q - 2.0 * self.r + self.cs.energy()
    }

    fn audit(&self) -> Result<AuditReport> {
        let s_direct = potential_of_support(&self.cs, &self.support);
        let mut err = self
            .s
            .iter()
            .zip(&s_direct)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        let (q, r) = direct_q_r(self.problem, &self.support);
        err = err.max(rel_err(self.q, q)).max(rel_err(self.r, r));
        Ok(AuditReport { max_rel_err: err })
    }
}

/// `E_K(ξ)` and `Σ w_i P_{K,µ}(x_i)` recomputed from the atoms.
pub(crate) fn direct_q_r(problem: &Problem, support: &WeightedSupport) -> (f64, f64) {
    let k = problem.kernel;
    let w = support.weights();
    let n = support.len();
    let q: f64 = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| w[a] * w[b] * k.eval_slices(support.point(a), support.point(b)))
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let r: f64 = (0..n)
        .map(|a| w[a] * problem.target.potential_unchecked(&k, support.point(a)))
        .sum();
    (q, r)
}
