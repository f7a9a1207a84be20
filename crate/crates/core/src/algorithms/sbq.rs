//! Sequential Bayesian quadrature: greedy selection with fully re-optimised
//! weights (unconstrained or summing to one), plus the coordinate-descent variant
//! that only optimises the newest weight.

use std::collections::HashSet;

use rayon::prelude::*;

use super::{
    par_argmax, potential_of_support, rel_err, AuditReport, Construction, Problem, Step, StepInfo,
    Stepper, StopReason,
};
use crate::error::{Error, Result};
use crate::linalg::{CandidateProjections, GramState};
use crate::measure::WeightedSupport;
use crate::metrics::BoundMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbqVariant {
    /// Unconstrained weights `w̃ = K⁻¹p`.
    Unconstrained,
    /// Weights summing to one, driven by the reduced kernel `K_µ`.
    SumOne,
    /// Previous weights frozen, only the new weight optimised.
    CoordDescent,
}

impl SbqVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unconstrained" => Ok(SbqVariant::Unconstrained),
            "sum_one" => Ok(SbqVariant::SumOne),
            "coord_descent" => Ok(SbqVariant::CoordDescent),
            other => Err(Error::Config(format!(
                "unknown sbq variant `{other}` (expected unconstrained, sum_one or coord_descent)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SbqVariant::Unconstrained => "unconstrained",
            SbqVariant::SumOne => "sum_one",
            SbqVariant::CoordDescent => "coord_descent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sbq {
    pub variant: SbqVariant,
}

impl Construction for Sbq {
    fn label(&self) -> String {
        format!("sbq[{}]", self.variant.tag())
    }

    fn one_step_ahead(&self) -> bool {
        false
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        Some(match self.variant {
            SbqVariant::Unconstrained => BoundMethod::SbqUnconstrained,
            SbqVariant::SumOne => BoundMethod::SbqSumOne,
            SbqVariant::CoordDescent => BoundMethod::SbqCoordDescent,
        })
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        if problem.resample.is_some() {
            return Err(Error::Config(
                "candidate resampling is only available for one-step-ahead methods".into(),
            ));
        }
        let c = problem.candidates.len();
        Ok(Box::new(SbqState {
            problem,
            variant: self.variant,
            gram: GramState::new(problem.beta_floor),
            proj: CandidateProjections::new(c, 1),
            chosen: Vec::new(),
            in_support: HashSet::new(),
            skipped: HashSet::new(),
            s: vec![0.0; c],
            mmd2: problem.candidates.energy(),
            support: WeightedSupport::default(),
            floor_hits: 0,
        }))
    }
}

struct SbqState<'a> {
    problem: &'a Problem,
    variant: SbqVariant,
    /// Gram of `K` (unconstrained) or of `K_µ` (sum-one) on the support; unused by coordinate descent.
    gram: GramState,
    /// Tracked right-hand side: `p` (unconstrained) or `1` (sum-one).
    proj: CandidateProjections,
    chosen: Vec<usize>,
    in_support: HashSet<usize>,
    skipped: HashSet<usize>,
    /// Coordinate descent: running `P_{K,ξ_k}` on the candidates.
    s: Vec<f64>,
    /// Coordinate descent: running MMD².
    mmd2: f64,
    support: WeightedSupport,
    floor_hits: usize,
}

impl SbqState<'_> {
    fn step_cd(&mut self) -> Result<Step> {
        let cs = &self.problem.candidates;
        let (s, pot, diag) = (&self.s, cs.pot(), cs.diag());
        let Some((j, score)) = par_argmax(cs.len(), |i| Some((s[i] - pot[i]).powi(2) / diag[i]))
        else {
            return Ok(Step::Stopped(StopReason::CandidatesExhausted));
        };
        let w = (pot[j] - s[j]) / diag[j];
        let xj = cs.point(j).to_vec();
        let col = cs.kernel_column(&xj);
        self.s
            .par_iter_mut()
            .zip(col.par_iter())
            .for_each(|(si, ci)| *si += w * ci);
        self.mmd2 -= score;
        self.support.add(&xj, w);
        self.chosen.push(j);
        Ok(Step::Advanced(StepInfo {
            k: self.chosen.len(),
            chosen_index: j,
            alpha: Some(w),
            score,
        }))
    }
}

impl Stepper for SbqState<'_> {
    fn step(&mut self) -> Result<Step> {
        if self.variant == SbqVariant::CoordDescent {
            return self.step_cd();
        }
        let cs = &self.problem.candidates;
        let (pot, diag, e) = (cs.pot(), cs.diag(), cs.energy());
        let floor = self.problem.beta_floor;
        let k = self.chosen.len() + 1;
        loop {
            let (q, proj) = (&self.proj.q, &self.proj.proj[0]);
            let eligible = |i: usize| !self.in_support.contains(&i) && !self.skipped.contains(&i);
            let pick = match self.variant {
                SbqVariant::Unconstrained => par_argmax(cs.len(), |i| {
                    let den = diag[i] - q[i];
                    (eligible(i) && den > floor).then(|| (proj[i] - pot[i]).powi(2) / den)
                }),
                _ => par_argmax(cs.len(), |i| {
                    let den = diag[i] - 2.0 * pot[i] + e - q[i];
                    (eligible(i) && den > floor).then(|| (proj[i] - 1.0).powi(2) / den)
                }),
            };
            let Some((j, score)) = pick else {
                return Ok(Step::Stopped(StopReason::CandidatesExhausted));
            };
            let xj = cs.point(j).to_vec();
            let (col, d, rhs) = match self.variant {
                SbqVariant::Unconstrained => (cs.kernel_column(&xj), diag[j], pot[j]),
                _ => (cs.reduced_column(&xj, pot[j]), cs.reduced_diag(j), 1.0),
            };
            let sup_col: Vec<f64> = self.chosen.iter().map(|&m| col[m]).collect();
            let ext = match self.gram.extend(&sup_col, d) {
                Ok(ext) => ext,
                Err(Error::NearDuplicate { .. }) => {
                    self.floor_hits += 1;
                    self.skipped.insert(j);
                    continue;
                }
                Err(err) => return Err(err),
            };
            self.proj.extend(&ext, col, &[rhs]);
            self.chosen.push(j);
            self.in_support.insert(j);
            self.support.add(&xj, 0.0);
            let w = self.weights();
            self.support.set_weights(&w);
            return Ok(Step::Advanced(StepInfo {
                k,
                chosen_index: j,
                alpha: None,
                score,
            }));
        }
    }

    fn iteration(&self) -> usize {
        self.chosen.len()
    }

    fn support(&self) -> &WeightedSupport {
        &self.support
    }

    fn mmd2_recursive(&self) -> f64 {
        let e = self.problem.candidates.energy();
        match self.variant {
            SbqVariant::CoordDescent => self.mmd2,
            _ if self.chosen.is_empty() => e,
            SbqVariant::Unconstrained => e - self.proj.cross[0][0],
            SbqVariant::SumOne => 1.0 / self.proj.cross[0][0],
        }
    }

    fn audit(&self) -> Result<AuditReport> {
        let cs = &self.problem.candidates;
        let err = match self.variant {
            SbqVariant::CoordDescent => {
                let direct = potential_of_support(cs, &self.support);
                self.s
                    .iter()
                    .zip(&direct)
                    .map(|(a, b)| rel_err(*a, *b))
                    .fold(0.0, f64::max)
            }
            _ => {
                // Recompute the tracked projections by direct solves on a sample of candidates.
                let rhs = self.rhs_at_support();
                let stride = (cs.len() / 64).max(1);
                (0..cs.len())
                    .step_by(stride)
                    .map(|i| {
                        let kx = self.support_column(i);
                        let q = self.gram.inv_quad(&kx, &kx);
                        let pr = self.gram.inv_quad(&rhs, &kx);
                        rel_err(self.proj.q[i], q).max(rel_err(self.proj.proj[0][i], pr))
                    })
                    .fold(0.0, f64::max)
            }
        };
        Ok(AuditReport { max_rel_err: err })
    }

    fn beta_floor_hits(&self) -> usize {
        self.floor_hits
    }
}

impl SbqState<'_> {
    fn rhs_at_support(&self) -> Vec<f64> {
        let pot = self.problem.candidates.pot();
        match self.variant {
            SbqVariant::Unconstrained => self.chosen.iter().map(|&j| pot[j]).collect(),
            _ => vec![1.0; self.chosen.len()],
        }
    }

    /// Support column of the driving kernel at candidate `i`, recomputed from the kernel.
    fn support_column(&self, i: usize) -> Vec<f64> {
        let cs = &self.problem.candidates;
        let k = self.problem.kernel;
        let x = cs.point(i);
        self.chosen
            .iter()
            .map(|&j| {
                let v = k.eval_slices(cs.point(j), x);
                match self.variant {
                    SbqVariant::Unconstrained => v,
                    _ => v - cs.pot()[j] - cs.pot()[i] + cs.energy(),
                }
            })
            .collect()
    }

    /// `w̃ = K⁻¹p`, or `ŵ = K_µ⁻¹1 / (1ᵀK_µ⁻¹1)`.
    fn weights(&self) -> Vec<f64> {
        let rhs = self.rhs_at_support();
        let w = self.gram.solve(&rhs);
        match self.variant {
            SbqVariant::SumOne => {
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            }
            _ => w,
        }
    }
}
