//! Kernel herding with integrated weight optimisation: points are selected by the
//! herding rule and all weights are re-optimised after every addition.

use std::collections::HashSet;

use super::{
    par_argmin, potential_of_support, rel_err, AuditReport, Construction, Problem, Step, StepInfo,
    Stepper, StopReason,
};
use crate::error::{Error, Result};
use crate::linalg::{
    dot, hat_weights, simplex_weights, tilde_weights, CandidateProjections, GramState,
};
use crate::measure::WeightedSupport;
use crate::metrics::BoundMethod;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IwoVariant {
    /// Weights on the probability simplex.
    Simplex,
    /// Weights summing to one.
    SumOne,
    /// Unconstrained weights.
    Unconstrained,
}

impl IwoVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "i_simplex" | "i" | "simplex" => Ok(IwoVariant::Simplex),
            "ii_sum_one" | "ii" | "sum_one" => Ok(IwoVariant::SumOne),
            "iii_unconstrained" | "iii" | "unconstrained" => Ok(IwoVariant::Unconstrained),
            other => Err(Error::Config(format!(
                "unknown kh_iwo variant `{other}` (expected i_simplex, ii_sum_one or iii_unconstrained)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            IwoVariant::Simplex => "i_simplex",
            IwoVariant::SumOne => "ii_sum_one",
            IwoVariant::Unconstrained => "iii_unconstrained",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KhIwo {
    pub variant: IwoVariant,
    pub qp_tol: f64,
    /// Stop once the herding score stops improving (variant ii) or turns nonnegative (variant iii).
    pub stopping_rule: bool,
}

impl Construction for KhIwo {
    fn label(&self) -> String {
        format!("kh_iwo[{}]", self.variant.tag())
    }

    fn one_step_ahead(&self) -> bool {
        false
    }

    fn bound_method(&self) -> Option<BoundMethod> {
        Some(match self.variant {
            IwoVariant::Simplex => BoundMethod::IwoSimplex,
            IwoVariant::SumOne => BoundMethod::IwoSumOne,
            IwoVariant::Unconstrained => BoundMethod::IwoUnconstrained,
        })
    }

    fn start<'a>(&self, problem: &'a Problem) -> Result<Box<dyn Stepper + 'a>> {
        if problem.resample.is_some() {
            return Err(Error::Config(
                "candidate resampling is only available for one-step-ahead methods".into(),
            ));
        }
        let c = problem.candidates.len();
        Ok(Box::new(IwoState {
            problem,
            cfg: self.clone(),
            gram: GramState::new(problem.beta_floor),
            proj: CandidateProjections::new(c, 2),
            chosen: Vec::new(),
            in_support: HashSet::new(),
            skipped: HashSet::new(),
            weights: Vec::new(),
            s: vec![0.0; c],
            support: WeightedSupport::default(),
            floor_hits: 0,
        }))
    }
}

struct IwoState<'a> {
    problem: &'a Problem,
    cfg: KhIwo,
    gram: GramState,
    /// Tracks `1ᵀK⁻¹k(x)` and `pᵀK⁻¹k(x)`; scalars `cross` give `1ᵀK⁻¹1`, `pᵀK⁻¹p`, `pᵀK⁻¹1`.
    proj: CandidateProjections,
    chosen: Vec<usize>,
    in_support: HashSet<usize>,
    skipped: HashSet<usize>,
    weights: Vec<f64>,
    s: Vec<f64>,
    support: WeightedSupport,
    floor_hits: usize,
}

impl IwoState<'_> {
    fn support_pot(&self) -> Vec<f64> {
        let pot = self.problem.candidates.pot();
        self.chosen.iter().map(|&j| pot[j]).collect()
    }
}

impl Stepper for IwoState<'_> {
    fn step(&mut self) -> Result<Step> {
        let cs = &self.problem.candidates;
        let k = self.chosen.len() + 1;
        let (pot, c) = (cs.pot(), cs.len());
        loop {
            let s = &self.s;
            let pick = par_argmin(c, |i| {
                (!self.in_support.contains(&i) && !self.skipped.contains(&i)).then(|| s[i] - pot[i])
            });
            let Some((j, score)) = pick else {
                return Ok(Step::Stopped(StopReason::CandidatesExhausted));
            };
            if self.cfg.stopping_rule && k >= 2 {
                match self.cfg.variant {
                    IwoVariant::SumOne => {
                        let last = *self.chosen.last().expect("k ≥ 2");
                        if score >= s[last] - pot[last] {
                            return Ok(Step::Stopped(StopReason::NoImprovement));
                        }
                    }
                    IwoVariant::Unconstrained => {
                        if score >= 0.0 {
                            return Ok(Step::Stopped(StopReason::NonnegativeScore));
                        }
                    }
                    IwoVariant::Simplex => {}
                }
            }
            let sup_col: Vec<f64> = self.proj.columns().iter().map(|col| col[j]).collect();
            let ext = match self.gram.extend(&sup_col, cs.diag()[j]) {
                Ok(ext) => ext,
                Err(Error::NearDuplicate { .. }) => {
                    self.floor_hits += 1;
                    self.skipped.insert(j);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let xj = cs.point(j).to_vec();
            let col = cs.kernel_column(&xj);
            self.proj.extend(&ext, col, &[1.0, pot[j]]);
            self.chosen.push(j);
            self.in_support.insert(j);
            self.support.add(&xj, 0.0);

            let p = self.support_pot();
            let w = match self.cfg.variant {
                IwoVariant::Simplex => {
                    let mut warm = self.weights.clone();
                    warm.push(0.0);
                    simplex_weights(&self.gram, &p, self.cfg.qp_tol, Some(&warm))?.values
                }
                IwoVariant::SumOne => hat_weights(&self.gram, &p).values,
                IwoVariant::Unconstrained => tilde_weights(&self.gram, &p).values,
            };
            self.s = self.proj.weighted_potential(&w);
            self.support.set_weights(&w);
            self.weights = w;
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
        if self.chosen.is_empty() {
            return e;
        }
        let x = &self.proj.cross;
        let (one_one, p_p, p_one) = (x[0][0], x[1][1], x[0][1]);
        match self.cfg.variant {
            IwoVariant::Unconstrained => e - p_p,
            IwoVariant::SumOne => e - p_p + (1.0 - p_one) * (1.0 - p_one) / one_one,
            IwoVariant::Simplex => {
                let pot = self.problem.candidates.pot();
                let q: f64 = self
                    .chosen
                    .iter()
                    .zip(&self.weights)
                    .map(|(&j, w)| w * self.s[j])
                    .sum();
                let r = dot(
                    &self.weights,
                    &self.chosen.iter().map(|&j| pot[j]).collect::<Vec<_>>(),
                );
                q - 2.0 * r + e
            }
        }
    }

    fn audit(&self) -> Result<AuditReport> {
        let direct = potential_of_support(&self.problem.candidates, &self.support);
        let err = self
            .s
            .iter()
            .zip(&direct)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        Ok(AuditReport { max_rel_err: err })
    }

    fn beta_floor_hits(&self) -> usize {
        self.floor_hits
    }
}
