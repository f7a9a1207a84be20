//! Greedy quantisation of probability measures in maximum mean discrepancy.
//!
//! A [`algorithms::Problem`] bundles a kernel, a target measure with closed-form
//! potential and energy, and a finite candidate set. Constructions (kernel herding,
//! greedy MMD minimisation, weight-optimised herding and sequential Bayesian
//! quadrature) are looked up by name in an [`algorithms::Registry`] and stepped one
//! point at a time. [`metrics`] evaluates MMD² and the convergence bounds, and
//! [`harness`] runs configured experiments and the acceptance suite.

pub mod algorithms;
pub mod candidates;
pub mod error;
pub mod halton;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod oracle;
pub mod recurrence;
pub mod target;

pub use algorithms::{Construction, Problem, Registry, Step, StepRule, Stepper};
pub use candidates::{CandidateSet, CandidateSource};
pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec, Point};
pub use measure::DiscreteMeasure;
pub use target::TargetMeasure;
