//! Off-line weight optimisation: re-optimise the weights on every prefix of a
//! support produced by any construction.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{hat_weights, simplex_weights, tilde_weights, ConstraintClass, GramState};
use crate::target::TargetMeasure;

/// MMD² of the optimally weighted measure on the first `n` support points, for each `n`.
///
/// A point whose Schur complement falls below `beta_floor` is left out and the
/// previous value repeated.
pub fn olwo_curve(
    points: &[Vec<f64>],
    target: &TargetMeasure,
    kernel: &KernelSpec,
    class: ConstraintClass,
    beta_floor: f64,
    qp_tol: f64,
) -> Result<Vec<f64>> {
    kernel.require_spd()?;
    let energy = target.energy(kernel)?;
    let mut gram = GramState::new(beta_floor);
    let mut kept: Vec<&[f64]> = Vec::new();
    let mut p: Vec<f64> = Vec::new();
    let mut w_prev: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        if x.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: x.len(),
            });
        }
        let col: Vec<f64> = kept.iter().map(|y| kernel.eval_slices(y, x)).collect();
        match gram.extend(&col, kernel.eval_slices(x, x)) {
            Ok(_) => {
                kept.push(x);
                p.push(target.potential_unchecked(kernel, x));
            }
            Err(Error::NearDuplicate { .. }) => {
                out.push(*out.last().unwrap_or(&energy));
                continue;
            }
            Err(e) => return Err(e),
        }
        let w = match class {
            ConstraintClass::Unconstrained => tilde_weights(&gram, &p).values,
            ConstraintClass::SumOne => hat_weights(&gram, &p).values,
            ConstraintClass::Simplex => {
                let mut warm = w_prev.clone();
                warm.push(0.0);
                simplex_weights(&gram, &p, qp_tol, Some(&warm))?.values
            }
        };
        let kw = gram.mul(&w);
        let quad: f64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
        let lin: f64 = w.iter().zip(&p).map(|(a, b)| a * b).sum();
        out.push(quad - 2.0 * lin + energy);
        w_prev = w;
    }
    Ok(out)
}
