//! Empirical measures of iid samples from the target, the reference against which
//! greedy constructions are compared.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::target::TargetMeasure;

/// Per-`n` statistics of `MMD²(µ, ξ_{n,e})` over repetitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaselineRow {
    pub n: usize,
    pub mean_mmd2: f64,
    pub sd_mmd2: f64,
    /// `(τ_1(µ) − E_K(µ))/n`, the expected value.
    pub theory_mean: f64,
}

/// `MMD²(µ, ξ_{n,e})` for every prefix `n = 1..=points.len()` of one sample.
pub fn prefix_mmd2(
    kernel: &KernelSpec,
    target: &TargetMeasure,
    points: &[Vec<f64>],
    energy: f64,
) -> Vec<f64> {
    let mut sum_k = 0.0;
    let mut sum_p = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for (n, x) in points.iter().enumerate() {
        let cross: f64 = points[..n].iter().map(|y| kernel.eval_slices(x, y)).sum();
        sum_k += 2.0 * cross + kernel.eval_slices(x, x);
        sum_p += target.potential_unchecked(kernel, x);
        let m = (n + 1) as f64;
        out.push(sum_k / (m * m) - 2.0 * sum_p / m + energy);
    }
    out
}

/// Mean and standard deviation across `reps` independent samples of size `n_max`.
/// Repetition `r` draws from stream `r` of the seeded generator.
pub fn iid_baseline(
    target: &TargetMeasure,
    kernel: &KernelSpec,
    n_max: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<BaselineRow>> {
    if !target.is_samplable() {
        return Err(Error::NotSamplable(target.variant_name()));
    }
    if reps < 2 || n_max == 0 {
        return Err(Error::InvalidParameter(
            "baseline needs n_max ≥ 1 and at least 2 repetitions".into(),
        ));
    }
    let moments = target.moments(kernel)?;
    let curves: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let pts: Vec<Vec<f64>> = target
                .sample(&mut rng, n_max)?
                .into_iter()
                .map(Vec::from)
                .collect();
            Ok(prefix_mmd2(kernel, target, &pts, moments.energy))
        })
        .collect::<Result<_>>()?;
    let rf = reps as f64;
    Ok((0..n_max)
        .map(|i| {
            let mean = curves.iter().map(|c| c[i]).sum::<f64>() / rf;
            let var = curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (rf - 1.0);
            BaselineRow {
                n: i + 1,
                mean_mmd2: mean,
                sd_mmd2: var.sqrt(),
                theory_mean: (moments.tau_one - moments.energy) / (i + 1) as f64,
            }
        })
        .collect())
}
