#![allow(dead_code)]

use mmd_quant::algorithms::Problem;
use mmd_quant::candidates::CandidateSet;
use mmd_quant::kernels::{KernelSpec, Point};
use mmd_quant::measure::DiscreteMeasure;
use mmd_quant::oracle;
use mmd_quant::target::TargetMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point::new(vec![rng.gen_range(lo..hi), rng.gen_range(lo..hi)]).unwrap())
        .collect()
}

/// Uniform measure on the unit square, Matérn kernel, `c` random candidates.
pub fn square_problem(c: usize, seed: u64) -> Problem {
    let t = TargetMeasure::unit_cube(2).unwrap();
    let k = KernelSpec::matern32(5.0).unwrap();
    let cs = CandidateSet::from_points(random_points(seed, c, 0.0, 1.0), &t, &k).unwrap();
    Problem::new(k, t, cs).unwrap()
}

/// Three-component mixture, Gaussian kernel, `c` random candidates in `[-2, 2]²`.
pub fn mixture_problem(c: usize, seed: u64) -> Problem {
    let t = TargetMeasure::trimodal_mixture();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let cs = CandidateSet::from_points(random_points(seed, c, -2.0, 2.0), &t, &k).unwrap();
    Problem::new(k, t, cs).unwrap()
}

/// MMD² by plain double summation over the atoms of `m`.
pub fn direct_mmd2(problem: &Problem, m: &DiscreteMeasure) -> f64 {
    let k = problem.kernel;
    let pts: Vec<Vec<f64>> = m.support().iter().map(|p| p.to_vec()).collect();
    oracle::brute_mmd2(
        |a, b| k.eval_slices(a, b),
        &pts,
        m.weights(),
        |x| {
            problem
                .target
                .potential(&k, &Point::new(x.to_vec()).unwrap())
                .unwrap()
        },
        problem.target.energy(&k).unwrap(),
    )
}

/// Gram matrix of the kernel on `pts`.
pub fn gram(problem: &Problem, pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|x| {
            pts.iter()
                .map(|y| problem.kernel.eval_slices(x, y))
                .collect()
        })
        .collect()
}

/// Smallest index attaining the minimum.
pub fn scan_argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}
