//! Reference computations used to check the library: adaptive quadrature,
//! Monte-Carlo integration, brute-force sums, dense linear solves and exhaustive
//! enumeration. They share no code with the paths they check and trade speed
//! for simplicity.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use crate::target::MixtureComponent;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod15(f, a, b);
    if err <= tol || depth >= 40 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 0)
}

fn matern_1d(theta: f64, r: f64) -> f64 {
    let t = 3f64.sqrt() * theta * r.abs();
    (1.0 + t) * (-t).exp()
}

fn box_average_1d(theta: f64, l: f64, u: f64, x: f64, tol: f64) -> f64 {
    let f = |t: f64| matern_1d(theta, x - t);
    let v = if x > l && x < u {
        integrate(f, l, x, tol) + integrate(f, x, u, tol)
    } else {
        integrate(f, l, u, tol)
    };
    v / (u - l)
}

/// Potential of the uniform measure on a box under the Matérn-3/2 product kernel, by quadrature.
pub fn matern_box_potential(theta: f64, lower: &[f64], upper: &[f64], x: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| box_average_1d(theta, lower[i], upper[i], x[i], 1e-13))
        .product()
}

/// Energy of the uniform measure on a box under the Matérn-3/2 product kernel, by nested quadrature.
pub fn matern_box_energy(theta: f64, lower: &[f64], upper: &[f64]) -> f64 {
    (0..lower.len())
        .map(|i| {
            let (l, u) = (lower[i], upper[i]);
            integrate(|s| box_average_1d(theta, l, u, s, 1e-13), l, u, 1e-11) / (u - l)
        })
        .product()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Independent draws from a Gaussian mixture, `n` of them, from stream `stream` of `seed`.
pub fn mixture_draws(
    components: &[MixtureComponent],
    n: usize,
    seed: u64,
    stream: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let pick =
        WeightedIndex::new(components.iter().map(|c| c.weight)).expect("positive mixture weights");
    (0..n)
        .map(|_| {
            let c = &components[pick.sample(&mut rng)];
            let normal = Normal::new(0.0, c.sd).expect("positive sd");
            c.mean.iter().map(|m| m + normal.sample(&mut rng)).collect()
        })
        .collect()
}

/// Sample mean and standard error of `f` over `samples`.
pub fn mc_mean<F: Fn(&[f64]) -> f64 + Sync>(samples: &[Vec<f64>], f: F) -> McEstimate {
    let vals: Vec<f64> = samples.par_iter().map(|x| f(x)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    McEstimate {
        mean,
        se: (var / n).sqrt(),
    }
}

/// `Σ_{ij} w_i w_j K(x_i, x_j) − 2 Σ_i w_i P(x_i) + E` by plain double summation.
pub fn brute_mmd2<K, P>(
    kernel: K,
    points: &[Vec<f64>],
    weights: &[f64],
    potential: P,
    energy: f64,
) -> f64
where
    K: Fn(&[f64], &[f64]) -> f64,
    P: Fn(&[f64]) -> f64,
{
    let mut quad = 0.0;
    for (xi, wi) in points.iter().zip(weights) {
        for (xj, wj) in points.iter().zip(weights) {
            quad += wi * wj * kernel(xi, xj);
        }
    }
    let lin: f64 = points
        .iter()
        .zip(weights)
        .map(|(x, w)| w * potential(x))
        .sum();
    quad - 2.0 * lin + energy
}

/// Solves `Ax = b` by Gaussian elimination with partial pivoting; `None` if singular.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut() {
            let f = row[col] / pivot_row[col];
            for (a, b) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *a -= f * b;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Minimiser of `wᵀKw − 2wᵀp` subject to `Σw = 1`, from the bordered KKT system.
pub fn kkt_sum_one(k: &[Vec<f64>], p: &[f64]) -> Option<Vec<f64>> {
    let n = p.len();
    let mut a: Vec<Vec<f64>> = k
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push(1.0);
            r
        })
        .collect();
    let mut last = vec![1.0; n];
    last.push(0.0);
    a.push(last);
    let mut b: Vec<f64> = p.to_vec();
    b.push(1.0);
    let sol = dense_solve(&a, &b)?;
    Some(sol[..n].to_vec())
}

fn quad_objective(k: &[Vec<f64>], p: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += w[i] * w[j] * k[i][j];
        }
        v -= 2.0 * w[i] * p[i];
    }
    v
}

/// Minimiser of `wᵀKw − 2wᵀp` over the probability simplex by enumerating all
/// `2ⁿ − 1` faces; returns the weights and the objective value.
pub fn simplex_qp_enumerate(k: &[Vec<f64>], p: &[f64]) -> (Vec<f64>, f64) {
    let n = p.len();
    assert!(
        (1..=20).contains(&n),
        "face enumeration is limited to 20 points"
    );
    (1u32..(1u32 << n))
        .into_par_iter()
        .filter_map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let ks: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| idx.iter().map(|&j| k[i][j]).collect())
                .collect();
            let ps: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
            let ws = kkt_sum_one(&ks, &ps)?;
            if ws.iter().any(|&v| v < -1e-13) {
                return None;
            }
            let mut w = vec![0.0; n];
            for (&i, v) in idx.iter().zip(&ws) {
                w[i] = v.max(0.0);
            }
            let f = quad_objective(k, p, &w);
            Some((mask, w, f))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|(_, w, f)| (w, f))
        .expect("vertices are always feasible")
}

/// Minimiser of `f` over the grid `lo, lo + step, …, hi`.
pub fn grid_minimise<F: Fn(f64) -> f64 + Sync>(f: F, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = if i == n { hi } else { lo + i as f64 * step };
            (x, f(x))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .expect("non-empty grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_known_integrals() {
        assert!((integrate(|x| x.exp(), 0.0, 1.0, 1e-14) - (1f64.exp() - 1.0)).abs() < 1e-13);
        assert!(
            (integrate(|x| (1.0 + x) * (-x).exp(), 0.0, 1.0, 1e-14) - (2.0 - 3.0 / 1f64.exp()))
                .abs()
                < 1e-13
        );
        assert!((integrate(|x| x.abs(), -1.0, 2.0, 1e-12) - 2.5).abs() < 1e-10);
    }

    #[test]
    fn dense_solve_small_system() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = dense_solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(dense_solve(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn enumeration_finds_vertex_and_interior_optima() {
        let k = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (w, _) = simplex_qp_enumerate(&k, &[0.5, 0.5]);
        assert!((w[0] - 0.5).abs() < 1e-15);
        let (w, _) = simplex_qp_enumerate(&k, &[3.0, 0.0]);
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn grid_minimum_of_parabola() {
        let (x, _) = grid_minimise(|a| (a - 0.3).powi(2), 0.0, 1.0, 1e-6);
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn mixture_draw_moments() {
        let c = vec![MixtureComponent {
            weight: 1.0,
            mean: vec![2.0],
            sd: 0.5,
        }];
        let s = mixture_draws(&c, 20_000, 3, 0);
        let m = mc_mean(&s, |x| x[0]);
        assert!((m.mean - 2.0).abs() < 4.0 * m.se);
    }
}
