//! Incremental Cholesky factors of support Gram matrices and optimal weights.
//!
//! [`GramState`] keeps `K_n = L Lᵀ` for the current support and extends it in
//! `O(n²)` per added point. [`CandidateProjections`] carries the per-candidate
//! quantities `kᵀK⁻¹k` and `rᵀK⁻¹k` through the rank-one recursions, so that
//! scoring a candidate never needs a fresh solve.

use rayon::prelude::*;
use serde::Serialize;

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};

/// Result of appending one point: `u = K_n⁻¹ k` and `β = 1/(K(x,x) − kᵀu)`.
#[derive(Clone, Debug)]
pub struct Extension {
    pub u: Vec<f64>,
    pub beta: f64,
}

impl Extension {
    /// `(uᵀ, −1) v` for a vector whose first `n` entries are `prev` and last entry is `new`.
    pub fn project(&self, prev: &[f64], new: f64) -> f64 {
        dot(&self.u, prev) - new
    }
}

/// Lower-triangular factor of a growing symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct GramState {
    gram: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    beta_floor: f64,
    scale: f64,
    refactorizations: usize,
}

impl GramState {
    /// `beta_floor` is the smallest admissible Schur complement.
    pub fn new(beta_floor: f64) -> Self {
        GramState {
            gram: Vec::new(),
            chol: Vec::new(),
            beta_floor,
            scale: 0.0,
            refactorizations: 0,
        }
    }

    /// Factorises a full symmetric matrix given by rows.
    pub fn from_matrix(rows: &[Vec<f64>], beta_floor: f64) -> Result<Self> {
        let mut g = GramState::new(beta_floor);
        for (i, row) in rows.iter().enumerate() {
            g.extend(&row[..i], row[i])?;
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.chol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chol.is_empty()
    }

    pub fn beta_floor(&self) -> f64 {
        self.beta_floor
    }

    pub fn refactorizations(&self) -> usize {
        self.refactorizations
    }

    /// Entry `(i, j)` of the factorised matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.gram[i][j]
        } else {
            self.gram[j][i]
        }
    }

    pub fn factor_row(&self, i: usize) -> &[f64] {
        &self.chol[i]
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.chol[i];
            y[i] = (b[i] - dot(&row[..i], &y[..i])) / row[i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.chol[i][i];
            let xi = x[i];
            for (m, l) in self.chol[i][..i].iter().enumerate() {
                x[m] -= l * xi;
            }
        }
        x
    }

    /// Solves `K_n x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `aᵀ K_n⁻¹ b`.
    pub fn inv_quad(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(&self.forward(a), &self.forward(b))
    }

    /// `K_n v`.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j) * v[j]).sum())
            .collect()
    }

    /// Schur complement of a prospective new point, without modifying the state.
    pub fn schur(&self, column: &[f64], diag: f64) -> f64 {
        let y = self.forward(column);
        diag - dot(&y, &y)
    }

    /// Appends a point with `column = (K(x_i, x_{n+1}))_i` and `diag = K(x_{n+1}, x_{n+1})`.
    pub fn extend(&mut self, column: &[f64], diag: f64) -> Result<Extension> {
        let n = self.len();
        if column.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: column.len(),
            });
        }
        let y = self.forward(column);
        let schur = diag - dot(&y, &y);
        if !(schur > self.beta_floor) {
            return Err(Error::NearDuplicate {
                schur,
                floor: self.beta_floor,
            });
        }
        let u = self.backward(&y);
        let mut row = y;
        row.push(schur.sqrt());
        let mut grow = column.to_vec();
        grow.push(diag);
        self.gram.push(grow);
        self.chol.push(row);
        self.scale = self.scale.max(diag.abs());
        if self.last_row_error() > 1e-10 * (n + 1) as f64 * self.scale.max(1.0) {
            log::warn!(
                "Cholesky reconstruction drifted at n = {}; refactorising",
                n + 1
            );
            self.refactor()?;
        }
        Ok(Extension {
            u,
            beta: 1.0 / schur,
        })
    }

    fn last_row_error(&self) -> f64 {
        let n = self.len() - 1;
        let last = &self.chol[n];
        (0..=n)
            .map(|j| (dot(&last[..=j], &self.chol[j][..=j]) - self.gram[n][j]).abs())
            .fold(0.0, f64::max)
    }

    /// Max-abs difference between `L Lᵀ` and the stored matrix.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.len();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.chol[i][..=j], &self.chol[j][..=j]);
                err = err.max((v - self.gram[i][j]).abs());
            }
        }
        err
    }

    /// Recomputes the factor from the stored matrix.
    pub fn refactor(&mut self) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.entry(i, j)).collect())
            .collect();
        let l = dense_cholesky(&rows).ok_or(Error::NearDuplicate {
            schur: 0.0,
            floor: self.beta_floor,
        })?;
        self.chol = l;
        self.refactorizations += 1;
        Ok(())
    }
}

/// Dense Cholesky factor (rows of a lower-triangular matrix) or `None` when not positive definite.
pub fn dense_cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; i + 1];
        for j in 0..=i {
            let lj: &[f64] = if j < i { &l[j][..j] } else { &row[..j] };
            let s = a[i][j] - dot(&row[..j], lj);
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                row[i] = s.sqrt();
            } else {
                row[j] = s / l[j][j];
            }
        }
        l.push(row);
    }
    Some(l)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintClass {
    Simplex,
    SumOne,
    Unconstrained,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub class: ConstraintClass,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `w̃ = K_n⁻¹ p`.
pub fn tilde_weights(g: &GramState, p: &[f64]) -> WeightVector {
    WeightVector {
        values: g.solve(p),
        class: ConstraintClass::Unconstrained,
    }
}

/// `ŵ = K⁻¹p + K⁻¹1 (1 − 1ᵀK⁻¹p)/(1ᵀK⁻¹1)`, the minimiser of `wᵀKw − 2wᵀp` over `Σw = 1`.
pub fn hat_weights(g: &GramState, p: &[f64]) -> WeightVector {
    WeightVector {
        values: sum_one_solve(&|b: &[f64]| g.solve(b), &|v: &[f64]| g.mul(v), p),
        class: ConstraintClass::SumOne,
    }
}

/// Sum-one constrained minimiser with one step of iterative refinement on the KKT system.
fn sum_one_solve(
    solve: &dyn Fn(&[f64]) -> Vec<f64>,
    mul: &dyn Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
) -> Vec<f64> {
    let n = p.len();
    let ones = vec![1.0; n];
    let a = solve(&ones);
    let sa: f64 = a.iter().sum();
    let b = solve(p);
    let mu = (1.0 - b.iter().sum::<f64>()) / sa;
    let mut w: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi + mu * ai).collect();
    // Residuals of K w − µ1 = p and 1ᵀw = 1.
    let kw = mul(&w);
    let r: Vec<f64> = (0..n).map(|i| p[i] + mu - kw[i]).collect();
    let r2 = 1.0 - w.iter().sum::<f64>();
    let br = solve(&r);
    let dmu = (r2 - br.iter().sum::<f64>()) / sa;
    for i in 0..n {
        w[i] += br[i] + dmu * a[i];
    }
    w
}

/// Iteration cap for [`simplex_weights`].
pub const SIMPLEX_MAX_ITER: usize = 100_000;

/// Minimiser of `wᵀKw − 2wᵀp` over the probability simplex.
///
/// Primal active-set method on the face solves of the sum-one problem, started
/// from `warm` when given. Terminates once the Frank–Wolfe duality gap
/// `∇fᵀw − min_j ∇f_j` is at most `tol`.
pub fn simplex_weights(
    g: &GramState,
    p: &[f64],
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<WeightVector> {
    let n = g.len();
    if n == 0 || p.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let objective = |w: &[f64], kw: &[f64]| dot(w, kw) - 2.0 * dot(w, p);
    let mut w = match warm {
        Some(w0) if w0.len() == n && w0.iter().any(|&v| v > 0.0) => {
            let clipped: Vec<f64> = w0.iter().map(|&v| v.max(0.0)).collect();
            let s: f64 = clipped.iter().sum();
            clipped.into_iter().map(|v| v / s).collect()
        }
        _ => {
            let j = argmin((0..n).map(|j| g.entry(j, j) - 2.0 * p[j]));
            let mut w = vec![0.0; n];
            w[j] = 1.0;
            w
        }
    };
    let mut free: Vec<bool> = w.iter().map(|&v| v > 0.0).collect();
    let mut best = w.clone();
    let mut best_f = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for _ in 0..SIMPLEX_MAX_ITER {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let z = face_solve(g, p, &idx)?;
        if z.iter().all(|&v| v >= 0.0) {
            for v in w.iter_mut() {
                *v = 0.0;
            }
            for (&i, &v) in idx.iter().zip(&z) {
                w[i] = v;
            }
            let kw = g.mul(&w);
            let grad: Vec<f64> = kw.iter().zip(p).map(|(k, pi)| 2.0 * (k - pi)).collect();
            let jmin = argmin(grad.iter().cloned());
            gap = dot(&grad, &w) - grad[jmin];
            let f = objective(&w, &kw);
            if f < best_f {
                best_f = f;
                best.clone_from(&w);
            }
            if gap <= tol {
                return Ok(WeightVector {
                    values: w,
                    class: ConstraintClass::Simplex,
                });
            }
            if free[jmin] {
                // The most negative gradient entry is already free: residual gap is rounding.
                break;
            }
            free[jmin] = true;
        } else {
            let mut t = 1.0f64;
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi < 0.0 {
                    t = t.min(w[i] / (w[i] - zi));
                }
            }
            for (&i, &zi) in idx.iter().zip(&z) {
                w[i] += t * (zi - w[i]);
            }
            let mut removed = false;
            for (&i, &zi) in idx.iter().zip(&z) {
                if w[i] <= 1e-15 && zi < 0.0 || w[i] <= 0.0 {
                    w[i] = 0.0;
                    free[i] = false;
                    removed = true;
                }
            }
            if !removed {
                // Guard against stalling on a degenerate step.
                let (&i, _) = idx
                    .iter()
                    .zip(&z)
                    .filter(|(_, &zi)| zi < 0.0)
                    .min_by(|a, b| (w[*a.0]).total_cmp(&w[*b.0]))
                    .expect("a negative component exists");
                w[i] = 0.0;
                free[i] = false;
            }
            let s: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= s;
            }
        }
    }
    Err(Error::QpNotConverged {
        iterations: SIMPLEX_MAX_ITER,
        gap,
        best,
    })
}

/// Sum-one minimiser restricted to the coordinates in `idx`.
fn face_solve(g: &GramState, p: &[f64], idx: &[usize]) -> Result<Vec<f64>> {
    let pf: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
    if idx.len() == g.len() {
        return Ok(sum_one_solve(
            &|b: &[f64]| g.solve(b),
            &|v: &[f64]| g.mul(v),
            &pf,
        ));
    }
    let sub: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| g.entry(i, j)).collect())
        .collect();
    let l = dense_cholesky(&sub).ok_or(Error::NearDuplicate {
        schur: 0.0,
        floor: g.beta_floor(),
    })?;
    let sub_state = GramState {
        gram: sub
            .iter()
            .enumerate()
            .map(|(i, r)| r[..=i].to_vec())
            .collect(),
        chol: l,
        beta_floor: g.beta_floor(),
        scale: 1.0,
        refactorizations: 0,
    };
    Ok(sum_one_solve(
        &|b: &[f64]| sub_state.solve(b),
        &|v: &[f64]| sub_state.mul(v),
        &pf,
    ))
}

/// Index of the smallest value; the first one wins ties.
pub fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::INFINITY;
    let mut idx = 0;
    for (i, v) in values.enumerate() {
        if v < best {
            best = v;
            idx = i;
        }
    }
    idx
}

/// Certified bracket `[lower, upper]` of `M_C² = min_{ω ∈ 𝒫_C} ωᵀ K_{µ,C} ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mc2Interval {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl Mc2Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Frank–Wolfe with exact line search on `ωᵀ K_{µ,C} ω`, started from uniform weights.
pub fn certified_mc2(cs: &CandidateSet, budget: usize) -> Mc2Interval {
    let c = cs.len();
    let k = *cs.kernel();
    let pot = cs.pot();
    let e = cs.energy();
    let mean_pot = pot.iter().sum::<f64>() / c as f64;
    // g = K_{µ,C} ω for uniform ω.
    let mut g: Vec<f64> = (0..c)
        .into_par_iter()
        .map(|i| {
            let xi = cs.point(i);
            let row: f64 = cs.points().map(|xj| k.eval_slices(xi, xj)).sum();
            row / c as f64 - pot[i] - mean_pot + e
        })
        .collect();
    let mut omega = vec![1.0 / c as f64; c];
    let mut f = dot(&omega, &g);
    let mut iterations = 0;
    for _ in 0..budget {
        let j = argmin(g.iter().cloned());
        let gj = g[j];
        if f - gj <= 0.0 {
            break;
        }
        let mjj = cs.reduced_diag(j);
        let denom = mjj - 2.0 * gj + f;
        if !(denom > 0.0) {
            break;
        }
        let gamma = ((f - gj) / denom).clamp(0.0, 1.0);
        let col = cs.reduced_column(cs.point(j), pot[j]);
        g.par_iter_mut()
            .zip(col.par_iter())
            .for_each(|(gi, ci)| *gi = (1.0 - gamma) * *gi + gamma * ci);
        for w in omega.iter_mut() {
            *w *= 1.0 - gamma;
        }
        omega[j] += gamma;
        f = dot(&omega, &g);
        iterations += 1;
    }
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = f.max(0.0);
    let gap = (2.0 * (f - gmin)).max(0.0);
    Mc2Interval {
        lower: (f - gap).max(0.0).min(upper),
        upper,
        gap,
        iterations,
    }
}

/// Per-candidate quantities carried through the rank-one recursions:
/// `q(x) = k_nᵀ(x) K_n⁻¹ k_n(x)`, `proj_r(x) = rᵀ K_n⁻¹ k_n(x)` for each tracked
/// right-hand side `r`, and the scalars `r_aᵀ K_n⁻¹ r_b`.
#[derive(Clone, Debug)]
pub struct CandidateProjections {
    cols: Vec<Vec<f64>>,
    rhs: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub proj: Vec<Vec<f64>>,
    pub cross: Vec<Vec<f64>>,
}

impl CandidateProjections {
    pub fn new(candidates: usize, tracked: usize) -> Self {
        CandidateProjections {
            cols: Vec::new(),
            rhs: vec![Vec::new(); tracked],
            q: vec![0.0; candidates],
            proj: vec![vec![0.0; candidates]; tracked],
            cross: vec![vec![0.0; tracked]; tracked],
        }
    }

    /// Support columns `K(x_j, x^{(i)})` in the order the support was built.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.cols
    }

    /// Applies the update for a new support point whose candidate column is `column`
    /// and whose tracked right-hand-side values are `rhs_new`.
    pub fn extend(&mut self, ext: &Extension, column: Vec<f64>, rhs_new: &[f64]) {
        let beta = ext.beta;
        let u = &ext.u;
        let cols = &self.cols;
        let c_r: Vec<f64> = self
            .rhs
            .iter()
            .zip(rhs_new)
            .map(|(r, &new)| ext.project(r, new))
            .collect();
        const CHUNK: usize = 512;
        let mut c_x: Vec<f64> = column.iter().map(|v| -v).collect();
        c_x.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let start = b * CHUNK;
                for (uj, col) in u.iter().zip(cols) {
                    for (t, ci) in chunk.iter_mut().zip(&col[start..]) {
                        *t += uj * ci;
                    }
                }
            });
        self.q
            .par_iter_mut()
            .zip(c_x.par_iter())
            .for_each(|(q, c)| *q += beta * c * c);
        for (proj, cr) in self.proj.iter_mut().zip(&c_r) {
            proj.par_iter_mut()
                .zip(c_x.par_iter())
                .for_each(|(s, c)| *s += beta * cr * c);
        }
        for a in 0..c_r.len() {
            for b in 0..c_r.len() {
                self.cross[a][b] += beta * c_r[a] * c_r[b];
            }
        }
        for (r, &new) in self.rhs.iter_mut().zip(rhs_new) {
            r.push(new);
        }
        self.cols.push(column);
    }

    /// `Σ_j w_j K(x_j, x^{(i)})` for every candidate.
    pub fn weighted_potential(&self, weights: &[f64]) -> Vec<f64> {
        let c = self.q.len();
        let mut out = vec![0.0; c];
        const CHUNK: usize = 512;
        let cols = &self.cols;
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let start = b * CHUNK;
                for (w, col) in weights.iter().zip(cols) {
                    for (t, ci) in chunk.iter_mut().zip(&col[start..]) {
                        *t += w * ci;
                    }
                }
            });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gram(
        rng: &mut ChaCha8Rng,
        n: usize,
        k: &KernelSpec,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let rows = pts
            .iter()
            .map(|x| pts.iter().map(|y| k.eval_slices(x, y)).collect())
            .collect();
        (pts, rows)
    }

    #[test]
    fn two_by_two_closed_form() {
        let r = 0.3;
        let mut g = GramState::new(1e-12);
        g.extend(&[], 1.0).unwrap();
        let ext = g.extend(&[r], 1.0).unwrap();
        assert!((ext.beta - 1.0 / (1.0 - r * r)).abs() < 1e-14);
        assert!((ext.u[0] - r).abs() < 1e-15);
    }

    #[test]
    fn duplicate_column_is_rejected() {
        let mut g = GramState::new(1e-12);
        g.extend(&[], 1.0).unwrap();
        let err = g.extend(&[1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::NearDuplicate { .. }));
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn factor_reproduces_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = KernelSpec::gaussian(2.0).unwrap();
        for _ in 0..20 {
            let (_, rows) = random_gram(&mut rng, 3, &k);
            let g = GramState::from_matrix(&rows, 1e-12).unwrap();
            assert!(g.reconstruction_error() <= 1e-12);
        }
        let (_, rows) = random_gram(&mut rng, 50, &KernelSpec::matern32(5.0).unwrap());
        let g = GramState::from_matrix(&rows, 1e-12).unwrap();
        let direct = dense_cholesky(&rows).unwrap();
        let err = (0..50)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| (g.factor_row(i)[j] - direct[i][j]).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn tilde_weights_cases() {
        let mut g = GramState::new(1e-12);
        g.extend(&[], 1.0).unwrap();
        assert!((tilde_weights(&g, &[0.6]).values[0] - 0.6).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (_, rows) = random_gram(&mut rng, 5, &KernelSpec::gaussian(3.0).unwrap());
        let g = GramState::from_matrix(&rows, 1e-12).unwrap();
        assert!(tilde_weights(&g, &[0.0; 5])
            .values
            .iter()
            .all(|&v| v == 0.0));
        let p: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
        let w = tilde_weights(&g, &p).values;
        let r = g.mul(&w);
        let res = r
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-10, "{res}");
    }

    #[test]
    fn hat_weights_constant_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, rows) = random_gram(&mut rng, 5, &KernelSpec::gaussian(4.0).unwrap());
        let g = GramState::from_matrix(&rows, 1e-12).unwrap();
        let a = g.solve(&[1.0; 5]);
        let sa: f64 = a.iter().sum();
        for c in [0.0, 0.3, 2.0] {
            let w = hat_weights(&g, &[c; 5]);
            assert_eq!(w.class, ConstraintClass::SumOne);
            assert!((w.sum() - 1.0).abs() < 1e-10);
            for (wi, ai) in w.values.iter().zip(&a) {
                assert!((wi - ai / sa).abs() < 1e-9);
            }
        }
        let mut g1 = GramState::new(1e-12);
        g1.extend(&[], 1.0).unwrap();
        assert!((hat_weights(&g1, &[0.2]).values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_weights_single_point() {
        let mut g = GramState::new(1e-12);
        g.extend(&[], 1.0).unwrap();
        let w = simplex_weights(&g, &[0.4], 1e-10, None).unwrap();
        assert_eq!(w.values, vec![1.0]);
    }

    #[test]
    fn simplex_weights_vertex_optimum() {
        // Identity Gram, p favouring the first coordinate: optimum is e_1 with gap 0.
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = GramState::from_matrix(&rows, 1e-12).unwrap();
        let w = simplex_weights(&g, &[2.0, 0.0], 1e-10, Some(&[0.5, 0.5])).unwrap();
        assert!((w.values[0] - 1.0).abs() < 1e-12 && w.values[1].abs() < 1e-12);
    }

    #[test]
    fn mc2_single_candidate_is_exact() {
        use crate::kernels::Point;
        use crate::target::TargetMeasure;
        let t = TargetMeasure::unit_cube(2).unwrap();
        let k = KernelSpec::matern32(3.0).unwrap();
        let cs =
            CandidateSet::from_points(vec![Point::new(vec![0.3, 0.4]).unwrap()], &t, &k).unwrap();
        let iv = certified_mc2(&cs, 10);
        assert_eq!(iv.lower, iv.upper);
        assert_eq!(iv.upper, cs.reduced_diag(0));
    }

    #[test]
    fn projections_match_direct_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = KernelSpec::gaussian(5.0).unwrap();
        let cands: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let rvals: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
        let mut g = GramState::new(1e-12);
        let mut tr = CandidateProjections::new(40, 1);
        let chosen = [3usize, 17, 25, 8, 31];
        for (m, &j) in chosen.iter().enumerate() {
            let col: Vec<f64> = cands.iter().map(|c| k.eval_slices(&cands[j], c)).collect();
            let sup_col: Vec<f64> = chosen[..m].iter().map(|&i| col[i]).collect();
            let ext = g.extend(&sup_col, col[j]).unwrap();
            tr.extend(&ext, col, &[rvals[j]]);
        }
        let r: Vec<f64> = chosen.iter().map(|&i| rvals[i]).collect();
        for i in 0..40 {
            let kx: Vec<f64> = chosen
                .iter()
                .map(|&j| k.eval_slices(&cands[j], &cands[i]))
                .collect();
            assert!((g.inv_quad(&kx, &kx) - tr.q[i]).abs() < 1e-10);
            assert!((g.inv_quad(&r, &kx) - tr.proj[0][i]).abs() < 1e-10);
        }
        assert!((g.inv_quad(&r, &r) - tr.cross[0][0]).abs() < 1e-10);
    }
}
