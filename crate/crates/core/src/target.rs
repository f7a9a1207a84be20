//! Target measures µ with their kernel potentials, energies and moments.
//!
//! Supported pairings: uniform box with the Matérn 3/2 product kernel, Gaussian
//! mixture with the Gaussian kernel, and an empirical (finite) measure with any kernel.
//! Any other pairing is an error; there is no Monte-Carlo fallback.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{squared_distance, KernelFamily, KernelSpec, Point};

/// One isotropic component of a Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sd: f64,
}

/// `E_K(µ)`, `τ_{1/2}(µ) = ∫ K(x,x)^{1/2} dµ` and `τ_1(µ) = ∫ K(x,x) dµ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetMoments {
    pub energy: f64,
    pub tau_half: f64,
    pub tau_one: f64,
}

type KernelKey = (KernelFamily, u64);

/// Uniform measure on a finite point set, with lazily filled potential and energy caches.
#[derive(Debug)]
pub struct EmpiricalTarget {
    points: Vec<Point>,
    potentials: Mutex<HashMap<(KernelKey, Vec<u64>), f64>>,
    energies: Mutex<HashMap<KernelKey, f64>>,
}

impl EmpiricalTarget {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn potential(&self, k: &KernelSpec, x: &[f64]) -> f64 {
        let key = (
            k.cache_key(),
            x.iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
        );
        if let Some(v) = self.potentials.lock().unwrap().get(&key) {
            return *v;
        }
        let sum: f64 = self.points.iter().map(|p| k.eval_slices(x, p)).sum();
        let v = sum / self.points.len() as f64;
        self.potentials.lock().unwrap().insert(key, v);
        v
    }

    fn energy(&self, k: &KernelSpec) -> f64 {
        if let Some(v) = self.energies.lock().unwrap().get(&k.cache_key()) {
            return *v;
        }
        let pts = &self.points;
        let row_sums: Vec<f64> = pts
            .par_iter()
            .map(|x| pts.iter().map(|y| k.eval_slices(x, y)).sum::<f64>())
            .collect();
        let c = pts.len() as f64;
        let v = row_sums.iter().sum::<f64>() / (c * c);
        self.energies.lock().unwrap().insert(k.cache_key(), v);
        v
    }
}

impl Clone for EmpiricalTarget {
    fn clone(&self) -> Self {
        EmpiricalTarget {
            points: self.points.clone(),
            potentials: Mutex::new(self.potentials.lock().unwrap().clone()),
            energies: Mutex::new(self.energies.lock().unwrap().clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub enum TargetMeasure {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    GaussianMixture { components: Vec<MixtureComponent> },
    Empirical(EmpiricalTarget),
}

impl TargetMeasure {
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidParameter(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && u > l) {
                return Err(Error::InvalidParameter(format!(
                    "invalid box side [{l}, {u}]"
                )));
            }
        }
        Ok(TargetMeasure::UniformBox { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::uniform_box(vec![0.0; d], vec![1.0; d])
    }

    pub fn gaussian_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components.first().ok_or_else(|| {
            Error::InvalidParameter("mixture needs at least one component".into())
        })?;
        let d = first.mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter(
                "mixture means must be non-empty".into(),
            ));
        }
        let mut total = 0.0;
        for c in &components {
            if c.mean.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.mean.len(),
                });
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight {} must be positive",
                    c.weight
                )));
            }
            if !(c.sd > 0.0 && c.sd.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "mixture sd {} must be positive",
                    c.sd
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidParameter(
                    "mixture mean has non-finite coordinate".into(),
                ));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::MassNotOne(total));
        }
        Ok(TargetMeasure::GaussianMixture { components })
    }

    /// A fixed three-component isotropic mixture on `R²`.
    pub fn trimodal_mixture() -> Self {
        let comp = |w: f64, m: [f64; 2]| MixtureComponent {
            weight: w,
            mean: m.to_vec(),
            sd: 0.5,
        };
        Self::gaussian_mixture(vec![
            comp(2.0 / 7.0, [-1.0, 1.0]),
            comp(2.0 / 7.0, [1.0, -1.0]),
            comp(3.0 / 7.0, [1.0, 1.0]),
        ])
        .expect("valid preset")
    }

    pub fn empirical(points: Vec<Point>) -> Result<Self> {
        let d = points.first().ok_or(Error::EmptyCandidateSet)?.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        Ok(TargetMeasure::Empirical(EmpiricalTarget {
            points,
            potentials: Mutex::new(HashMap::new()),
            energies: Mutex::new(HashMap::new()),
        }))
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            TargetMeasure::UniformBox { .. } => "uniform_box",
            TargetMeasure::GaussianMixture { .. } => "gaussian_mixture",
            TargetMeasure::Empirical(_) => "empirical",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetMeasure::UniformBox { lower, .. } => lower.len(),
            TargetMeasure::GaussianMixture { components } => components[0].mean.len(),
            TargetMeasure::Empirical(e) => e.points[0].dim(),
        }
    }

    pub fn supports(&self, k: &KernelSpec) -> bool {
        matches!(
            (self, k.family),
            (
                TargetMeasure::UniformBox { .. },
                KernelFamily::Matern32Product
            ) | (
                TargetMeasure::GaussianMixture { .. },
                KernelFamily::GaussianRbf
            ) | (TargetMeasure::Empirical(_), _)
        )
    }

    fn check(&self, k: &KernelSpec) -> Result<()> {
        if self.supports(k) {
            Ok(())
        } else {
            Err(Error::UnsupportedPairing {
                target: self.variant_name(),
                kernel: k.name(),
            })
        }
    }

    /// `P_{K,µ}(x) = ∫ K(x, y) dµ(y)`.
    pub fn potential(&self, k: &KernelSpec, x: &Point) -> Result<f64> {
        self.check(k)?;
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(self.potential_unchecked(k, x))
    }

    /// Potential on raw coordinates; pairing and dimension must already be validated.
    pub(crate) fn potential_unchecked(&self, k: &KernelSpec, x: &[f64]) -> f64 {
        match self {
            TargetMeasure::UniformBox { lower, upper } => {
                let a = 3f64.sqrt() * k.theta;
                x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&xi, (&l, &u))| matern_box_potential_1d(a, l, u, xi))
                    .product()
            }
            TargetMeasure::GaussianMixture { components } => {
                let d = x.len() as f64;
                components
                    .iter()
                    .map(|c| {
                        let s = 1.0 + 2.0 * k.theta * c.sd * c.sd;
                        c.weight
                            * s.powf(-d / 2.0)
                            * (-k.theta * squared_distance(x, &c.mean) / s).exp()
                    })
                    .sum()
            }
            TargetMeasure::Empirical(e) => e.potential(k, x),
        }
    }

    /// `E_K(µ) = ∫∫ K(x, y) dµ(x) dµ(y)`.
    pub fn energy(&self, k: &KernelSpec) -> Result<f64> {
        self.check(k)?;
        Ok(match self {
            TargetMeasure::UniformBox { lower, upper } => {
                let a = 3f64.sqrt() * k.theta;
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| matern_box_energy_1d(a, u - l))
                    .product()
            }
            TargetMeasure::GaussianMixture { components } => {
                let d = self.dim() as f64;
                let mut e = 0.0;
                for cj in components {
                    for cl in components {
                        let s = 1.0 + 2.0 * k.theta * (cj.sd * cj.sd + cl.sd * cl.sd);
                        e += cj.weight
                            * cl.weight
                            * s.powf(-d / 2.0)
                            * (-k.theta * squared_distance(&cj.mean, &cl.mean) / s).exp();
                    }
                }
                e
            }
            TargetMeasure::Empirical(e) => e.energy(k),
        })
    }

    /// Energy plus the diagonal moments. All supported kernels have a constant
    /// diagonal `c`, so `τ_{1/2} = √c` and `τ_1 = c` for every target.
    pub fn moments(&self, k: &KernelSpec) -> Result<TargetMoments> {
        let energy = self.energy(k)?;
        let c = k.diag_value();
        Ok(TargetMoments {
            energy,
            tau_half: c.sqrt(),
            tau_one: c,
        })
    }

    pub fn is_samplable(&self) -> bool {
        !matches!(self, TargetMeasure::Empirical(_))
    }

    /// Draws `n` independent points from µ.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(n);
        match self {
            TargetMeasure::UniformBox { lower, upper } => {
                for _ in 0..n {
                    let c = lower
                        .iter()
                        .zip(upper)
                        .map(|(&l, &u)| l + (u - l) * rng.gen::<f64>())
                        .collect();
                    out.push(Point::new(c)?);
                }
            }
            TargetMeasure::GaussianMixture { components } => {
                for _ in 0..n {
                    let c = pick_component(components, rng.gen::<f64>());
                    let coords = c
                        .mean
                        .iter()
                        .map(|&m| {
                            let z: f64 = rng.sample(StandardNormal);
                            m + c.sd * z
                        })
                        .collect();
                    out.push(Point::new(coords)?);
                }
            }
            TargetMeasure::Empirical(_) => return Err(Error::NotSamplable(self.variant_name())),
        }
        Ok(out)
    }
}

/// Inverse-CDF choice of a mixture component for a uniform draw `u ∈ [0, 1)`.
fn pick_component(components: &[MixtureComponent], u: f64) -> &MixtureComponent {
    let mut acc = 0.0;
    for c in components {
        acc += c.weight;
        if u < acc {
            return c;
        }
    }
    components.last().expect("non-empty mixture")
}

/// `G(D) = ∫_0^D (1 + a s) e^{-a s} ds`.
fn matern_g(a: f64, dist: f64) -> f64 {
    2.0 / a - (2.0 / a + dist) * (-a * dist).exp()
}

/// `∫_0^L G(D) dD`.
fn matern_h(a: f64, len: f64) -> f64 {
    let e = (-a * len).exp();
    2.0 * len / a + 3.0 * (-a * len).exp_m1() / (a * a) + len / a * e
}

/// `(1/L) ∫_l^u (1 + a|x − t|) e^{-a|x − t|} dt`.
pub(crate) fn matern_box_potential_1d(a: f64, l: f64, u: f64, x: f64) -> f64 {
    let integral = if x < l {
        matern_g(a, u - x) - matern_g(a, l - x)
    } else if x > u {
        matern_g(a, x - l) - matern_g(a, x - u)
    } else {
        matern_g(a, x - l) + matern_g(a, u - x)
    };
    integral / (u - l)
}

/// `(1/L²) ∫∫_{[0,L]²} (1 + a|s − t|) e^{-a|s − t|} ds dt`.
pub(crate) fn matern_box_energy_1d(a: f64, len: f64) -> f64 {
    2.0 * matern_h(a, len) / (len * len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn single_gaussian() -> TargetMeasure {
        TargetMeasure::gaussian_mixture(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            sd: 0.5,
        }])
        .unwrap()
    }

    #[test]
    fn single_gaussian_closed_forms() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let t = single_gaussian();
        let p = t.potential(&k, &pt(&[0.0, 0.0])).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.energy(&k).unwrap() - 0.5).abs() < 1e-15);
        let kmu = crate::kernels::reduced_eval(&k, &t, &pt(&[0.0, 0.0]), &pt(&[0.0, 0.0])).unwrap();
        assert!((kmu - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn matern_uniform_potential_at_corner() {
        // √3θ = 1 on [0, 1] at x = 0: ∫_0^1 (1 + t)e^{-t} dt = 2 − 3/e.
        let k = KernelSpec::matern32(1.0 / 3f64.sqrt()).unwrap();
        let t = TargetMeasure::uniform_box(vec![0.0], vec![1.0]).unwrap();
        let p = t.potential(&k, &pt(&[0.0])).unwrap();
        assert!((p - (2.0 - 3.0 / std::f64::consts::E)).abs() < 1e-14);
        assert!((p - 0.896362).abs() < 1e-6);
    }

    #[test]
    fn duplicated_component_collapses() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        let comp = |w| MixtureComponent {
            weight: w,
            mean: vec![0.3, -0.2],
            sd: 0.4,
        };
        let one = TargetMeasure::gaussian_mixture(vec![comp(1.0)]).unwrap();
        let two = TargetMeasure::gaussian_mixture(vec![comp(0.5), comp(0.5)]).unwrap();
        assert!((one.energy(&k).unwrap() - two.energy(&k).unwrap()).abs() < 1e-15);
        let x = pt(&[1.0, 0.5]);
        assert!((one.potential(&k, &x).unwrap() - two.potential(&k, &x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn empirical_single_point() {
        let k = KernelSpec::matern32(3.0).unwrap();
        let x = pt(&[0.2, 0.9]);
        let t = TargetMeasure::empirical(vec![x.clone()]).unwrap();
        assert_eq!(t.potential(&k, &x).unwrap(), 1.0);
        assert_eq!(t.energy(&k).unwrap(), 1.0);
        assert_eq!(t.moments(&k).unwrap().tau_one, 1.0);
    }

    #[test]
    fn empirical_distance_potential_is_average() {
        let k = KernelSpec::distance();
        let pts = vec![pt(&[0.0, 0.0]), pt(&[3.0, 4.0]), pt(&[0.0, 1.0])];
        let t = TargetMeasure::empirical(pts.clone()).unwrap();
        let x = pt(&[0.0, 0.0]);
        let expected = -(0.0 + 5.0 + 1.0) / 3.0;
        assert!((t.potential(&k, &x).unwrap() - expected).abs() < 1e-15);
        let x2 = pt(&[0.0, 0.0]);
        let kd = crate::kernels::reduced_eval(&k, &t, &x, &x2).unwrap();
        let e = t.energy(&k).unwrap();
        assert!((kd - (0.0 - 2.0 * expected + e)).abs() < 1e-15);
    }

    #[test]
    fn unsupported_pairing_names_both() {
        let t = TargetMeasure::unit_cube(2).unwrap();
        let err = t.energy(&KernelSpec::gaussian(1.0).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("uniform_box") && msg.contains("gaussian_rbf"),
            "{msg}"
        );
        let err = single_gaussian()
            .energy(&KernelSpec::distance())
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedPairing { .. }));
    }

    #[test]
    fn invalid_targets_rejected() {
        assert!(TargetMeasure::uniform_box(vec![0.0], vec![0.0]).is_err());
        let bad = MixtureComponent {
            weight: 0.6,
            mean: vec![0.0],
            sd: 1.0,
        };
        assert!(matches!(
            TargetMeasure::gaussian_mixture(vec![bad]),
            Err(Error::MassNotOne(_))
        ));
        assert!(TargetMeasure::empirical(vec![]).is_err());
    }

    #[test]
    fn energy_below_squared_tau_half() {
        let k = KernelSpec::matern32(10.0).unwrap();
        let t = TargetMeasure::unit_cube(2).unwrap();
        let m = t.moments(&k).unwrap();
        assert!(m.energy <= m.tau_half * m.tau_half);
        let k = KernelSpec::gaussian(5.0).unwrap();
        let m = TargetMeasure::trimodal_mixture().moments(&k).unwrap();
        assert!(m.energy > 0.0 && m.energy <= m.tau_half * m.tau_half);
    }

    #[test]
    fn mixture_sampling_matches_weights() {
        let t = TargetMeasure::trimodal_mixture();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = t.sample(&mut rng, 20_000).unwrap();
        let lower_left = pts.iter().filter(|p| p[0] < 0.0 && p[1] > 0.0).count() as f64 / 20_000.0;
        // Component at (−1, 1) has weight 2/7 and almost all of its mass in that quadrant.
        assert!((lower_left - 2.0 / 7.0).abs() < 0.02, "{lower_left}");
        assert!(matches!(
            TargetMeasure::empirical(vec![pt(&[0.0])])
                .unwrap()
                .sample(&mut rng, 1),
            Err(Error::NotSamplable(_))
        ));
    }
}
