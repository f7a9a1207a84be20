//! Finite candidate sets and their per-point caches.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::halton::halton_points;
use crate::kernels::{KernelSpec, Point};
use crate::target::TargetMeasure;

#[derive(Clone, Debug, PartialEq)]
pub enum CandidateMode {
    /// CSV file, one point per row; lines starting with `#` are ignored.
    File { path: PathBuf },
    UniformRng {
        seed: u64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Halton {
        offset: u64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Independent draws from the target measure.
    IidTarget { seed: u64 },
}

impl CandidateMode {
    pub fn name(&self) -> &'static str {
        match self {
            CandidateMode::File { .. } => "file",
            CandidateMode::UniformRng { .. } => "uniform_rng",
            CandidateMode::Halton { .. } => "halton",
            CandidateMode::IidTarget { .. } => "iid_target",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSource {
    pub mode: CandidateMode,
    /// Number of points to generate. File mode keeps the first `count` rows, or all rows when 0.
    pub count: usize,
    pub resample_each_iteration: bool,
}

impl CandidateSource {
    pub fn new(mode: CandidateMode, count: usize) -> Self {
        CandidateSource {
            mode,
            count,
            resample_each_iteration: false,
        }
    }

    /// Raw points before deduplication. `stream` selects an independent random stream.
    pub fn generate_points(&self, target: &TargetMeasure, stream: u64) -> Result<Vec<Point>> {
        let pts = match &self.mode {
            CandidateMode::File { path } => {
                let mut pts = read_points_csv(path)?;
                if self.count > 0 && pts.len() > self.count {
                    pts.truncate(self.count);
                }
                pts
            }
            CandidateMode::UniformRng { seed, lower, upper } => {
                check_box(lower, upper)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(stream);
                (0..self.count)
                    .map(|_| {
                        let c = lower
                            .iter()
                            .zip(upper)
                            .map(|(&l, &u)| l + (u - l) * rng.gen::<f64>())
                            .collect();
                        Point::new(c)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            CandidateMode::Halton {
                offset,
                lower,
                upper,
            } => {
                check_box(lower, upper)?;
                halton_points(*offset, self.count, lower.len())
                    .into_iter()
                    .map(|h| {
                        let c = h
                            .iter()
                            .zip(lower.iter().zip(upper))
                            .map(|(&v, (&l, &u))| l + (u - l) * v)
                            .collect();
                        Point::new(c)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            CandidateMode::IidTarget { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(stream);
                target.sample(&mut rng, self.count)?
            }
        };
        Ok(pts)
    }

    /// Builds the candidate set with all caches filled.
    pub fn build(&self, target: &TargetMeasure, kernel: &KernelSpec) -> Result<CandidateSet> {
        CandidateSet::from_points(self.generate_points(target, 0)?, target, kernel)
    }

    /// A fresh iid set for `iteration`, deterministic given the seed and the iteration.
    pub fn resample(
        &self,
        iteration: usize,
        target: &TargetMeasure,
        kernel: &KernelSpec,
    ) -> Result<CandidateSet> {
        if !matches!(self.mode, CandidateMode::IidTarget { .. }) {
            return Err(Error::Config(format!(
                "candidate resampling requires mode `iid_target`, got `{}`",
                self.mode.name()
            )));
        }
        CandidateSet::from_points(
            self.generate_points(target, iteration as u64)?,
            target,
            kernel,
        )
    }
}

fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty()
        || lower.len() != upper.len()
        || lower.iter().zip(upper).any(|(l, u)| !(u > l))
    {
        return Err(Error::Config(
            "candidate box needs matching non-empty `lower` < `upper`".into(),
        ));
    }
    Ok(())
}

/// Reads one point per CSV row. Lines starting with `#` are comments.
pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let file_err = |message: String| Error::CandidateFile {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut pts = Vec::new();
    let mut dim = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| file_err(e.to_string()))?;
        let coords = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| file_err(format!("row {}: {e}", row + 1)))?;
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(file_err(format!(
                    "row {} has {} columns, expected {d}",
                    row + 1,
                    coords.len()
                )))
            }
            _ => {}
        }
        pts.push(Point::new(coords).map_err(|e| file_err(format!("row {}: {e}", row + 1)))?);
    }
    Ok(pts)
}

/// The candidate set `𝒳_C` with cached `K(x,x)`, `P_{K,µ}(x)` and the constants K̄_C, K̄_{µ,C}.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    kernel: KernelSpec,
    dim: usize,
    coords: Vec<f64>,
    diag: Vec<f64>,
    pot: Vec<f64>,
    energy: f64,
    kbar_c: f64,
    kmu_bar_c: f64,
    dropped: usize,
}

impl CandidateSet {
    /// Deduplicates (exact equality, first occurrence kept) and fills the caches.
    pub fn from_points(
        points: Vec<Point>,
        target: &TargetMeasure,
        kernel: &KernelSpec,
    ) -> Result<Self> {
        let dim = target.dim();
        let total = points.len();
        let mut seen = HashSet::with_capacity(total);
        let mut coords = Vec::with_capacity(total * dim);
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if seen.insert(p.key()) {
                coords.extend_from_slice(p);
            }
        }
        let c = coords.len() / dim;
        if c == 0 {
            return Err(Error::EmptyCandidateSet);
        }
        let dropped = total - c;
        if dropped > 0 {
            log::warn!("dropped {dropped} duplicate candidate point(s); C = {c}");
        }
        let energy = target.energy(kernel)?;
        let (diag, pot): (Vec<f64>, Vec<f64>) = coords
            .par_chunks(dim)
            .map(|x| {
                (
                    kernel.eval_slices(x, x),
                    target.potential_unchecked(kernel, x),
                )
            })
            .unzip();
        let kbar_c = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let kmu_bar_c = diag
            .iter()
            .zip(&pot)
            .map(|(d, p)| d - 2.0 * p + energy)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(CandidateSet {
            kernel: *kernel,
            dim,
            coords,
            diag,
            pot,
            energy,
            kbar_c,
            kmu_bar_c,
            dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_point(&self, i: usize) -> Point {
        Point::new(self.point(i).to_vec()).expect("candidate coordinates are finite")
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn pot(&self) -> &[f64] {
        &self.pot
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn kbar_c(&self) -> f64 {
        self.kbar_c
    }

    pub fn kmu_bar_c(&self) -> f64 {
        self.kmu_bar_c
    }

    pub fn dropped_duplicates(&self) -> usize {
        self.dropped
    }

    /// `K_µ(x^{(i)}, x^{(i)})`.
    pub fn reduced_diag(&self, i: usize) -> f64 {
        self.diag[i] - 2.0 * self.pot[i] + self.energy
    }

    /// `K(x, x^{(i)})` for every candidate, computed in parallel.
    pub fn kernel_column(&self, x: &[f64]) -> Vec<f64> {
        let k = self.kernel;
        self.coords
            .par_chunks(self.dim)
            .map(|c| k.eval_slices(x, c))
            .collect()
    }

    /// `K_µ(x, x^{(i)})` for every candidate given `P_{K,µ}(x)`.
    pub fn reduced_column(&self, x: &[f64], pot_x: f64) -> Vec<f64> {
        let k = self.kernel;
        let e = self.energy;
        self.coords
            .par_chunks(self.dim)
            .zip(self.pot.par_iter())
            .map(|(c, p)| k.eval_slices(x, c) - pot_x - p + e)
            .collect()
    }
}
