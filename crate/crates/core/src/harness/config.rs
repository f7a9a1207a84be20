//! TOML run configuration and its resolution into a [`Problem`].

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{MethodParams, Problem, StepRule};
use crate::candidates::{read_points_csv, CandidateMode, CandidateSet, CandidateSource};
use crate::error::{Error, Result};
use crate::kernels::{squared_distance, KernelFamily, KernelSpec, Point};
use crate::target::{MixtureComponent, TargetMeasure};

/// Points drawn from the candidate set for the bandwidth heuristic.
pub const HEURISTIC_SAMPLE: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub target: TargetConfig,
    pub candidates: CandidatesConfig,
    pub method: MethodConfig,
    pub n_max: usize,
    #[serde(default)]
    pub output: OutputConfig,
    /// Evaluate the theoretical bound alongside the trace and count violations.
    #[serde(default = "default_true")]
    pub bound_check: bool,
    /// Frank–Wolfe iterations spent bracketing `M_C²`.
    #[serde(default = "default_mc2_budget")]
    pub mc2_budget: usize,
    /// Recompute the running state from scratch every this many iterations (0 disables).
    #[serde(default = "default_audit_every")]
    pub audit_every: usize,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn default_true() -> bool {
    true
}

fn default_mc2_budget() -> usize {
    2000
}

fn default_audit_every() -> usize {
    10
}

fn default_qp_tol() -> f64 {
    1e-10
}

fn default_offset() -> u64 {
    1
}

fn default_reps() -> usize {
    200
}

/// A numeric bandwidth or the string `"heuristic"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    #[serde(default)]
    pub theta: Option<Theta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    GaussianMixture {
        /// `"trimodal"` selects the built-in three-component mixture.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        components: Vec<MixtureComponent>,
    },
    Empirical {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateModeName {
    File,
    UniformRng,
    Halton,
    IidTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesConfig {
    pub mode: CandidateModeName,
    /// Number of candidates `C`; for files 0 keeps every row.
    #[serde(alias = "C", default)]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Index of the first Halton point.
    #[serde(default = "default_offset")]
    pub offset: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Box for `uniform_rng` and `halton`; defaults to the target box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Draw a fresh candidate set at every iteration (one-step-ahead methods only).
    #[serde(default)]
    pub resample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rule: Option<StepRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default = "default_qp_tol")]
    pub qp_tol: f64,
    #[serde(default = "default_true")]
    pub stopping_rule: bool,
}

impl MethodConfig {
    pub fn params(&self) -> MethodParams {
        MethodParams {
            step_rule: self.step_rule.clone(),
            variant: self.variant.clone(),
            qp_tol: self.qp_tol,
            stopping_rule: self.stopping_rule,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Trace CSV; defaults to `<config stem>_trace.csv` beside the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Manifest JSON; defaults to the trace path with a `.json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Baseline CSV; defaults to `<config stem>_baseline.csv` beside the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            reps: default_reps(),
            seed: 0,
        }
    }
}

/// A configuration turned into concrete objects.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The configuration with the bandwidth made explicit.
    pub config: RunConfig,
    pub problem: Problem,
}

impl RunConfig {
    /// Parses a TOML configuration; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        if cfg.output.trace.is_none() {
            cfg.output.trace = Some(base.join(format!("{stem}_trace.csv")));
        }
        if cfg.output.baseline.is_none() {
            cfg.output.baseline = Some(base.join(format!("{stem}_baseline.csv")));
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TargetConfig::Empirical { path } = &mut self.target {
            fix(path);
        }
        if let Some(p) = &mut self.candidates.path {
            fix(p);
        }
        for p in [
            &mut self.output.trace,
            &mut self.output.manifest,
            &mut self.output.baseline,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks everything that can be checked without touching the file system.
    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        match (&self.kernel.theta, self.kernel.family) {
            (None, KernelFamily::Distance) => {}
            (None, _) => return Err(Error::Config("kernel.theta is required".into())),
            (Some(Theta::Named(s)), _) if s != "heuristic" => {
                return Err(Error::Config(format!(
                    "kernel.theta must be a number or \"heuristic\", got \"{s}\""
                )))
            }
            (Some(Theta::Named(_)), f) if f != KernelFamily::GaussianRbf => {
                return Err(Error::Config(
                    "the bandwidth heuristic is defined for gaussian_rbf only".into(),
                ))
            }
            _ => {}
        }
        let c = &self.candidates;
        if c.mode != CandidateModeName::File && c.count == 0 {
            return Err(Error::Config("candidates.count must be at least 1".into()));
        }
        if c.mode == CandidateModeName::File && c.path.is_none() {
            return Err(Error::Config(
                "candidates.path is required for mode = \"file\"".into(),
            ));
        }
        if c.resample && c.mode != CandidateModeName::IidTarget {
            return Err(Error::Config(
                "candidates.resample requires mode = \"iid_target\"".into(),
            ));
        }
        if let Some(rule) = &self.method.step_rule {
            rule.validate().map_err(|e| Error::Config(e.to_string()))?;
            if let StepRule::Custom(seq) = rule {
                if seq.len() < self.n_max {
                    return Err(Error::Config(format!(
                        "custom step sequence has {} entries but n_max is {}",
                        seq.len(),
                        self.n_max
                    )));
                }
            }
        }
        if self.method.qp_tol <= 0.0 {
            return Err(Error::Config("method.qp_tol must be positive".into()));
        }
        if self.mc2_budget == 0 {
            return Err(Error::Config("mc2_budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build_target(&self) -> Result<TargetMeasure> {
        match &self.target {
            TargetConfig::UniformBox { lower, upper } => {
                TargetMeasure::uniform_box(lower.clone(), upper.clone())
            }
            TargetConfig::GaussianMixture { preset, components } => {
                match (preset.as_deref(), components.is_empty()) {
                    (Some("trimodal"), true) => Ok(TargetMeasure::trimodal_mixture()),
                    (Some(other), true) => {
                        Err(Error::Config(format!("unknown mixture preset `{other}`")))
                    }
                    (None, false) => TargetMeasure::gaussian_mixture(components.clone()),
                    _ => Err(Error::Config(
                        "give either target.preset or target.components".into(),
                    )),
                }
            }
            TargetConfig::Empirical { path } => TargetMeasure::empirical(read_points_csv(path)?),
        }
    }

    pub fn candidate_source(&self, target: &TargetMeasure) -> Result<CandidateSource> {
        let c = &self.candidates;
        let boxed = || -> Result<(Vec<f64>, Vec<f64>)> {
            match (&c.lower, &c.upper, target) {
                (Some(l), Some(u), _) => Ok((l.clone(), u.clone())),
                (None, None, TargetMeasure::UniformBox { lower, upper }) => {
                    Ok((lower.clone(), upper.clone()))
                }
                _ => Err(Error::Config(
                    "candidates.lower and candidates.upper are required for this target".into(),
                )),
            }
        };
        let mode = match c.mode {
            CandidateModeName::File => CandidateMode::File {
                path: c.path.clone().expect("validated"),
            },
            CandidateModeName::UniformRng => {
                let (lower, upper) = boxed()?;
                CandidateMode::UniformRng {
                    seed: c.seed,
                    lower,
                    upper,
                }
            }
            CandidateModeName::Halton => {
                let (lower, upper) = boxed()?;
                CandidateMode::Halton {
                    offset: c.offset,
                    lower,
                    upper,
                }
            }
            CandidateModeName::IidTarget => CandidateMode::IidTarget { seed: c.seed },
        };
        let mut src = CandidateSource::new(mode, c.count);
        src.resample_each_iteration = c.resample;
        Ok(src)
    }

    /// Builds target, kernel and candidate set; the bandwidth heuristic is applied
    /// to the generated candidate points.
    pub fn resolve(&self) -> Result<Resolved> {
        let target = self.build_target()?;
        let source = self.candidate_source(&target)?;
        let points = source.generate_points(&target, 0)?;
        let theta = match &self.kernel.theta {
            None => 1.0,
            Some(Theta::Value(v)) => *v,
            Some(Theta::Named(_)) => theta_heuristic(&points, self.n_max, self.candidates.seed)?,
        };
        let kernel = KernelSpec::new(self.kernel.family, theta)?;
        if !target.supports(&kernel) {
            return Err(Error::UnsupportedPairing {
                target: target.variant_name(),
                kernel: kernel.name(),
            });
        }
        let cs = CandidateSet::from_points(points, &target, &kernel)?;
        let mut problem = Problem::new(kernel, target, cs)?;
        if source.resample_each_iteration {
            problem = problem.with_resampling(source);
        }
        let mut config = self.clone();
        if self.kernel.family != KernelFamily::Distance {
            config.kernel.theta = Some(Theta::Value(theta));
        }
        Ok(Resolved { config, problem })
    }

    /// Kernel, target and candidate sections, which must agree for runs to be compared.
    pub fn shared_key(&self) -> (KernelConfig, TargetConfig, CandidatesConfig) {
        (
            self.kernel.clone(),
            self.target.clone(),
            self.candidates.clone(),
        )
    }
}

/// Type-7 (linearly interpolated) empirical quantile of `values`, which must be sorted.
pub fn quantile_sorted(values: &[f64], p: f64) -> f64 {
    let h = (values.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// Gaussian bandwidth for which `K(x, x') = 1/2` at the `(1/n_max)`-quantile of
/// squared distances among a seeded random subsample of at most 1000 points, so that
/// the kernel is below one half for all but that fraction of pairs.
pub fn theta_heuristic(points: &[Point], n_max: usize, seed: u64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Config(
            "the bandwidth heuristic needs at least two candidates".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let m = points.len().min(HEURISTIC_SAMPLE);
    let mut idx = sample(&mut rng, points.len(), m).into_vec();
    idx.sort_unstable();
    let mut d2 = Vec::with_capacity(m * (m - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d2.push(squared_distance(&points[i], &points[j]));
        }
    }
    d2.sort_by(f64::total_cmp);
    let q = quantile_sorted(&d2, 1.0 / n_max as f64);
    if q <= 0.0 {
        return Err(Error::Config(
            "the bandwidth heuristic found a zero distance quantile".into(),
        ));
    }
    Ok(std::f64::consts::LN_2 / q)
}
