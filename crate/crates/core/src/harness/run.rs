//! Driving a construction step by step and recording its trace.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{Resolved, RunConfig};
use crate::algorithms::baseline::{iid_baseline, BaselineRow};
use crate::algorithms::{Construction, Problem, Registry, Step, StopReason};
use crate::error::{Error, Result};
use crate::linalg::{certified_mc2, Mc2Interval};
use crate::measure::DiscreteMeasure;
use crate::metrics::{bound_curve, BoundPoint, BoundSpec, MmdEvaluator};

/// Slack by which a measured MMD² must stay below its bound.
pub const BOUND_SLACK: f64 = 1e-12;
/// Below this certified `M_C²` upper end the bound is also checked with `M_C² = 0`.
pub const NEGLIGIBLE_MC2: f64 = 1e-6;

/// One line of the trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub support_size: usize,
    pub mmd2: f64,
    pub mmd: f64,
    pub bound_upper: Option<f64>,
    pub bound_lower: Option<f64>,
    pub alpha: Option<f64>,
    pub chosen_index: usize,
    pub cum_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub n_max: usize,
    /// Audit the running state every this many iterations; 0 disables audits.
    pub audit_every: usize,
}

/// Everything observed during one run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub label: String,
    pub rows: Vec<TraceRow>,
    pub stop_reason: Option<StopReason>,
    /// Wall time spent inside `step` calls only.
    pub step_seconds: f64,
    pub beta_floor_triggers: usize,
    /// Iterations with `mmd2 > bound − 1e-12`; advisory (never counted) in resampling mode.
    pub bound_violations: usize,
    /// Smallest `bound − mmd2` over the run, including the `M_C² = 0` check where it applies.
    pub min_bound_slack: Option<f64>,
    /// Largest `|mmd2_recursive − mmd2| / max(1, mmd2)`.
    pub max_recursion_gap: f64,
    /// Largest relative error found by state audits.
    pub max_audit_error: f64,
    /// Selected candidate index and reported step of every iteration.
    pub steps: Vec<(usize, Option<f64>)>,
    pub final_measure: DiscreteMeasure,
}

impl RunRecord {
    pub fn final_mmd2(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mmd2)
    }
}

/// Bound constants of `construction` on `problem`, if it has a bound.
pub fn bound_spec(
    construction: &dyn Construction,
    problem: &Problem,
    mc2: Mc2Interval,
) -> Result<Option<BoundSpec>> {
    let Some(method) = construction.bound_method() else {
        return Ok(None);
    };
    let tau_half = problem.target.moments(&problem.kernel)?.tau_half;
    Ok(Some(BoundSpec::new(
        method,
        &problem.kernel,
        problem.candidates.kbar_c(),
        tau_half,
        mc2,
    )))
}

/// Runs `construction` for up to `opts.n_max` iterations, evaluating MMD² directly
/// after every step and comparing it with the bound curve when one is given.
pub fn trace_run(
    problem: &Problem,
    construction: &dyn Construction,
    bound: Option<&BoundSpec>,
    opts: &TraceOptions,
) -> Result<RunRecord> {
    let curve: Option<Vec<BoundPoint>> = bound.map(|b| bound_curve(b, opts.n_max));
    let advisory = problem.resample.is_some();
    let mut stepper = construction.start(problem)?;
    let mut eval = MmdEvaluator::new(problem.kernel, &problem.target)?;
    let mut rec = RunRecord {
        label: construction.label(),
        rows: Vec::with_capacity(opts.n_max),
        stop_reason: None,
        step_seconds: 0.0,
        beta_floor_triggers: 0,
        bound_violations: 0,
        min_bound_slack: None,
        max_recursion_gap: 0.0,
        max_audit_error: 0.0,
        steps: Vec::with_capacity(opts.n_max),
        final_measure: DiscreteMeasure::new(Vec::new(), Vec::new())?,
    };
    while rec.rows.len() < opts.n_max {
        let t0 = Instant::now();
        let step = stepper.step()?;
        rec.step_seconds += t0.elapsed().as_secs_f64();
        let info = match step {
            Step::Advanced(info) => info,
            Step::Stopped(reason) => {
                rec.stop_reason = Some(reason);
                break;
            }
        };
        let n = info.k;
        let mmd2 = eval.mmd2(stepper.support());
        let recursive = stepper.mmd2_recursive();
        rec.max_recursion_gap = rec
            .max_recursion_gap
            .max((recursive - mmd2).abs() / mmd2.abs().max(1.0));
        if opts.audit_every > 0 && n % opts.audit_every == 0 {
            rec.max_audit_error = rec.max_audit_error.max(stepper.audit()?.max_rel_err);
        }
        let bp = curve.as_ref().map(|c| c[n - 1]);
        if let (Some(bp), Some(b)) = (bp, bound) {
            let mut slack = bp.upper - mmd2;
            if b.mc2.upper < NEGLIGIBLE_MC2 {
                slack = slack.min(b.term(n) - mmd2);
            }
            rec.min_bound_slack = Some(rec.min_bound_slack.map_or(slack, |s: f64| s.min(slack)));
            if slack < BOUND_SLACK && !advisory {
                rec.bound_violations += 1;
            }
        }
        rec.steps.push((info.chosen_index, info.alpha));
        rec.rows.push(TraceRow {
            n,
            support_size: stepper.support().len(),
            mmd2,
            mmd: mmd2.max(0.0).sqrt(),
            bound_upper: bp.map(|b| b.upper),
            bound_lower: bp.map(|b| b.lower),
            alpha: info.alpha,
            chosen_index: info.chosen_index,
            cum_time_s: rec.step_seconds,
        });
    }
    rec.beta_floor_triggers = stepper.beta_floor_hits();
    rec.final_measure = stepper.measure();
    Ok(rec)
}

/// Serialisable summary written beside the trace.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub config: RunConfig,
    pub algorithm: String,
    pub candidate_count: usize,
    pub dropped_duplicates: usize,
    pub iterations: usize,
    pub stop_reason: Option<String>,
    pub step_seconds: f64,
    pub total_seconds: f64,
    pub final_mmd2: Option<f64>,
    pub final_mmd: Option<f64>,
    pub mc2: Option<Mc2Interval>,
    pub beta_floor: f64,
    pub beta_floor_triggers: usize,
    pub bound_violations: usize,
    pub bound_check_advisory: bool,
    pub max_recursion_gap: f64,
    pub max_audit_error: f64,
}

/// Outcome of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub manifest: RunManifest,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Trace rows with the header emitted even when the run produced no rows.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record([
            "n",
            "support_size",
            "mmd2",
            "mmd",
            "bound_upper",
            "bound_lower",
            "alpha",
            "chosen_index",
            "cum_time_s",
        ])?;
        return w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        });
    }
    write_csv(path, rows)
}

fn mc2_for(cfg: &RunConfig, problem: &Problem) -> Option<Mc2Interval> {
    cfg.bound_check
        .then(|| certified_mc2(&problem.candidates, cfg.mc2_budget))
}

/// Runs one configuration, writing the trace CSV and the manifest JSON.
pub fn run(cfg: &RunConfig, registry: &Registry) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let Resolved { config, problem } = cfg.resolve()?;
    let construction = registry.create(&config.method.name, &config.method.params())?;
    if problem.resample.is_some() && !construction.one_step_ahead() {
        return Err(Error::Config(format!(
            "candidates.resample is only available for one-step-ahead methods, not {}",
            construction.label()
        )));
    }
    let mc2 = mc2_for(&config, &problem);
    let bound = match mc2 {
        Some(m) => bound_spec(construction.as_ref(), &problem, m)?,
        None => None,
    };
    let opts = TraceOptions {
        n_max: config.n_max,
        audit_every: config.audit_every,
    };
    let record = trace_run(&problem, construction.as_ref(), bound.as_ref(), &opts)?;
    let trace_path = config
        .output
        .trace
        .clone()
        .unwrap_or_else(|| PathBuf::from("trace.csv"));
    let manifest_path = config
        .output
        .manifest
        .clone()
        .unwrap_or_else(|| trace_path.with_extension("json"));
    write_trace(&trace_path, &record.rows)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        algorithm: record.label.clone(),
        candidate_count: problem.candidates.len(),
        dropped_duplicates: problem.candidates.dropped_duplicates(),
        iterations: record.rows.len(),
        stop_reason: record.stop_reason.map(|r| r.to_string()),
        step_seconds: record.step_seconds,
        total_seconds: t0.elapsed().as_secs_f64(),
        final_mmd2: record.final_mmd2(),
        final_mmd: record.rows.last().map(|r| r.mmd),
        mc2,
        beta_floor: problem.beta_floor,
        beta_floor_triggers: record.beta_floor_triggers,
        bound_violations: record.bound_violations,
        bound_check_advisory: problem.resample.is_some(),
        max_recursion_gap: record.max_recursion_gap,
        max_audit_error: record.max_audit_error,
        config,
    };
    let f = create(&manifest_path)?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(RunOutcome {
        record,
        manifest,
        trace_path,
        manifest_path,
    })
}

/// One line of the long-format comparison CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub n: usize,
    pub mmd2: f64,
    pub mmd: f64,
    pub bound_upper: Option<f64>,
    pub bound_lower: Option<f64>,
    pub sd_mmd2: Option<f64>,
}

/// Runs several configurations sharing kernel, target and candidates; with
/// `baseline_reps` the iid baseline is appended as method `iid_baseline`.
pub fn compare(
    cfgs: &[RunConfig],
    registry: &Registry,
    baseline_reps: Option<usize>,
) -> Result<Vec<CompareRow>> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one config".into()))?;
    if let Some(bad) = cfgs
        .iter()
        .position(|c| c.shared_key() != first.shared_key())
    {
        return Err(Error::Config(format!(
            "config {} differs from the first in its kernel, target or candidates section",
            bad + 1
        )));
    }
    let Resolved { problem, .. } = first.resolve()?;
    let mc2 = cfgs.iter().any(|c| c.bound_check).then(|| {
        certified_mc2(
            &problem.candidates,
            cfgs.iter().map(|c| c.mc2_budget).max().unwrap_or(1),
        )
    });
    let mut out = Vec::new();
    for cfg in cfgs {
        let construction = registry.create(&cfg.method.name, &cfg.method.params())?;
        let bound = match (cfg.bound_check, mc2) {
            (true, Some(m)) => bound_spec(construction.as_ref(), &problem, m)?,
            _ => None,
        };
        let opts = TraceOptions {
            n_max: cfg.n_max,
            audit_every: cfg.audit_every,
        };
        let rec = trace_run(&problem, construction.as_ref(), bound.as_ref(), &opts)?;
        out.extend(rec.rows.iter().map(|r| CompareRow {
            method: rec.label.clone(),
            n: r.n,
            mmd2: r.mmd2,
            mmd: r.mmd,
            bound_upper: r.bound_upper,
            bound_lower: r.bound_lower,
            sd_mmd2: None,
        }));
    }
    if let Some(reps) = baseline_reps {
        let n_max = cfgs.iter().map(|c| c.n_max).max().unwrap_or(1);
        let rows = iid_baseline(
            &problem.target,
            &problem.kernel,
            n_max,
            reps,
            first.baseline.seed,
        )?;
        out.extend(rows.iter().map(|r| CompareRow {
            method: "iid_baseline".into(),
            n: r.n,
            mmd2: r.mean_mmd2,
            mmd: r.mean_mmd2.max(0.0).sqrt(),
            bound_upper: None,
            bound_lower: None,
            sd_mmd2: Some(r.sd_mmd2),
        }));
    }
    Ok(out)
}

/// Runs the iid baseline of a configuration and writes its CSV.
pub fn baseline(cfg: &RunConfig, reps: usize) -> Result<(Vec<BaselineRow>, PathBuf)> {
    let problem = cfg.resolve()?.problem;
    let rows = iid_baseline(
        &problem.target,
        &problem.kernel,
        cfg.n_max,
        reps,
        cfg.baseline.seed,
    )?;
    let path = cfg
        .output
        .baseline
        .clone()
        .unwrap_or_else(|| PathBuf::from("baseline.csv"));
    write_csv(&path, &rows)?;
    Ok((rows, path))
}
