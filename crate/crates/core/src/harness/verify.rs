//! The acceptance suite: every criterion as a function returning a [`CheckResult`]
//! with its measured and required values.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::theta_heuristic;
use super::run::{bound_spec, trace_run, TraceOptions, BOUND_SLACK};
use crate::algorithms::baseline::iid_baseline;
use crate::algorithms::{
    Construction, GmOptimal, IwoVariant, KhIwo, KhOptimal, MethodParams, Problem, Registry, Step,
    StepRule, StopReason,
};
use crate::candidates::{CandidateMode, CandidateSet, CandidateSource};
use crate::error::Result;
use crate::kernels::{KernelSpec, Point};
use crate::linalg::{certified_mc2, hat_weights, simplex_weights, tilde_weights, GramState};
use crate::measure::DiscreteMeasure;
use crate::metrics::{covering_radius, mmd_squared, BoundSpec};
use crate::oracle;
use crate::recurrence::{equality_sequence, worst_relative_excess, RecurrenceCase};
use crate::target::{MixtureComponent, TargetMeasure};

/// Number of acceptance criteria.
pub const CRITERIA: u8 = 11;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Smaller candidate sets and horizons; tolerances are unchanged.
    pub quick: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Advisory checks are reported but never fail the suite.
    pub advisory: bool,
    pub measured: String,
    pub required: String,
    pub seconds: f64,
}

impl CheckResult {
    /// Passed, or failed but advisory.
    pub fn acceptable(&self) -> bool {
        self.passed || self.advisory
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "[{status}] AC{:<2} {}: measured {}; required {} ({:.1}s)",
            self.id, self.name, self.measured, self.required, self.seconds
        )
    }
}

struct Outcome {
    passed: bool,
    measured: String,
    required: String,
}

fn outcome(passed: bool, measured: impl Into<String>, required: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        measured: measured.into(),
        required: required.into(),
    }
}

/// Runs one criterion by number.
pub fn run_check(id: u8, opts: &SuiteOptions) -> CheckResult {
    let t0 = Instant::now();
    let (name, advisory, res): (&'static str, bool, Result<Outcome>) = match id {
        1 => ("bound domination, uniform square", false, ac1(opts)),
        2 => ("bound domination, trimodal mixture", false, ac2(opts)),
        3 => ("iid expectation identity", false, ac3(opts)),
        4 => ("weight-ordering chain", false, ac4()),
        5 => (
            "recursion vs direct, alternative expressions",
            false,
            ac5(opts),
        ),
        6 => ("closed-form potentials and energies", false, ac6(opts)),
        7 => ("optimal-step correctness", false, ac7()),
        8 => ("stopping-rule soundness", false, ac8()),
        9 => ("recurrence bounds", false, ac9()),
        10 => ("complexity scaling", true, ac10(opts)),
        11 => ("covering-radius band", false, ac11()),
        _ => (
            "unknown criterion",
            false,
            Ok(outcome(false, "-", "1..=11")),
        ),
    };
    let o = res.unwrap_or_else(|e| outcome(false, format!("error: {e}"), "no error"));
    CheckResult {
        id,
        name,
        passed: o.passed,
        advisory,
        measured: o.measured,
        required: o.required,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion in order.
pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckResult> {
    (1..=CRITERIA).map(|id| run_check(id, opts)).collect()
}

/// Unit square, Matérn-3/2 with θ = 10, `c` Halton candidates from index 1.
pub fn uniform_square_problem(c: usize) -> Result<Problem> {
    let target = TargetMeasure::unit_cube(2)?;
    let kernel = KernelSpec::matern32(10.0)?;
    let src = CandidateSource::new(
        CandidateMode::Halton {
            offset: 1,
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
        },
        c,
    );
    let cs = src.build(&target, &kernel)?;
    Problem::new(kernel, target, cs)
}

/// Three-component mixture, `c` iid candidates, Gaussian kernel with the bandwidth heuristic for `n_max`.
pub fn trimodal_problem(c: usize, n_max: usize) -> Result<Problem> {
    let target = TargetMeasure::trimodal_mixture();
    let src = CandidateSource::new(CandidateMode::IidTarget { seed: 0 }, c);
    let points = src.generate_points(&target, 0)?;
    let kernel = KernelSpec::gaussian(theta_heuristic(&points, n_max, 0)?)?;
    let cs = CandidateSet::from_points(points, &target, &kernel)?;
    Problem::new(kernel, target, cs)
}

fn params(rule: Option<StepRule>, variant: Option<&str>) -> MethodParams {
    MethodParams {
        step_rule: rule,
        variant: variant.map(str::to_string),
        ..MethodParams::default()
    }
}

/// The eight core methods: herding and greedy MMD with both step rules and
/// optimal steps, and both Bayesian-quadrature versions.
pub fn bounded_rows() -> Vec<(&'static str, MethodParams)> {
    vec![
        ("kh", params(Some(StepRule::InvK), None)),
        ("kh", params(Some(StepRule::TwoOverKPlus1), None)),
        ("kh_optimal", params(None, None)),
        ("gm", params(Some(StepRule::InvK), None)),
        ("gm", params(Some(StepRule::TwoOverKPlus1), None)),
        ("gm_optimal", params(None, None)),
        ("sbq", params(None, Some("unconstrained"))),
        ("sbq", params(None, Some("sum_one"))),
    ]
}

/// Every registered construction and variant.
pub fn all_methods() -> Vec<(&'static str, MethodParams)> {
    let mut v = bounded_rows();
    v.extend([
        ("kh_iwo", params(None, Some("i_simplex"))),
        ("kh_iwo", params(None, Some("ii_sum_one"))),
        ("kh_iwo", params(None, Some("iii_unconstrained"))),
        ("sbq", params(None, Some("coord_descent"))),
    ]);
    v
}

/// Bound check of one method.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub label: String,
    pub iterations: usize,
    pub violations: usize,
    pub min_slack: f64,
}

/// Runs each method to `n_max` and counts iterations where `mmd2 > bound − 1e-12`.
/// `b_scale` multiplies `B_C` (and `A_C`) and exists to demonstrate that the check bites.
pub fn bound_domination(
    problem: &Problem,
    methods: &[(&str, MethodParams)],
    n_max: usize,
    mc2_budget: usize,
    b_scale: f64,
) -> Result<Vec<BoundCheck>> {
    let registry = Registry::default();
    let mc2 = certified_mc2(&problem.candidates, mc2_budget);
    let opts = TraceOptions {
        n_max,
        audit_every: 0,
    };
    methods
        .iter()
        .map(|(name, p)| {
            let c = registry.create(name, p)?;
            let mut spec: Option<BoundSpec> = bound_spec(c.as_ref(), problem, mc2)?;
            if let Some(s) = spec.as_mut() {
                s.b_c *= b_scale;
                s.a_c *= b_scale;
            }
            let rec = trace_run(problem, c.as_ref(), spec.as_ref(), &opts)?;
            Ok(BoundCheck {
                label: rec.label,
                iterations: rec.rows.len(),
                violations: rec.bound_violations,
                min_slack: rec.min_bound_slack.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

fn summarise_bounds(checks: &[BoundCheck], n_max: usize, seconds: f64) -> Outcome {
    let violations: usize = checks.iter().map(|c| c.violations).sum();
    let worst = checks
        .iter()
        .min_by(|a, b| a.min_slack.total_cmp(&b.min_slack))
        .map(|c| format!("{} min slack {:.3e}", c.label, c.min_slack))
        .unwrap_or_default();
    outcome(
        violations == 0 && checks.iter().all(|c| c.min_slack.is_finite()),
        format!(
            "{} methods, {violations} violations, {worst}, {seconds:.0}s",
            checks.len()
        ),
        format!("mmd2 <= bound - {BOUND_SLACK:e} for n <= {n_max}, runtime < 120s"),
    )
}

fn ac1(opts: &SuiteOptions) -> Result<Outcome> {
    let (c, n) = if opts.quick { (1024, 100) } else { (4096, 500) };
    let t0 = Instant::now();
    let problem = uniform_square_problem(c)?;
    let mut methods = bounded_rows();
    methods.extend([
        ("kh_iwo", params(None, Some("ii_sum_one"))),
        ("kh_iwo", params(None, Some("iii_unconstrained"))),
        ("sbq", params(None, Some("coord_descent"))),
    ]);
    let checks = bound_domination(&problem, &methods, n, 2000, 1.0)?;
    Ok(summarise_bounds(&checks, n, t0.elapsed().as_secs_f64()))
}

fn ac2(opts: &SuiteOptions) -> Result<Outcome> {
    let (c, n) = if opts.quick { (1024, 100) } else { (4096, 200) };
    let t0 = Instant::now();
    let problem = trimodal_problem(c, n)?;
    let checks = bound_domination(&problem, &bounded_rows(), n, 2000, 1.0)?;
    Ok(summarise_bounds(&checks, n, t0.elapsed().as_secs_f64()))
}

fn single_gaussian() -> Result<TargetMeasure> {
    TargetMeasure::gaussian_mixture(vec![MixtureComponent {
        weight: 1.0,
        mean: vec![0.0, 0.0],
        sd: 0.5,
    }])
}

fn ac3(_opts: &SuiteOptions) -> Result<Outcome> {
    let reps = 200;
    let rows = iid_baseline(
        &single_gaussian()?,
        &KernelSpec::gaussian(1.0)?,
        100,
        reps,
        0,
    )?;
    let mut worst: f64 = 0.0;
    for n in [1usize, 5, 10, 50, 100] {
        let r = rows[n - 1];
        let se = r.sd_mmd2 / (reps as f64).sqrt();
        worst = worst.max((r.mean_mmd2 - 0.5 / n as f64).abs() / se);
    }
    Ok(outcome(
        worst <= 3.0,
        format!("max |mean - 0.5/n| = {worst:.2} SE over n in {{1,5,10,50,100}}"),
        "<= 3 SE at 200 repetitions",
    ))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..2).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

fn measure_of(points: &[Vec<f64>], weights: &[f64]) -> Result<DiscreteMeasure> {
    let pts = points
        .iter()
        .map(|c| Point::new(c.clone()))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::new(pts, weights.to_vec())
}

/// Alternating small test problems: Matérn on the unit square and Gaussian on the mixture.
fn small_setting(trial: usize) -> Result<(TargetMeasure, KernelSpec, f64, f64)> {
    Ok(if trial.is_multiple_of(2) {
        (
            TargetMeasure::unit_cube(2)?,
            KernelSpec::matern32(10.0)?,
            0.0,
            1.0,
        )
    } else {
        (
            TargetMeasure::trimodal_mixture(),
            KernelSpec::gaussian(1.0)?,
            -2.0,
            2.0,
        )
    })
}

fn gram_of(k: &KernelSpec, pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|x| pts.iter().map(|y| k.eval_slices(x, y)).collect())
        .collect()
}

fn potentials(t: &TargetMeasure, k: &KernelSpec, pts: &[Vec<f64>]) -> Result<Vec<f64>> {
    pts.iter()
        .map(|x| t.potential(k, &Point::new(x.clone())?))
        .collect()
}

fn ac4() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..100 {
        let (t, k, lo, hi) = small_setting(trial)?;
        let pts = random_points(&mut rng, 10, lo, hi);
        let gram = GramState::from_matrix(&gram_of(&k, &pts), 1e-12)?;
        let p = potentials(&t, &k, &pts)?;
        let wt = tilde_weights(&gram, &p).values;
        let wh = hat_weights(&gram, &p).values;
        let ws = simplex_weights(&gram, &p, 1e-10, None)?.values;
        let wu = vec![0.1; 10];
        let chain = [&wt, &wh, &ws, &wu]
            .iter()
            .map(|w| mmd_squared(&measure_of(&pts, w)?, &t, &k))
            .collect::<Result<Vec<f64>>>()?;
        for link in chain.windows(2) {
            worst = worst.max(link[0] - link[1]);
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("largest link excess {worst:.3e} over 100 supports"),
        "<= 1e-10 per link",
    ))
}

fn ac5(opts: &SuiteOptions) -> Result<Outcome> {
    let n = 50;
    let problem = uniform_square_problem(1024)?;
    let registry = Registry::default();
    let topts = TraceOptions {
        n_max: n,
        audit_every: 10,
    };
    let mut gap: f64 = 0.0;
    let mut audit: f64 = 0.0;
    let mut ran = 0;
    for (name, p) in all_methods() {
        let c = registry.create(name, &p)?;
        let rec = trace_run(&problem, c.as_ref(), None, &topts)?;
        gap = gap.max(rec.max_recursion_gap);
        audit = audit.max(rec.max_audit_error);
        ran += 1;
    }
    let _ = opts;
    let ident = decomposition_identities(100)?;
    Ok(outcome(
        gap <= 1e-8 && audit <= 1e-8 && ident <= 1e-9,
        format!("{ran} methods: recursion gap {gap:.2e}, audit {audit:.2e}; identities rel err {ident:.2e}"),
        "gap, audit <= 1e-8 (relative to max(1, mmd2)); identities <= 1e-9 relative",
    ))
}

/// Largest relative error of the two decompositions of MMD² around the optimally
/// weighted measures, over `trials` random signed and sum-one measures.
pub fn decomposition_identities(trials: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let (t, k, lo, hi) = small_setting(trial)?;
        let n = rng.gen_range(2..=8);
        let pts = random_points(&mut rng, n, lo, hi);
        let kmat = gram_of(&k, &pts);
        let p = potentials(&t, &k, &pts)?;
        let form = |u: &[f64], v: &[f64]| -> f64 {
            let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
            (0..n)
                .map(|i| (0..n).map(|j| d[i] * d[j] * kmat[i][j]).sum::<f64>())
                .sum()
        };
        let wt = oracle::dense_solve(&kmat, &p).expect("SPD Gram");
        let wh = oracle::kkt_sum_one(&kmat, &p).expect("SPD Gram");
        let signed: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = signed.iter().sum::<f64>();
        let shift = (1.0 - s) / n as f64;
        let sum_one: Vec<f64> = signed.iter().map(|w| w + shift).collect();
        let lhs = mmd_squared(&measure_of(&pts, &signed)?, &t, &k)?;
        let rhs = form(&signed, &wt) + mmd_squared(&measure_of(&pts, &wt)?, &t, &k)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
        let lhs = mmd_squared(&measure_of(&pts, &sum_one)?, &t, &k)?;
        let rhs = form(&sum_one, &wh) + mmd_squared(&measure_of(&pts, &wh)?, &t, &k)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Ok(worst)
}

fn ac6(opts: &SuiteOptions) -> Result<Outcome> {
    let draws = if opts.quick { 100_000 } else { 1_000_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let target = TargetMeasure::trimodal_mixture();
    let TargetMeasure::GaussianMixture { components } = &target else {
        unreachable!("trimodal mixture is a mixture")
    };
    let k = KernelSpec::gaussian(1.0)?;
    let sample = oracle::mixture_draws(components, draws, 6, 0);
    let mut mc_worst: f64 = 0.0;
    for x in random_points(&mut rng, 100, -2.5, 2.5) {
        let est = oracle::mc_mean(&sample, |y| k.eval_slices(&x, y));
        let p = target.potential(&k, &Point::new(x)?)?;
        mc_worst = mc_worst.max((p - est.mean).abs() / est.se);
    }
    let half = draws / 2;
    let pairs: Vec<Vec<f64>> = (0..half)
        .map(|i| [sample[i].clone(), sample[half + i].clone()].concat())
        .collect();
    let e_est = oracle::mc_mean(&pairs, |z| k.eval_slices(&z[..2], &z[2..]));
    let e_sigmas = (target.energy(&k)? - e_est.mean).abs() / e_est.se;

    let (lower, upper) = (vec![0.0, -1.0], vec![1.0, 2.0]);
    let boxed = TargetMeasure::uniform_box(lower.clone(), upper.clone())?;
    let mut quad_worst: f64 = 0.0;
    for (i, x) in random_points(&mut rng, 100, -1.5, 3.0)
        .into_iter()
        .enumerate()
    {
        let theta = if i % 2 == 0 { 10.0 } else { 1.0 };
        let km = KernelSpec::matern32(theta)?;
        let reference = oracle::matern_box_potential(theta, &lower, &upper, &x);
        quad_worst = quad_worst.max((boxed.potential(&km, &Point::new(x)?)? - reference).abs());
    }
    for theta in [1.0, 10.0] {
        let km = KernelSpec::matern32(theta)?;
        quad_worst = quad_worst
            .max((boxed.energy(&km)? - oracle::matern_box_energy(theta, &lower, &upper)).abs());
    }
    Ok(outcome(
        mc_worst <= 3.0 && e_sigmas <= 3.0 && quad_worst <= 1e-9,
        format!(
            "mixture potential max {mc_worst:.2} SE, energy {e_sigmas:.2} SE ({draws} draws); Matern box max abs err {quad_worst:.2e}"
        ),
        "<= 3 SE; <= 1e-9 absolute",
    ))
}

/// MMD² of `(1 − α)ξ + αδ_x` from directly recomputed ingredients.
fn mixing_curve(
    problem: &Problem,
    xi: &DiscreteMeasure,
    x: &[f64],
) -> Result<impl Fn(f64) -> f64 + Sync> {
    let k = problem.kernel;
    let pts: Vec<Vec<f64>> = xi.support().iter().map(|p| p.to_vec()).collect();
    let w = xi.weights().to_vec();
    let e = problem.target.energy(&k)?;
    let pot = |y: &[f64]| {
        problem
            .target
            .potential(&k, &Point::new(y.to_vec()).expect("finite"))
    };
    let q = oracle::brute_mmd2(|a, b| k.eval_slices(a, b), &pts, &w, |_| 0.0, 0.0);
    let r: f64 = pts
        .iter()
        .zip(&w)
        .map(|(y, wi)| Ok(wi * pot(y)?))
        .sum::<Result<f64>>()?;
    let s: f64 = pts
        .iter()
        .zip(&w)
        .map(|(y, wi)| wi * k.eval_slices(y, x))
        .sum();
    let (kxx, px) = (k.eval_slices(x, x), pot(x)?);
    Ok(move |a: f64| {
        (1.0 - a).powi(2) * q + 2.0 * a * (1.0 - a) * s + a * a * kxx
            - 2.0 * (1.0 - a) * r
            - 2.0 * a * px
            + e
    })
}

fn random_problem(rng: &mut ChaCha8Rng, c: usize) -> Result<Problem> {
    let (t, k, lo, hi) = small_setting(rng.gen_range(0..2))?;
    let pts = random_points(rng, c, lo, hi)
        .into_iter()
        .map(Point::new)
        .collect::<Result<Vec<_>>>()?;
    let cs = CandidateSet::from_points(pts, &t, &k)?;
    Problem::new(k, t, cs)
}

/// Largest |α − α_grid| over `states` random intermediate states of a one-step-ahead
/// construction with optimal steps.
pub fn optimal_step_error(
    construction: &dyn Construction,
    states: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut found = 0;
    while found < states {
        let problem = random_problem(&mut rng, 64)?;
        let target_k = rng.gen_range(2..=15);
        let mut st = construction.start(&problem)?;
        let mut stopped = false;
        for _ in 1..target_k {
            if matches!(st.step()?, Step::Stopped(_)) {
                stopped = true;
                break;
            }
        }
        if stopped {
            continue;
        }
        let xi = st.measure();
        let Step::Advanced(info) = st.step()? else {
            continue;
        };
        let alpha = info
            .alpha
            .expect("one-step-ahead constructions report a step");
        let x = problem.candidates.point(info.chosen_index).to_vec();
        let f = mixing_curve(&problem, &xi, &x)?;
        let (a_grid, _) = oracle::grid_minimise(f, 0.0, 1.0, 1e-6);
        worst = worst.max((alpha - a_grid).abs());
        found += 1;
    }
    Ok(worst)
}

fn ac7() -> Result<Outcome> {
    let kh = optimal_step_error(&KhOptimal, 20, 71)?;
    let gm = optimal_step_error(&GmOptimal, 20, 72)?;
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut repeats = 0;
    for _ in 0..10 {
        let problem = random_problem(&mut rng, 256)?;
        let mut st = KhOptimal.start(&problem)?;
        let mut prev = None;
        for _ in 0..100 {
            match st.step()? {
                Step::Advanced(info) => {
                    if prev == Some(info.chosen_index) {
                        repeats += 1;
                    }
                    prev = Some(info.chosen_index);
                }
                Step::Stopped(_) => break,
            }
        }
    }
    Ok(outcome(
        kh <= 2e-6 && gm <= 2e-6 && repeats == 0,
        format!("KH-optimal step err {kh:.2e}, GM-optimal {gm:.2e}; consecutive repeats {repeats}"),
        "step err <= 2e-6 on 20 states each; 0 consecutive repeats over 10 runs",
    ))
}

/// Counts of agreement between the nonnegative-score stop and an independent scan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StopAudit {
    pub decisions: usize,
    pub mismatches: usize,
    pub triggers: usize,
}

/// Runs unconstrained weight-optimised herding on `runs` random sets of `c` candidates and
/// compares every stop decision with a direct scan of `min_x S(x) − P(x)` over non-support candidates.
pub fn stop_rule_audit(runs: usize, c: usize, seed: u64) -> Result<StopAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut audit = StopAudit::default();
    let cons = KhIwo {
        variant: IwoVariant::Unconstrained,
        qp_tol: 1e-10,
        stopping_rule: true,
    };
    for _ in 0..runs {
        let problem = random_problem(&mut rng, c)?;
        let cs = &problem.candidates;
        let k = problem.kernel;
        let mut st = cons.start(&problem)?;
        for step in 1..=c {
            let xi = st.measure();
            let min_gap = (step >= 2).then(|| {
                (0..cs.len())
                    .filter(|&i| !xi.support().iter().any(|p| p.coords() == cs.point(i)))
                    .map(|i| {
                        let s: f64 = xi
                            .support()
                            .iter()
                            .zip(xi.weights())
                            .map(|(p, w)| w * k.eval_slices(p, cs.point(i)))
                            .sum();
                        s - cs.pot()[i]
                    })
                    .fold(f64::INFINITY, f64::min)
            });
            let outcome = st.step()?;
            let stopped = matches!(outcome, Step::Stopped(StopReason::NonnegativeScore));
            if let Some(m) = min_gap.filter(|m| m.is_finite()) {
                audit.decisions += 1;
                audit.triggers += stopped as usize;
                if m.abs() > 1e-12 && stopped != (m >= 0.0) {
                    audit.mismatches += 1;
                }
            }
            if matches!(outcome, Step::Stopped(_)) {
                break;
            }
        }
    }
    Ok(audit)
}

/// `(mmd2 at stop − M_C² lower end, interval width)` for the optimal-step herding stop on a
/// candidate set where the optimum is reached exactly.
fn zero_step_stop(
    target: TargetMeasure,
    kernel: KernelSpec,
    pts: Vec<Vec<f64>>,
) -> Result<Option<(f64, f64)>> {
    let pts = pts
        .into_iter()
        .map(Point::new)
        .collect::<Result<Vec<_>>>()?;
    let cs = CandidateSet::from_points(pts, &target, &kernel)?;
    let mc2 = certified_mc2(&cs, 2000);
    let problem = Problem::new(kernel, target, cs)?;
    let mut st = KhOptimal.start(&problem)?;
    for _ in 0..50 {
        if let Step::Stopped(StopReason::OptimalStepZero) = st.step()? {
            let m = mmd_squared(&st.measure(), &problem.target, &problem.kernel)?;
            return Ok(Some((m - mc2.lower, mc2.width())));
        }
    }
    Ok(None)
}

fn ac8() -> Result<Outcome> {
    let audit = stop_rule_audit(40, 12, 8)?;
    let k = KernelSpec::matern32(2.0)?;
    let line = TargetMeasure::uniform_box(vec![0.0], vec![1.0])?;
    let cases = [
        zero_step_stop(line.clone(), k, vec![vec![0.3]])?,
        zero_step_stop(line, k, vec![vec![0.25], vec![0.75]])?,
        zero_step_stop(
            TargetMeasure::unit_cube(2)?,
            KernelSpec::matern32(10.0)?,
            vec![vec![0.5, 0.5]],
        )?,
    ];
    let stops_ok = cases
        .iter()
        .all(|c| matches!(c, Some((d, w)) if *d >= -1e-12 && *d <= w + 1e-12));
    let worst = cases
        .iter()
        .flatten()
        .map(|(d, _)| d.abs())
        .fold(0.0, f64::max);
    Ok(outcome(
        audit.mismatches == 0 && audit.triggers > 0 && stops_ok,
        format!(
            "nonnegative-score stop: {} decisions, {} mismatches, {} triggers; alpha*=0 stops {}/3, max |mmd2 - M_C^2 lower| {worst:.2e}",
            audit.decisions,
            audit.mismatches,
            audit.triggers,
            cases.iter().flatten().count()
        ),
        "0 mismatches with at least one trigger; stop mmd2 within the certified interval width",
    ))
}

fn ac9() -> Result<Outcome> {
    let k_max = 10_000;
    let mut worst = f64::NEG_INFINITY;
    for a in [0.5, 1.0, 2.0, 4.0] {
        for case in [
            RecurrenceCase::InvK,
            RecurrenceCase::TwoOverKPlus1,
            RecurrenceCase::DoubleContraction,
        ] {
            let s = equality_sequence(case, a, a, k_max);
            worst = worst.max(worst_relative_excess(case, a, &s));
        }
        for frac in [0.99, 0.75, 0.5, 0.25, 0.01] {
            let s = equality_sequence(RecurrenceCase::Quadratic, a, frac * a, k_max);
            worst = worst.max(worst_relative_excess(RecurrenceCase::Quadratic, a, &s));
        }
    }
    Ok(outcome(
        worst <= 1e-12,
        format!("max relative excess {worst:.3e} over cases (i)-(iv), k <= {k_max}"),
        "<= 1e-12",
    ))
}

/// Cumulative time spent in `step` after each iteration.
pub fn step_times(
    problem: &Problem,
    construction: &dyn Construction,
    n_max: usize,
) -> Result<Vec<f64>> {
    let mut st = construction.start(problem)?;
    let mut total = 0.0;
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let t0 = Instant::now();
        let step = st.step()?;
        total += t0.elapsed().as_secs_f64();
        if matches!(step, Step::Stopped(_)) {
            break;
        }
        out.push(total);
    }
    Ok(out)
}

fn ac10(opts: &SuiteOptions) -> Result<Outcome> {
    let c = if opts.quick { 2048 } else { 8192 };
    let problem = uniform_square_problem(c)?;
    let registry = Registry::default();
    let mut no_stop = params(None, Some("ii_sum_one"));
    no_stop.stopping_rule = false;
    let cases: [(&str, MethodParams, (f64, f64)); 4] = [
        ("kh", params(Some(StepRule::InvK), None), (1.6, 2.6)),
        ("gm", params(Some(StepRule::InvK), None), (1.6, 2.6)),
        ("sbq", params(None, Some("unconstrained")), (3.0, 5.0)),
        ("kh_iwo", no_stop, (3.0, 5.0)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p, (lo, hi)) in cases {
        let cons = registry.create(name, &p)?;
        let t = step_times(&problem, cons.as_ref(), 500)?;
        let ratio = match (t.get(249), t.get(499)) {
            (Some(a), Some(b)) => b / a,
            _ => f64::NAN,
        };
        ok &= ratio >= lo && ratio <= hi;
        parts.push(format!("{} {ratio:.2}", cons.label()));
    }
    Ok(outcome(
        ok,
        format!("T(500)/T(250) at C={c}: {}", parts.join(", ")),
        "[1.6, 2.6] for kh/gm, [3.0, 5.0] for sbq/kh_iwo (advisory)",
    ))
}

fn ac11() -> Result<Outcome> {
    let problem = uniform_square_problem(4096)?;
    let cons = Registry::default().create("gm", &params(Some(StepRule::InvK), None))?;
    let rec = trace_run(
        &problem,
        cons.as_ref(),
        None,
        &TraceOptions {
            n_max: 25,
            audit_every: 0,
        },
    )?;
    let design: Vec<Vec<f64>> = rec
        .final_measure
        .support()
        .iter()
        .map(|p| p.to_vec())
        .collect();
    let cr = covering_radius(&design, &[0.0, 0.0], &[1.0, 1.0], 512)?;
    Ok(outcome(
        (0.15..=0.21).contains(&cr),
        format!("CR = {cr:.4} ({} distinct points, grid 512)", design.len()),
        "in [0.15, 0.21]",
    ))
}
