mod common;

use common::{direct_mmd2, gram, mixture_problem, random_points, square_problem};
use mmd_quant::algorithms::{
    olwo_curve, Construction, IwoVariant, KhIwo, KhPredefined, Step, StepRule,
};
use mmd_quant::harness::verify::{bound_domination, bounded_rows, uniform_square_problem};
use mmd_quant::kernels::{reduced_eval, KernelSpec, Point};
use mmd_quant::linalg::{
    certified_mc2, hat_weights, simplex_weights, tilde_weights, ConstraintClass, GramState,
};
use mmd_quant::measure::DiscreteMeasure;
use mmd_quant::metrics::{mmd_squared, mmd_squared_reduced, DistanceMetric};
use mmd_quant::oracle;
use mmd_quant::recurrence::{equality_sequence, worst_relative_excess, RecurrenceCase};
use mmd_quant::target::TargetMeasure;
use proptest::prelude::*;

fn to_points(v: &[Vec<f64>]) -> Vec<Point> {
    v.iter().map(|x| Point::new(x.clone()).unwrap()).collect()
}

fn raw(v: &[Point]) -> Vec<Vec<f64>> {
    v.iter().map(|p| p.coords().to_vec()).collect()
}

fn pot(problem: &mmd_quant::algorithms::Problem, x: &[f64]) -> f64 {
    problem
        .target
        .potential(&problem.kernel, &Point::new(x.to_vec()).unwrap())
        .unwrap()
}

fn quad(k: &[Vec<f64>], p: &[f64], w: &[f64]) -> f64 {
    let n = w.len();
    (0..n)
        .map(|i| w[i] * ((0..n).map(|j| k[i][j] * w[j]).sum::<f64>() - 2.0 * p[i]))
        .sum()
}

fn spread_points(seed: u64, n: usize) -> Vec<Vec<f64>> {
    // Greedy thinning keeps the Gram matrix well conditioned.
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in raw(&random_points(seed, 40 * n, 0.0, 1.0)) {
        if out
            .iter()
            .all(|y| mmd_quant::kernels::squared_distance(&x, y) > 0.02)
        {
            out.push(x);
        }
        if out.len() == n {
            break;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simplex_weights_match_face_enumeration(seed in 0u64..10_000, n in 2usize..9, scale in 0.2f64..1.5) {
        let problem = square_problem(1, seed);
        let pts = spread_points(seed, n);
        let k = gram(&problem, &pts);
        let p: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(i, x)| scale * pot(&problem, x) * (1.0 + 0.3 * (i as f64).sin()))
            .collect();
        let g = GramState::from_matrix(&k, 1e-12).unwrap();
        let w = simplex_weights(&g, &p, 1e-13, None).unwrap();
        let (w_ref, f_ref) = oracle::simplex_qp_enumerate(&k, &p);
        prop_assert!(w.values.iter().all(|&v| v >= 0.0));
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
        prop_assert!((quad(&k, &p, &w.values) - f_ref).abs() < 1e-10);
        for (a, b) in w.values.iter().zip(&w_ref) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn equality_constrained_weights_match_dense_solves(seed in 0u64..10_000, n in 1usize..12) {
        let problem = mixture_problem(1, seed);
        let pts = spread_points(seed, n);
        let k = gram(&problem, &pts);
        let p: Vec<f64> = pts.iter().map(|x| pot(&problem, x)).collect();
        let g = GramState::from_matrix(&k, 1e-12).unwrap();
        let t = tilde_weights(&g, &p).values;
        let t_ref = oracle::dense_solve(&k, &p).unwrap();
        let h = hat_weights(&g, &p);
        let h_ref = oracle::kkt_sum_one(&k, &p).unwrap();
        prop_assert!((h.sum() - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert!((t[i] - t_ref[i]).abs() < 1e-8 * t_ref[i].abs().max(1.0));
            prop_assert!((h.values[i] - h_ref[i]).abs() < 1e-8 * h_ref[i].abs().max(1.0));
        }
    }

    #[test]
    fn reduced_kernel_quadratic_form_is_mmd(seed in 0u64..10_000, n in 1usize..8) {
        let problem = mixture_problem(1, seed);
        let pts = to_points(&raw(&random_points(seed, n, -2.0, 2.0)));
        let mut w: Vec<f64> = (0..n).map(|i| 1.0 + ((seed + i as u64) % 5) as f64 - 2.0).collect();
        let s: f64 = w.iter().sum();
        if s.abs() < 0.5 {
            w[0] += 1.0;
        }
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / s).collect();
        let m = DiscreteMeasure::new(pts.clone(), w.clone()).unwrap();
        let mut form = 0.0;
        for i in 0..n {
            for j in 0..n {
                form += w[i] * w[j] * reduced_eval(&problem.kernel, &problem.target, &pts[i], &pts[j]).unwrap();
            }
        }
        let direct = direct_mmd2(&problem, &m);
        prop_assert!((form - direct).abs() < 1e-12 * direct.abs().max(1.0));
        prop_assert!((mmd_squared(&m, &problem.target, &problem.kernel).unwrap() - direct).abs() < 1e-12);
        prop_assert!((mmd_squared_reduced(&m, &problem.target, &problem.kernel).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn distance_metric_is_nonnegative(seed in 0u64..10_000, n in 1usize..10) {
        let problem = square_problem(64, seed);
        let pts = random_points(seed + 1, n, 0.0, 1.0);
        let w: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let s: f64 = w.iter().sum();
        let m = DiscreteMeasure::new(pts, w.iter().map(|v| v / s).collect()).unwrap();
        prop_assert!(DistanceMetric::new(&problem.candidates).squared(&m).unwrap() >= -1e-12);
    }

    #[test]
    fn recurrences_respect_closed_forms(a in 0.05f64..20.0, frac in 0.01f64..0.99) {
        for case in [RecurrenceCase::InvK, RecurrenceCase::TwoOverKPlus1, RecurrenceCase::DoubleContraction, RecurrenceCase::Quadratic] {
            let seq = equality_sequence(case, a, frac * a, 2000);
            prop_assert!(worst_relative_excess(case, a, &seq) <= 1e-12, "{case:?}");
        }
    }
}

#[test]
fn certified_mc2_brackets_exhaustive_minimum() {
    for seed in 0..3 {
        let problem = mixture_problem(16, 100 + seed);
        let cs = &problem.candidates;
        let pts: Vec<Point> = (0..cs.len()).map(|i| cs.to_point(i)).collect();
        let kmu: Vec<Vec<f64>> = pts
            .iter()
            .map(|x| {
                pts.iter()
                    .map(|y| reduced_eval(&problem.kernel, &problem.target, x, y).unwrap())
                    .collect()
            })
            .collect();
        let (_, f) = oracle::simplex_qp_enumerate(&kmu, &[0.0; 16]);
        let mc2 = certified_mc2(cs, 5000);
        assert!(
            mc2.lower <= f + 1e-10 && f <= mc2.upper + 1e-10,
            "{mc2:?} vs {f}"
        );
        let uniform: f64 = kmu.iter().flatten().sum::<f64>() / 256.0;
        assert!(mc2.upper <= uniform + 1e-12);
    }
}

#[test]
fn constructions_never_beat_the_candidate_optimum() {
    let problem = square_problem(200, 21);
    let mc2 = certified_mc2(&problem.candidates, 3000);
    let registry = mmd_quant::algorithms::Registry::default();
    for (name, params) in bounded_rows() {
        let method = registry.create(name, &params).unwrap();
        let mut s = method.start(&problem).unwrap();
        for _ in 0..60 {
            if let Step::Stopped(_) = s.step().unwrap() {
                break;
            }
            assert!(
                direct_mmd2(&problem, &s.measure()) >= mc2.lower - 1e-9,
                "{}",
                method.label()
            );
        }
    }
}

#[test]
fn shrunken_bound_constant_is_caught() {
    let problem = uniform_square_problem(1024).unwrap();
    let methods: Vec<_> = bounded_rows()
        .into_iter()
        .filter(|(n, _)| *n == "kh")
        .collect();
    let honest = bound_domination(&problem, &methods, 100, 2000, 1.0).unwrap();
    assert!(honest.iter().all(|c| c.violations == 0));
    let mutated = bound_domination(&problem, &methods, 100, 2000, 0.1).unwrap();
    assert!(mutated.iter().any(|c| c.violations > 0), "{mutated:?}");
}

fn olwo_points(problem: &mmd_quant::algorithms::Problem, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let kh = KhPredefined {
        rule: StepRule::InvK,
    };
    let mut s = kh.start(problem).unwrap();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut curve = Vec::new();
    for _ in 0..n {
        let Step::Advanced(info) = s.step().unwrap() else {
            unreachable!()
        };
        let x = problem.candidates.point(info.chosen_index).to_vec();
        if !pts.contains(&x) {
            pts.push(x);
            curve.push(s.mmd2_recursive());
        }
    }
    (pts, curve)
}

#[test]
fn olwo_curves_are_ordered_by_constraint() {
    let problem = mixture_problem(128, 22);
    let (pts, kh_curve) = olwo_points(&problem, 40);
    let curve = |class| {
        olwo_curve(
            &pts,
            &problem.target,
            &problem.kernel,
            class,
            problem.beta_floor,
            1e-12,
        )
        .unwrap()
    };
    let (u, h, s) = (
        curve(ConstraintClass::Unconstrained),
        curve(ConstraintClass::SumOne),
        curve(ConstraintClass::Simplex),
    );
    for n in 0..pts.len() {
        assert!(u[n] <= h[n] + 1e-12, "n={n}");
        assert!(h[n] <= s[n] + 1e-12, "n={n}");
        // The herding weights on the same atoms are feasible for the simplex problem.
        assert!(s[n] <= kh_curve[n] + 1e-12, "n={n}");
    }
    let x = Point::new(pts[0].clone()).unwrap();
    let kmu = reduced_eval(&problem.kernel, &problem.target, &x, &x).unwrap();
    assert!((h[0] - kmu).abs() < 1e-12 && (s[0] - kmu).abs() < 1e-12);
}

#[test]
fn olwo_sum_one_reproduces_iwo_ii() {
    let problem = square_problem(128, 23);
    let iwo = KhIwo {
        variant: IwoVariant::SumOne,
        qp_tol: 1e-10,
        stopping_rule: false,
    };
    let mut s = iwo.start(&problem).unwrap();
    let mut pts = Vec::new();
    let mut running = Vec::new();
    for _ in 0..25 {
        let Step::Advanced(info) = s.step().unwrap() else {
            unreachable!()
        };
        pts.push(problem.candidates.point(info.chosen_index).to_vec());
        running.push(s.mmd2_recursive());
    }
    let off = olwo_curve(
        &pts,
        &problem.target,
        &problem.kernel,
        ConstraintClass::SumOne,
        problem.beta_floor,
        1e-10,
    )
    .unwrap();
    for (a, b) in off.iter().zip(&running) {
        assert!((a - b).abs() < 1e-10 * b.max(1e-6), "{a} vs {b}");
    }
}

#[test]
fn iid_baseline_decreases_like_one_over_n() {
    let t = TargetMeasure::gaussian_mixture(vec![mmd_quant::target::MixtureComponent {
        weight: 1.0,
        mean: vec![0.0, 0.0],
        sd: 1.0,
    }])
    .unwrap();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let rows = mmd_quant::algorithms::baseline::iid_baseline(&t, &k, 64, 300, 7).unwrap();
    for r in [&rows[0], &rows[7], &rows[63]] {
        // Standard error of the mean is sd/sqrt(reps).
        assert!(
            (r.mean_mmd2 - r.theory_mean).abs() < 4.0 * r.sd_mmd2 / 300f64.sqrt(),
            "{r:?}"
        );
    }
    assert!(rows[63].mean_mmd2 < rows[7].mean_mmd2 && rows[7].mean_mmd2 < rows[0].mean_mmd2);
    assert!(rows[63].sd_mmd2 < rows[0].sd_mmd2);
}
