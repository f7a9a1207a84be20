mod common;

use approx::assert_relative_eq;
use common::{direct_mmd2, gram, mixture_problem, scan_argmin, square_problem};
use mmd_quant::algorithms::{
    Construction, GmOptimal, GmPredefined, IwoVariant, KhIwo, KhOptimal, KhPredefined, Problem,
    Sbq, SbqVariant, Step, StepInfo, StepRule, Stepper, StopReason,
};
use mmd_quant::candidates::CandidateSet;
use mmd_quant::kernels::{KernelSpec, Point};
use mmd_quant::oracle;
use mmd_quant::target::TargetMeasure;

fn advance(s: &mut dyn Stepper) -> StepInfo {
    match s.step().unwrap() {
        Step::Advanced(info) => info,
        Step::Stopped(r) => panic!("unexpected stop: {r}"),
    }
}

fn potential(problem: &Problem, x: &[f64]) -> f64 {
    problem
        .target
        .potential(&problem.kernel, &Point::new(x.to_vec()).unwrap())
        .unwrap()
}

fn candidate(problem: &Problem, i: usize) -> Vec<f64> {
    problem.candidates.point(i).to_vec()
}

/// MMD² of the measure `Σ w_a δ_{pts[a]}` by double summation.
fn weighted_mmd2(problem: &Problem, pts: &[Vec<f64>], w: &[f64]) -> f64 {
    oracle::brute_mmd2(
        |a, b| problem.kernel.eval_slices(a, b),
        pts,
        w,
        |x| potential(problem, x),
        problem.target.energy(&problem.kernel).unwrap(),
    )
}

fn unconstrained_weights(problem: &Problem, pts: &[Vec<f64>]) -> Vec<f64> {
    let p: Vec<f64> = pts.iter().map(|x| potential(problem, x)).collect();
    oracle::dense_solve(&gram(problem, pts), &p).unwrap()
}

fn sum_one_weights(problem: &Problem, pts: &[Vec<f64>]) -> Vec<f64> {
    let p: Vec<f64> = pts.iter().map(|x| potential(problem, x)).collect();
    oracle::kkt_sum_one(&gram(problem, pts), &p).unwrap()
}

fn weight_of(s: &dyn Stepper, x: &[f64]) -> f64 {
    let sup = s.support();
    sup.find(x).map_or(0.0, |a| sup.weights()[a])
}

#[test]
fn kh_first_point_maximises_potential() {
    let problem = square_problem(64, 1);
    let kh = KhPredefined {
        rule: StepRule::InvK,
    };
    let mut s = kh.start(&problem).unwrap();
    let info = advance(s.as_mut());
    let expected = scan_argmin((0..64).map(|i| -potential(&problem, &candidate(&problem, i))));
    assert_eq!(info.chosen_index, expected);
    assert_eq!(s.support().weights(), &[1.0]);
}

#[test]
fn single_candidate_gives_dirac() {
    let problem = square_problem(1, 2);
    let x = candidate(&problem, 0);
    let kh = KhPredefined {
        rule: StepRule::InvK,
    };
    let mut s = kh.start(&problem).unwrap();
    for _ in 0..5 {
        advance(s.as_mut());
    }
    let m = s.measure();
    assert_eq!(m.len(), 1);
    assert_relative_eq!(m.weights()[0], 1.0, epsilon = 1e-15);
    let expected = problem.kernel.eval_slices(&x, &x) - 2.0 * potential(&problem, &x)
        + problem.target.energy(&problem.kernel).unwrap();
    assert_relative_eq!(s.mmd2_recursive(), expected, epsilon = 1e-12);
}

#[test]
fn kh_inv_k_matches_independent_scan() {
    let problem = square_problem(80, 3);
    let c = problem.candidates.len();
    let kh = KhPredefined {
        rule: StepRule::InvK,
    };
    let mut s = kh.start(&problem).unwrap();
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for k in 1..=30 {
        let info = advance(s.as_mut());
        let expected = scan_argmin((0..c).map(|i| {
            let x = candidate(&problem, i);
            let mean: f64 = if chosen.is_empty() {
                0.0
            } else {
                chosen
                    .iter()
                    .map(|y| problem.kernel.eval_slices(y, &x))
                    .sum::<f64>()
                    / chosen.len() as f64
            };
            mean - potential(&problem, &x)
        }));
        assert_eq!(info.chosen_index, expected, "iteration {k}");
        chosen.push(candidate(&problem, expected));
    }
    // Weights are counts over n.
    for (a, w) in s.support().weights().iter().enumerate() {
        let count = chosen
            .iter()
            .filter(|y| y.as_slice() == s.support().point(a))
            .count();
        assert_relative_eq!(*w, count as f64 / 30.0, epsilon = 1e-14);
    }
    assert_relative_eq!(
        s.mmd2_recursive(),
        direct_mmd2(&problem, &s.measure()),
        epsilon = 1e-12
    );
}

#[test]
fn two_over_kplus1_weights_grow_linearly() {
    let problem = mixture_problem(50, 4);
    let kh = KhPredefined {
        rule: StepRule::TwoOverKPlus1,
    };
    let mut s = kh.start(&problem).unwrap();
    let n = 12;
    let picks: Vec<usize> = (0..n).map(|_| advance(s.as_mut()).chosen_index).collect();
    for &j in &picks {
        let x = candidate(&problem, j);
        let expected: f64 = picks
            .iter()
            .enumerate()
            .filter(|(_, &jj)| jj == j)
            .map(|(ii, _)| 2.0 * (ii + 1) as f64 / (n * (n + 1)) as f64)
            .sum();
        assert_relative_eq!(
            weight_of(s.as_ref(), &x),
            expected,
            epsilon = 1e-14,
            max_relative = 1e-12
        );
    }
}

#[test]
fn custom_step_rule_is_followed() {
    let problem = square_problem(32, 5);
    let rule = StepRule::Custom(vec![1.0, 0.5, 0.25, 0.125]);
    let kh = KhPredefined { rule };
    let mut s = kh.start(&problem).unwrap();
    let alphas: Vec<f64> = (0..4).map(|_| advance(s.as_mut()).alpha.unwrap()).collect();
    assert_eq!(alphas, vec![1.0, 0.5, 0.25, 0.125]);
    assert!(s.step().is_err());
}

#[test]
fn gm_inv_k_minimises_direct_mmd() {
    let problem = mixture_problem(40, 6);
    let c = problem.candidates.len();
    let gm = GmPredefined {
        rule: StepRule::InvK,
    };
    let mut s = gm.start(&problem).unwrap();
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for k in 1..=12usize {
        let info = advance(s.as_mut());
        let a = 1.0 / k as f64;
        let trial = |i: usize| {
            let mut p = pts.clone();
            p.push(candidate(&problem, i));
            let mut w = vec![(1.0 - a) / (k as f64 - 1.0).max(1.0); pts.len()];
            w.push(a);
            weighted_mmd2(&problem, &p, &w)
        };
        let expected = scan_argmin((0..c).map(trial));
        assert_eq!(info.chosen_index, expected, "iteration {k}");
        pts.push(candidate(&problem, expected));
    }
}

#[test]
fn gm_first_point_minimises_reduced_diagonal() {
    let problem = square_problem(64, 7);
    let gm = GmOptimal;
    let mut s = gm.start(&problem).unwrap();
    let info = advance(s.as_mut());
    let e = problem.target.energy(&problem.kernel).unwrap();
    let expected = scan_argmin((0..64).map(|i| {
        let x = candidate(&problem, i);
        problem.kernel.eval_slices(&x, &x) - 2.0 * potential(&problem, &x) + e
    }));
    assert_eq!(info.chosen_index, expected);
    // Unit diagonal: the first greedy point is the first herding point.
    let mut kh = KhOptimal.start(&problem).unwrap();
    assert_eq!(advance(kh.as_mut()).chosen_index, expected);
}

#[test]
fn gm_optimal_step_minimises_over_alpha() {
    let problem = mixture_problem(30, 8);
    let mut s = GmOptimal.start(&problem).unwrap();
    advance(s.as_mut());
    for _ in 0..6 {
        let before = s.measure();
        let info = advance(s.as_mut());
        let x = candidate(&problem, info.chosen_index);
        let f = |a: f64| {
            let mut pts: Vec<Vec<f64>> = before
                .support()
                .iter()
                .map(|p| p.coords().to_vec())
                .collect();
            let mut w: Vec<f64> = before.weights().iter().map(|v| v * (1.0 - a)).collect();
            pts.push(x.clone());
            w.push(a);
            weighted_mmd2(&problem, &pts, &w)
        };
        let (a_grid, f_grid) = oracle::grid_minimise(f, 0.0, 1.0, 1e-4);
        assert!((info.alpha.unwrap() - a_grid).abs() < 2e-4);
        assert!(s.mmd2_recursive() <= f_grid + 1e-12);
    }
}

#[test]
fn optimal_methods_stop_on_single_candidate() {
    let problem = square_problem(1, 9);
    let mut gm = GmOptimal.start(&problem).unwrap();
    advance(gm.as_mut());
    assert_eq!(gm.step().unwrap(), Step::Stopped(StopReason::AllStepsZero));
    let mut kh = KhOptimal.start(&problem).unwrap();
    advance(kh.as_mut());
    assert_eq!(
        kh.step().unwrap(),
        Step::Stopped(StopReason::OptimalStepZero)
    );
}

#[test]
fn iwo_weights_match_dense_solves() {
    let problem = mixture_problem(48, 10);
    for variant in [
        IwoVariant::Simplex,
        IwoVariant::SumOne,
        IwoVariant::Unconstrained,
    ] {
        let iwo = KhIwo {
            variant,
            qp_tol: 1e-12,
            stopping_rule: false,
        };
        let mut s = iwo.start(&problem).unwrap();
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for k in 1..=10 {
            let info = advance(s.as_mut());
            pts.push(candidate(&problem, info.chosen_index));
            let expected = match variant {
                IwoVariant::Unconstrained => unconstrained_weights(&problem, &pts),
                IwoVariant::SumOne => sum_one_weights(&problem, &pts),
                IwoVariant::Simplex => {
                    let p: Vec<f64> = pts.iter().map(|x| potential(&problem, x)).collect();
                    oracle::simplex_qp_enumerate(&gram(&problem, &pts), &p).0
                }
            };
            for (a, x) in pts.iter().enumerate() {
                let got = weight_of(s.as_ref(), x);
                assert!(
                    (got - expected[a]).abs() < 1e-7,
                    "{variant:?} k={k} atom {a}: {got} vs {}",
                    expected[a]
                );
            }
            let direct = direct_mmd2(&problem, &s.measure());
            assert_relative_eq!(s.mmd2_recursive(), direct, epsilon = 1e-10);
        }
    }
}

#[test]
fn iwo_ii_first_weight_is_one() {
    let problem = square_problem(16, 11);
    let iwo = KhIwo {
        variant: IwoVariant::SumOne,
        qp_tol: 1e-10,
        stopping_rule: true,
    };
    let mut s = iwo.start(&problem).unwrap();
    advance(s.as_mut());
    assert_eq!(s.support().weights(), &[1.0]);
}

#[test]
fn iwo_iii_first_point_and_weight() {
    let problem = square_problem(16, 12);
    let iwo = KhIwo {
        variant: IwoVariant::Unconstrained,
        qp_tol: 1e-10,
        stopping_rule: true,
    };
    let mut s = iwo.start(&problem).unwrap();
    let info = advance(s.as_mut());
    let expected = scan_argmin((0..16).map(|i| -potential(&problem, &candidate(&problem, i))));
    assert_eq!(info.chosen_index, expected);
    let x = candidate(&problem, expected);
    let w = potential(&problem, &x) / problem.kernel.eval_slices(&x, &x);
    assert_relative_eq!(s.support().weights()[0], w, epsilon = 1e-14);
}

#[test]
fn iwo_simplex_equals_sum_one_while_weights_nonnegative() {
    let problem = square_problem(128, 13);
    let mk = |variant| KhIwo {
        variant,
        qp_tol: 1e-12,
        stopping_rule: false,
    };
    let mut a = mk(IwoVariant::Simplex).start(&problem).unwrap();
    let mut b = mk(IwoVariant::SumOne).start(&problem).unwrap();
    for k in 1..=20 {
        let ia = advance(a.as_mut());
        let ib = advance(b.as_mut());
        assert_eq!(ia.chosen_index, ib.chosen_index, "iteration {k}");
        if b.support().weights().iter().any(|&w| w < 0.0) {
            break;
        }
        for (wa, wb) in a.support().weights().iter().zip(b.support().weights()) {
            assert!((wa - wb).abs() < 1e-8);
        }
    }
}

fn sbq_oracle_pick(problem: &Problem, pts: &[Vec<f64>], variant: SbqVariant) -> (usize, f64) {
    let c = problem.candidates.len();
    let vals: Vec<f64> = (0..c)
        .map(|i| {
            let x = candidate(problem, i);
            if pts.contains(&x) {
                return f64::INFINITY;
            }
            let mut p = pts.to_vec();
            p.push(x);
            let w = match variant {
                SbqVariant::Unconstrained => unconstrained_weights(problem, &p),
                _ => sum_one_weights(problem, &p),
            };
            weighted_mmd2(problem, &p, &w)
        })
        .collect();
    let j = scan_argmin(vals.iter().copied());
    (j, vals[j])
}

#[test]
fn sbq_is_greedy_in_optimally_weighted_mmd() {
    for (variant, problem) in [
        (SbqVariant::Unconstrained, mixture_problem(40, 14)),
        (SbqVariant::SumOne, mixture_problem(40, 15)),
        (SbqVariant::SumOne, square_problem(40, 16)),
    ] {
        let mut s = Sbq { variant }.start(&problem).unwrap();
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut prev = problem.target.energy(&problem.kernel).unwrap();
        for k in 1..=10 {
            let (j, value) = sbq_oracle_pick(&problem, &pts, variant);
            let info = advance(s.as_mut());
            assert_eq!(info.chosen_index, j, "{variant:?} iteration {k}");
            let now = s.mmd2_recursive();
            assert!(
                (now - value).abs() < 1e-9,
                "{variant:?} k={k}: {now} vs {value}"
            );
            // Unconstrained: the score is the decrease of MMD². Sum-one: the increase of
            // 1ᵀK_µ⁻¹1 = 1/MMD², counted from an empty support.
            if variant == SbqVariant::Unconstrained {
                assert!((info.score - (prev - now)).abs() < 1e-9, "k={k}");
            } else {
                let before = if k == 1 { 0.0 } else { 1.0 / prev };
                assert!(
                    (info.score - (1.0 / now - before)).abs() < 1e-7 * info.score.max(1.0),
                    "k={k}"
                );
            }
            if k >= 2 {
                assert!(now <= prev + 1e-12);
            }
            assert!((direct_mmd2(&problem, &s.measure()) - now).abs() < 1e-9);
            prev = now;
            pts.push(candidate(&problem, j));
        }
    }
}

#[test]
fn sbq_coordinate_descent_decrease_equals_score() {
    let problem = mixture_problem(60, 17);
    let mut s = Sbq {
        variant: SbqVariant::CoordDescent,
    }
    .start(&problem)
    .unwrap();
    let mut prev = problem.target.energy(&problem.kernel).unwrap();
    for _ in 0..25 {
        let before = s.measure();
        let info = advance(s.as_mut());
        let now = direct_mmd2(&problem, &s.measure());
        assert!((prev - now - info.score).abs() < 1e-10);
        assert!(info.score >= 0.0);
        // The appended weight is the exact line minimiser in that coordinate.
        let x = candidate(&problem, info.chosen_index);
        let f = |w: f64| {
            let mut pts: Vec<Vec<f64>> = before
                .support()
                .iter()
                .map(|p| p.coords().to_vec())
                .collect();
            let mut ws = before.weights().to_vec();
            pts.push(x.clone());
            ws.push(w);
            weighted_mmd2(&problem, &pts, &ws)
        };
        let w = info.alpha.unwrap();
        assert!(f(w) <= f(w + 1e-3) && f(w) <= f(w - 1e-3));
        prev = now;
    }
}

#[test]
fn support_weights_sum_to_one_for_probability_methods() {
    let problem = mixture_problem(64, 18);
    let methods: Vec<Box<dyn Construction>> = vec![
        Box::new(KhPredefined {
            rule: StepRule::InvK,
        }),
        Box::new(KhOptimal),
        Box::new(GmPredefined {
            rule: StepRule::TwoOverKPlus1,
        }),
        Box::new(GmOptimal),
        Box::new(KhIwo {
            variant: IwoVariant::Simplex,
            qp_tol: 1e-10,
            stopping_rule: false,
        }),
        Box::new(KhIwo {
            variant: IwoVariant::SumOne,
            qp_tol: 1e-10,
            stopping_rule: false,
        }),
        Box::new(Sbq {
            variant: SbqVariant::SumOne,
        }),
    ];
    for m in &methods {
        let mut s = m.start(&problem).unwrap();
        for _ in 0..20 {
            if let Step::Stopped(_) = s.step().unwrap() {
                break;
            }
            assert!(
                (s.measure().total_mass() - 1.0).abs() < 1e-10,
                "{}",
                m.label()
            );
        }
        assert!(s.audit().unwrap().max_rel_err < 1e-10, "{}", m.label());
    }
}

#[test]
fn distance_kernel_is_rejected_for_constructions() {
    let t = TargetMeasure::unit_cube(2).unwrap();
    let g = KernelSpec::matern32(1.0).unwrap();
    let cs = CandidateSet::from_points(common::random_points(0, 8, 0.0, 1.0), &t, &g).unwrap();
    let err = Problem::new(KernelSpec::distance(), t, cs).unwrap_err();
    assert!(matches!(err, mmd_quant::error::Error::NotSpd(_)), "{err}");
}
