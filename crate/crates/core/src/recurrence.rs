//! Worst-case sequences for the recurrences behind the convergence rates, and the
//! closed-form bounds they must respect.

use serde::Serialize;

/// Which recurrence and step sequence is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceCase {
    /// `t_{k+1} = (1 − α_{k+1})t_k + Aα²_{k+1}`, `α_k = 1/k`.
    InvK,
    /// Same recurrence with `α_k = 2/(k+1)`.
    TwoOverKPlus1,
    /// `t_{k+1} = (1 − 2α_{k+1})t_k + Aα²_{k+1}`, `α_k = 1/k`.
    DoubleContraction,
    /// `t_{k+1} = t_k − t_k²/A`.
    Quadratic,
}

/// `t_1, …, t_{k_max}` generated with equality in the recurrence.
pub fn equality_sequence(case: RecurrenceCase, a: f64, t1: f64, k_max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(k_max);
    if k_max == 0 {
        return t;
    }
    t.push(t1);
    for k in 1..k_max {
        let prev = t[k - 1];
        let next = k as f64 + 1.0;
        let v = match case {
            RecurrenceCase::InvK => {
                let al = 1.0 / next;
                (1.0 - al) * prev + a * al * al
            }
            RecurrenceCase::TwoOverKPlus1 => {
                let al = 2.0 / (next + 1.0);
                (1.0 - al) * prev + a * al * al
            }
            RecurrenceCase::DoubleContraction => {
                let al = 1.0 / next;
                (1.0 - 2.0 * al) * prev + a * al * al
            }
            RecurrenceCase::Quadratic => prev - prev * prev / a,
        };
        t.push(v);
    }
    t
}

/// Closed-form bound on `t_k`, or `None` where none is claimed.
///
/// For the quadratic case the bound is `A/(k + p₂)` with `p₂ = A/t₂ − 2` for
/// `k ≥ 2`, and `A/(k + p₁)` with `p₁ = A/t₁ − 1` for every `k` when `t₁ ≤ A/2`.
pub fn closed_form_bound(case: RecurrenceCase, a: f64, seq: &[f64], k: usize) -> Option<f64> {
    let kf = k as f64;
    match case {
        RecurrenceCase::InvK => Some(a * (2.0 + kf.ln()) / (kf + 1.0)),
        RecurrenceCase::TwoOverKPlus1 => Some(4.0 * a / (kf + 3.0)),
        RecurrenceCase::DoubleContraction => Some(a / kf),
        RecurrenceCase::Quadratic => {
            let t1 = *seq.first()?;
            if t1 <= a / 2.0 {
                Some(a / (kf + a / t1 - 1.0))
            } else if k >= 2 {
                Some(a / (kf + a / seq[1] - 2.0))
            } else {
                None
            }
        }
    }
}

/// Largest relative excess `(t_k − bound)/bound` over `k ≤ seq.len()`; nonpositive
/// when every term respects its bound.
pub fn worst_relative_excess(case: RecurrenceCase, a: f64, seq: &[f64]) -> f64 {
    (1..=seq.len())
        .filter_map(|k| closed_form_bound(case, a, seq, k).map(|b| (seq[k - 1] - b) / b))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_terms() {
        let s = equality_sequence(RecurrenceCase::InvK, 2.0, 2.0, 3);
        // t2 = t1/2 + A/4, t3 = 2t2/3 + A/9
        assert!((s[1] - 1.5).abs() < 1e-15);
        assert!((s[2] - (1.0 + 2.0 / 9.0)).abs() < 1e-15);
        let s = equality_sequence(RecurrenceCase::DoubleContraction, 1.0, 1.0, 2);
        assert!((s[1] - 0.25).abs() < 1e-15);
        let s = equality_sequence(RecurrenceCase::Quadratic, 1.0, 0.5, 2);
        assert!((s[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bounds_are_tight_at_start() {
        let s = equality_sequence(RecurrenceCase::TwoOverKPlus1, 3.0, 3.0, 1);
        assert_eq!(
            closed_form_bound(RecurrenceCase::TwoOverKPlus1, 3.0, &s, 1),
            Some(3.0)
        );
        let s = equality_sequence(RecurrenceCase::Quadratic, 1.0, 0.9, 2);
        assert_eq!(
            closed_form_bound(RecurrenceCase::Quadratic, 1.0, &s, 1),
            None
        );
        let b2 = closed_form_bound(RecurrenceCase::Quadratic, 1.0, &s, 2).unwrap();
        assert!((b2 - s[1]).abs() < 1e-15);
    }
}
