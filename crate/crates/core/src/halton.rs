//! Halton low-discrepancy sequence.

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// The first `d` primes, used as Halton bases.
pub fn first_primes(d: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(d);
    let mut c = 2u64;
    while primes.len() < d {
        if primes
            .iter()
            .take_while(|&&p| p * p <= c)
            .all(|p| !c.is_multiple_of(*p))
        {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Point `index` of the `d`-dimensional Halton sequence in `[0, 1)^d`.
pub fn halton_point(index: u64, d: usize) -> Vec<f64> {
    first_primes(d)
        .into_iter()
        .map(|b| radical_inverse(index, b))
        .collect()
}

/// `count` consecutive Halton points starting at `offset`.
pub fn halton_points(offset: u64, count: usize, d: usize) -> Vec<Vec<f64>> {
    let bases = first_primes(d);
    (0..count as u64)
        .map(|j| {
            bases
                .iter()
                .map(|&b| radical_inverse(offset + j, b))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_prefix() {
        let pts = halton_points(1, 4, 2);
        let expected = [
            [0.5, 1.0 / 3.0],
            [0.25, 2.0 / 3.0],
            [0.75, 1.0 / 9.0],
            [0.125, 4.0 / 9.0],
        ];
        for (p, e) in pts.iter().zip(expected) {
            assert!(
                (p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15,
                "{p:?} vs {e:?}"
            );
        }
        assert_eq!(halton_point(0, 3), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }
}
