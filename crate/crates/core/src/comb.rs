//! Small exact combinatorics helpers shared across the crate.

/// Exact binomial coefficient C(n, k).
///
/// Computed multiplicatively in `u128`; exact for every (n, k) this crate can
/// reach (mode counts are capped at 64).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// C(n, k) as a float, for formulas that live entirely in `f64`.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    binomial(n, k) as f64
}

/// The uniform probability 1/C(m, n) over no-collision n-photon outcomes.
pub fn uniform_probability(modes: u32, photons: u32) -> f64 {
    1.0 / binomial_f64(modes as u64, photons as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(4, 1), 4);
        assert_eq!(binomial(3, 7), 0);
        // Largest case reachable at m = 64.
        assert_eq!(binomial(64, 32), 1832624140942590534);
    }

    #[test]
    fn pascal_identity() {
        for n in 1..40u64 {
            for k in 1..n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
    }

    #[test]
    fn uniform_probability_value() {
        assert_eq!(uniform_probability(6, 3), 1.0 / 20.0);
        assert_eq!(uniform_probability(20, 4), 1.0 / 4845.0);
    }
}
