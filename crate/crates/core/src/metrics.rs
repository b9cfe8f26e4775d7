//! Distribution comparison metrics.

use std::collections::BTreeMap;

use crate::mask::OccupationMask;

/// Floor applied to candidate probabilities inside the KL logarithm.
pub const KL_FLOOR: f64 = 1e-12;

/// Direction of the KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlDirection {
    /// KL(ideal || candidate) — the default reporting direction.
    IdealFromCandidate,
    /// KL(candidate || ideal).
    CandidateFromIdeal,
}

/// KL divergence with a floored argument: terms with zero reference
/// probability contribute nothing; candidate probabilities are clamped to
/// [`KL_FLOOR`] inside the logarithm.
pub fn kl_divergence(
    ideal: &BTreeMap<OccupationMask, f64>,
    candidate: &BTreeMap<OccupationMask, f64>,
    direction: KlDirection,
) -> f64 {
    let (p, q) = match direction {
        KlDirection::IdealFromCandidate => (ideal, candidate),
        KlDirection::CandidateFromIdeal => (candidate, ideal),
    };
    p.iter()
        .map(|(mask, &p_val)| {
            if p_val <= 0.0 {
                0.0
            } else {
                let q_val = q.get(mask).copied().unwrap_or(0.0).max(KL_FLOOR);
                p_val * (p_val / q_val).ln()
            }
        })
        .sum()
}

/// Total variation distance (half the l1 distance over the union support).
pub fn total_variation(
    p: &BTreeMap<OccupationMask, f64>,
    q: &BTreeMap<OccupationMask, f64>,
) -> f64 {
    let mut acc = 0.0;
    for (mask, &pv) in p {
        acc += (pv - q.get(mask).copied().unwrap_or(0.0)).abs();
    }
    for (mask, &qv) in q {
        if !p.contains_key(mask) {
            acc += qv.abs();
        }
    }
    acc / 2.0
}

/// Weighted sum of table values over the supplied masks. Unnormalised
/// mitigated values are permitted.
pub fn expectation_value(
    values: &BTreeMap<OccupationMask, f64>,
    weights: &BTreeMap<OccupationMask, f64>,
) -> f64 {
    weights
        .iter()
        .map(|(mask, w)| w * values.get(mask).copied().unwrap_or(0.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::all_masks;

    fn table(pairs: &[(u64, f64)], modes: u32) -> BTreeMap<OccupationMask, f64> {
        pairs
            .iter()
            .map(|&(bits, p)| (OccupationMask::new(bits, modes).unwrap(), p))
            .collect()
    }

    #[test]
    fn kl_of_identical_tables_is_zero() {
        let p = table(&[(0b01, 0.4), (0b10, 0.6)], 2);
        assert_eq!(kl_divergence(&p, &p, KlDirection::IdealFromCandidate), 0.0);
    }

    #[test]
    fn kl_uses_floor_for_missing_mass() {
        // Uniform over 4 masks vs a point mass: three terms hit the floor,
        // result is finite and positive.
        let masks = all_masks(4, 1).unwrap();
        let p: BTreeMap<_, _> = masks.iter().map(|m| (*m, 0.25)).collect();
        let q = table(&[(0b0001, 1.0)], 4);
        let kl = kl_divergence(&p, &q, KlDirection::IdealFromCandidate);
        let expect = 0.25 * (0.25f64 / 1.0).ln() + 3.0 * 0.25 * (0.25f64 / KL_FLOOR).ln();
        assert!((kl - expect).abs() < 1e-9);
        assert!(kl.is_finite() && kl > 0.0);
    }

    #[test]
    fn kl_hand_value() {
        let p = table(&[(0b01, 0.5), (0b10, 0.5)], 2);
        let q = table(&[(0b01, 0.75), (0b10, 0.25)], 2);
        let kl = kl_divergence(&p, &q, KlDirection::IdealFromCandidate);
        let expect = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((kl - expect).abs() < 1e-12);
        assert!((kl - 0.14384).abs() < 1e-4);
        // Reversed direction differs in general.
        let rev = kl_divergence(&p, &q, KlDirection::CandidateFromIdeal);
        assert!((rev - kl).abs() > 1e-3);
    }

    #[test]
    fn tvd_basics() {
        let p = table(&[(0b01, 0.6), (0b10, 0.4)], 2);
        let q = table(&[(0b01, 0.5), (0b10, 0.5)], 2);
        assert!((total_variation(&p, &q) - 0.1).abs() < 1e-15);
        assert_eq!(total_variation(&p, &p), 0.0);
        // Disjoint supports are at distance 1.
        let a = table(&[(0b01, 1.0)], 2);
        let b = table(&[(0b10, 1.0)], 2);
        assert!((total_variation(&a, &b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_values() {
        let values = table(&[(0b01, 0.3), (0b10, 0.9)], 2);
        // Identity weights over the table's own support reproduce the mass.
        let ones: BTreeMap<_, _> = values.keys().map(|m| (*m, 1.0)).collect();
        let mass: f64 = values.values().sum();
        assert!((expectation_value(&values, &ones) - mass).abs() < 1e-15);
        // Single-mask weight picks out that entry.
        let single = table(&[(0b10, 1.0)], 2);
        assert_eq!(expectation_value(&values, &single), 0.9);
        // Random weights against a direct sum.
        let weights = table(&[(0b01, -1.3), (0b10, 2.5)], 2);
        let expect = -1.3 * 0.3 + 2.5 * 0.9;
        assert!((expectation_value(&values, &weights) - expect).abs() < 1e-15);
    }
}
