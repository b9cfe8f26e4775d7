//! Occupation masks: the universal outcome key.
//!
//! In the no-collision regime an outcome of an m-mode circuit is an m-bit
//! string with one bit per mode (bit i set = photon detected in mode i).
//! [`OccupationMask`] packs that string into a `u64` together with the mode
//! count, and provides the two mapping sets used throughout the recycling
//! construction:
//!
//! * [`OccupationMask::loss_descendants`] — every outcome the mask can become
//!   after losing exactly k photons (clear k set bits);
//! * [`OccupationMask::fill_ancestors`] — every fuller outcome the mask could
//!   have come from before k photons were lost (set k clear bits).
//!
//! Membership in the two sets is mutually inverse; the unit tests check this
//! exhaustively at small mode counts.

use std::fmt;

use itertools::Itertools;

use crate::comb::binomial;
use crate::error::{Error, Result};

/// Maximum number of modes representable in the packed bit string.
pub const MAX_MODES: u32 = 64;

/// A no-collision detection pattern over `modes` optical modes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationMask {
    bits: u64,
    modes: u32,
}

impl OccupationMask {
    /// Build a mask from raw bits, rejecting bits at or above the mode count.
    pub fn new(bits: u64, modes: u32) -> Result<Self> {
        if modes == 0 || modes > MAX_MODES {
            return Err(Error::Argument(format!(
                "mode count {modes} outside 1..={MAX_MODES}"
            )));
        }
        if modes < 64 && bits >> modes != 0 {
            return Err(Error::Argument(format!(
                "mask {bits:#x} has occupied modes at index >= {modes}"
            )));
        }
        Ok(Self { bits, modes })
    }

    /// A mask with the listed modes occupied.
    pub fn from_modes(occupied: impl IntoIterator<Item = u32>, modes: u32) -> Result<Self> {
        let mut bits = 0u64;
        for mode in occupied {
            if mode >= modes {
                return Err(Error::Argument(format!(
                    "mode index {mode} out of range for {modes} modes"
                )));
            }
            if bits & (1 << mode) != 0 {
                return Err(Error::Argument(format!("mode index {mode} repeated")));
            }
            bits |= 1 << mode;
        }
        Self::new(bits, modes)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn modes(&self) -> u32 {
        self.modes
    }

    /// Number of detected photons (population count).
    pub fn photons(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn is_occupied(&self, mode: u32) -> bool {
        mode < self.modes && self.bits & (1 << mode) != 0
    }

    /// Indices of occupied modes, ascending.
    pub fn occupied_modes(&self) -> Vec<u32> {
        (0..self.modes).filter(|&i| self.is_occupied(i)).collect()
    }

    /// Indices of unoccupied modes, ascending.
    pub fn unoccupied_modes(&self) -> Vec<u32> {
        (0..self.modes).filter(|&i| !self.is_occupied(i)).collect()
    }

    /// True when every photon of `self` is also present in `other`.
    pub fn is_subset_of(&self, other: &OccupationMask) -> bool {
        self.modes == other.modes && self.bits & !other.bits == 0
    }

    /// All masks reachable by losing exactly `k` photons: clear `k` of the
    /// set bits. Cardinality C(photons, k).
    pub fn loss_descendants(&self, k: u32) -> Result<Vec<OccupationMask>> {
        let n = self.photons();
        if k > n {
            return Err(Error::Argument(format!(
                "cannot lose k={k} photons from a mask with {n} photons"
            )));
        }
        if k == 0 {
            return Ok(vec![*self]);
        }
        let occupied = self.occupied_modes();
        let out: Vec<OccupationMask> = occupied
            .iter()
            .combinations(k as usize)
            .map(|lost| {
                let mut bits = self.bits;
                for &mode in lost {
                    bits &= !(1 << mode);
                }
                OccupationMask { bits, modes: self.modes }
            })
            .collect();
        debug_assert_eq!(out.len() as u128, binomial(n as u64, k as u64));
        Ok(out)
    }

    /// All masks this one could have been before losing exactly `k` photons:
    /// set `k` of the clear bits. Cardinality C(modes - photons, k).
    ///
    /// `k = 0` is rejected: the fill map is only defined for actual loss.
    pub fn fill_ancestors(&self, k: u32) -> Result<Vec<OccupationMask>> {
        if k == 0 {
            return Err(Error::Argument(
                "fill_ancestors requires k >= 1".to_string(),
            ));
        }
        let free = self.modes - self.photons();
        if k > free {
            return Err(Error::Argument(format!(
                "cannot restore k={k} photons into {free} unoccupied modes"
            )));
        }
        let unoccupied = self.unoccupied_modes();
        let out: Vec<OccupationMask> = unoccupied
            .iter()
            .combinations(k as usize)
            .map(|gained| {
                let mut bits = self.bits;
                for &mode in gained {
                    bits |= 1 << mode;
                }
                OccupationMask { bits, modes: self.modes }
            })
            .collect();
        debug_assert_eq!(out.len() as u128, binomial(free as u64, k as u64));
        Ok(out)
    }

    /// Lower-case hex of the packed bits, used as the outcome key in CSV
    /// artifacts.
    pub fn to_hex(&self) -> String {
        format!("{:x}", self.bits)
    }

    pub fn from_hex(hex: &str, modes: u32) -> Result<Self> {
        let bits = u64::from_str_radix(hex.trim(), 16).map_err(|e| Error::Format {
            what: "mask hex",
            detail: format!("{hex:?}: {e}"),
        })?;
        Self::new(bits, modes)
    }
}

impl fmt::Debug for OccupationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OccupationMask(")?;
        for i in (0..self.modes).rev() {
            write!(f, "{}", u8::from(self.is_occupied(i)))?;
        }
        write!(f, ")")
    }
}

/// All C(m, n) masks with `photons` set bits over `modes` modes, in
/// increasing numeric order (Gosper's hack).
pub fn all_masks(modes: u32, photons: u32) -> Result<Vec<OccupationMask>> {
    if photons > modes {
        return Err(Error::Argument(format!(
            "{photons} photons do not fit in {modes} modes without collisions"
        )));
    }
    if photons == 0 {
        return Ok(vec![OccupationMask::new(0, modes)?]);
    }
    let count = binomial(modes as u64, photons as u64) as usize;
    let mut out = Vec::with_capacity(count);
    let mut v: u64 = if photons == 64 {
        u64::MAX
    } else {
        (1u64 << photons) - 1
    };
    loop {
        out.push(OccupationMask { bits: v, modes });
        if out.len() == count {
            break;
        }
        // Next subset with the same popcount.
        let t = v | v.wrapping_sub(1);
        let low = !t & t.wrapping_add(1);
        let tail = low
            .wrapping_sub(1)
            .checked_shr(v.trailing_zeros() + 1)
            .unwrap_or(0);
        v = t.wrapping_add(1) | tail;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photon_count_matches_popcount() {
        let mask = OccupationMask::new(0b1011, 6).unwrap();
        assert_eq!(mask.photons(), 3);
        assert_eq!(mask.occupied_modes(), vec![0, 1, 3]);
    }

    #[test]
    fn rejects_bits_beyond_mode_count() {
        assert!(OccupationMask::new(0b10000, 4).is_err());
        assert!(OccupationMask::new(0b1000, 4).is_ok());
    }

    #[test]
    fn descendants_match_worked_example() {
        // 111000 at m=6 loses one photon three ways.
        let mask = OccupationMask::new(0b111000, 6).unwrap();
        let mut got: Vec<u64> = mask
            .loss_descendants(1)
            .unwrap()
            .iter()
            .map(|m| m.bits())
            .collect();
        got.sort_unstable();
        assert_eq!(got, vec![0b011000, 0b101000, 0b110000]);
    }

    #[test]
    fn zero_loss_is_identity() {
        let mask = OccupationMask::new(0b0110, 5).unwrap();
        assert_eq!(mask.loss_descendants(0).unwrap(), vec![mask]);
    }

    #[test]
    fn descendant_cardinality() {
        // n = 5, k = 2 -> C(5,2) = 10 masks, each a subset of the source.
        let mask = OccupationMask::new(0b1111100, 9).unwrap();
        let set = mask.loss_descendants(2).unwrap();
        assert_eq!(set.len(), 10);
        for d in &set {
            assert_eq!(d.photons(), 3);
            assert!(d.is_subset_of(&mask));
        }
    }

    #[test]
    fn losing_more_than_present_fails() {
        let mask = OccupationMask::new(0b11, 4).unwrap();
        assert!(mask.loss_descendants(3).is_err());
    }

    #[test]
    fn ancestors_match_worked_example() {
        // 110000 at m=6 (n=3, k=1): C(4,1) = 4 supersets.
        let mask = OccupationMask::new(0b110000, 6).unwrap();
        let set = mask.fill_ancestors(1).unwrap();
        assert_eq!(set.len(), 4);
        for a in &set {
            assert_eq!(a.photons(), 3);
            assert!(mask.is_subset_of(a));
        }
    }

    #[test]
    fn fill_rejects_k_zero_and_overflow() {
        let mask = OccupationMask::new(0b111, 3).unwrap();
        assert!(mask.fill_ancestors(0).is_err());
        assert!(mask.fill_ancestors(1).is_err());
    }

    #[test]
    fn duality_exhaustive() {
        // t in fill_ancestors(s, k) <=> s in loss_descendants(t, k), m=7, n=3, k=1.
        let fuller = all_masks(7, 3).unwrap();
        let thinner = all_masks(7, 2).unwrap();
        for s in &thinner {
            let ancestors = s.fill_ancestors(1).unwrap();
            for t in &fuller {
                let forward = ancestors.contains(t);
                let backward = t.loss_descendants(1).unwrap().contains(s);
                assert_eq!(forward, backward, "duality broken for {s:?} / {t:?}");
            }
        }
    }

    #[test]
    fn all_masks_counts_and_order() {
        for (m, n) in [(6u32, 3u32), (8, 2), (10, 4), (5, 0), (5, 5)] {
            let masks = all_masks(m, n).unwrap();
            assert_eq!(masks.len() as u128, binomial(m as u64, n as u64));
            for w in masks.windows(2) {
                assert!(w[0].bits() < w[1].bits());
            }
            for mask in &masks {
                assert_eq!(mask.photons(), n);
            }
        }
    }

    #[test]
    fn hex_round_trip() {
        let mask = OccupationMask::new(0b101101, 8).unwrap();
        let back = OccupationMask::from_hex(&mask.to_hex(), 8).unwrap();
        assert_eq!(mask, back);
    }
}
