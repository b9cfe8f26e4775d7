//! Uniform photon loss: exact lossy sectors and finite-sample generation.
//!
//! Loss commutes through the interferometer, so a lossy shot is modelled as
//! an ideal draw followed by an independent coin per photon: each detected
//! photon survives with probability 1 - eta. A [`SampleLedger`] records the
//! surviving outcome of every shot under its realised lost-photon count k.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde_json::{json, Value};

use crate::comb::binomial_f64;
use crate::distribution::{ProbabilityTable, TableKind};
use crate::error::{Error, Result};
use crate::mask::{all_masks, OccupationMask};
use crate::rng;

/// Per-mode photon loss probability eta in [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct LossModel {
    eta: f64,
}

impl LossModel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Argument(format!("eta {eta} outside [0, 1]")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Binomial weights of the lost-photon sectors:
/// `weight[k] = C(n, k) eta^k (1 - eta)^(n - k)`.
pub fn sector_weights(photons: u32, eta: f64) -> Vec<f64> {
    let n = photons as u64;
    (0..=n)
        .map(|k| {
            binomial_f64(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32)
        })
        .collect()
}

/// Exact distribution of the (n-k)-photon sector, conditioned on exactly k
/// photons lost: p(s) = sum over fill ancestors t of p(t) / C(n, k).
pub fn lossy_conditional_distribution(
    ideal: &ProbabilityTable,
    k: u32,
) -> Result<ProbabilityTable> {
    if ideal.kind() != TableKind::Exact {
        return Err(Error::Argument(
            "lossy conditional distribution needs an exact ideal table".to_string(),
        ));
    }
    let n = ideal.photons();
    if k > n {
        return Err(Error::Argument(format!("k={k} exceeds photon count {n}")));
    }
    if k == 0 {
        return Ok(ideal.clone());
    }
    let share = 1.0 / binomial_f64(n as u64, k as u64);
    let mut entries = BTreeMap::new();
    for mask in all_masks(ideal.modes(), n - k)? {
        let total: f64 = mask
            .fill_ancestors(k)?
            .iter()
            .map(|t| ideal.get(t))
            .sum();
        entries.insert(mask, total * share);
    }
    ProbabilityTable::new(ideal.modes(), n - k, TableKind::Exact, entries)
}

/// Outcome counts from N_tot lossy shots, partitioned by lost-photon count.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLedger {
    modes: u32,
    photons: u32,
    eta: f64,
    seed: u64,
    shards: u32,
    counts: BTreeMap<(u32, OccupationMask), u64>,
    totals_per_k: Vec<u64>,
    total: u64,
}

impl SampleLedger {
    pub fn modes(&self) -> u32 {
        self.modes
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shards(&self) -> u32 {
        self.shards
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Shots that landed in sector k.
    pub fn sector_total(&self, k: u32) -> u64 {
        self.totals_per_k.get(k as usize).copied().unwrap_or(0)
    }

    pub fn totals_per_k(&self) -> &[u64] {
        &self.totals_per_k
    }

    pub fn count(&self, k: u32, mask: &OccupationMask) -> u64 {
        self.counts.get(&(k, *mask)).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<(u32, OccupationMask), u64> {
        &self.counts
    }

    /// Relative frequency of `mask` within sector k.
    ///
    /// With `divide_sample_groups` set, the estimate is read as coming from a
    /// designated 1/C(m, n) sub-group of the sector's shots. The ledger holds
    /// aggregated counts, so the sub-group is realised as an exact
    /// proportional slice: the returned ratio is unchanged, while the
    /// effective sample size backing it (see
    /// [`SampleLedger::effective_sector_samples`]) shrinks by C(m, n). The
    /// flag exists so worst-case bound arithmetic, which consumes the
    /// effective sample size, can be reproduced; leave it off for estimation.
    pub fn estimate_probability(
        &self,
        mask: &OccupationMask,
        k: u32,
        divide_sample_groups: bool,
    ) -> Result<f64> {
        if mask.photons() + k != self.photons {
            return Err(Error::Argument(format!(
                "mask with {} photons cannot sit in sector k={k} of an n={} ledger",
                mask.photons(),
                self.photons
            )));
        }
        let sector = self.sector_total(k);
        if sector == 0 {
            return Err(Error::EmptySector { k });
        }
        let groups = if divide_sample_groups {
            binomial_f64(self.modes as u64, self.photons as u64)
        } else {
            1.0
        };
        let count = self.count(k, mask) as f64 / groups;
        let used = sector as f64 / groups;
        Ok(count / used)
    }

    /// Sample count backing one estimate in sector k, after optional
    /// sub-group division.
    pub fn effective_sector_samples(&self, k: u32, divide_sample_groups: bool) -> f64 {
        let sector = self.sector_total(k) as f64;
        if divide_sample_groups {
            sector / binomial_f64(self.modes as u64, self.photons as u64)
        } else {
            sector
        }
    }

    /// CSV export (`k,mask_hex,count`) plus a JSON sidecar with dimensions
    /// and generator provenance. Round-trips bit-exactly.
    pub fn write_files(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut csv = String::from("k,mask_hex,count\n");
        for ((k, mask), count) in &self.counts {
            csv.push_str(&format!("{},{},{}\n", k, mask.to_hex(), count));
        }
        fs::write(csv_path, csv)?;
        let sidecar = json!({
            "m": self.modes,
            "n": self.photons,
            "eta": self.eta,
            "N_tot": self.total,
            "seed": self.seed,
            "shards": self.shards,
        });
        fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_files(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let sidecar: Value = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
        let bad = |field: &str| Error::Format {
            what: "ledger sidecar",
            detail: format!("missing or invalid field {field:?}"),
        };
        let modes = sidecar.get("m").and_then(Value::as_u64).ok_or_else(|| bad("m"))? as u32;
        let photons = sidecar.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as u32;
        let eta = sidecar.get("eta").and_then(Value::as_f64).ok_or_else(|| bad("eta"))?;
        let total = sidecar
            .get("N_tot")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("N_tot"))?;
        let seed = sidecar.get("seed").and_then(Value::as_u64).ok_or_else(|| bad("seed"))?;
        let shards = sidecar
            .get("shards")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("shards"))? as u32;

        let mut counts = BTreeMap::new();
        let mut totals_per_k = vec![0u64; photons as usize + 1];
        let mut counted = 0u64;
        for (lineno, line) in fs::read_to_string(csv_path)?.lines().enumerate() {
            if lineno == 0 {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let parse_err = |detail: String| Error::Format {
                what: "ledger csv",
                detail,
            };
            let k: u32 = parts
                .next()
                .ok_or_else(|| parse_err(format!("line {}", lineno + 1)))?
                .parse()
                .map_err(|e| parse_err(format!("line {}: {e}", lineno + 1)))?;
            let mask = OccupationMask::from_hex(
                parts
                    .next()
                    .ok_or_else(|| parse_err(format!("line {}", lineno + 1)))?,
                modes,
            )?;
            let count: u64 = parts
                .next()
                .ok_or_else(|| parse_err(format!("line {}", lineno + 1)))?
                .parse()
                .map_err(|e| parse_err(format!("line {}: {e}", lineno + 1)))?;
            if k > photons || mask.photons() + k != photons {
                return Err(parse_err(format!(
                    "line {}: sector {k} inconsistent with mask",
                    lineno + 1
                )));
            }
            counts.insert((k, mask), count);
            totals_per_k[k as usize] += count;
            counted += count;
        }
        if counted != total {
            return Err(Error::Format {
                what: "ledger csv",
                detail: format!("counts sum to {counted} but sidecar says N_tot={total}"),
            });
        }
        Ok(Self {
            modes,
            photons,
            eta,
            seed,
            shards,
            counts,
            totals_per_k,
            total,
        })
    }
}

/// Draw `n_tot` lossy shots from the exact ideal distribution,
/// single-sharded. Deterministic in `seed`.
pub fn draw_samples(
    ideal: &ProbabilityTable,
    loss: &LossModel,
    n_tot: u64,
    seed: u64,
) -> Result<SampleLedger> {
    draw_samples_sharded(ideal, loss, n_tot, seed, 1)
}

/// Sharded sampling: shard i draws from an independent stream seeded with
/// `splitmix64(seed ^ i)`, so the merged ledger is bit-identical for a fixed
/// shard count regardless of evaluation order.
pub fn draw_samples_sharded(
    ideal: &ProbabilityTable,
    loss: &LossModel,
    n_tot: u64,
    seed: u64,
    shards: u32,
) -> Result<SampleLedger> {
    if ideal.kind() != TableKind::Exact {
        return Err(Error::Argument(
            "sampling needs an exact ideal table".to_string(),
        ));
    }
    if (ideal.mass() - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "ideal table mass {} is not 1",
            ideal.mass()
        )));
    }
    if shards == 0 {
        return Err(Error::Argument("shard count must be positive".to_string()));
    }
    let n = ideal.photons();
    let modes = ideal.modes();
    let eta = loss.eta();

    // Cumulative weights over the deterministic mask order.
    let masks: Vec<OccupationMask> = ideal.entries().keys().copied().collect();
    let mut cumulative = Vec::with_capacity(masks.len());
    let mut acc = 0.0;
    for mask in &masks {
        acc += ideal.get(mask);
        cumulative.push(acc);
    }

    let mut counts: BTreeMap<(u32, OccupationMask), u64> = BTreeMap::new();
    let mut totals_per_k = vec![0u64; n as usize + 1];
    let base = n_tot / u64::from(shards);
    let remainder = n_tot % u64::from(shards);
    for shard in 0..shards {
        let mut gen = rng::derived_stream(seed, u64::from(shard));
        let shots = base + u64::from(u64::from(shard) < remainder);
        for _ in 0..shots {
            let u: f64 = gen.random();
            let target = u * acc;
            let idx = cumulative.partition_point(|&c| c < target);
            let drawn = masks[idx.min(masks.len() - 1)];

            let mut survivors = 0u64;
            for mode in drawn.occupied_modes() {
                let lost: f64 = gen.random();
                if lost >= eta {
                    survivors |= 1 << mode;
                }
            }
            let surviving = OccupationMask::new(survivors, modes)?;
            let k = n - surviving.photons();
            *counts.entry((k, surviving)).or_insert(0) += 1;
            totals_per_k[k as usize] += 1;
        }
    }

    Ok(SampleLedger {
        modes,
        photons: n,
        eta,
        seed,
        shards,
        counts,
        totals_per_k,
        total: n_tot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{ideal_distribution, CollisionPolicy, InputConfig};
    use crate::interferometer::haar_unitary;

    fn exact_table(m: u32, n: u32, seed: u64) -> ProbabilityTable {
        let u = haar_unitary(m, seed).unwrap();
        let cfg = InputConfig::first_modes(m, n).unwrap();
        ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap()
    }

    #[test]
    fn sector_weight_edges() {
        assert_eq!(sector_weights(3, 0.0), vec![1.0, 0.0, 0.0, 0.0]);
        let w = sector_weights(2, 0.5);
        assert!((w[0] - 0.25).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert!((w[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sector_weights_sum_to_one() {
        for eta in [0.1, 0.37, 0.8, 0.999] {
            let total: f64 = sector_weights(10, eta).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        // weight[0] at n=10, eta=0.8 is 0.2^10.
        let w = sector_weights(10, 0.8);
        assert!((w[0] - 0.2f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn conditional_k0_is_identity() {
        let ideal = exact_table(6, 3, 4);
        let same = lossy_conditional_distribution(&ideal, 0).unwrap();
        assert_eq!(ideal.entries(), same.entries());
    }

    #[test]
    fn conditional_of_uniform_is_uniform() {
        // m=6, n=3, k=1: a uniform ideal table marginalises to the uniform
        // table over C(6,2) = 15 masks.
        let masks = all_masks(6, 3).unwrap();
        let p = 1.0 / masks.len() as f64;
        let entries = masks.into_iter().map(|m| (m, p)).collect();
        let ideal = ProbabilityTable::new(6, 3, TableKind::Exact, entries).unwrap();
        let lossy = lossy_conditional_distribution(&ideal, 1).unwrap();
        assert_eq!(lossy.entries().len(), 15);
        for &v in lossy.entries().values() {
            assert!((v - 1.0 / 15.0).abs() < 1e-12);
        }
        assert!((lossy.mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conditional_mass_is_one() {
        let ideal = exact_table(8, 3, 11);
        for k in 0..=3 {
            let lossy = lossy_conditional_distribution(&ideal, k).unwrap();
            assert!((lossy.mass() - 1.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn lossless_sampling_stays_in_sector_zero() {
        let ideal = exact_table(6, 2, 8);
        let ledger = draw_samples(&ideal, &LossModel::new(0.0).unwrap(), 1000, 3).unwrap();
        assert_eq!(ledger.sector_total(0), 1000);
        assert_eq!(ledger.total(), 1000);
        // Hoeffding envelope at 1000 shots and 15 outcomes.
        let bound = (f64::ln(2.0 * 15.0) / (2.0 * 1000.0)).sqrt() * 3.0;
        for (mask, p) in ideal.entries() {
            let freq = ledger.count(0, mask) as f64 / 1000.0;
            assert!((freq - p).abs() < bound, "{mask:?}: {freq} vs {p}");
        }
    }

    #[test]
    fn full_loss_lands_on_empty_mask() {
        let ideal = exact_table(5, 2, 8);
        let ledger = draw_samples(&ideal, &LossModel::new(1.0).unwrap(), 200, 3).unwrap();
        assert_eq!(ledger.sector_total(2), 200);
        let empty = OccupationMask::new(0, 5).unwrap();
        assert_eq!(ledger.count(2, &empty), 200);
    }

    #[test]
    fn sector_totals_match_binomial_law() {
        let ideal = exact_table(8, 3, 21);
        let n_tot = 1_000_000u64;
        let eta = 0.6;
        let ledger = draw_samples(&ideal, &LossModel::new(eta).unwrap(), n_tot, 5).unwrap();
        let weights = sector_weights(3, eta);
        for (k, w) in weights.iter().enumerate() {
            let expect = w * n_tot as f64;
            let sigma = (n_tot as f64 * w * (1.0 - w)).sqrt();
            let got = ledger.sector_total(k as u32) as f64;
            assert!(
                (got - expect).abs() < 4.0 * sigma,
                "sector {k}: {got} vs {expect} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn empty_ledger_is_valid() {
        let ideal = exact_table(5, 2, 8);
        let ledger = draw_samples(&ideal, &LossModel::new(0.3).unwrap(), 0, 3).unwrap();
        assert_eq!(ledger.total(), 0);
        let mask = OccupationMask::new(0b11, 5).unwrap();
        match ledger.estimate_probability(&mask, 0, false) {
            Err(Error::EmptySector { k: 0 }) => {}
            other => panic!("expected empty sector, got {other:?}"),
        }
    }

    #[test]
    fn estimate_is_a_plain_ratio() {
        let ideal = exact_table(6, 3, 2);
        let ledger = draw_samples(&ideal, &LossModel::new(0.5).unwrap(), 5000, 7).unwrap();
        let k = 1u32;
        let sector = ledger.sector_total(k);
        assert!(sector > 0);
        let mask = all_masks(6, 2).unwrap()[0];
        let est = ledger.estimate_probability(&mask, k, false).unwrap();
        assert_eq!(est, ledger.count(k, &mask) as f64 / sector as f64);
        // Absent masks estimate to zero.
        let est_groups = ledger.estimate_probability(&mask, k, true).unwrap();
        assert!((est - est_groups).abs() < 1e-15);
        assert_eq!(
            ledger.effective_sector_samples(k, true),
            sector as f64 / binomial_f64(6, 3)
        );
    }

    #[test]
    fn sector_estimates_sum_to_one() {
        let ideal = exact_table(6, 3, 2);
        let ledger = draw_samples(&ideal, &LossModel::new(0.5).unwrap(), 4000, 9).unwrap();
        for k in 0..=3u32 {
            let sector = ledger.sector_total(k);
            if sector == 0 {
                continue;
            }
            // Counting identity, exact in integers.
            let counted: u64 = ledger
                .counts()
                .iter()
                .filter(|((kk, _), _)| *kk == k)
                .map(|(_, c)| *c)
                .sum();
            assert_eq!(counted, sector);
            let total: f64 = all_masks(6, 3 - k)
                .unwrap()
                .iter()
                .map(|m| ledger.estimate_probability(m, k, false).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sharded_ledger_is_deterministic() {
        let ideal = exact_table(6, 2, 14);
        let loss = LossModel::new(0.4).unwrap();
        let a = draw_samples_sharded(&ideal, &loss, 999, 5, 4).unwrap();
        let b = draw_samples_sharded(&ideal, &loss, 999, 5, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 999);
        assert_eq!(a.totals_per_k().iter().sum::<u64>(), 999);
    }

    #[test]
    fn ledger_files_round_trip_exactly() {
        let ideal = exact_table(6, 3, 2);
        let ledger = draw_samples(&ideal, &LossModel::new(0.55).unwrap(), 2500, 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("ledger.csv");
        let sidecar = dir.path().join("ledger.json");
        ledger.write_files(&csv, &sidecar).unwrap();
        let back = SampleLedger::read_files(&csv, &sidecar).unwrap();
        assert_eq!(ledger, back);
    }
}
