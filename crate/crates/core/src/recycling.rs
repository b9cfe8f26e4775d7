//! Recycled probabilities: construction, exact decomposition, deviation
//! statistics, and the dependency factor.
//!
//! The recycled value for an n-photon outcome s, built from the sector where
//! k photons were lost, is
//!
//! ```text
//! p_R^k(s) = (1 / C(m-n+k, k)) * sum over d in descendants(s, k) of p(d)
//! ```
//!
//! and decomposes exactly, for exact inputs, as
//!
//! ```text
//! p_R^k(s) = p(s) / C(m-n+k, k)  +  (N'_k / N_k) * I(s, k)
//! ```
//!
//! where `N_k = C(m-n+k, k) C(n, k)`, `N'_k = (C(m-n+k, k) - 1) C(n, k)` and
//! `I(s, k)` is the interference term: the convex mixture of the other
//! n-photon probabilities reachable through the loss/fill maps. The mean of
//! `I(s, k)` over all s equals `1/C(m, n)` exactly, for any unitary.
//!
//! Every estimator built from a [`SampleLedger`] has an exact twin taking a
//! [`ProbabilityTable`], so bias and statistical error can be separated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::comb::{binomial, binomial_f64, uniform_probability};
use crate::distribution::{ProbabilityTable, TableKind};
use crate::error::{Error, Result};
use crate::loss::{lossy_conditional_distribution, SampleLedger};
use crate::mask::{all_masks, OccupationMask};

/// Default cap on full-table construction; C(m, n) beyond this is refused.
pub const DEFAULT_TABLE_CAP: u128 = 8_000_000;

/// The signal and mixing coefficients of the decomposition at (m, n, k):
/// `signal = 1/C(m-n+k, k)`, `mix = N'_k / N_k`.
#[derive(Debug, Clone, Copy)]
pub struct MixCoefficients {
    pub signal: f64,
    pub mix: f64,
    /// C(m-n+k, k), the number of fill ancestors per lossy outcome.
    pub fan_out: f64,
    /// N'_k, the number of off-target terms inside one interference sum.
    pub off_target_terms: f64,
}

impl MixCoefficients {
    pub fn new(modes: u32, photons: u32, k: u32) -> Result<Self> {
        if k == 0 || k > photons {
            return Err(Error::Argument(format!(
                "k={k} outside 1..={photons} for the recycling construction"
            )));
        }
        if photons > modes {
            return Err(Error::Argument(format!(
                "{photons} photons exceed {modes} modes"
            )));
        }
        let fan_out = binomial_f64((modes - photons + k) as u64, k as u64);
        let choose_lost = binomial_f64(photons as u64, k as u64);
        let off_target_terms = (fan_out - 1.0) * choose_lost;
        if off_target_terms <= 0.0 {
            return Err(Error::Argument(format!(
                "degenerate geometry m={modes}, n={photons}, k={k}: no interference terms"
            )));
        }
        Ok(Self {
            signal: 1.0 / fan_out,
            mix: (fan_out - 1.0) / fan_out,
            fan_out,
            off_target_terms,
        })
    }
}

/// A table of recycled values over n-photon masks, built from sector k.
#[derive(Debug, Clone)]
pub struct RecycledTable {
    modes: u32,
    photons: u32,
    k: u32,
    kind: TableKind,
    entries: BTreeMap<OccupationMask, f64>,
    norm_factor: f64,
}

impl RecycledTable {
    /// Assemble a table directly from entries; the normalisation factor is
    /// derived from the geometry. Useful for synthetic fixtures and for
    /// loading externally produced tables.
    pub fn new(
        modes: u32,
        photons: u32,
        k: u32,
        kind: TableKind,
        entries: BTreeMap<OccupationMask, f64>,
    ) -> Result<Self> {
        let coeffs = MixCoefficients::new(modes, photons, k)?;
        for mask in entries.keys() {
            if mask.modes() != modes || mask.photons() != photons {
                return Err(Error::Argument(format!(
                    "mask {mask:?} does not belong to the n={photons} sector over {modes} modes"
                )));
            }
        }
        Ok(Self {
            modes,
            photons,
            k,
            kind,
            entries,
            norm_factor: coeffs.signal,
        })
    }

    pub fn modes(&self) -> u32 {
        self.modes
    }

    /// Photon count n of the outcomes being reconstructed.
    pub fn photons(&self) -> u32 {
        self.photons
    }

    /// Lost-photon count of the sector the table was built from.
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// The normalisation factor 1/C(m-n+k, k) already applied to entries.
    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    pub fn entries(&self) -> &BTreeMap<OccupationMask, f64> {
        &self.entries
    }

    pub fn get(&self, mask: &OccupationMask) -> f64 {
        self.entries.get(mask).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Sum of entries before the normalisation factor; equals C(m-n+k, k)
    /// for exact full tables.
    pub fn prenorm_sum(&self) -> f64 {
        self.mass() / self.norm_factor
    }

    /// Mean absolute deviation of this table from the uniform probability,
    /// counting masks missing from the table as zeros.
    pub fn abs_avg_deviation(&self) -> f64 {
        abs_avg_deviation(&self.entries, self.modes, self.photons)
    }

    /// CSV export (`mask_hex,value`) plus a JSON sidecar.
    pub fn write_files(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut csv = String::from("mask_hex,value\n");
        for (mask, value) in &self.entries {
            csv.push_str(&format!("{},{}\n", mask.to_hex(), value));
        }
        fs::write(csv_path, csv)?;
        let sidecar = json!({
            "m": self.modes,
            "n": self.photons,
            "k": self.k,
            "kind": self.kind.as_str(),
            "norm_factor": self.norm_factor,
        });
        fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_files(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let sidecar: Value = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
        let bad = |field: &str| Error::Format {
            what: "recycled table sidecar",
            detail: format!("missing or invalid field {field:?}"),
        };
        let modes = sidecar.get("m").and_then(Value::as_u64).ok_or_else(|| bad("m"))? as u32;
        let photons = sidecar.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as u32;
        let k = sidecar.get("k").and_then(Value::as_u64).ok_or_else(|| bad("k"))? as u32;
        let kind = TableKind::parse(
            sidecar
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("kind"))?,
        )?;
        let norm_factor = sidecar
            .get("norm_factor")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("norm_factor"))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in fs::read_to_string(csv_path)?.lines().enumerate() {
            if lineno == 0 {
                continue;
            }
            let (hex, value) = line.split_once(',').ok_or_else(|| Error::Format {
                what: "recycled table csv",
                detail: format!("line {}", lineno + 1),
            })?;
            let mask = OccupationMask::from_hex(hex, modes)?;
            let value: f64 = value.parse().map_err(|e| Error::Format {
                what: "recycled table csv",
                detail: format!("line {}: {e}", lineno + 1),
            })?;
            entries.insert(mask, value);
        }
        Ok(Self {
            modes,
            photons,
            k,
            kind,
            entries,
            norm_factor,
        })
    }
}

fn check_target(target: &OccupationMask, modes: u32, photons: u32) -> Result<()> {
    if target.modes() != modes || target.photons() != photons {
        return Err(Error::Argument(format!(
            "target {target:?} is not an n={photons} photon mask over {modes} modes"
        )));
    }
    Ok(())
}

fn check_k_range(photons: u32, k: u32) -> Result<()> {
    if k == 0 || k >= photons {
        return Err(Error::Argument(format!(
            "recycling needs 1 <= k <= n-1, got k={k}, n={photons}"
        )));
    }
    Ok(())
}

/// Recycled estimator for one target mask from ledger statistics.
///
/// Matches the counter-based construction exactly: the fraction of sector-k
/// shots landing in the descendant set, divided by C(m-n+k, k).
pub fn recycled_estimate(ledger: &SampleLedger, target: &OccupationMask, k: u32) -> Result<f64> {
    check_target(target, ledger.modes(), ledger.photons())?;
    check_k_range(ledger.photons(), k)?;
    let coeffs = MixCoefficients::new(ledger.modes(), ledger.photons(), k)?;
    let mut acc = 0.0;
    for descendant in target.loss_descendants(k)? {
        acc += ledger.estimate_probability(&descendant, k, false)?;
    }
    Ok(acc * coeffs.signal)
}

/// Exact recycled value for one target mask from an exact ideal table.
pub fn recycled_exact(ideal: &ProbabilityTable, target: &OccupationMask, k: u32) -> Result<f64> {
    check_target(target, ideal.modes(), ideal.photons())?;
    check_k_range(ideal.photons(), k)?;
    let lossy = lossy_conditional_distribution(ideal, k)?;
    recycled_from_sector(&lossy, target, k)
}

fn recycled_from_sector(
    sector: &ProbabilityTable,
    target: &OccupationMask,
    k: u32,
) -> Result<f64> {
    let n = sector.photons() + k;
    let coeffs = MixCoefficients::new(sector.modes(), n, k)?;
    let mut acc = 0.0;
    for descendant in target.loss_descendants(k)? {
        acc += sector.get(&descendant);
    }
    Ok(acc * coeffs.signal)
}

fn full_table_targets(modes: u32, photons: u32, cap: u128) -> Result<Vec<OccupationMask>> {
    let size = binomial(modes as u64, photons as u64);
    if size > cap {
        return Err(Error::Capacity {
            what: "recycled table masks",
            requested: size,
            limit: cap,
        });
    }
    all_masks(modes, photons)
}

/// Estimated recycled table over all C(m, n) targets.
pub fn recycled_table_estimated(ledger: &SampleLedger, k: u32) -> Result<RecycledTable> {
    let targets = full_table_targets(ledger.modes(), ledger.photons(), DEFAULT_TABLE_CAP)?;
    recycled_table_estimated_for(ledger, k, &targets)
}

/// Estimated recycled table over a caller-supplied target subset.
pub fn recycled_table_estimated_for(
    ledger: &SampleLedger,
    k: u32,
    targets: &[OccupationMask],
) -> Result<RecycledTable> {
    check_k_range(ledger.photons(), k)?;
    let coeffs = MixCoefficients::new(ledger.modes(), ledger.photons(), k)?;
    if ledger.sector_total(k) == 0 {
        return Err(Error::EmptySector { k });
    }
    let mut entries = BTreeMap::new();
    for target in targets {
        entries.insert(*target, recycled_estimate(ledger, target, k)?);
    }
    Ok(RecycledTable {
        modes: ledger.modes(),
        photons: ledger.photons(),
        k,
        kind: TableKind::Estimated,
        entries,
        norm_factor: coeffs.signal,
    })
}

/// Exact recycled table over all C(m, n) targets.
pub fn recycled_table_exact(ideal: &ProbabilityTable, k: u32) -> Result<RecycledTable> {
    let targets = full_table_targets(ideal.modes(), ideal.photons(), DEFAULT_TABLE_CAP)?;
    recycled_table_exact_for(ideal, k, &targets)
}

/// Exact recycled table over a caller-supplied target subset.
pub fn recycled_table_exact_for(
    ideal: &ProbabilityTable,
    k: u32,
    targets: &[OccupationMask],
) -> Result<RecycledTable> {
    check_k_range(ideal.photons(), k)?;
    let coeffs = MixCoefficients::new(ideal.modes(), ideal.photons(), k)?;
    let lossy = lossy_conditional_distribution(ideal, k)?;
    let mut entries = BTreeMap::new();
    for target in targets {
        entries.insert(*target, recycled_from_sector(&lossy, target, k)?);
    }
    Ok(RecycledTable {
        modes: ideal.modes(),
        photons: ideal.photons(),
        k,
        kind: TableKind::Exact,
        entries,
        norm_factor: coeffs.signal,
    })
}

/// One interference term with the coefficients of its decomposition.
#[derive(Debug, Clone, Copy)]
pub struct InterferenceRecord {
    pub mask: OccupationMask,
    /// I(s, k), the convex mixture of off-target n-photon probabilities.
    pub value: f64,
    /// 1/C(m-n+k, k).
    pub signal_coeff: f64,
    /// N'_k / N_k, in [0, 1).
    pub mix_coeff: f64,
}

/// Exact interference term for one target:
/// `I = (1/N'_k) * sum over descendants d, ancestors t of d with t != s of p(t)`.
pub fn interference_term_exact(
    ideal: &ProbabilityTable,
    target: &OccupationMask,
    k: u32,
) -> Result<InterferenceRecord> {
    check_target(target, ideal.modes(), ideal.photons())?;
    check_k_range(ideal.photons(), k)?;
    let coeffs = MixCoefficients::new(ideal.modes(), ideal.photons(), k)?;
    let mut acc = 0.0;
    for descendant in target.loss_descendants(k)? {
        for ancestor in descendant.fill_ancestors(k)? {
            if ancestor != *target {
                acc += ideal.get(&ancestor);
            }
        }
    }
    Ok(InterferenceRecord {
        mask: *target,
        value: acc / coeffs.off_target_terms,
        signal_coeff: coeffs.signal,
        mix_coeff: coeffs.mix,
    })
}

/// Mean absolute deviation from 1/C(m, n) over all C(m, n) masks;
/// masks missing from the map contribute |0 - 1/C(m, n)|.
pub fn abs_avg_deviation(
    entries: &BTreeMap<OccupationMask, f64>,
    modes: u32,
    photons: u32,
) -> f64 {
    let count = binomial_f64(modes as u64, photons as u64);
    let p_unif = 1.0 / count;
    let present: f64 = entries.values().map(|v| (v - p_unif).abs()).sum();
    let missing = count - entries.len() as f64;
    (present + missing * p_unif) / count
}

/// `abs_avg_deviation` for a probability table (used for the k = 0 baseline).
pub fn abs_avg_deviation_table(table: &ProbabilityTable) -> f64 {
    abs_avg_deviation(table.entries(), table.modes(), table.photons())
}

/// A dependency factor together with its range check.
#[derive(Debug, Clone, Copy)]
pub struct DependencyEstimate {
    pub value: f64,
    /// Set when the value falls outside [0, 1]; the dependency-based solver
    /// must then be abandoned in favour of plain linear solving.
    pub out_of_range: bool,
}

/// Dependency factor from the deviation ratio:
///
/// ```text
/// d_k = (1 / (C - 1)) * (C * D_k / D_0  -  1 / C),   C = C(m-n+k, k)
/// ```
///
/// evaluated literally in this form.
pub fn dependency_factor(
    deviation_k: f64,
    deviation_0: f64,
    modes: u32,
    photons: u32,
    k: u32,
) -> Result<DependencyEstimate> {
    check_k_range(photons, k)?;
    if deviation_0 <= 0.0 {
        return Err(Error::UndefinedDependency);
    }
    let c = binomial_f64((modes - photons + k) as u64, k as u64);
    let value = (c * deviation_k / deviation_0 - 1.0 / c) / (c - 1.0);
    Ok(DependencyEstimate {
        value,
        out_of_range: !(0.0..=1.0).contains(&value),
    })
}

/// Deviation statistics over a family of recycled tables: D_k per k, the
/// uniform probability, and the dependency factor estimated from each ratio
/// D_k / D_0.
#[derive(Debug, Clone)]
pub struct DeviationStats {
    /// `deviations[0]` is D_0 (the n-photon table); `deviations[k]` is D_k.
    pub deviations: Vec<f64>,
    pub p_unif: f64,
    pub dependency: BTreeMap<u32, DependencyEstimate>,
}

impl DeviationStats {
    /// Build from the n-photon baseline deviation and recycled tables
    /// (which must carry consecutive k = 1, 2, ...).
    pub fn from_tables(deviation_0: f64, tables: &[&RecycledTable]) -> Result<Self> {
        let mut deviations = vec![deviation_0];
        let mut dependency = BTreeMap::new();
        for (i, table) in tables.iter().enumerate() {
            let expected_k = i as u32 + 1;
            if table.k() != expected_k {
                return Err(Error::Argument(format!(
                    "tables must carry consecutive k; slot {i} has k={}",
                    table.k()
                )));
            }
            let d_k = table.abs_avg_deviation();
            deviations.push(d_k);
            if deviation_0 > 0.0 {
                dependency.insert(
                    expected_k,
                    dependency_factor(d_k, deviation_0, table.modes(), table.photons(), expected_k)?,
                );
            }
        }
        let (modes, photons) = match tables.first() {
            Some(t) => (t.modes(), t.photons()),
            None => {
                return Err(Error::Argument(
                    "deviation stats need at least one recycled table".to_string(),
                ))
            }
        };
        Ok(Self {
            deviations,
            p_unif: uniform_probability(modes, photons),
            dependency,
        })
    }
}
