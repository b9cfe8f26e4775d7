//! Output probability tables and the exact ideal distribution.
//!
//! An n-photon outcome probability is |Per(U_TS)|^2, where U_TS is the minor
//! of the interferometer selecting the occupied input modes as rows and the
//! occupied output modes as columns (both ascending). Summing the squared
//! permanents over the C(m, n) no-collision outcomes gives the raw sector
//! mass; collision outcomes carry the rest. The default policy renormalises
//! the no-collision sector to a proper distribution and records the raw mass.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interferometer::Interferometer;
use crate::mask::{all_masks, OccupationMask};
use crate::permanent::permanent;

/// Exact tables carry analytically derived values; estimated tables carry
/// finite-sample frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Exact,
    Estimated,
}

impl TableKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableKind::Exact => "exact",
            TableKind::Estimated => "estimated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TableKind::Exact),
            "estimated" => Ok(TableKind::Estimated),
            other => Err(Error::Format {
                what: "table kind",
                detail: other.to_string(),
            }),
        }
    }
}

/// A probability table over one photon-number sector.
///
/// Unobserved masks read as zero; `raw_mass` is populated for ideal tables
/// and holds the pre-renormalisation no-collision mass.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    modes: u32,
    photons: u32,
    kind: TableKind,
    entries: BTreeMap<OccupationMask, f64>,
    raw_mass: Option<f64>,
}

impl ProbabilityTable {
    pub fn new(
        modes: u32,
        photons: u32,
        kind: TableKind,
        entries: BTreeMap<OccupationMask, f64>,
    ) -> Result<Self> {
        for (mask, &p) in &entries {
            if mask.modes() != modes || mask.photons() != photons {
                return Err(Error::Argument(format!(
                    "mask {mask:?} does not belong to sector ({modes} modes, {photons} photons)"
                )));
            }
            if !(p >= 0.0) {
                return Err(Error::Argument(format!(
                    "negative or NaN probability {p} for {mask:?}"
                )));
            }
        }
        Ok(Self {
            modes,
            photons,
            kind,
            entries,
            raw_mass: None,
        })
    }

    pub fn modes(&self) -> u32 {
        self.modes
    }

    /// Photon count of the sector this table describes.
    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn entries(&self) -> &BTreeMap<OccupationMask, f64> {
        &self.entries
    }

    /// Probability of `mask`, zero when absent.
    pub fn get(&self, mask: &OccupationMask) -> f64 {
        self.entries.get(mask).copied().unwrap_or(0.0)
    }

    /// Sum of all entries.
    pub fn mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Pre-renormalisation no-collision mass, when known.
    pub fn raw_mass(&self) -> Option<f64> {
        self.raw_mass
    }

    pub fn with_raw_mass(mut self, raw_mass: f64) -> Self {
        self.raw_mass = Some(raw_mass);
        self
    }

    /// The same table scaled back to raw (pre-renormalisation) values.
    pub fn to_raw(&self) -> Result<ProbabilityTable> {
        let raw = self.raw_mass.ok_or_else(|| {
            Error::Argument("table has no recorded raw mass".to_string())
        })?;
        let entries = self
            .entries
            .iter()
            .map(|(mask, p)| (*mask, p * raw))
            .collect();
        Ok(ProbabilityTable {
            modes: self.modes,
            photons: self.photons,
            kind: self.kind,
            entries,
            raw_mass: Some(raw),
        })
    }

    /// CSV export: `mask_hex,value` rows plus a JSON sidecar.
    pub fn write_files(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut csv = String::from("mask_hex,value\n");
        for (mask, value) in &self.entries {
            csv.push_str(&format!("{},{}\n", mask.to_hex(), value));
        }
        fs::write(csv_path, csv)?;
        let mut sidecar = json!({
            "m": self.modes,
            "n": self.photons,
            "kind": self.kind.as_str(),
        });
        if let Some(raw) = self.raw_mass {
            sidecar["raw_mass"] = json!(raw);
        }
        fs::write(sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_files(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let sidecar: Value = serde_json::from_str(&fs::read_to_string(sidecar_path)?)?;
        let bad = |detail: &str| Error::Format {
            what: "probability table sidecar",
            detail: detail.to_string(),
        };
        let modes = sidecar.get("m").and_then(Value::as_u64).ok_or_else(|| bad("m"))? as u32;
        let photons = sidecar.get("n").and_then(Value::as_u64).ok_or_else(|| bad("n"))? as u32;
        let kind = TableKind::parse(
            sidecar
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("kind"))?,
        )?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in fs::read_to_string(csv_path)?.lines().enumerate() {
            if lineno == 0 {
                continue;
            }
            let (hex, value) = line.split_once(',').ok_or_else(|| Error::Format {
                what: "probability table csv",
                detail: format!("line {}: {line:?}", lineno + 1),
            })?;
            let mask = OccupationMask::from_hex(hex, modes)?;
            let value: f64 = value.parse().map_err(|e| Error::Format {
                what: "probability table csv",
                detail: format!("line {}: {e}", lineno + 1),
            })?;
            entries.insert(mask, value);
        }
        let mut table = Self::new(modes, photons, kind, entries)?;
        if let Some(raw) = sidecar.get("raw_mass").and_then(Value::as_f64) {
            table.raw_mass = Some(raw);
        }
        Ok(table)
    }
}

/// Which input modes carry the n photons.
#[derive(Debug, Clone)]
pub struct InputConfig {
    modes: u32,
    occupied: Vec<u32>,
}

impl InputConfig {
    pub fn new(modes: u32, occupied: Vec<u32>) -> Result<Self> {
        let mask = OccupationMask::from_modes(occupied.iter().copied(), modes)?;
        if mask.photons() as usize != occupied.len() {
            return Err(Error::Argument("repeated input mode".to_string()));
        }
        let mut occupied = occupied;
        occupied.sort_unstable();
        Ok(Self { modes, occupied })
    }

    /// Photons in modes 0..n-1, the conventional default.
    pub fn first_modes(modes: u32, photons: u32) -> Result<Self> {
        Self::new(modes, (0..photons).collect())
    }

    pub fn modes(&self) -> u32 {
        self.modes
    }

    pub fn photons(&self) -> u32 {
        self.occupied.len() as u32
    }

    pub fn occupied(&self) -> &[u32] {
        &self.occupied
    }
}

/// How to treat the probability mass sitting on collision outcomes.
#[derive(Debug, Clone, Copy)]
pub enum CollisionPolicy {
    /// Keep only the no-collision sector and renormalise it to mass one.
    DiscardRenormalize,
    /// Refuse to proceed when the raw no-collision mass falls below `floor`.
    RejectIfMassLow { floor: f64 },
}

/// Default mass floor for [`CollisionPolicy::RejectIfMassLow`].
pub const DEFAULT_MASS_FLOOR: f64 = 0.5;

fn minor(
    matrix: &Array2<Complex64>,
    input_modes: &[u32],
    output_modes: &[u32],
) -> Array2<Complex64> {
    let n = input_modes.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        matrix[(input_modes[i] as usize, output_modes[j] as usize)]
    })
}

/// Squared permanents of the no-collision minors of an arbitrary square
/// complex matrix (rows = occupied input modes, columns = occupied output
/// modes, both ascending). For a unitary this is the raw ideal distribution;
/// for a scaled Ginibre matrix it realises the Gaussian-minor model of
/// Haar circuits.
pub fn squared_permanent_table(
    matrix: &Array2<Complex64>,
    cfg: &InputConfig,
) -> Result<ProbabilityTable> {
    if cfg.modes() as usize != matrix.nrows() || matrix.nrows() != matrix.ncols() {
        return Err(Error::Argument(format!(
            "input config is for {} modes but matrix is {}x{}",
            cfg.modes(),
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let m = cfg.modes();
    let n = cfg.photons();
    let mut entries = BTreeMap::new();
    for mask in all_masks(m, n)? {
        let sub = minor(matrix, cfg.occupied(), &mask.occupied_modes());
        let amp = permanent(sub.view())?;
        entries.insert(mask, amp.norm_sqr());
    }
    let table = ProbabilityTable::new(m, n, TableKind::Exact, entries)?;
    let raw = table.mass();
    Ok(table.with_raw_mass(raw))
}

/// Raw squared-permanent values over every no-collision outcome; the table
/// mass is the raw sector mass (at most one).
pub fn ideal_distribution_raw(u: &Interferometer, cfg: &InputConfig) -> Result<ProbabilityTable> {
    squared_permanent_table(u.entries(), cfg)
}

/// The exact ideal output distribution over no-collision outcomes.
pub fn ideal_distribution(
    u: &Interferometer,
    cfg: &InputConfig,
    policy: CollisionPolicy,
) -> Result<ProbabilityTable> {
    let raw_table = ideal_distribution_raw(u, cfg)?;
    let raw = raw_table.mass();
    if let CollisionPolicy::RejectIfMassLow { floor } = policy {
        if raw < floor {
            return Err(Error::Regime(format!(
                "no-collision mass {raw:.6} below floor {floor}"
            )));
        }
    }
    if raw <= 0.0 {
        return Err(Error::Regime(
            "no-collision sector carries zero mass".to_string(),
        ));
    }
    let entries = raw_table
        .entries()
        .iter()
        .map(|(mask, p)| (*mask, p / raw))
        .collect();
    Ok(
        ProbabilityTable::new(cfg.modes(), cfg.photons(), TableKind::Exact, entries)?
            .with_raw_mass(raw),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{haar_unitary, Provenance};

    fn permutation_unitary(perm: &[usize]) -> Interferometer {
        let m = perm.len();
        let entries = Array2::from_shape_fn((m, m), |(i, j)| {
            Complex64::new(f64::from(perm[i] == j), 0.0)
        });
        Interferometer::from_matrix(entries, Provenance::External).unwrap()
    }

    #[test]
    fn permutation_matrix_routes_photons() {
        // Photons in modes {0,1,2} pass straight through the identity.
        let u = permutation_unitary(&[0, 1, 2, 3, 4, 5]);
        let cfg = InputConfig::first_modes(6, 3).unwrap();
        let table = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();
        let straight = OccupationMask::new(0b111, 6).unwrap();
        assert!((table.get(&straight) - 1.0).abs() < 1e-12);
        for (mask, p) in table.entries() {
            if *mask != straight {
                assert!(*p < 1e-12);
            }
        }
    }

    #[test]
    fn renormalised_table_is_a_distribution() {
        let u = haar_unitary(6, 5).unwrap();
        let cfg = InputConfig::first_modes(6, 2).unwrap();
        let table = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();
        assert!((table.mass() - 1.0).abs() < 1e-9);
        assert!(table.entries().values().all(|&p| p >= 0.0));
        assert!(table.raw_mass().unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn reject_policy_fires_on_low_mass() {
        let u = haar_unitary(4, 2).unwrap();
        let cfg = InputConfig::first_modes(4, 3).unwrap();
        // At m = 4, n = 3 the collision mass is substantial; a floor of 0.999
        // must reject.
        match ideal_distribution(&u, &cfg, CollisionPolicy::RejectIfMassLow { floor: 0.999 }) {
            Err(Error::Regime(_)) => {}
            other => panic!("expected regime error, got {other:?}"),
        }
    }

    #[test]
    fn permutation_covariance() {
        // Relabeling output modes permutes table keys identically.
        let m = 7u32;
        let n = 3u32;
        let u = haar_unitary(m, 17).unwrap();
        let cfg = InputConfig::first_modes(m, n).unwrap();
        let base = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();

        let perm: Vec<usize> = vec![3, 0, 6, 2, 5, 1, 4];
        let permuted_u = u.permute_outputs(&perm).unwrap();
        let permuted = ideal_distribution(&permuted_u, &cfg, CollisionPolicy::DiscardRenormalize)
            .unwrap();

        // Output mode i of permuted corresponds to mode perm[i] of base, so a
        // mask with mode set S in permuted matches mask perm(S) in base.
        for (mask, p) in permuted.entries() {
            let relabeled = OccupationMask::from_modes(
                mask.occupied_modes().iter().map(|&i| perm[i as usize] as u32),
                m,
            )
            .unwrap();
            assert!(
                (p - base.get(&relabeled)).abs() < 1e-12,
                "covariance broken at {mask:?}"
            );
        }
    }

    #[test]
    fn table_files_round_trip() {
        let u = haar_unitary(6, 9).unwrap();
        let cfg = InputConfig::first_modes(6, 2).unwrap();
        let table = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("ideal.csv");
        let sidecar = dir.path().join("ideal.json");
        table.write_files(&csv, &sidecar).unwrap();
        let back = ProbabilityTable::read_files(&csv, &sidecar).unwrap();
        assert_eq!(table.entries(), back.entries());
        assert_eq!(table.raw_mass(), back.raw_mass());
    }
}
