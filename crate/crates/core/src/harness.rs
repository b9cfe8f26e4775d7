//! Experiment orchestration: seeded end-to-end runs, metric aggregation,
//! sweeps with crossover estimation, and artifact persistence.
//!
//! A run is fully determined by its JSON config: per seed it generates or
//! loads a unitary, computes the exact ideal table, draws lossy samples,
//! builds recycled tables, applies the configured mitigation methods,
//! normalises, and scores KL and total-variation distance against the ideal
//! distribution. When an output directory is set it writes every artifact
//! (ledger, tables, reports, comparison) plus a manifest with content
//! hashes, so identical configs produce bit-identical trees.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::postselect_estimates;
use crate::comb::uniform_probability;
use crate::distribution::{
    ideal_distribution, CollisionPolicy, InputConfig, ProbabilityTable,
};
use crate::error::{Error, Result};
use crate::interferometer::{haar_unitary, Interferometer};
use crate::loss::{draw_samples, LossModel, SampleLedger};
use crate::mask::all_masks;
use crate::metrics::{kl_divergence, total_variation, KlDirection};
use crate::mitigation::{
    extrapolate_exponential, extrapolate_linear, linear_solve, linear_solve_dependency,
    normalize_report, MitigationReport,
};
use crate::recycling::{
    abs_avg_deviation_table, dependency_factor, interference_term_exact,
    recycled_table_estimated, RecycledTable,
};
use crate::rng::derive_seed;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Methods selectable in an experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Postselect,
    Linsolve,
    LinsolveDep,
    ExtrapLinear,
    ExtrapExp,
    Richardson,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Postselect => "postselect",
            MethodName::Linsolve => "linsolve",
            MethodName::LinsolveDep => "linsolve_dep",
            MethodName::ExtrapLinear => "extrap_linear",
            MethodName::ExtrapExp => "extrap_exp",
            MethodName::Richardson => "richardson",
        }
    }
}

/// Where the interferometer comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum UnitarySource {
    /// Base seed; each run seed derives its own Haar unitary from it.
    #[serde(rename = "haar_seed")]
    HaarSeed(u64),
    /// A fixed unitary loaded from a JSON file, shared across seeds.
    #[serde(rename = "file")]
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Eta,
    NTot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlDirectionConfig {
    #[default]
    IdealFromCandidate,
    CandidateFromIdeal,
}

impl From<KlDirectionConfig> for KlDirection {
    fn from(value: KlDirectionConfig) -> Self {
        match value {
            KlDirectionConfig::IdealFromCandidate => KlDirection::IdealFromCandidate,
            KlDirectionConfig::CandidateFromIdeal => KlDirection::CandidateFromIdeal,
        }
    }
}

/// Full experiment description; serialised as the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub m: u32,
    pub n: u32,
    pub eta: f64,
    pub n_tot: u64,
    pub k_list: Vec<u32>,
    #[serde(default)]
    pub n_d: Option<u32>,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodName>,
    pub unitary: UnitarySource,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub kl_direction: KlDirectionConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

impl ExperimentConfig {
    /// Fit points for the extrapolation methods: configured n_d or
    /// min(3, n - 1).
    pub fn fit_points(&self) -> u32 {
        self.n_d.unwrap_or_else(|| 3.min(self.n.saturating_sub(1)).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        if self.n == 0 || self.n > self.m {
            return Err(Error::Argument(format!(
                "need 1 <= n <= m, got n={}, m={}",
                self.n, self.m
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Argument(format!("eta {} outside [0, 1]", self.eta)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Argument("seed list must not be empty".to_string()));
        }
        if self.methods.is_empty() {
            return Err(Error::Argument("method list must not be empty".to_string()));
        }
        if self.methods.contains(&MethodName::Richardson) {
            return Err(Error::Argument(
                "richardson mitigates marginals over a loss grid; run the zne-nogo driver instead"
                    .to_string(),
            ));
        }
        let needs_recycling = self.methods.iter().any(|m| *m != MethodName::Postselect);
        if needs_recycling && self.k_list.is_empty() {
            return Err(Error::Argument(
                "k_list must not be empty for recycling methods".to_string(),
            ));
        }
        for &k in &self.k_list {
            if k == 0 || k >= self.n {
                return Err(Error::Argument(format!(
                    "k_list entry {k} outside 1..={}",
                    self.n - 1
                )));
            }
        }
        let wants_extrap = self
            .methods
            .iter()
            .any(|m| matches!(m, MethodName::ExtrapLinear | MethodName::ExtrapExp));
        if wants_extrap {
            let points = self.fit_points();
            if points == 0 || points >= self.n {
                return Err(Error::Argument(format!(
                    "n_d={points} must satisfy 1 <= n_d <= n-1"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return Err(Error::Argument("sweep grid must not be empty".to_string()));
            }
            if sweep.axis == SweepAxis::Eta
                && sweep.grid.iter().any(|&e| !(0.0..=1.0).contains(&e))
            {
                return Err(Error::Argument("sweep eta grid outside [0, 1]".to_string()));
            }
            if sweep.axis == SweepAxis::NTot && sweep.grid.iter().any(|&v| v < 1.0) {
                return Err(Error::Argument("sweep N_tot grid below 1".to_string()));
            }
        }
        Ok(())
    }

    /// Content hash of the experiment identity. The output directory is not
    /// part of it: identical experiments produce identical digests wherever
    /// their artifacts land.
    pub fn digest(&self) -> Result<String> {
        let mut identity = self.clone();
        identity.output_dir = None;
        let canonical = serde_json::to_string(&identity)?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }
}

/// Metrics of one method on one seed; `None` when the method was undefined
/// (for example an empty sector at eta = 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub kl: Option<f64>,
    pub tvd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub raw_no_collision_mass: f64,
    pub metrics: BTreeMap<String, MethodMetrics>,
}

/// Aggregate of one metric across the seeds where it was defined.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub defined: u32,
}

fn summarise(values: impl Iterator<Item = Option<f64>>) -> Option<MetricSummary> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        return None;
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(MetricSummary {
        mean,
        min,
        max,
        defined: defined.len() as u32,
    })
}

/// All metrics at one (eta, N_tot) point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub eta: f64,
    pub n_tot: u64,
    pub per_seed: Vec<SeedOutcome>,
    pub kl_summary: BTreeMap<String, MetricSummary>,
    pub tvd_summary: BTreeMap<String, MetricSummary>,
}

impl ExperimentOutcome {
    pub fn mean_kl(&self, method: &str) -> Option<f64> {
        self.kl_summary.get(method).map(|s| s.mean)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub points: Vec<ExperimentOutcome>,
    /// Per-method crossover estimates; see [`crossover_estimate`] for the
    /// axis-specific definitions.
    pub crossovers: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub base: ExperimentOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepOutcome>,
}

struct SeedArtifacts {
    unitary: Interferometer,
    ideal: ProbabilityTable,
    ledger: SampleLedger,
    recycled: BTreeMap<u32, RecycledTable>,
    reports: BTreeMap<String, MitigationReport>,
    postselected: Option<ProbabilityTable>,
}

fn unitary_for_seed(config: &ExperimentConfig, seed: u64) -> Result<Interferometer> {
    match &config.unitary {
        UnitarySource::HaarSeed(base) => haar_unitary(config.m, derive_seed(*base, seed)),
        UnitarySource::File(path) => Interferometer::read_file(path),
    }
    .map_err(|e| e.at_stage("unitary"))
}

fn run_seed(
    config: &ExperimentConfig,
    eta: f64,
    n_tot: u64,
    seed: u64,
) -> Result<(SeedOutcome, SeedArtifacts)> {
    let input = InputConfig::first_modes(config.m, config.n).map_err(|e| e.at_stage("config"))?;
    let unitary = unitary_for_seed(config, seed)?;
    let ideal = ideal_distribution(&unitary, &input, CollisionPolicy::DiscardRenormalize)
        .map_err(|e| e.at_stage("simulate"))?;
    let loss = LossModel::new(eta).map_err(|e| e.at_stage("sample"))?;
    let ledger =
        draw_samples(&ideal, &loss, n_tot, seed).map_err(|e| e.at_stage("sample"))?;

    let direction: KlDirection = config.kl_direction.into();
    let mut metrics: BTreeMap<String, MethodMetrics> = BTreeMap::new();
    let mut reports: BTreeMap<String, MitigationReport> = BTreeMap::new();

    // Postselection is both a reported method and the source of the
    // baseline deviation estimate for the other methods.
    let postselected = match postselect_estimates(&ledger) {
        Ok(table) => Some(table),
        Err(Error::EmptySector { .. }) => None,
        Err(e) => return Err(e.at_stage("postselect")),
    };
    if config.methods.contains(&MethodName::Postselect) {
        match &postselected {
            Some(table) => {
                metrics.insert(
                    MethodName::Postselect.as_str().to_string(),
                    MethodMetrics {
                        kl: Some(kl_divergence(ideal.entries(), table.entries(), direction)),
                        tvd: Some(total_variation(ideal.entries(), table.entries())),
                        note: None,
                    },
                );
            }
            None => {
                metrics.insert(
                    MethodName::Postselect.as_str().to_string(),
                    undefined_metrics("no lossless shots"),
                );
            }
        }
    }

    // Recycled tables needed by the configured methods.
    let wants_extrap = config
        .methods
        .iter()
        .any(|m| matches!(m, MethodName::ExtrapLinear | MethodName::ExtrapExp));
    let mut wanted_k: Vec<u32> = config.k_list.clone();
    if wants_extrap {
        wanted_k.extend(1..=config.fit_points());
    }
    wanted_k.sort_unstable();
    wanted_k.dedup();

    let mut recycled: BTreeMap<u32, RecycledTable> = BTreeMap::new();
    let mut missing_sectors: BTreeMap<u32, String> = BTreeMap::new();
    for &k in &wanted_k {
        match recycled_table_estimated(&ledger, k) {
            Ok(table) => {
                recycled.insert(k, table);
            }
            Err(Error::EmptySector { k }) => {
                missing_sectors.insert(k, format!("no shots with k={k} lost photons"));
            }
            Err(e) => return Err(e.at_stage("recycle")),
        }
    }

    let baseline_deviation = postselected.as_ref().map(abs_avg_deviation_table);
    let solve_k = config.k_list.first().copied();

    for method in &config.methods {
        let name = method.as_str().to_string();
        let report = match method {
            MethodName::Postselect | MethodName::Richardson => continue,
            MethodName::Linsolve => {
                let k = solve_k.expect("validated k_list");
                match recycled.get(&k) {
                    Some(table) => Ok(linear_solve(table).map_err(|e| e.at_stage("mitigate"))?),
                    None => Err(missing_sectors[&k].clone()),
                }
            }
            MethodName::LinsolveDep => {
                let k = solve_k.expect("validated k_list");
                match (recycled.get(&k), baseline_deviation) {
                    (Some(table), Some(d0)) if d0 > 0.0 => {
                        let estimate = dependency_factor(
                            table.abs_avg_deviation(),
                            d0,
                            config.m,
                            config.n,
                            k,
                        )
                        .map_err(|e| e.at_stage("mitigate"))?;
                        if estimate.out_of_range {
                            // Dependency aborted: fall back to plain linear
                            // solving on the same table.
                            let mut report =
                                linear_solve(table).map_err(|e| e.at_stage("mitigate"))?;
                            report.method =
                                crate::mitigation::MitigationMethod::LinearSolveDependency;
                            metrics.insert(
                                name.clone(),
                                note_only(format!(
                                    "dependency {} out of range; plain linear solving used",
                                    estimate.value
                                )),
                            );
                            Ok(report)
                        } else {
                            Ok(linear_solve_dependency(table, estimate.value)
                                .map_err(|e| e.at_stage("mitigate"))?)
                        }
                    }
                    (None, _) => Err(missing_sectors[&k].clone()),
                    (_, _) => Err("baseline deviation unavailable".to_string()),
                }
            }
            MethodName::ExtrapLinear | MethodName::ExtrapExp => {
                let points = config.fit_points();
                let mut tables: Vec<&RecycledTable> = Vec::new();
                let mut missing = None;
                for k in 1..=points {
                    match recycled.get(&k) {
                        Some(t) => tables.push(t),
                        None => {
                            missing = Some(missing_sectors[&k].clone());
                            break;
                        }
                    }
                }
                match (missing, baseline_deviation) {
                    (Some(reason), _) => Err(reason),
                    (None, None) => Err("baseline deviation unavailable".to_string()),
                    (None, Some(d0)) => {
                        let run = if *method == MethodName::ExtrapLinear {
                            extrapolate_linear(&tables, d0)
                        } else {
                            extrapolate_exponential(&tables, d0)
                        };
                        match run {
                            Ok(report) => Ok(report),
                            Err(Error::FitDegenerate(reason)) => Err(reason),
                            Err(e) => return Err(e.at_stage("mitigate")),
                        }
                    }
                }
            }
        };
        match report {
            Ok(report) => {
                let normalized =
                    normalize_report(&report).map_err(|e| e.at_stage("normalize"))?;
                let candidate = normalized
                    .normalized
                    .as_ref()
                    .expect("normalize_report fills the map");
                let note = metrics.remove(&name).and_then(|m| m.note);
                metrics.insert(
                    name.clone(),
                    MethodMetrics {
                        kl: Some(kl_divergence(ideal.entries(), candidate, direction)),
                        tvd: Some(total_variation(ideal.entries(), candidate)),
                        note,
                    },
                );
                reports.insert(name, normalized);
            }
            Err(reason) => {
                metrics.insert(name, undefined_metrics(&reason));
            }
        }
    }

    let outcome = SeedOutcome {
        seed,
        raw_no_collision_mass: ideal.raw_mass().unwrap_or(1.0),
        metrics,
    };
    Ok((
        outcome,
        SeedArtifacts {
            unitary,
            ideal,
            ledger,
            recycled,
            reports,
            postselected,
        },
    ))
}

fn undefined_metrics(reason: &str) -> MethodMetrics {
    MethodMetrics {
        kl: None,
        tvd: None,
        note: Some(reason.to_string()),
    }
}

fn note_only(reason: String) -> MethodMetrics {
    MethodMetrics {
        kl: None,
        tvd: None,
        note: Some(reason),
    }
}

fn run_point(
    config: &ExperimentConfig,
    eta: f64,
    n_tot: u64,
    artifact_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let (outcome, artifacts) = run_seed(config, eta, n_tot, seed)?;
        if let Some(dir) = artifact_dir {
            write_seed_artifacts(dir, seed, &artifacts)?;
        }
        per_seed.push(outcome);
    }

    let methods: Vec<String> = config
        .methods
        .iter()
        .map(|m| m.as_str().to_string())
        .collect();
    let mut kl_summary = BTreeMap::new();
    let mut tvd_summary = BTreeMap::new();
    for method in &methods {
        if let Some(summary) = summarise(
            per_seed
                .iter()
                .map(|s| s.metrics.get(method).and_then(|m| m.kl)),
        ) {
            kl_summary.insert(method.clone(), summary);
        }
        if let Some(summary) = summarise(
            per_seed
                .iter()
                .map(|s| s.metrics.get(method).and_then(|m| m.tvd)),
        ) {
            tvd_summary.insert(method.clone(), summary);
        }
    }
    Ok(ExperimentOutcome {
        eta,
        n_tot,
        per_seed,
        kl_summary,
        tvd_summary,
    })
}

/// Crossover estimate along a sweep.
///
/// On the eta axis: the smallest grid loss where the method's mean KL drops
/// below postselection's (mitigation overtakes), linearly interpolated
/// between the bracketing grid points; clamped to the first grid point when
/// the method already wins there.
///
/// On the N_tot axis: the smallest grid sample count where postselection's
/// mean KL drops below the method's (postselection overtakes), interpolated
/// linearly in log N_tot.
pub fn crossover_estimate(
    axis: SweepAxis,
    grid: &[f64],
    points: &[ExperimentOutcome],
    method: &str,
) -> Option<f64> {
    let gap_at = |idx: usize| -> Option<f64> {
        let point = &points[idx];
        let method_kl = point.mean_kl(method)?;
        let post_kl = point.mean_kl(MethodName::Postselect.as_str())?;
        Some(match axis {
            // Mitigation overtakes: method - post falls through zero.
            SweepAxis::Eta => method_kl - post_kl,
            // Postselection overtakes: post - method falls through zero.
            SweepAxis::NTot => post_kl - method_kl,
        })
    };
    let mut previous: Option<(f64, f64)> = None;
    for (idx, &x) in grid.iter().enumerate() {
        let gap = gap_at(idx)?;
        if gap < 0.0 {
            return Some(match previous {
                None => x,
                Some((x_prev, gap_prev)) => {
                    if (gap_prev - gap).abs() < f64::EPSILON * gap_prev.abs().max(1.0) {
                        x
                    } else {
                        match axis {
                            SweepAxis::Eta => {
                                x_prev + (x - x_prev) * gap_prev / (gap_prev - gap)
                            }
                            SweepAxis::NTot => {
                                let lx_prev = x_prev.ln();
                                let lx = x.ln();
                                (lx_prev + (lx - lx_prev) * gap_prev / (gap_prev - gap)).exp()
                            }
                        }
                    }
                }
            });
        }
        previous = Some((x, gap));
    }
    None
}

/// Run the configured experiment; writes artifacts when an output directory
/// is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let artifact_dir = config.output_dir.clone();
    if let Some(dir) = &artifact_dir {
        fs::create_dir_all(dir)?;
    }

    let base = run_point(config, config.eta, config.n_tot, artifact_dir.as_deref())?;

    let sweep = match &config.sweep {
        None => None,
        Some(spec) => {
            let mut points = Vec::with_capacity(spec.grid.len());
            for &value in &spec.grid {
                let outcome = match spec.axis {
                    SweepAxis::Eta => run_point(config, value, config.n_tot, None)?,
                    SweepAxis::NTot => run_point(config, config.eta, value as u64, None)?,
                };
                points.push(outcome);
            }
            let mut crossovers = BTreeMap::new();
            for method in &config.methods {
                if *method == MethodName::Postselect {
                    continue;
                }
                crossovers.insert(
                    method.as_str().to_string(),
                    crossover_estimate(spec.axis, &spec.grid, &points, method.as_str()),
                );
            }
            Some(SweepOutcome {
                axis: spec.axis,
                grid: spec.grid.clone(),
                points,
                crossovers,
            })
        }
    };

    let report = ComparisonReport {
        schema_version: CONFIG_SCHEMA_VERSION,
        config_digest: config.digest()?,
        base,
        sweep,
    };

    if let Some(dir) = &artifact_dir {
        let comparison_path = dir.join("comparison.json");
        fs::write(&comparison_path, serde_json::to_string_pretty(&report)?)?;
        write_manifest(dir, &report.config_digest)?;
    }
    Ok(report)
}

fn write_seed_artifacts(dir: &Path, seed: u64, artifacts: &SeedArtifacts) -> Result<()> {
    let seed_dir = dir.join(format!("seed_{seed}"));
    fs::create_dir_all(&seed_dir)?;
    artifacts.unitary.write_file(&seed_dir.join("unitary.json"))?;
    artifacts
        .ideal
        .write_files(&seed_dir.join("ideal.csv"), &seed_dir.join("ideal.json"))?;
    artifacts
        .ledger
        .write_files(&seed_dir.join("ledger.csv"), &seed_dir.join("ledger.json"))?;
    if let Some(post) = &artifacts.postselected {
        post.write_files(
            &seed_dir.join("postselect.csv"),
            &seed_dir.join("postselect.json"),
        )?;
    }
    for (k, table) in &artifacts.recycled {
        table.write_files(
            &seed_dir.join(format!("recycled_k{k}.csv")),
            &seed_dir.join(format!("recycled_k{k}.json")),
        )?;
    }
    for (name, report) in &artifacts.reports {
        report.write_files(
            &seed_dir.join(format!("report_{name}.csv")),
            &seed_dir.join(format!("report_{name}.json")),
        )?;
    }
    Ok(())
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.file_name().is_some_and(|n| n != "manifest.json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Manifest entry: relative path and content hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub files: Vec<ManifestEntry>,
}

fn write_manifest(dir: &Path, config_digest: &str) -> Result<()> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    let mut entries = Vec::with_capacity(files.len());
    for path in files {
        let rel = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        entries.push(ManifestEntry {
            path: rel,
            sha256: hash_file(&path)?,
        });
    }
    let manifest = Manifest {
        schema_version: CONFIG_SCHEMA_VERSION,
        config_digest: config_digest.to_string(),
        files: entries,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// One row of the interference deviation sweep.
#[derive(Debug, Clone, Copy)]
pub struct InterferenceDeviationRow {
    pub unitary_index: u32,
    pub k: u32,
    pub mean_abs_deviation: f64,
}

/// Mean |I(s, k) - 1/C(m, n)| over all targets, for `unitary_count`
/// Haar-random unitaries and each k in `k_list`. Exact computation.
pub fn interference_deviation_sweep(
    unitary_count: u32,
    modes: u32,
    photons: u32,
    k_list: &[u32],
    seed: u64,
) -> Result<Vec<InterferenceDeviationRow>> {
    let input = InputConfig::first_modes(modes, photons)?;
    let masks = all_masks(modes, photons)?;
    let p_unif = uniform_probability(modes, photons);
    let mut rows = Vec::new();
    for index in 0..unitary_count {
        let unitary = haar_unitary(modes, derive_seed(seed, u64::from(index)))?;
        let ideal = ideal_distribution(&unitary, &input, CollisionPolicy::DiscardRenormalize)?;
        for &k in k_list {
            let mean = masks
                .iter()
                .map(|target| {
                    interference_term_exact(&ideal, target, k).map(|r| (r.value - p_unif).abs())
                })
                .sum::<Result<f64>>()?
                / masks.len() as f64;
            rows.push(InterferenceDeviationRow {
                unitary_index: index,
                k,
                mean_abs_deviation: mean,
            });
        }
    }
    Ok(rows)
}

/// CSV for the interference deviation sweep.
pub fn interference_deviation_csv(rows: &[InterferenceDeviationRow]) -> String {
    let mut out = String::from("unitary_index,k,mean_abs_deviation\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.unitary_index, row.k, row.mean_abs_deviation
        ));
    }
    out
}

/// Row-max and spectral-norm diagnostic for one minor of a unitary, the two
/// quantities entering the structured-class hypothesis of the deterministic
/// bias ceiling.
#[derive(Debug, Clone, Copy)]
pub struct MinorDiagnostic {
    /// (1/n) sum_i max_j |a_ij|.
    pub h_inf: f64,
    /// Operator 2-norm of the minor.
    pub spectral_norm: f64,
    pub ratio: f64,
}

pub fn minor_condition_diagnostic(
    unitary: &Interferometer,
    input_modes: &[u32],
    output_modes: &[u32],
) -> Result<MinorDiagnostic> {
    let n = input_modes.len();
    if n == 0 || output_modes.len() != n {
        return Err(Error::Argument(
            "diagnostic needs a non-empty square minor".to_string(),
        ));
    }
    let dim = unitary.dim() as u32;
    if input_modes.iter().chain(output_modes).any(|&i| i >= dim) {
        return Err(Error::Argument("minor index out of range".to_string()));
    }
    let entry = |i: usize, j: usize| {
        unitary.entries()[(input_modes[i] as usize, output_modes[j] as usize)]
    };

    let h_inf = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| entry(i, j).norm())
                .fold(0.0f64, f64::max)
        })
        .sum::<f64>()
        / n as f64;

    // Spectral norm by power iteration on A^H A with a fixed start vector.
    let mut v = vec![1.0 / (n as f64).sqrt(); n]
        .into_iter()
        .map(|x| num_complex::Complex64::new(x, 0.0))
        .collect::<Vec<_>>();
    let mut norm_sq = 0.0;
    for _ in 0..200 {
        // w = A v, u = A^H w.
        let w: Vec<num_complex::Complex64> = (0..n)
            .map(|i| (0..n).map(|j| entry(i, j) * v[j]).sum())
            .collect();
        let u: Vec<num_complex::Complex64> = (0..n)
            .map(|j| (0..n).map(|i| entry(i, j).conj() * w[i]).sum())
            .collect();
        let len = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if len == 0.0 {
            norm_sq = 0.0;
            break;
        }
        norm_sq = len;
        v = u.into_iter().map(|z| z / len).collect();
    }
    let spectral_norm = norm_sq.sqrt();
    Ok(MinorDiagnostic {
        h_inf,
        spectral_norm,
        ratio: if spectral_norm > 0.0 {
            h_inf / spectral_norm
        } else {
            f64::INFINITY
        },
    })
}
