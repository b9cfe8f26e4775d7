//! `lossmit` — simulate lossy linear-optical circuits and mitigate the loss.
//!
//! Every subcommand takes `--config <json>` and an optional `--out <dir>`
//! (default: `$LOSSMIT_OUT`, falling back to the current directory) and
//! writes CSV/JSON artifacts there. Exit codes: 0 on success, 2 on config
//! errors, 3 on regime/capacity errors, 1 otherwise.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use lossmit_core::baselines::{postselect_estimates, violation_sweep, violation_sweep_csv};
use lossmit_core::bounds::{
    chebyshev_confidence, exp_barrier_bound, linsolve_regime_max_samples,
    regime_inequality_check, statistical_error_envelope, ChebyshevVariant, EnvelopeScope,
    ErrorEnvelope, RegimeMethod, RegimeQuery,
};
use lossmit_core::distribution::{
    ideal_distribution, CollisionPolicy, InputConfig, DEFAULT_MASS_FLOOR,
};
use lossmit_core::gauss::{clt_probe, permanent_moment_run};
use lossmit_core::harness::{run_experiment, ExperimentConfig, MethodName, UnitarySource};
use lossmit_core::interferometer::{haar_unitary, Interferometer};
use lossmit_core::loss::{
    draw_samples_sharded, lossy_conditional_distribution, LossModel, SampleLedger,
};
use lossmit_core::mitigation::{
    extrapolate_exponential, extrapolate_linear, linear_solve, linear_solve_dependency,
    normalize_report, MitigationReport,
};
use lossmit_core::recycling::{
    abs_avg_deviation_table, dependency_factor, recycled_table_estimated, RecycledTable,
};

#[derive(Parser)]
#[command(name = "lossmit", version, about = "Photon-loss simulation and recycling mitigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Haar-random interferometer and write it as JSON.
    GenUnitary(CommonArgs),
    /// Compute the exact ideal (and optionally lossy-sector) distributions.
    Simulate(CommonArgs),
    /// Draw lossy samples into a ledger.
    Sample(CommonArgs),
    /// Build recycled tables from a ledger and run the mitigation methods.
    Mitigate(CommonArgs),
    /// Seeded end-to-end comparison of mitigation methods vs postselection.
    Compare(CommonArgs),
    /// Evaluate the analytic bound and sampling-regime calculators.
    Bound(CommonArgs),
    /// Zero-noise-extrapolation violation sweep (no-go experiments).
    ZneNogo(CommonArgs),
    /// Gaussian-permanent moments and the central-limit probe.
    GaussLab(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the subcommand's JSON config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $LOSSMIT_OUT, then the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Run(lossmit_core::Error),
}

impl From<lossmit_core::Error> for Failure {
    fn from(e: lossmit_core::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(lossmit_core::Error::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GenUnitary(args) => dispatch(args, gen_unitary),
        Command::Simulate(args) => dispatch(args, simulate),
        Command::Sample(args) => dispatch(args, sample),
        Command::Mitigate(args) => dispatch(args, mitigate),
        Command::Compare(args) => dispatch(args, compare),
        Command::Bound(args) => dispatch(args, bound),
        Command::ZneNogo(args) => dispatch(args, zne_nogo),
        Command::GaussLab(args) => dispatch(args, gauss_lab),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_regime_or_capacity() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch<C, F>(args: &CommonArgs, runner: F) -> Result<(), Failure>
where
    C: for<'de> Deserialize<'de>,
    F: FnOnce(C, &Path) -> Result<(), Failure>,
{
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let config: C = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os("LOSSMIT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(lossmit_core::Error::from)?;
    runner(config, &out)
}

fn load_unitary(source: &UnitarySource, modes: u32) -> Result<Interferometer, Failure> {
    let unitary = match source {
        UnitarySource::HaarSeed(seed) => haar_unitary(modes, *seed)
            .map_err(|e| Failure::Config(e.to_string()))?,
        UnitarySource::File(path) => Interferometer::read_file(path)?,
    };
    if unitary.dim() != modes as usize {
        return Err(Failure::Config(format!(
            "unitary has {} modes but config says {modes}",
            unitary.dim()
        )));
    }
    Ok(unitary)
}

// --- gen-unitary ---------------------------------------------------------

#[derive(Deserialize)]
struct GenUnitaryConfig {
    m: u32,
    seed: u64,
}

fn gen_unitary(config: GenUnitaryConfig, out: &Path) -> Result<(), Failure> {
    let unitary =
        haar_unitary(config.m, config.seed).map_err(|e| Failure::Config(e.to_string()))?;
    let path = out.join("unitary.json");
    unitary.write_file(&path)?;
    println!(
        "wrote {} (m={}, unitarity deviation {:.2e})",
        path.display(),
        config.m,
        unitary.unitarity_deviation()
    );
    Ok(())
}

// --- simulate ------------------------------------------------------------

#[derive(Deserialize)]
struct SimulateConfig {
    m: u32,
    n: u32,
    unitary: UnitarySource,
    #[serde(default)]
    input_modes: Option<Vec<u32>>,
    /// "discard_renormalize" (default) or {"reject_if_mass_low": floor}.
    #[serde(default)]
    collision_policy: Option<serde_json::Value>,
    /// Lossy sectors to tabulate alongside the ideal distribution.
    #[serde(default)]
    lossy_sectors: Vec<u32>,
}

fn parse_policy(value: &Option<serde_json::Value>) -> Result<CollisionPolicy, Failure> {
    match value {
        None => Ok(CollisionPolicy::DiscardRenormalize),
        Some(serde_json::Value::String(s)) if s == "discard_renormalize" => {
            Ok(CollisionPolicy::DiscardRenormalize)
        }
        Some(serde_json::Value::String(s)) if s == "reject_if_mass_low" => {
            Ok(CollisionPolicy::RejectIfMassLow {
                floor: DEFAULT_MASS_FLOOR,
            })
        }
        Some(obj) => match obj.get("reject_if_mass_low").and_then(|v| v.as_f64()) {
            Some(floor) => Ok(CollisionPolicy::RejectIfMassLow { floor }),
            None => Err(Failure::Config(format!(
                "unrecognised collision policy {obj}"
            ))),
        },
    }
}

fn simulate(config: SimulateConfig, out: &Path) -> Result<(), Failure> {
    let input = match &config.input_modes {
        Some(modes) => InputConfig::new(config.m, modes.clone()),
        None => InputConfig::first_modes(config.m, config.n),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    if input.photons() != config.n {
        return Err(Failure::Config(format!(
            "input_modes lists {} modes but n={}",
            input.photons(),
            config.n
        )));
    }
    let policy = parse_policy(&config.collision_policy)?;
    let unitary = load_unitary(&config.unitary, config.m)?;
    let ideal = ideal_distribution(&unitary, &input, policy)?;
    ideal.write_files(&out.join("ideal.csv"), &out.join("ideal.json"))?;
    println!(
        "wrote {} ({} outcomes, raw no-collision mass {:.6})",
        out.join("ideal.csv").display(),
        ideal.entries().len(),
        ideal.raw_mass().unwrap_or(f64::NAN)
    );
    for &k in &config.lossy_sectors {
        let lossy = lossy_conditional_distribution(&ideal, k)?;
        let csv = out.join(format!("lossy_k{k}.csv"));
        lossy.write_files(&csv, &out.join(format!("lossy_k{k}.json")))?;
        println!("wrote {} ({} outcomes)", csv.display(), lossy.entries().len());
    }
    Ok(())
}

// --- sample --------------------------------------------------------------

#[derive(Deserialize)]
struct SampleConfig {
    m: u32,
    n: u32,
    eta: f64,
    n_tot: u64,
    seed: u64,
    #[serde(default)]
    shards: Option<u32>,
    unitary: UnitarySource,
}

fn sample(config: SampleConfig, out: &Path) -> Result<(), Failure> {
    let input = InputConfig::first_modes(config.m, config.n)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let loss = LossModel::new(config.eta).map_err(|e| Failure::Config(e.to_string()))?;
    let unitary = load_unitary(&config.unitary, config.m)?;
    let ideal = ideal_distribution(&unitary, &input, CollisionPolicy::DiscardRenormalize)?;
    let ledger = draw_samples_sharded(
        &ideal,
        &loss,
        config.n_tot,
        config.seed,
        config.shards.unwrap_or(1),
    )?;
    ledger.write_files(&out.join("ledger.csv"), &out.join("ledger.json"))?;
    let sectors: Vec<String> = ledger
        .totals_per_k()
        .iter()
        .enumerate()
        .map(|(k, count)| format!("k={k}:{count}"))
        .collect();
    println!(
        "wrote {} ({} shots; {})",
        out.join("ledger.csv").display(),
        ledger.total(),
        sectors.join(" ")
    );
    Ok(())
}

// --- mitigate ------------------------------------------------------------

#[derive(Deserialize)]
struct MitigateConfig {
    ledger_csv: PathBuf,
    ledger_sidecar: PathBuf,
    k_list: Vec<u32>,
    #[serde(default)]
    n_d: Option<u32>,
    methods: Vec<MethodName>,
}

fn mitigate(config: MitigateConfig, out: &Path) -> Result<(), Failure> {
    if config.methods.contains(&MethodName::Richardson) {
        return Err(Failure::Config(
            "richardson mitigates marginals over a loss grid; use zne-nogo".to_string(),
        ));
    }
    let ledger = SampleLedger::read_files(&config.ledger_csv, &config.ledger_sidecar)?;
    let n = ledger.photons();
    let points = config.n_d.unwrap_or_else(|| 3.min(n.saturating_sub(1)).max(1));
    let solve_k = config.k_list.first().copied();

    let postselected = postselect_estimates(&ledger);
    if config.methods.contains(&MethodName::Postselect) {
        let table = postselected.as_ref().map_err(clone_error)?;
        table.write_files(&out.join("postselect.csv"), &out.join("postselect.json"))?;
        println!("wrote {}", out.join("postselect.csv").display());
    }

    let mut tables: BTreeMap<u32, RecycledTable> = BTreeMap::new();
    let table_for = |k: u32, tables: &mut BTreeMap<u32, RecycledTable>| -> Result<(), lossmit_core::Error> {
        if let std::collections::btree_map::Entry::Vacant(slot) = tables.entry(k) {
            slot.insert(recycled_table_estimated(&ledger, k)?);
        }
        Ok(())
    };

    for method in &config.methods {
        let report: MitigationReport = match method {
            MethodName::Postselect | MethodName::Richardson => continue,
            MethodName::Linsolve => {
                let k = solve_k
                    .ok_or_else(|| Failure::Config("k_list must not be empty".to_string()))?;
                table_for(k, &mut tables)?;
                linear_solve(&tables[&k])?
            }
            MethodName::LinsolveDep => {
                let k = solve_k
                    .ok_or_else(|| Failure::Config("k_list must not be empty".to_string()))?;
                table_for(k, &mut tables)?;
                let baseline = postselected.as_ref().map_err(clone_error)?;
                let d0 = abs_avg_deviation_table(baseline);
                let estimate = dependency_factor(
                    tables[&k].abs_avg_deviation(),
                    d0,
                    ledger.modes(),
                    n,
                    k,
                )?;
                if estimate.out_of_range {
                    println!(
                        "dependency {:.4} out of range; falling back to plain linear solving",
                        estimate.value
                    );
                    linear_solve(&tables[&k])?
                } else {
                    linear_solve_dependency(&tables[&k], estimate.value)?
                }
            }
            MethodName::ExtrapLinear | MethodName::ExtrapExp => {
                for k in 1..=points {
                    table_for(k, &mut tables)?;
                }
                let baseline = postselected.as_ref().map_err(clone_error)?;
                let d0 = abs_avg_deviation_table(baseline);
                let refs: Vec<&RecycledTable> = (1..=points).map(|k| &tables[&k]).collect();
                if *method == MethodName::ExtrapLinear {
                    extrapolate_linear(&refs, d0)?
                } else {
                    extrapolate_exponential(&refs, d0)?
                }
            }
        };
        let normalized = normalize_report(&report)?;
        let name = method.as_str();
        normalized.write_files(
            &out.join(format!("report_{name}.csv")),
            &out.join(format!("report_{name}.json")),
        )?;
        println!(
            "wrote {} (norm mass {:.6})",
            out.join(format!("report_{name}.csv")).display(),
            normalized.norm_mass
        );
    }

    for (k, table) in &tables {
        table.write_files(
            &out.join(format!("recycled_k{k}.csv")),
            &out.join(format!("recycled_k{k}.json")),
        )?;
    }
    Ok(())
}

// Errors from postselect_estimates need to be surfaced for several methods;
// the core error is not Clone, so rebuild the empty-sector case.
fn clone_error(e: &lossmit_core::Error) -> Failure {
    match e {
        lossmit_core::Error::EmptySector { k } => {
            Failure::Run(lossmit_core::Error::EmptySector { k: *k })
        }
        other => Failure::Config(other.to_string()),
    }
}

// --- compare -------------------------------------------------------------

fn compare(mut config: ExperimentConfig, out: &Path) -> Result<(), Failure> {
    config.output_dir = Some(out.to_path_buf());
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let report = run_experiment(&config)?;
    println!(
        "wrote {} (config digest {})",
        out.join("comparison.json").display(),
        &report.config_digest[..12]
    );
    for (method, summary) in &report.base.kl_summary {
        println!(
            "  {method:13} KL mean {:.4} (min {:.4}, max {:.4}, {} seeds)",
            summary.mean, summary.min, summary.max, summary.defined
        );
    }
    if let Some(sweep) = &report.sweep {
        for (method, crossover) in &sweep.crossovers {
            match crossover {
                Some(x) => println!("  crossover {method}: {x:.4e}"),
                None => println!("  crossover {method}: none in grid"),
            }
        }
    }
    Ok(())
}

// --- bound ---------------------------------------------------------------

#[derive(Deserialize)]
struct BoundConfig {
    m: u32,
    n: u32,
    k: u32,
    eta: f64,
    n_tot: f64,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    eps_bias: Option<f64>,
    /// Empirical max-probability bound, enabling the Bhatia-Davis variant.
    #[serde(default)]
    p_upper: Option<f64>,
    #[serde(default)]
    sweep: Option<BoundSweep>,
}

#[derive(Deserialize)]
struct BoundSweep {
    /// "n_tot" or "eta".
    param: String,
    grid: Vec<f64>,
}

fn bound_query(config: &BoundConfig, eta: f64, n_tot: f64) -> Result<RegimeQuery, Failure> {
    let mut query = RegimeQuery::new(config.m, config.n, config.k, eta, n_tot)
        .map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(delta) = config.delta {
        query = query.with_delta(delta);
    }
    if let Some(eps) = config.eps_bias {
        query = query.with_eps_bias(eps);
    }
    if let Some(p_upper) = config.p_upper {
        query = query.with_p_upper(p_upper);
    }
    Ok(query)
}

fn bound(config: BoundConfig, out: &Path) -> Result<(), Failure> {
    let methods = [
        ("linsolve", RegimeMethod::LinSolve),
        ("linsolve_dep", RegimeMethod::LinSolveDependency),
        ("extrap_linear", RegimeMethod::ExtrapolateLinear),
    ];
    let points: Vec<(String, f64)> = match &config.sweep {
        None => vec![("n_tot".to_string(), config.n_tot)],
        Some(sweep) => sweep
            .grid
            .iter()
            .map(|&v| (sweep.param.clone(), v))
            .collect(),
    };
    for (name, method) in methods {
        let mut csv = String::from("param,value,lhs,rhs,holds\n");
        for (param, value) in &points {
            let (eta, n_tot) = match param.as_str() {
                "n_tot" => (config.eta, *value),
                "eta" => (*value, config.n_tot),
                other => {
                    return Err(Failure::Config(format!(
                        "sweep param must be n_tot or eta, got {other:?}"
                    )))
                }
            };
            let query = bound_query(&config, eta, n_tot)?;
            let check = regime_inequality_check(&query, method)?;
            csv.push_str(&format!(
                "{param},{value},{},{},{}\n",
                check.lhs, check.rhs, check.holds
            ));
        }
        fs::write(out.join(format!("bounds_{name}.csv")), &csv)?;
    }

    let query = bound_query(&config, config.eta, config.n_tot)?;
    let n_max = linsolve_regime_max_samples(config.m, config.n, config.k, config.eta)?;
    let haar = chebyshev_confidence(query.eps_bias, config.m, config.n, ChebyshevVariant::Haar)?;
    let arbitrary =
        chebyshev_confidence(query.eps_bias, config.m, config.n, ChebyshevVariant::Arbitrary)?;
    let bhatia_davis = match query.p_upper {
        Some(p_upper) => {
            let bound = chebyshev_confidence(
                query.eps_bias,
                config.m,
                config.n,
                ChebyshevVariant::BhatiaDavis {
                    p_upper,
                    delta: query.delta,
                },
            )?;
            json!({ "value": bound.value, "vacuous": bound.vacuous })
        }
        None => serde_json::Value::Null,
    };
    let summary = json!({
        "query": {
            "m": config.m, "n": config.n, "k": config.k,
            "eta": config.eta, "N_tot": config.n_tot,
            "delta": query.delta, "eps_bias": query.eps_bias,
        },
        "linsolve_max_samples": n_max.max_samples,
        "regime_empty": n_max.empty,
        "envelopes": {
            "postselect": statistical_error_envelope(
                &query, ErrorEnvelope::Postselect, EnvelopeScope::SingleProbability),
            "recycled": statistical_error_envelope(
                &query, ErrorEnvelope::Recycled, EnvelopeScope::SingleProbability),
            "deviation": statistical_error_envelope(
                &query, ErrorEnvelope::DeviationEstimate, EnvelopeScope::SingleProbability),
        },
        "chebyshev_failure": {
            "haar": { "value": haar.value, "vacuous": haar.vacuous },
            "arbitrary": { "value": arbitrary.value, "vacuous": arbitrary.vacuous },
            "bhatia_davis": bhatia_davis,
        },
        "exp_barrier": exp_barrier_bound(config.n as u64),
    });
    fs::write(
        out.join("bounds.json"),
        serde_json::to_string_pretty(&summary).map_err(lossmit_core::Error::from)?,
    )?;
    println!(
        "wrote {} and per-method bounds_*.csv (N_max = {:.4e})",
        out.join("bounds.json").display(),
        n_max.max_samples
    );
    Ok(())
}

// --- zne-nogo ------------------------------------------------------------

#[derive(Deserialize)]
struct ZneNogoConfig {
    eps_max: f64,
    eta_lo: f64,
    eta_hi: f64,
    trials: u64,
    seed: u64,
    n_minus_c_from: u32,
    n_minus_c_to: u32,
}

fn zne_nogo(config: ZneNogoConfig, out: &Path) -> Result<(), Failure> {
    if config.n_minus_c_from > config.n_minus_c_to {
        return Err(Failure::Config("empty n-c range".to_string()));
    }
    let rows = violation_sweep(
        config.n_minus_c_from..=config.n_minus_c_to,
        config.eta_lo,
        config.eta_hi,
        config.eps_max,
        config.trials,
        config.seed,
    )?;
    fs::write(out.join("violations.csv"), violation_sweep_csv(&rows))?;
    for row in &rows {
        println!(
            "n-c={:2} (n={:2}): {:4}/{} violations",
            row.n_minus_c, row.photons, row.violations, row.trials
        );
    }
    println!("wrote {}", out.join("violations.csv").display());
    Ok(())
}

// --- gauss-lab -----------------------------------------------------------

#[derive(Deserialize)]
struct GaussLabConfig {
    n: u32,
    trials: u64,
    seed: u64,
    #[serde(default)]
    orders: Option<Vec<u32>>,
    #[serde(default)]
    clt: Option<CltSection>,
}

#[derive(Deserialize)]
struct CltSection {
    sum_size: u64,
    trials: u64,
    #[serde(default)]
    bins: Option<usize>,
}

fn gauss_lab(config: GaussLabConfig, out: &Path) -> Result<(), Failure> {
    let orders = config.orders.clone().unwrap_or_else(|| vec![1, 2]);
    let run = permanent_moment_run(config.n, config.trials, config.seed, &orders)?;
    let moments: serde_json::Map<String, serde_json::Value> = run
        .moments
        .iter()
        .map(|(t, v)| {
            (
                format!("t{t}"),
                json!({ "empirical": v, "reference": run.reference[t] }),
            )
        })
        .collect();
    let summary = json!({
        "n": run.n,
        "trials": run.trials,
        "seed": run.seed,
        "moments": moments,
    });
    fs::write(
        out.join("moments.json"),
        serde_json::to_string_pretty(&summary).map_err(lossmit_core::Error::from)?,
    )?;
    println!("wrote {}", out.join("moments.json").display());

    if let Some(clt) = &config.clt {
        let probe = clt_probe(
            config.n,
            clt.sum_size,
            clt.trials,
            config.seed,
            clt.bins.unwrap_or(120),
        )?;
        probe.write_files(&out.join("clt_hist.csv"), &out.join("clt_summary.json"))?;
        println!(
            "wrote {} (KS {:.4}, skewness {:.3})",
            out.join("clt_hist.csv").display(),
            probe.ks_distance,
            probe.skewness
        );
    }
    Ok(())
}
