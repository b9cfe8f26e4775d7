//! Postprocessors that turn recycled tables into loss-mitigated values.
//!
//! Four methods are provided:
//!
//! * [`linear_solve`] — substitute the interference term by its expected
//!   value and invert the decomposition:
//!   `value = C(m-n+k, k) * |pR(s) - (N'_k/N_k) p_unif|`.
//! * [`linear_solve_dependency`] — same substitution with an affine
//!   correlation `d_k` between interference terms and ideal probabilities:
//!   `value = |(pR(s) + (N'_k/N_k)(d_k - 1) p_unif) / (1/C + (N'_k/N_k) d_k)|`.
//! * [`extrapolate_linear`] — fit the decay of the ideal signal across
//!   k = 1..n_d with a shared linear slope, then per-mask intercepts.
//! * [`extrapolate_exponential`] — same with a shared exponential decay rate
//!   fitted by 1-D golden-section search, then per-mask prefactors from the
//!   linear-in-prefactor closed form.
//!
//! Mitigated values are magnitudes (the absolute value is part of each
//! method); [`normalize_report`] rescales them into a distribution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::comb::uniform_probability;
use crate::error::{Error, Result};
use crate::mask::OccupationMask;
use crate::recycling::{MixCoefficients, RecycledTable};

/// Golden-section search bracket and tolerance for the exponential decay fit.
pub const EXP_FIT_ALPHA_MAX: f64 = 20.0;
pub const EXP_FIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitigationMethod {
    LinearSolve,
    LinearSolveDependency,
    ExtrapolateLinear,
    ExtrapolateExponential,
}

impl MitigationMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MitigationMethod::LinearSolve => "linear_solve",
            MitigationMethod::LinearSolveDependency => "linear_solve_dep",
            MitigationMethod::ExtrapolateLinear => "extrap_linear",
            MitigationMethod::ExtrapolateExponential => "extrap_exp",
        }
    }
}

/// Method-specific fit record carried alongside the mitigated values.
#[derive(Debug, Clone)]
pub enum MethodParams {
    LinearSolve {
        k: u32,
    },
    LinearSolveDependency {
        k: u32,
        dependency: f64,
    },
    ExtrapolateLinear {
        points: u32,
        baseline_deviation: f64,
        global_gradient: f64,
        intercepts: BTreeMap<OccupationMask, f64>,
    },
    ExtrapolateExponential {
        points: u32,
        baseline_deviation: f64,
        decay_rate: f64,
        prefactors: BTreeMap<OccupationMask, f64>,
    },
}

/// Mitigated values for a set of outcomes, with fit metadata and an input
/// digest for provenance.
#[derive(Debug, Clone)]
pub struct MitigationReport {
    pub method: MitigationMethod,
    pub modes: u32,
    pub photons: u32,
    pub values: BTreeMap<OccupationMask, f64>,
    pub normalized: Option<BTreeMap<OccupationMask, f64>>,
    pub norm_mass: f64,
    pub params: MethodParams,
    pub inputs_digest: String,
}

impl MitigationReport {
    pub fn value(&self, mask: &OccupationMask) -> f64 {
        self.values.get(mask).copied().unwrap_or(0.0)
    }

    /// JSON sidecar (method, params, norm_mass) plus a CSV of
    /// `mask_hex,value,normalized` rows.
    pub fn write_files(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let mut csv = String::from("mask_hex,value,normalized\n");
        for (mask, value) in &self.values {
            let normalized = match &self.normalized {
                Some(map) => map.get(mask).map(|v| v.to_string()).unwrap_or_default(),
                None if self.norm_mass > 0.0 => (value / self.norm_mass).to_string(),
                None => String::new(),
            };
            csv.push_str(&format!("{},{},{}\n", mask.to_hex(), value, normalized));
        }
        fs::write(csv_path, csv)?;

        let mask_map = |map: &BTreeMap<OccupationMask, f64>| -> Value {
            Value::Object(
                map.iter()
                    .map(|(mask, v)| (mask.to_hex(), json!(v)))
                    .collect(),
            )
        };
        let params = match &self.params {
            MethodParams::LinearSolve { k } => json!({ "k": k }),
            MethodParams::LinearSolveDependency { k, dependency } => {
                json!({ "k": k, "d_k": dependency })
            }
            MethodParams::ExtrapolateLinear {
                points,
                baseline_deviation,
                global_gradient,
                intercepts,
            } => json!({
                "n_d": points,
                "d0": baseline_deviation,
                "g_avg": global_gradient,
                "intercepts": mask_map(intercepts),
            }),
            MethodParams::ExtrapolateExponential {
                points,
                baseline_deviation,
                decay_rate,
                prefactors,
            } => json!({
                "n_d": points,
                "d0": baseline_deviation,
                "alpha_avg": decay_rate,
                "prefactors": mask_map(prefactors),
            }),
        };
        let sidecar = json!({
            "method": self.method.as_str(),
            "m": self.modes,
            "n": self.photons,
            "params": params,
            "norm_mass": self.norm_mass,
            "inputs_digest": self.inputs_digest,
        });
        fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

fn digest_tables(tables: &[&RecycledTable]) -> String {
    let mut hasher = Sha256::new();
    for table in tables {
        hasher.update(table.modes().to_le_bytes());
        hasher.update(table.photons().to_le_bytes());
        hasher.update(table.k().to_le_bytes());
        for (mask, value) in table.entries() {
            hasher.update(mask.bits().to_le_bytes());
            hasher.update(value.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn report_from_values(
    method: MitigationMethod,
    table_dims: (u32, u32),
    values: BTreeMap<OccupationMask, f64>,
    params: MethodParams,
    digest: String,
) -> MitigationReport {
    let norm_mass = values.values().sum();
    MitigationReport {
        method,
        modes: table_dims.0,
        photons: table_dims.1,
        values,
        normalized: None,
        norm_mass,
        params,
        inputs_digest: digest,
    }
}

/// Shared inversion: `|(r + mix (d - 1) p_unif) / (1/fan_out + mix d)|`.
/// At d = 0 this is exactly the plain linear solve
/// `fan_out |r - mix p_unif|`, and the two public methods share this code
/// path so they agree bit for bit there.
fn solve_values(table: &RecycledTable, dependency: f64) -> Result<BTreeMap<OccupationMask, f64>> {
    let coeffs = MixCoefficients::new(table.modes(), table.photons(), table.k())?;
    let p_unif = uniform_probability(table.modes(), table.photons());
    let denominator = coeffs.signal + coeffs.mix * dependency;
    let offset = coeffs.mix * (dependency - 1.0) * p_unif;
    Ok(table
        .entries()
        .iter()
        .map(|(mask, &r)| (*mask, ((r + offset) / denominator).abs()))
        .collect())
}

/// Linear solving: invert the decomposition with the interference term
/// pinned to its expected value.
pub fn linear_solve(table: &RecycledTable) -> Result<MitigationReport> {
    let values = solve_values(table, 0.0)?;
    Ok(report_from_values(
        MitigationMethod::LinearSolve,
        (table.modes(), table.photons()),
        values,
        MethodParams::LinearSolve { k: table.k() },
        digest_tables(&[table]),
    ))
}

/// Linear solving with an average dependency factor `d_k` in [0, 1].
///
/// Callers holding an out-of-range estimate must fall back to
/// [`linear_solve`]; this function refuses to run outside [0, 1].
pub fn linear_solve_dependency(table: &RecycledTable, dependency: f64) -> Result<MitigationReport> {
    if !(0.0..=1.0).contains(&dependency) {
        return Err(Error::DependencyOutOfRange { value: dependency });
    }
    let values = solve_values(table, dependency)?;
    Ok(report_from_values(
        MitigationMethod::LinearSolveDependency,
        (table.modes(), table.photons()),
        values,
        MethodParams::LinearSolveDependency {
            k: table.k(),
            dependency,
        },
        digest_tables(&[table]),
    ))
}

/// Closed-form least-squares slope of the model `f(x) = -g x + d0` over the
/// points `(x_i, d_i)`: `g = (d0 * sum x_i - sum d_i x_i) / sum x_i^2`.
pub fn fit_global_gradient(deviation_series: &[(u32, f64)], deviation_0: f64) -> Result<f64> {
    if deviation_series.is_empty() {
        return Err(Error::Argument(
            "gradient fit needs at least one data point".to_string(),
        ));
    }
    let mut sum_x = 0.0;
    let mut sum_xx = 0.0;
    let mut sum_dx = 0.0;
    for &(x, d) in deviation_series {
        let x = f64::from(x);
        sum_x += x;
        sum_xx += x * x;
        sum_dx += d * x;
    }
    Ok((deviation_0 * sum_x - sum_dx) / sum_xx)
}

fn validate_table_family<'a>(tables: &[&'a RecycledTable]) -> Result<(&'a RecycledTable, u32)> {
    let first = *tables.first().ok_or_else(|| {
        Error::Argument("extrapolation needs at least one recycled table".to_string())
    })?;
    let points = tables.len() as u32;
    if points >= first.photons() {
        return Err(Error::Argument(format!(
            "n_d={points} must be below the photon count {}",
            first.photons()
        )));
    }
    for (i, table) in tables.iter().enumerate() {
        let expected_k = i as u32 + 1;
        if table.k() != expected_k
            || table.modes() != first.modes()
            || table.photons() != first.photons()
        {
            return Err(Error::Argument(format!(
                "extrapolation tables must share dimensions and carry k = 1..n_d; slot {i} has k={}",
                table.k()
            )));
        }
        if table.entries().len() != first.entries().len()
            || !table
                .entries()
                .keys()
                .zip(first.entries().keys())
                .all(|(a, b)| a == b)
        {
            return Err(Error::Argument(
                "extrapolation tables must cover the same mask set".to_string(),
            ));
        }
    }
    Ok((first, points))
}

/// Linear extrapolation of the per-mask deviation back to k = 0.
///
/// Stage 1 fits a shared slope to the deviation series; stage 2 assigns each
/// mask the model `sgn(p_unif - y_1) * g x + alpha` (ties in the sign resolve
/// to +1) and recovers the intercept in closed form. The mitigated value is
/// `|p_unif + alpha|`.
pub fn extrapolate_linear(
    tables: &[&RecycledTable],
    deviation_0: f64,
) -> Result<MitigationReport> {
    let (first, points) = validate_table_family(tables)?;
    let p_unif = uniform_probability(first.modes(), first.photons());
    let series: Vec<(u32, f64)> = tables
        .iter()
        .map(|t| (t.k(), t.abs_avg_deviation()))
        .collect();
    let gradient = fit_global_gradient(&series, deviation_0)?;

    let mean_x = f64::from(points + 1) / 2.0;
    let mut values = BTreeMap::new();
    let mut intercepts = BTreeMap::new();
    for mask in first.entries().keys() {
        let ys: Vec<f64> = tables.iter().map(|t| (t.get(mask) - p_unif).abs()).collect();
        let sign = if p_unif - ys[0] >= 0.0 { 1.0 } else { -1.0 };
        let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
        let intercept = mean_y - sign * gradient * mean_x;
        intercepts.insert(*mask, intercept);
        values.insert(*mask, (p_unif + intercept).abs());
    }
    Ok(report_from_values(
        MitigationMethod::ExtrapolateLinear,
        (first.modes(), first.photons()),
        values,
        MethodParams::ExtrapolateLinear {
            points,
            baseline_deviation: deviation_0,
            global_gradient: gradient,
            intercepts,
        },
        digest_tables(tables),
    ))
}

/// Golden-section minimisation of `f` on [lo, hi] to tolerance `tol`.
fn golden_section_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Fit the decay rate of `d0 * exp(-alpha k)` to the deviation series by
/// golden-section search on alpha in [0, EXP_FIT_ALPHA_MAX], refined around
/// the log-linear initial estimate; all deviations must be positive.
pub fn fit_exponential_decay(deviation_series: &[(u32, f64)], deviation_0: f64) -> Result<f64> {
    if deviation_series.is_empty() {
        return Err(Error::Argument(
            "decay fit needs at least one data point".to_string(),
        ));
    }
    if deviation_0 <= 0.0 {
        return Err(Error::FitDegenerate(format!(
            "baseline deviation {deviation_0} is not positive"
        )));
    }
    for &(k, d) in deviation_series {
        if d <= 0.0 {
            return Err(Error::FitDegenerate(format!(
                "deviation at k={k} is {d}, not positive"
            )));
        }
    }
    let sse = |alpha: f64| -> f64 {
        deviation_series
            .iter()
            .map(|&(k, d)| {
                let model = deviation_0 * (-alpha * f64::from(k)).exp();
                (d - model) * (d - model)
            })
            .sum()
    };
    // Log-linear initialisation: slope of ln d against k through ln d0.
    let mut num = 0.0;
    let mut den = 0.0;
    for &(k, d) in deviation_series {
        let x = f64::from(k);
        num += x * (deviation_0.ln() - d.ln());
        den += x * x;
    }
    let init = (num / den).clamp(0.0, EXP_FIT_ALPHA_MAX);

    let global = golden_section_min(sse, 0.0, EXP_FIT_ALPHA_MAX, EXP_FIT_TOL);
    let local_lo = (init - 1.0).max(0.0);
    let local_hi = (init + 1.0).min(EXP_FIT_ALPHA_MAX);
    let local = golden_section_min(sse, local_lo, local_hi, EXP_FIT_TOL);
    Ok(if sse(local) < sse(global) { local } else { global })
}

/// Exponential extrapolation of the per-mask deviation back to k = 0.
///
/// Stage 1 fits the shared decay rate; stage 2 recovers each mask's
/// prefactor from the linear-in-prefactor closed form
/// `lambda = sum y_i e^(-alpha x_i) / sum e^(-2 alpha x_i)` applied to
/// `y_i = |pR_i(s) - p_unif|`. The mitigated value is `|p_unif + lambda|`.
pub fn extrapolate_exponential(
    tables: &[&RecycledTable],
    deviation_0: f64,
) -> Result<MitigationReport> {
    let (first, points) = validate_table_family(tables)?;
    let p_unif = uniform_probability(first.modes(), first.photons());
    let series: Vec<(u32, f64)> = tables
        .iter()
        .map(|t| (t.k(), t.abs_avg_deviation()))
        .collect();
    let alpha = fit_exponential_decay(&series, deviation_0)?;

    let weights: Vec<f64> = tables
        .iter()
        .map(|t| (-alpha * f64::from(t.k())).exp())
        .collect();
    let weight_sq: f64 = weights.iter().map(|w| w * w).sum();

    let mut values = BTreeMap::new();
    let mut prefactors = BTreeMap::new();
    for mask in first.entries().keys() {
        let weighted: f64 = tables
            .iter()
            .zip(&weights)
            .map(|(t, w)| (t.get(mask) - p_unif).abs() * w)
            .sum();
        let prefactor = weighted / weight_sq;
        prefactors.insert(*mask, prefactor);
        values.insert(*mask, (p_unif + prefactor).abs());
    }
    Ok(report_from_values(
        MitigationMethod::ExtrapolateExponential,
        (first.modes(), first.photons()),
        values,
        MethodParams::ExtrapolateExponential {
            points,
            baseline_deviation: deviation_0,
            decay_rate: alpha,
            prefactors,
        },
        digest_tables(tables),
    ))
}

/// Rescale the mitigated values by their total mass. The l1 distance between
/// the normalized and raw vectors is exactly |1 - norm_mass|.
pub fn normalize_report(report: &MitigationReport) -> Result<MitigationReport> {
    if report.norm_mass <= 0.0 {
        return Err(Error::CannotNormalize);
    }
    let normalized = report
        .values
        .iter()
        .map(|(mask, v)| (*mask, v / report.norm_mass))
        .collect();
    Ok(MitigationReport {
        normalized: Some(normalized),
        ..report.clone()
    })
}
