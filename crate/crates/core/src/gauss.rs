//! Moments of squared permanents of i.i.d. complex Gaussian matrices and
//! the central-limit probe for sums of them.
//!
//! `|Per(G)|^2` for G with entries from the standard complex normal has mean
//! n! and second moment (n+1)! n!, so a centred sum of N draws has the
//! analytic variance `sigma_N^2 = N n (n!)^2`. The probe histograms
//! `S_N / sigma_N` across trials and measures its distance to the standard
//! normal with a direct Kolmogorov-Smirnov statistic; polynomially sized
//! sums stay visibly skewed while classical CLT cases converge.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde_json::json;

use crate::error::{Error, Result};
use crate::permanent::permanent;
use crate::rng;

/// Size cap for Gaussian permanent sampling (2^n cost per draw).
pub const MAX_GAUSSIAN_PERMANENT_SIZE: u32 = 12;

/// Draw `count` values of |Per(G)|^2 for n x n complex Gaussian G.
pub fn sample_gaussian_permanent(n: u32, count: u64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || n > MAX_GAUSSIAN_PERMANENT_SIZE {
        return Err(Error::Capacity {
            what: "gaussian permanent size",
            requested: n as u128,
            limit: MAX_GAUSSIAN_PERMANENT_SIZE as u128,
        });
    }
    let size = n as usize;
    let mut gen = rng::stream(seed);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        // Entries from the standard complex normal N_C(0, 1).
        let g = Array2::from_shape_fn((size, size), |_| {
            rng::complex_standard_normal(&mut gen)
        });
        out.push(permanent(g.view())?.norm_sqr());
    }
    Ok(out)
}

/// Exact factorial as f64 (n <= 20 stays exact in the integer domain).
fn factorial(n: u32) -> f64 {
    (1..=u64::from(n)).map(|i| i as f64).product()
}

/// Empirical moments E(|Per(G)|^(2t)) with analytic references where known:
/// t = 1 gives n!, t = 2 gives (n+1)! n!.
#[derive(Debug, Clone)]
pub struct PermanentMomentRun {
    pub n: u32,
    pub trials: u64,
    pub seed: u64,
    pub moments: BTreeMap<u32, f64>,
    pub reference: BTreeMap<u32, Option<f64>>,
}

pub fn permanent_moment_run(
    n: u32,
    trials: u64,
    seed: u64,
    orders: &[u32],
) -> Result<PermanentMomentRun> {
    if trials == 0 {
        return Err(Error::Argument("need at least one trial".to_string()));
    }
    let samples = sample_gaussian_permanent(n, trials, seed)?;
    let mut moments = BTreeMap::new();
    let mut reference = BTreeMap::new();
    for &t in orders {
        let mean = samples
            .iter()
            .map(|x| x.powi(t as i32))
            .sum::<f64>()
            / trials as f64;
        moments.insert(t, mean);
        let analytic = match t {
            1 => Some(factorial(n)),
            2 => Some(factorial(n + 1) * factorial(n)),
            _ => None,
        };
        reference.insert(t, analytic);
    }
    Ok(PermanentMomentRun {
        n,
        trials,
        seed,
        moments,
        reference,
    })
}

/// Lower-bound factor beta(r)^n / N^(r/2 - 1) on the Lyapunov ratio for
/// centred squared-permanent sums, with beta(r) = (r!)^2 / r^r.
///
/// Conjecture-based: the moment growth behind it is conjectural for r > 2.
pub fn lyapunov_ratio_lower_bound(n: u32, sum_size: u64, order: u32) -> Result<f64> {
    if order <= 2 {
        return Err(Error::Argument(format!(
            "lyapunov order must exceed 2, got {order}"
        )));
    }
    if sum_size == 0 {
        return Err(Error::Argument("sum size must be positive".to_string()));
    }
    let beta = factorial(order) * factorial(order) / f64::from(order).powi(order as i32);
    Ok(beta.powi(n as i32) / (sum_size as f64).powf(f64::from(order) / 2.0 - 1.0))
}

/// Abramowitz-Stegun 7.1.26 rational approximation of erf, absolute error
/// below 1.5e-7.
pub fn erf_approx(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF via the erf approximation.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf_approx(x / std::f64::consts::SQRT_2))
}

/// Kolmogorov-Smirnov sup distance between the sample and the standard
/// normal, computed directly on the sorted sample.
pub fn ks_distance_standard_normal(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("KS distance needs samples".to_string()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let count = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = standard_normal_cdf(x);
        let hi = (i + 1) as f64 / count - cdf;
        let lo = cdf - i as f64 / count;
        sup = sup.max(hi.max(lo));
    }
    Ok(sup)
}

/// Asymptotic two-sided KS critical value at level `alpha` for `count`
/// samples: sqrt(-ln(alpha/2) / 2) / sqrt(count).
pub fn ks_critical_value(alpha: f64, count: usize) -> f64 {
    ((-(alpha / 2.0).ln()) / 2.0).sqrt() / (count as f64).sqrt()
}

/// A histogram bin of the normalised sum.
#[derive(Debug, Clone, Copy)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

/// Result of the CLT probe for sums of centred squared permanents.
#[derive(Debug, Clone)]
pub struct CltProbe {
    pub n: u32,
    /// Number of centred draws per sum.
    pub sum_size: u64,
    pub trials: u64,
    pub seed: u64,
    pub ks_distance: f64,
    pub skewness: f64,
    pub histogram: Vec<HistogramBin>,
}

impl CltProbe {
    /// CSV export: `bin_left,bin_right,count` plus a JSON summary.
    pub fn write_files(&self, csv_path: &Path, summary_path: &Path) -> Result<()> {
        let mut csv = String::from("bin_left,bin_right,count\n");
        for bin in &self.histogram {
            csv.push_str(&format!("{},{},{}\n", bin.left, bin.right, bin.count));
        }
        fs::write(csv_path, csv)?;
        let summary = json!({
            "n": self.n,
            "N": self.sum_size,
            "trials": self.trials,
            "seed": self.seed,
            "ks": self.ks_distance,
            "skewness": self.skewness,
        });
        fs::write(summary_path, serde_json::to_string_pretty(&summary)?)?;
        Ok(())
    }
}

/// Draw `trials` sums of `sum_size` centred values Y = |Per(G)|^2 - n!,
/// normalise by the analytic sigma_N = sqrt(N n (n!)^2), and report the
/// histogram, KS distance to the standard normal, and sample skewness.
pub fn clt_probe(n: u32, sum_size: u64, trials: u64, seed: u64, bins: usize) -> Result<CltProbe> {
    if trials == 0 || bins == 0 {
        return Err(Error::Argument(
            "clt probe needs positive trials and bins".to_string(),
        ));
    }
    if sum_size == 0 {
        return Err(Error::Argument("sum size must be positive".to_string()));
    }
    let mean = factorial(n);
    let sigma = ((sum_size as f64) * f64::from(n)).sqrt() * mean;

    let mut normalised = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let draws = sample_gaussian_permanent(n, sum_size, rng::derive_seed(seed, trial))?;
        let sum: f64 = draws.iter().map(|x| x - mean).sum();
        normalised.push(sum / sigma);
    }

    let ks_distance = ks_distance_standard_normal(&normalised)?;

    let count = trials as f64;
    let sample_mean = normalised.iter().sum::<f64>() / count;
    let m2 = normalised
        .iter()
        .map(|x| (x - sample_mean).powi(2))
        .sum::<f64>()
        / count;
    let m3 = normalised
        .iter()
        .map(|x| (x - sample_mean).powi(3))
        .sum::<f64>()
        / count;
    let skewness = m3 / m2.powf(1.5);

    let lo = normalised.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = normalised.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            left: lo + width * i as f64,
            right: lo + width * (i + 1) as f64,
            count: 0,
        })
        .collect();
    for &x in &normalised {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        histogram[idx].count += 1;
    }

    Ok(CltProbe {
        n,
        sum_size,
        trials,
        seed,
        ks_distance,
        skewness,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_mean_is_one() {
        // n = 1: |g|^2 is exponential with mean 1.
        let samples = sample_gaussian_permanent(1, 100_000, 5).unwrap();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn first_moment_is_factorial() {
        let run = permanent_moment_run(4, 20_000, 11, &[1]).unwrap();
        let mean = run.moments[&1];
        assert!((mean - 24.0).abs() / 24.0 < 0.05, "E|Per|^2 = {mean}");
        assert_eq!(run.reference[&1], Some(24.0));
    }

    #[test]
    fn second_moment_matches_analytic() {
        let run = permanent_moment_run(3, 20_000, 13, &[2]).unwrap();
        let got = run.moments[&2];
        // (n+1)! n! = 24 * 6 = 144 at n = 3.
        assert!((got - 144.0).abs() / 144.0 < 0.10, "E|Per|^4 = {got}");
        assert_eq!(run.reference[&2], Some(144.0));
    }

    #[test]
    fn size_cap() {
        match sample_gaussian_permanent(13, 1, 0) {
            Err(Error::Capacity { .. }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn lyapunov_bound_values() {
        // beta(3) = 36 / 27 = 4/3.
        let one_n = lyapunov_ratio_lower_bound(1, 1, 3).unwrap();
        assert!((one_n - 4.0 / 3.0).abs() < 1e-12);
        // N = beta^(2n/(r-2)) puts the ratio at exactly 1.
        let n = 4u32;
        let r = 4u32;
        let beta = factorial(r) * factorial(r) / f64::from(r).powi(r as i32);
        let fixed = beta.powf(2.0 * f64::from(n) / f64::from(r - 2));
        let ratio = lyapunov_ratio_lower_bound(n, fixed.round() as u64, r).unwrap();
        // Rounding of N moves the ratio slightly; check against the exact N.
        let exact = beta.powi(n as i32) / fixed.powf(f64::from(r) / 2.0 - 1.0);
        assert!((exact - 1.0).abs() < 1e-12);
        assert!(ratio > 0.0);
        // Fixed N = n^3, r = 3: (4/3)^n eventually beats n^(3/2), so the
        // bound diverges; the growth term wins the tug-of-war from n = 6 on.
        let small = lyapunov_ratio_lower_bound(3, 27, 3).unwrap();
        let large = lyapunov_ratio_lower_bound(60, 60u64.pow(3), 3).unwrap();
        assert!(large > 100.0 * small, "{small} -> {large}");
        let mut last = lyapunov_ratio_lower_bound(6, 216, 3).unwrap();
        for n in 7..=20u32 {
            let v = lyapunov_ratio_lower_bound(n, u64::from(n).pow(3), 3).unwrap();
            assert!(v > last, "n={n}: {v} after {last}");
            last = v;
        }
    }

    #[test]
    fn lyapunov_rejects_low_order() {
        assert!(lyapunov_ratio_lower_bound(3, 10, 2).is_err());
    }

    #[test]
    fn erf_matches_known_values() {
        // Reference values to 1e-7.
        let cases = [
            (0.0, 0.0),
            (0.5, 0.5204999),
            (1.0, 0.8427008),
            (2.0, 0.9953223),
            (-1.0, -0.8427008),
        ];
        for (x, want) in cases {
            assert!((erf_approx(x) - want).abs() < 1e-6, "erf({x})");
        }
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((standard_normal_cdf(1.96) - 0.9750021).abs() < 1e-5);
    }

    #[test]
    fn ks_of_true_normals_is_small() {
        // Gaussian draws via Box-Muller on the deterministic stream.
        let mut gen = rng::stream(3);
        let samples: Vec<f64> = (0..20_000)
            .map(|_| {
                let z = rng::complex_standard_normal(&mut gen);
                z.re * std::f64::consts::SQRT_2
            })
            .collect();
        let d = ks_distance_standard_normal(&samples).unwrap();
        assert!(d < ks_critical_value(0.01, samples.len()), "d = {d}");
    }

    #[test]
    fn clt_probe_is_deterministic() {
        let a = clt_probe(2, 8, 400, 7, 40).unwrap();
        let b = clt_probe(2, 8, 400, 7, 40).unwrap();
        assert_eq!(a.ks_distance, b.ks_distance);
        assert_eq!(a.skewness, b.skewness);
    }

    #[test]
    fn histogram_counts_cover_all_trials() {
        let probe = clt_probe(2, 8, 500, 9, 25).unwrap();
        let total: u64 = probe.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, 500);
    }

    #[test]
    fn probe_files_write() {
        let probe = clt_probe(1, 16, 200, 2, 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("hist.csv");
        let summary = dir.path().join("summary.json");
        probe.write_files(&csv, &summary).unwrap();
        let text = fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n"));
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
        assert_eq!(value["trials"], 200);
    }
}
