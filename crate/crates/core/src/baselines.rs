//! Baselines: postselection and zero-noise (Richardson) extrapolation.
//!
//! Postselection keeps only shots where every photon arrived (the k = 0
//! sector). The ZNE machinery estimates a zero-loss marginal from values
//! measured at several loss rates by solving a structured linear system:
//!
//! * `loss_basis` — the design matrix is L = D W with D diagonal in
//!   (1-eta_i)^n and W Vandermonde in t_i = eta_i / (1 - eta_i);
//! * `eta_power_basis` — plain Vandermonde in eta_i;
//! * `richardson` — classic Richardson weights over noise multipliers
//!   c_i = eta_i / eta_0.
//!
//! All three reduce to extrapolation weights obtained from an O(n^2)
//! Vandermonde dual solve with unit first-coordinate right-hand side (no
//! general matrix inversion). The conditioning of these weights is what the
//! error upper bounds and the violation experiments quantify.

use rand::Rng;

use crate::distribution::{ProbabilityTable, TableKind};
use crate::error::{Error, Result};
use crate::loss::SampleLedger;
use crate::rng;

/// Postselected estimates: sector-0 relative frequencies as an estimated
/// n-photon table.
pub fn postselect_estimates(ledger: &SampleLedger) -> Result<ProbabilityTable> {
    let kept = ledger.sector_total(0);
    if kept == 0 {
        return Err(Error::EmptySector { k: 0 });
    }
    let entries = ledger
        .counts()
        .iter()
        .filter(|((k, _), _)| *k == 0)
        .map(|((_, mask), &count)| (*mask, count as f64 / kept as f64))
        .collect();
    ProbabilityTable::new(
        ledger.modes(),
        ledger.photons(),
        TableKind::Estimated,
        entries,
    )
}

/// Extrapolation basis for the ZNE system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZneBasis {
    /// Powers of eta/(1-eta) against the diagonal (1-eta)^n factor;
    /// grid length n - c + 1.
    LossBasis,
    /// Plain powers of eta; grid length n + 1.
    EtaPowerBasis,
    /// Richardson weights over c_i = eta_i / eta_0; grid length n + 1 and
    /// eta_0 > 0.
    Richardson,
}

impl ZneBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZneBasis::LossBasis => "loss_basis",
            ZneBasis::EtaPowerBasis => "eta_power_basis",
            ZneBasis::Richardson => "richardson",
        }
    }
}

/// Configuration of one ZNE extrapolation problem.
#[derive(Debug, Clone)]
pub struct ZneConfig {
    photons: u32,
    marginal_photons: u32,
    etas: Vec<f64>,
    eps_max: f64,
    basis: ZneBasis,
}

impl ZneConfig {
    pub fn new(
        photons: u32,
        marginal_photons: u32,
        etas: Vec<f64>,
        eps_max: f64,
        basis: ZneBasis,
    ) -> Result<Self> {
        if marginal_photons > photons {
            return Err(Error::Argument(format!(
                "marginal photon count {marginal_photons} exceeds total {photons}"
            )));
        }
        if !(eps_max > 0.0 && eps_max <= 1.0) {
            return Err(Error::Argument(format!("eps_max {eps_max} outside (0, 1]")));
        }
        let required = match basis {
            ZneBasis::LossBasis => (photons - marginal_photons + 1) as usize,
            ZneBasis::EtaPowerBasis | ZneBasis::Richardson => photons as usize + 1,
        };
        if etas.len() != required {
            return Err(Error::Argument(format!(
                "{} needs a grid of {required} loss values, got {}",
                basis.as_str(),
                etas.len()
            )));
        }
        for window in etas.windows(2) {
            if window[1] <= window[0] {
                return Err(Error::SingularSystem(format!(
                    "loss grid must be strictly increasing, got {} then {}",
                    window[0], window[1]
                )));
            }
        }
        if etas.iter().any(|&e| !(0.0..1.0).contains(&e)) {
            return Err(Error::Argument("loss grid values must be in [0, 1)".to_string()));
        }
        if basis == ZneBasis::Richardson && etas[0] <= 0.0 {
            return Err(Error::Argument(
                "richardson noise multipliers need eta_0 > 0".to_string(),
            ));
        }
        Ok(Self {
            photons,
            marginal_photons,
            etas,
            eps_max,
            basis,
        })
    }

    /// Equally spaced grid from `eta_lo` to `eta_hi`, sized for the basis.
    pub fn equally_spaced(
        photons: u32,
        marginal_photons: u32,
        eta_lo: f64,
        eta_hi: f64,
        eps_max: f64,
        basis: ZneBasis,
    ) -> Result<Self> {
        let count = match basis {
            ZneBasis::LossBasis => (photons - marginal_photons + 1) as usize,
            ZneBasis::EtaPowerBasis | ZneBasis::Richardson => photons as usize + 1,
        };
        if count < 2 {
            return Err(Error::Argument("grid needs at least two points".to_string()));
        }
        let step = (eta_hi - eta_lo) / (count - 1) as f64;
        let etas = (0..count).map(|i| eta_lo + step * i as f64).collect();
        Self::new(photons, marginal_photons, etas, eps_max, basis)
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn marginal_photons(&self) -> u32 {
        self.marginal_photons
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn basis(&self) -> ZneBasis {
        self.basis
    }
}

/// Solve the dual Vandermonde system `sum_i w_i x_i^j = q_j` (j = 0..N-1)
/// with the classic O(n^2) master-polynomial recurrences.
pub fn vandermonde_dual_solve(nodes: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n == 0 || rhs.len() != n {
        return Err(Error::Argument(
            "vandermonde solve needs matching non-empty nodes and rhs".to_string(),
        ));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if nodes[i] == nodes[j] {
                return Err(Error::SingularSystem(format!(
                    "repeated node {} in the extrapolation grid",
                    nodes[i]
                )));
            }
        }
    }
    if n == 1 {
        return Ok(vec![rhs[0]]);
    }
    // Coefficients of the master polynomial prod_i (x - x_i), built
    // incrementally; c[j] holds the coefficient of x^j alongside the
    // implicit leading 1.
    let mut c = vec![0.0f64; n];
    c[n - 1] = -nodes[0];
    for i in 1..n {
        let xx = -nodes[i];
        for j in (n - 1 - i)..(n - 1) {
            let bump = xx * c[j + 1];
            c[j] += bump;
        }
        c[n - 1] += xx;
    }
    let mut w = vec![0.0f64; n];
    for i in 0..n {
        let xi = nodes[i];
        // Synthetic division: b tracks the deflated polynomial, t its value
        // (the derivative of the master polynomial at x_i), s the folded rhs.
        let mut b = 1.0;
        let mut t = 1.0;
        let mut s = rhs[n - 1];
        for k in (1..n).rev() {
            b = c[k] + xi * b;
            s += rhs[k - 1] * b;
            t = xi * t + b;
        }
        if t == 0.0 || !t.is_finite() {
            return Err(Error::SingularSystem(format!(
                "repeated node {xi} in the extrapolation grid"
            )));
        }
        w[i] = s / t;
    }
    Ok(w)
}

/// Richardson weights for noise multipliers `c`: the interpolation-at-zero
/// weights `gamma_i = prod_{j != i} c_j / (c_j - c_i)`, written in the
/// product form.
pub fn richardson_weights(multipliers: &[f64]) -> Result<Vec<f64>> {
    let n = multipliers.len();
    let mut gammas = Vec::with_capacity(n);
    for i in 0..n {
        let mut gamma = 1.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let gap = multipliers[j] - multipliers[i];
            if gap == 0.0 {
                return Err(Error::SingularSystem(format!(
                    "repeated noise multiplier {}",
                    multipliers[i]
                )));
            }
            gamma *= multipliers[j] / gap;
        }
        gammas.push(gamma);
    }
    Ok(gammas)
}

/// The linear weights of the configured extrapolation: the zero-loss
/// estimate is `sum_i w_i * p_{eta_i}`.
pub fn extrapolation_weights(cfg: &ZneConfig) -> Result<Vec<f64>> {
    let n = cfg.etas.len();
    let mut unit = vec![0.0; n];
    unit[0] = 1.0;
    match cfg.basis {
        ZneBasis::LossBasis => {
            // L = D W, so the first row of L^-1 is the first row of W^-1
            // scaled by the inverse diagonal.
            let nodes: Vec<f64> = cfg.etas.iter().map(|&e| e / (1.0 - e)).collect();
            let mut w = vandermonde_dual_solve(&nodes, &unit)?;
            for (wi, &eta) in w.iter_mut().zip(&cfg.etas) {
                *wi /= (1.0 - eta).powi(cfg.photons as i32);
            }
            Ok(w)
        }
        ZneBasis::EtaPowerBasis => vandermonde_dual_solve(&cfg.etas, &unit),
        ZneBasis::Richardson => {
            let multipliers: Vec<f64> = cfg.etas.iter().map(|&e| e / cfg.etas[0]).collect();
            richardson_weights(&multipliers)
        }
    }
}

/// Richardson/Vandermonde extrapolation of the zero-loss marginal from
/// noisy values measured on the configured grid.
pub fn richardson_mitigate(noisy_marginals: &[f64], cfg: &ZneConfig) -> Result<f64> {
    if noisy_marginals.len() != cfg.etas.len() {
        return Err(Error::Argument(format!(
            "expected {} noisy marginals, got {}",
            cfg.etas.len(),
            noisy_marginals.len()
        )));
    }
    let weights = extrapolation_weights(cfg)?;
    Ok(weights
        .iter()
        .zip(noisy_marginals)
        .map(|(w, p)| w * p)
        .sum())
}

/// Reconstruction of the loss-basis design matrix both directly and through
/// its D.W factorisation; used to pin the factorised solve against the
/// textbook definition.
pub fn loss_basis_design_matrices(cfg: &ZneConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if cfg.basis != ZneBasis::LossBasis {
        return Err(Error::Argument(
            "design matrices are defined for the loss basis".to_string(),
        ));
    }
    let n = cfg.photons as i32;
    let cols = cfg.etas.len();
    let direct: Vec<Vec<f64>> = cfg
        .etas
        .iter()
        .map(|&eta| {
            (0..cols)
                .map(|j| eta.powi(j as i32) * (1.0 - eta).powi(n - j as i32))
                .collect()
        })
        .collect();
    let factored: Vec<Vec<f64>> = cfg
        .etas
        .iter()
        .map(|&eta| {
            let d = (1.0 - eta).powi(n);
            let t = eta / (1.0 - eta);
            (0..cols).map(|j| d * t.powi(j as i32)).collect()
        })
        .collect();
    Ok((direct, factored))
}

/// Upper bound M(E_extrap) on the extrapolation error for the configured
/// basis, from the Vandermonde inverse-norm product bound.
pub fn zne_error_upper_bound(cfg: &ZneConfig) -> f64 {
    match cfg.basis {
        ZneBasis::LossBasis => {
            let nodes: Vec<f64> = cfg.etas.iter().map(|&e| e / (1.0 - e)).collect();
            let eta_top = *cfg.etas.last().expect("validated non-empty grid");
            let diag = (1.0 - eta_top).powi(cfg.photons as i32).recip();
            cfg.eps_max * diag * vandermonde_inverse_norm_bound(&nodes)
        }
        ZneBasis::EtaPowerBasis | ZneBasis::Richardson => {
            cfg.eps_max * vandermonde_inverse_norm_bound(&cfg.etas)
        }
    }
}

/// max_i prod_{j != i} (1 + x_i) / |x_i - x_j|, the classical bound on the
/// infinity norm of an inverse Vandermonde matrix with nonnegative nodes.
fn vandermonde_inverse_norm_bound(nodes: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..nodes.len() {
        let mut product = 1.0;
        for j in 0..nodes.len() {
            if j != i {
                product *= (1.0 + nodes[i]) / (nodes[i] - nodes[j]).abs();
            }
        }
        best = best.max(product);
    }
    best
}

/// Which threshold the violation experiment compares E_extrap against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationComparator {
    /// eps_max / (1 - eta_0)^n — the form used in the figure experiments.
    PlainPower,
    /// eps_max / (1 - eta_0)^(n/2) — the square-root form of the no-go bound.
    SqrtPower,
}

impl ViolationComparator {
    fn threshold(&self, eps_max: f64, eta_0: f64, photons: u32) -> f64 {
        let base = (1.0 - eta_0).powi(photons as i32);
        match self {
            ViolationComparator::PlainPower => eps_max / base,
            ViolationComparator::SqrtPower => eps_max / base.sqrt(),
        }
    }
}

/// The violation predicate: the strict condition "extrapolation error above
/// the postselection floor" fails when `extrap_error <= threshold`. In the
/// degenerate all-zero-error draw the extrapolation error is 0, so every
/// trial violates.
pub fn extrapolation_violates(extrap_error: f64, threshold: f64) -> bool {
    extrap_error <= threshold
}

/// Count the trials in which the extrapolation error fails to exceed the
/// postselection threshold, over uniform error draws in [-eps_max, eps_max].
///
/// Deterministic in `seed`; trials use derived per-trial streams.
pub fn violation_experiment(
    cfg: &ZneConfig,
    trials: u64,
    seed: u64,
    comparator: ViolationComparator,
) -> Result<u64> {
    if trials == 0 {
        return Err(Error::Argument("need at least one trial".to_string()));
    }
    let weights = extrapolation_weights(cfg)?;
    let threshold = comparator.threshold(cfg.eps_max, cfg.etas[0], cfg.photons);
    let mut violations = 0;
    for trial in 0..trials {
        let mut gen = rng::derived_stream(seed, trial);
        let extrap_error: f64 = weights
            .iter()
            .map(|w| {
                let eps: f64 = gen.random_range(-cfg.eps_max..=cfg.eps_max);
                w * eps
            })
            .sum::<f64>()
            .abs();
        if extrapolation_violates(extrap_error, threshold) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// One row of the violation sweep.
#[derive(Debug, Clone, Copy)]
pub struct ViolationSweepRow {
    pub n_minus_c: u32,
    pub photons: u32,
    pub violations: u64,
    pub trials: u64,
}

/// Figure-style violation sweep over n - c for the loss basis: for each
/// value v, the photon number is the smallest n with n - ceil(n/3) = v, the
/// grid is v + 1 equally spaced points, and the plain-power comparator is
/// used.
pub fn violation_sweep(
    n_minus_c_range: std::ops::RangeInclusive<u32>,
    eta_lo: f64,
    eta_hi: f64,
    eps_max: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<ViolationSweepRow>> {
    let mut rows = Vec::new();
    for v in n_minus_c_range {
        let photons = (v..=3 * v + 3)
            .find(|&n| n - n.div_ceil(3) == v)
            .ok_or_else(|| Error::Argument(format!("no photon count realises n-c={v}")))?;
        let c = photons - v;
        let cfg = ZneConfig::equally_spaced(
            photons,
            c,
            eta_lo,
            eta_hi,
            eps_max,
            ZneBasis::LossBasis,
        )?;
        let violations =
            violation_experiment(&cfg, trials, rng::derive_seed(seed, u64::from(v)), ViolationComparator::PlainPower)?;
        rows.push(ViolationSweepRow {
            n_minus_c: v,
            photons,
            violations,
            trials,
        });
    }
    Ok(rows)
}

/// CSV for the violation sweep: `n_minus_c,violations,trials`.
pub fn violation_sweep_csv(rows: &[ViolationSweepRow]) -> String {
    let mut out = String::from("n_minus_c,violations,trials\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.n_minus_c, row.violations, row.trials
        ));
    }
    out
}
