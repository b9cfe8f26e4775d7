//! Analytic bound and sampling-regime calculators.
//!
//! These are pure formula evaluators. Big-O envelopes are concretised with
//! the worked convention: confidence 1 - delta with delta = m^-n gives the
//! Hoeffding prefactor sqrt((ln 2 - ln delta) / 2) = sqrt((ln 2 + n ln m)/2),
//! and the interference bias scale defaults to eps_bias = m^-2k.
//!
//! The linear-solving regime pair ([`linsolve_regime_max_samples`] and
//! [`regime_inequality_check`] for the solve methods) shares one algebra:
//! the closed-form sample bound comes from comparing squared error terms
//! (9 A / N + B^2 <= C / N), so the check evaluates exactly that comparison
//! and flips at the closed-form N_max.

use crate::comb::{binomial_f64, uniform_probability};
use crate::error::{Error, Result};

/// Parameters of a sampling-regime query.
#[derive(Debug, Clone, Copy)]
pub struct RegimeQuery {
    pub modes: u32,
    pub photons: u32,
    pub lost: u32,
    pub eta: f64,
    pub n_tot: f64,
    /// Confidence parameter delta; both statistical envelopes hold with
    /// probability 1 - delta.
    pub delta: f64,
    /// Interference bias scale.
    pub eps_bias: f64,
    /// Optional empirical bound on the largest ideal probability.
    pub p_upper: Option<f64>,
    /// Points used by the extrapolation regime check.
    pub fit_points: u32,
}

impl RegimeQuery {
    /// Defaults: delta = m^-n, eps_bias = m^-2k, fit_points = min(3, n-1).
    pub fn new(modes: u32, photons: u32, lost: u32, eta: f64, n_tot: f64) -> Result<Self> {
        if photons == 0 || photons > modes {
            return Err(Error::Argument(format!(
                "need 1 <= n <= m, got n={photons}, m={modes}"
            )));
        }
        if lost == 0 || lost >= photons {
            return Err(Error::Argument(format!(
                "need 1 <= k <= n-1, got k={lost}"
            )));
        }
        if !(0.0 < eta && eta < 1.0) {
            return Err(Error::Argument(format!("eta {eta} outside (0, 1)")));
        }
        let m = f64::from(modes);
        Ok(Self {
            modes,
            photons,
            lost,
            eta,
            n_tot,
            delta: m.powi(-(photons as i32)),
            eps_bias: m.powi(-2 * lost as i32),
            p_upper: None,
            fit_points: 3.min(photons - 1).max(1),
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_eps_bias(mut self, eps_bias: f64) -> Self {
        self.eps_bias = eps_bias;
        self
    }

    pub fn with_p_upper(mut self, p_upper: f64) -> Self {
        self.p_upper = Some(p_upper);
        self
    }

    /// Hoeffding prefactor sqrt((ln 2 - ln delta) / 2).
    pub fn prefactor(&self) -> f64 {
        ((std::f64::consts::LN_2 - self.delta.ln()) / 2.0).sqrt()
    }
}

/// A bound value together with a vacuity flag (failure probabilities above
/// one carry no information and are clamped).
#[derive(Debug, Clone, Copy)]
pub struct BoundValue {
    pub value: f64,
    pub vacuous: bool,
}

/// Which concentration inequality bounds the interference deviation.
#[derive(Debug, Clone, Copy)]
pub enum ChebyshevVariant {
    /// Haar-random circuits: failure probability n p_unif^2 / eps^2.
    Haar,
    /// Arbitrary circuits: p_unif / eps^2.
    Arbitrary,
    /// Arbitrary circuits with an empirical max-probability bound p_upper at
    /// confidence 1 - delta: p_unif p_upper / eps^2 + delta (1 - ...).
    BhatiaDavis { p_upper: f64, delta: f64 },
}

/// Failure probability that an interference term deviates from 1/C(m, n) by
/// at least `eps_bias`.
pub fn chebyshev_confidence(
    eps_bias: f64,
    modes: u32,
    photons: u32,
    variant: ChebyshevVariant,
) -> Result<BoundValue> {
    if eps_bias <= 0.0 {
        return Err(Error::Argument(format!(
            "bias scale must be positive, got {eps_bias}"
        )));
    }
    let p_unif = uniform_probability(modes, photons);
    let raw = match variant {
        ChebyshevVariant::Haar => f64::from(photons) * p_unif * p_unif / (eps_bias * eps_bias),
        ChebyshevVariant::Arbitrary => p_unif / (eps_bias * eps_bias),
        ChebyshevVariant::BhatiaDavis { p_upper, delta } => {
            let core = p_unif * p_upper / (eps_bias * eps_bias);
            core + delta * (1.0 - core)
        }
    };
    Ok(BoundValue {
        value: raw.min(1.0),
        vacuous: raw >= 1.0,
    })
}

/// Deterministic bias ceiling 4 e^(-0.000002 n) for the structured-unitary
/// class (the `h_inf / norm2 << 1` hypothesis); conjectural and
/// class-conditional, exposed as a calculator only.
pub fn exp_barrier_bound(photons: u64) -> f64 {
    4.0 * (-0.000002 * photons as f64).exp()
}

/// Which statistical envelope to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorEnvelope {
    /// Postselected probability estimate.
    Postselect,
    /// Recycled probability estimate built from sector k.
    Recycled,
    /// Average absolute deviation estimate for sector k.
    DeviationEstimate,
}

/// Whether one probability uses the whole sector or the sector is split
/// across all C(m, n) estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeScope {
    SingleProbability,
    FullDistribution,
}

/// High-confidence statistical error envelope with explicit prefactors.
pub fn statistical_error_envelope(
    query: &RegimeQuery,
    which: ErrorEnvelope,
    scope: EnvelopeScope,
) -> f64 {
    let prefactor = query.prefactor();
    let split = match scope {
        EnvelopeScope::SingleProbability => 1.0,
        EnvelopeScope::FullDistribution => {
            binomial_f64(query.modes as u64, query.photons as u64)
        }
    };
    let n = query.photons;
    let keep = 1.0 - query.eta;
    match which {
        ErrorEnvelope::Postselect => {
            prefactor * (split / (keep.powi(n as i32) * query.n_tot)).sqrt()
        }
        ErrorEnvelope::Recycled => {
            let k = query.lost;
            let fan_out = binomial_f64((query.modes - n + k) as u64, k as u64);
            let sector = binomial_f64(n as u64, k as u64)
                * keep.powi((n - k) as i32)
                * query.eta.powi(k as i32);
            prefactor / fan_out * (split / (sector * query.n_tot)).sqrt()
        }
        ErrorEnvelope::DeviationEstimate => {
            // Chained form: sqrt(2 E_recycled) * p_unif^(1/4).
            let recycled = statistical_error_envelope(query, ErrorEnvelope::Recycled, scope);
            let p_unif = uniform_probability(query.modes, query.photons);
            (2.0 * recycled).sqrt() * p_unif.powf(0.25)
        }
    }
}

/// Result of the closed-form sample-budget evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RegimeBound {
    pub max_samples: f64,
    /// Set when the bracketed difference is nonpositive: no sample budget
    /// makes linear solving beat postselection at these parameters.
    pub empty: bool,
}

/// Closed-form ceiling on the total samples for which linear-solving
/// mitigation of a single probability beats postselection:
///
/// ```text
/// N_tot <= (ln 2 + n ln m) m^(4k) / (2 (C(m-n+k,k) - 1)^2)
///          * ( 1 / (9 (1-eta)^n)  -  1 / (C(n,k) (1-eta)^(n-k) eta^k) )
/// ```
pub fn linsolve_regime_max_samples(modes: u32, photons: u32, lost: u32, eta: f64) -> Result<RegimeBound> {
    RegimeQuery::new(modes, photons, lost, eta, 1.0)?;
    let m = f64::from(modes);
    let n = photons;
    let k = lost;
    let keep = 1.0 - eta;
    let log_term = std::f64::consts::LN_2 + f64::from(n) * m.ln();
    let fan_out = binomial_f64((modes - n + k) as u64, k as u64);
    let front = log_term * m.powi(4 * k as i32) / (2.0 * (fan_out - 1.0).powi(2));
    let sector = binomial_f64(n as u64, k as u64) * keep.powi((n - k) as i32) * eta.powi(k as i32);
    let bracket = 1.0 / (9.0 * keep.powi(n as i32)) - 1.0 / sector;
    if bracket <= 0.0 {
        return Ok(RegimeBound {
            max_samples: 0.0,
            empty: true,
        });
    }
    Ok(RegimeBound {
        max_samples: front * bracket,
        empty: false,
    })
}

/// Mitigation methods with a stated advantage-regime inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeMethod {
    LinSolve,
    LinSolveDependency,
    ExtrapolateLinear,
}

/// Evaluated sides of an advantage-regime inequality.
#[derive(Debug, Clone, Copy)]
pub struct RegimeCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate the advantage condition for `method` at the query point.
///
/// For the solve methods both sides are the squared-error comparison
/// `9 A / N + B^2 <= C / N` whose rearrangement is the closed-form sample
/// bound, with the bias term B doubled for the dependency variant. For
/// linear extrapolation the three-term form is evaluated directly:
/// `(n_d+1)/2 * (deviation statistical + bias) + recycled(k=1) <= postselect`,
/// in the full-distribution scope.
pub fn regime_inequality_check(query: &RegimeQuery, method: RegimeMethod) -> Result<RegimeCheck> {
    let prefactor = query.prefactor();
    let keep = 1.0 - query.eta;
    let n = query.photons;
    match method {
        RegimeMethod::LinSolve | RegimeMethod::LinSolveDependency => {
            let k = query.lost;
            let fan_out = binomial_f64((query.modes - n + k) as u64, k as u64);
            let sector = binomial_f64(n as u64, k as u64)
                * keep.powi((n - k) as i32)
                * query.eta.powi(k as i32);
            let stat_sq = prefactor * prefactor / sector;
            let bias_factor = if method == RegimeMethod::LinSolveDependency {
                2.0
            } else {
                1.0
            };
            let bias = 3.0 * bias_factor * (fan_out - 1.0) * query.eps_bias;
            let lhs = 9.0 * stat_sq / query.n_tot + bias * bias;
            let rhs = prefactor * prefactor / (keep.powi(n as i32) * query.n_tot);
            Ok(RegimeCheck {
                lhs,
                rhs,
                holds: lhs <= rhs,
            })
        }
        RegimeMethod::ExtrapolateLinear => {
            // Three-term form: (n_d+1)/2 times the gradient errors
            // (deviation-estimator statistical error at k = 0 plus the bias
            // scale) plus the k = 1 recycled term with its printed
            // n/(m-n+1) coefficient, against the postselection envelope.
            let points = f64::from(query.fit_points);
            let baseline_dev_stat = (2.0 * prefactor).sqrt()
                * (1.0 / (keep.powi(n as i32) * query.n_tot)).powf(0.25);
            let full = binomial_f64(query.modes as u64, n as u64);
            let recycled_term = prefactor * f64::from(n) / f64::from(query.modes - n + 1)
                * (full / (f64::from(n) * keep.powi(n as i32 - 1) * query.eta * query.n_tot))
                    .sqrt();
            let lhs =
                (points + 1.0) / 2.0 * (baseline_dev_stat + query.eps_bias) + recycled_term;
            let rhs = statistical_error_envelope(
                query,
                ErrorEnvelope::Postselect,
                EnvelopeScope::FullDistribution,
            );
            Ok(RegimeCheck {
                lhs,
                rhs,
                holds: lhs <= rhs,
            })
        }
    }
}
