//! Decoherence-induced limits and optimization of the internal gain.
//!
//! At zero frequency and without phase jitter the sensitivity is a quadratic
//! polynomial in `q`, so the optimum has a closed form:
//!
//! ```text
//! S_opt = 4 (eps_int + T_c eps_read / (eps_read beta + 1 - eps_read))
//! q_opt = T_c (1 - eps_read - beta eps_read) / (1 - eps_read + beta eps_read) - eps_int
//! ```
//!
//! For `beta -> inf` the optimum moves to `q = -q_th` (maximal amplification
//! of the signal quadrature) and `S_opt -> 4 eps_int`, independent of the
//! readout loss. [`gain_reconciliation_report`] compares this optimum with the
//! commonly quoted form `T_c (1 - 2 eps_read / (beta (1 - eps_read) - eps_read)) - eps_int`,
//! which does not minimize the sensitivity for nonzero readout loss.

mod sweep;

pub use sweep::{sweep, SweepOutcome, SweepParameter, SweepRow, SweepSpec};

use serde::{Deserialize, Serialize};

use crate::decoherence::{
    input_state_from_source, measured_sensitivity, DecoherenceChain, ExternalSqueezeSource,
    JitterModel,
};
use crate::minimize::{minimize_bounded, MinimizeOptions};
use crate::sensor::{
    check_fraction, sensitivity, CavityParams, InputQuadratureState, PhysicalScale,
};
use crate::{Error, Result};

/// Default search interval half-width in normalized gain.
pub const DEFAULT_GAIN_BOUND: f64 = 0.999;
/// Brent iteration budget.
pub const MAX_ITERATIONS: usize = 200;

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("{beta} must be >= 1"),
        })
    }
}

/// Minimal sensitivity over `q` for pure external squeezing `beta`, in
/// normalized units.
pub fn optimal_sensitivity_analytic(cav: &CavityParams, beta: f64, eps_read: f64) -> Result<f64> {
    check_beta(beta)?;
    check_fraction("eps_read", eps_read)?;
    let readout_term = if beta.is_infinite() {
        0.0
    } else {
        cav.transmission() * eps_read / (eps_read * beta + (1.0 - eps_read))
    };
    Ok(4.0 * (cav.internal_loss() + readout_term))
}

/// Internal gain minimizing the sensitivity for pure external squeezing.
pub fn optimal_gain_analytic(cav: &CavityParams, beta: f64, eps_read: f64) -> Result<f64> {
    check_beta(beta)?;
    check_fraction("eps_read", eps_read)?;
    let tc = cav.transmission();
    if beta.is_infinite() {
        let ratio = if eps_read > 0.0 { -1.0 } else { 1.0 };
        return Ok(tc * ratio - cav.internal_loss());
    }
    let kept = 1.0 - eps_read;
    let lost = beta * eps_read;
    Ok(tc * (kept - lost) / (kept + lost) - cav.internal_loss())
}

/// The optimal-gain expression in the form `T_c (1 - 2 eps_read / (beta (1 - eps_read) - eps_read)) - eps_int`.
/// Kept only for comparison; it agrees with [`optimal_gain_analytic`] at zero
/// readout loss and nowhere else.
pub fn printed_optimal_gain(cav: &CavityParams, beta: f64, eps_read: f64) -> Result<f64> {
    check_beta(beta)?;
    check_fraction("eps_read", eps_read)?;
    let denom = beta * (1.0 - eps_read) - eps_read;
    if eps_read > 0.0 && denom == 0.0 {
        return Err(Error::Singular {
            q: f64::NAN,
            omega: 0.0,
        });
    }
    let correction = if eps_read == 0.0 {
        0.0
    } else {
        2.0 * eps_read / denom
    };
    Ok(cav.transmission() * (1.0 - correction) - cav.internal_loss())
}

/// The internal-loss limit `4 eps_int`, optionally in physical units.
pub fn fundamental_limit(cav: &CavityParams, scale: Option<&PhysicalScale>) -> f64 {
    let normalized = 4.0 * cav.internal_loss();
    match scale {
        Some(s) => normalized * s.prefactor(),
        None => normalized,
    }
}

/// Search interval for the internal gain `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SearchInterval {
    /// `g in [-bound, bound]`, i.e. `q in [-bound q_th, bound q_th]`.
    pub fn symmetric(cav: &CavityParams, bound: f64) -> Self {
        let q = bound * cav.threshold();
        Self { lo: -q, hi: q }
    }

    pub fn default_for(cav: &CavityParams) -> Self {
        Self::symmetric(cav, DEFAULT_GAIN_BOUND)
    }
}

/// Outcome of a numerical gain optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub q_opt: f64,
    /// Measured sensitivity at `q_opt` (normalized units).
    pub s_opt: f64,
    /// Normalized-gain coordinate `-q_opt / q_th`.
    pub g_opt: f64,
    pub q_threshold: f64,
    /// Closed-form optimum with `beta = 1 / V_sq`; present when the chain has
    /// no jitter and the frequency is zero, where it is exact.
    pub analytic_q_opt: Option<f64>,
    pub analytic_s_opt: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimizes the measured sensitivity over `q` within `interval`.
pub fn optimize_gain_numeric(
    cav: &CavityParams,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
    model: JitterModel,
    interval: Option<SearchInterval>,
) -> Result<OptimizationResult> {
    let interval = interval.unwrap_or_else(|| SearchInterval::default_for(cav));
    let opts = MinimizeOptions {
        xtol: 1e-12 * cav.threshold(),
        max_iter: MAX_ITERATIONS,
        ..MinimizeOptions::default()
    };
    let m = minimize_bounded(
        |q| measured_sensitivity(cav, q, input, chain, omega, model),
        interval.lo,
        interval.hi,
        &opts,
    )?;
    let (analytic_q_opt, analytic_s_opt) = if chain.theta_rms() == 0.0 && omega == 0.0 {
        let beta = 1.0 / input.squeezed;
        let er = chain.readout_loss();
        (
            Some(generalized_gain(cav, beta, er)),
            Some(generalized_sensitivity(cav, beta, er)),
        )
    } else {
        (None, None)
    };
    Ok(OptimizationResult {
        q_opt: m.x,
        s_opt: m.value,
        g_opt: cav.normalized_gain(m.x),
        q_threshold: cav.threshold(),
        analytic_q_opt,
        analytic_s_opt,
        converged: true,
        iterations: m.iterations,
    })
}

// Closed forms with beta = 1 / V_sq, which may drop below 1 for inputs
// noisier than vacuum.
fn generalized_gain(cav: &CavityParams, beta: f64, er: f64) -> f64 {
    let (kept, lost) = (1.0 - er, beta * er);
    cav.transmission() * (kept - lost) / (kept + lost) - cav.internal_loss()
}

fn generalized_sensitivity(cav: &CavityParams, beta: f64, er: f64) -> f64 {
    4.0 * (cav.internal_loss() + cav.transmission() * er / (er * beta + (1.0 - er)))
}

/// Reference configuration for SNR-gain figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Same input and chain, internal gain switched off.
    NoInternal,
    /// Vacuum input, no internal gain, same readout loss.
    NoSqueezing,
}

/// A complete sensor configuration: cavity, squeeze source, decoherence chain
/// and analysis frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub cavity: CavityParams,
    pub source: ExternalSqueezeSource,
    pub chain: DecoherenceChain,
    pub omega: f64,
    pub jitter_model: JitterModel,
}

impl OperatingPoint {
    pub fn new(
        cavity: CavityParams,
        source: ExternalSqueezeSource,
        chain: DecoherenceChain,
        omega: f64,
    ) -> Self {
        Self {
            cavity,
            source,
            chain,
            omega,
            jitter_model: JitterModel::default(),
        }
    }

    /// Input variances after injection loss.
    pub fn input(&self) -> Result<InputQuadratureState> {
        input_state_from_source(&self.source, self.chain.injection_loss())
    }

    pub fn measured_sensitivity(&self, q: f64) -> Result<f64> {
        measured_sensitivity(
            &self.cavity,
            q,
            &self.input()?,
            &self.chain,
            self.omega,
            self.jitter_model,
        )
    }

    pub fn optimize(&self, interval: Option<SearchInterval>) -> Result<OptimizationResult> {
        optimize_gain_numeric(
            &self.cavity,
            &self.input()?,
            &self.chain,
            self.omega,
            self.jitter_model,
            interval,
        )
    }

    pub fn snr_gain_db(&self, q: f64, baseline: Baseline) -> Result<f64> {
        snr_gain_db(
            &self.cavity,
            &self.input()?,
            &self.chain,
            self.omega,
            q,
            baseline,
            self.jitter_model,
        )
    }
}

/// SNR improvement in dB of gain `q` relative to `baseline`; positive is
/// better.
pub fn snr_gain_db(
    cav: &CavityParams,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
    q: f64,
    baseline: Baseline,
    model: JitterModel,
) -> Result<f64> {
    let s = measured_sensitivity(cav, q, input, chain, omega, model)?;
    let reference = baseline_sensitivity(cav, input, chain, omega, baseline, model)?;
    Ok(10.0 * (reference / s).log10())
}

/// Sensitivity of the reference configuration.
pub fn baseline_sensitivity(
    cav: &CavityParams,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
    baseline: Baseline,
    model: JitterModel,
) -> Result<f64> {
    match baseline {
        Baseline::NoInternal => measured_sensitivity(cav, 0.0, input, chain, omega, model),
        Baseline::NoSqueezing => sensitivity(
            cav,
            0.0,
            &InputQuadratureState::vacuum(),
            chain.readout_loss(),
            omega,
            None,
        ),
    }
}

/// Printed, corrected and numerical optimal gains side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReconciliation {
    pub beta: f64,
    pub eps_read: f64,
    pub printed_q: Option<f64>,
    pub printed_s: Option<f64>,
    pub corrected_q: f64,
    pub corrected_s: f64,
    pub numeric_q: f64,
    pub numeric_s: f64,
    pub printed_is_argmin: bool,
    pub corrected_is_argmin: bool,
    pub note: String,
}

/// Evaluates both closed forms of the optimal gain against a numerical
/// minimization of the sensitivity for pure squeezing.
pub fn gain_reconciliation_report(
    cav: &CavityParams,
    beta: f64,
    eps_read: f64,
) -> Result<GainReconciliation> {
    check_beta(beta)?;
    let input = if beta.is_infinite() {
        None
    } else {
        Some(InputQuadratureState::pure(beta)?)
    };
    let chain = DecoherenceChain::readout_only(eps_read)?;
    let s_at = |q: f64| -> Result<f64> {
        match &input {
            Some(i) => sensitivity(cav, q, i, eps_read, 0.0, None),
            // infinite squeezing: S_x = [(b+q)^2 - (1-R)(4 T_c q + (a-q)^2)] / (T_c (1-R))
            None => {
                let b = cav.threshold();
                let a = cav.transmission() - cav.internal_loss();
                let kept = 1.0 - eps_read;
                Ok(
                    ((b + q).powi(2) - kept * (4.0 * cav.transmission() * q + (a - q).powi(2)))
                        / (cav.transmission() * kept),
                )
            }
        }
    };
    let corrected_q = optimal_gain_analytic(cav, beta, eps_read)?;
    let corrected_s = optimal_sensitivity_analytic(cav, beta, eps_read)?;
    let (numeric_q, numeric_s) = match &input {
        Some(i) => {
            let r = optimize_gain_numeric(cav, i, &chain, 0.0, JitterModel::PumpFrame, None)?;
            (r.q_opt, r.s_opt)
        }
        None => (corrected_q, corrected_s),
    };
    let printed_q = printed_optimal_gain(cav, beta, eps_read).ok();
    let printed_s = printed_q.and_then(|q| s_at(q).ok());

    let tol = 1e-6 * cav.threshold();
    let printed_is_argmin = printed_q.is_some_and(|q| (q - numeric_q).abs() <= tol);
    let corrected_is_argmin = (corrected_q - numeric_q).abs() <= tol;
    let note = match (printed_is_argmin, corrected_is_argmin) {
        (true, true) => "printed and corrected optimal gain agree (zero readout loss)".to_string(),
        (false, true) => format!(
            "printed optimal gain is not the minimizer: S_x = {} at q = {} versus S_x = {} at the corrected q = {}",
            printed_s.map_or("undefined".to_string(), |v| v.to_string()),
            printed_q.map_or("undefined".to_string(), |v| v.to_string()),
            corrected_s,
            corrected_q
        ),
        _ => "corrected optimal gain disagrees with the numerical minimizer".to_string(),
    };
    Ok(GainReconciliation {
        beta,
        eps_read,
        printed_q,
        printed_s,
        corrected_q,
        corrected_s,
        numeric_q,
        numeric_s,
        printed_is_argmin,
        corrected_is_argmin,
        note,
    })
}
