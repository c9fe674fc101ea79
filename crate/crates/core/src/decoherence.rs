//! Decoherence of the external squeezing on its way through the sensor:
//! injection loss before the cavity, Gaussian phase jitter between the
//! pump-defined cavity eigenbasis and the squeeze/local-oscillator frame,
//! and readout loss after the cavity.

use serde::{Deserialize, Serialize};

use crate::sensor::{
    anti_quadrature_noise_spectrum, check_fraction, quadrature_noise_spectrum,
    signal_transfer_power, CavityParams, InputQuadratureState,
};
use crate::{Error, Result};

/// Squeezed-vacuum source characterized by its squeezing level in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalSqueezeSource {
    squeeze_db: f64,
}

impl ExternalSqueezeSource {
    pub fn new(squeeze_db: f64) -> Result<Self> {
        if !(squeeze_db >= 0.0 && squeeze_db.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "squeeze_db",
                reason: format!("{squeeze_db} must be finite and >= 0"),
            });
        }
        Ok(Self { squeeze_db })
    }

    pub fn vacuum() -> Self {
        Self { squeeze_db: 0.0 }
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("{beta} must be >= 1"),
            });
        }
        Self::new(10.0 * beta.log10())
    }

    pub fn from_squeeze_parameter(r_ext: f64) -> Result<Self> {
        if !(r_ext >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_ext",
                reason: format!("{r_ext} must be >= 0"),
            });
        }
        Self::new(20.0 * r_ext / std::f64::consts::LN_10)
    }

    pub fn squeeze_db(&self) -> f64 {
        self.squeeze_db
    }

    /// `beta = e^(2 r_ext) = 10^(dB / 10)`.
    pub fn beta(&self) -> f64 {
        10f64.powf(self.squeeze_db / 10.0)
    }

    pub fn squeeze_parameter(&self) -> f64 {
        self.squeeze_db * std::f64::consts::LN_10 / 20.0
    }
}

/// Where the phase jitter acts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterModel {
    /// The detected frame jitters against the cavity eigenbasis: the
    /// amplified orthogonal output leaks into the readout.
    #[default]
    PumpFrame,
    /// Only the injected squeeze ellipse jitters; the cavity sees an
    /// effective input variance `(1 - s) V_sq + s V_anti`.
    InputFrame,
}

/// Loss and phase-noise budget between source and detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceChain {
    injection_loss: f64,
    theta_rms: f64,
    readout_loss: f64,
}

impl DecoherenceChain {
    pub fn new(injection_loss: f64, theta_rms: f64, readout_loss: f64) -> Result<Self> {
        check_fraction("eps_inj", injection_loss)?;
        check_fraction("eps_read", readout_loss)?;
        if !(theta_rms >= 0.0 && theta_rms.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta_rms",
                reason: format!("{theta_rms} must be finite and >= 0"),
            });
        }
        Ok(Self {
            injection_loss,
            theta_rms,
            readout_loss,
        })
    }

    /// Readout loss only.
    pub fn readout_only(readout_loss: f64) -> Result<Self> {
        Self::new(0.0, 0.0, readout_loss)
    }

    pub fn injection_loss(&self) -> f64 {
        self.injection_loss
    }

    pub fn theta_rms(&self) -> f64 {
        self.theta_rms
    }

    pub fn readout_loss(&self) -> f64 {
        self.readout_loss
    }

    /// No injection loss and no jitter: the analytic optimum applies exactly.
    pub fn is_pure(&self) -> bool {
        self.injection_loss == 0.0 && self.theta_rms == 0.0
    }

    pub fn with_readout_loss(self, readout_loss: f64) -> Result<Self> {
        Self::new(self.injection_loss, self.theta_rms, readout_loss)
    }

    pub fn with_theta_rms(self, theta_rms: f64) -> Result<Self> {
        Self::new(self.injection_loss, theta_rms, self.readout_loss)
    }
}

/// Quadrature variances after a beamsplitter loss `eps_inj` mixes vacuum into
/// the source state.
pub fn input_state_from_source(
    src: &ExternalSqueezeSource,
    eps_inj: f64,
) -> Result<InputQuadratureState> {
    check_fraction("eps_inj", eps_inj)?;
    let beta = src.beta();
    let keep = 1.0 - eps_inj;
    Ok(InputQuadratureState {
        squeezed: keep / beta + eps_inj,
        anti: keep * beta + eps_inj,
    })
}

/// Gaussian average of `sin^2(theta)` for a jitter of RMS `theta_rms`:
/// `(1 - exp(-2 theta_rms^2)) / 2`.
pub fn jitter_mixing_weight(theta_rms: f64) -> f64 {
    // -expm1 keeps full precision for small angles
    -(-2.0 * theta_rms * theta_rms).exp_m1() / 2.0
}

/// Power factor on the coherent signal, `<cos theta>^2 = exp(-theta_rms^2)`.
pub fn jittered_signal_factor(theta_rms: f64) -> f64 {
    (-theta_rms * theta_rms).exp()
}

/// Effective detected noise including the phase-jitter blend, using the
/// default pump-frame model.
pub fn measured_noise_with_jitter(
    cav: &CavityParams,
    q: f64,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
) -> Result<f64> {
    measured_noise(cav, q, input, chain, omega, JitterModel::PumpFrame)
}

/// Effective detected noise for an explicit jitter model.
pub fn measured_noise(
    cav: &CavityParams,
    q: f64,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
    model: JitterModel,
) -> Result<f64> {
    let s = jitter_mixing_weight(chain.theta_rms);
    let er = chain.readout_loss;
    match model {
        JitterModel::PumpFrame => {
            let main = quadrature_noise_spectrum(cav, q, input.squeezed, er, omega)?;
            if s == 0.0 {
                return Ok(main);
            }
            let leak = anti_quadrature_noise_spectrum(cav, q, input.anti, er, omega)?;
            Ok((1.0 - s) * main + s * leak)
        }
        JitterModel::InputFrame => {
            let v_eff = (1.0 - s) * input.squeezed + s * input.anti;
            quadrature_noise_spectrum(cav, q, v_eff, er, omega)
        }
    }
}

/// Detected signal-transfer power including the jitter penalty. Only the
/// pump-frame model rotates the signal away from the readout quadrature.
pub fn measured_signal_transfer(
    cav: &CavityParams,
    q: f64,
    chain: &DecoherenceChain,
    omega: f64,
    model: JitterModel,
) -> Result<f64> {
    let t2 = signal_transfer_power(cav, q, chain.readout_loss, omega, None)?;
    Ok(match model {
        JitterModel::PumpFrame => t2 * jittered_signal_factor(chain.theta_rms),
        JitterModel::InputFrame => t2,
    })
}

/// Noise-to-signal ratio seen at the detector with the full chain applied.
pub fn measured_sensitivity(
    cav: &CavityParams,
    q: f64,
    input: &InputQuadratureState,
    chain: &DecoherenceChain,
    omega: f64,
    model: JitterModel,
) -> Result<f64> {
    let noise = measured_noise(cav, q, input, chain, omega, model)?;
    let transfer = measured_signal_transfer(cav, q, chain, omega, model)?;
    Ok(noise / transfer)
}
