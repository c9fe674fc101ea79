//! Closed-form single-mode quantum-noise model of a cavity force sensor.
//!
//! Everything here is expressed per cavity roundtrip: `T_c` is the coupler
//! power transmission, `eps_int` the internal power loss and `q` the
//! roundtrip parametric power gain. With `q > 0` the signal quadrature is
//! deamplified (internally squeezed), with `q < 0` it is amplified. Noise is
//! normalized to shot noise (vacuum variance 1) and signal transfer to the
//! prefactor `8 pi P_c / (hbar lambda c)` unless a [`PhysicalScale`] is given.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Above this value of `T_c + eps_int + |q|` the single-mode treatment is
/// flagged as questionable.
pub const SINGLE_MODE_LIMIT: f64 = 0.3;

pub(crate) fn check_fraction(name: &'static str, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is outside [0, 1)"),
        })
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is not finite"),
        })
    }
}

/// Roundtrip-normalized cavity constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    transmission: f64,
    internal_loss: f64,
}

impl CavityParams {
    pub fn new(transmission: f64, internal_loss: f64) -> Result<Self> {
        if !(transmission > 0.0 && transmission < 1.0) {
            return Err(Error::InvalidParameter {
                name: "T_c",
                reason: format!("{transmission} is outside (0, 1)"),
            });
        }
        check_fraction("eps_int", internal_loss)?;
        Ok(Self {
            transmission,
            internal_loss,
        })
    }

    /// Coupler power transmission `T_c`.
    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Internal roundtrip power loss `eps_int`.
    pub fn internal_loss(&self) -> f64 {
        self.internal_loss
    }

    /// Parametric oscillation threshold `q_th = T_c + eps_int`.
    pub fn threshold(&self) -> f64 {
        self.transmission + self.internal_loss
    }

    /// Normalized gain coordinate `g = -q / q_th`; `g = -1` is the squeezing
    /// threshold, positive `g` amplifies the signal quadrature.
    pub fn normalized_gain(&self, q: f64) -> f64 {
        -q / self.threshold()
    }

    /// Inverse of [`normalized_gain`](Self::normalized_gain).
    pub fn gain_from_normalized(&self, g: f64) -> f64 {
        -g * self.threshold()
    }

    /// Warning text when `T_c + eps_int + |q|` leaves the small-parameter
    /// regime the model assumes.
    pub fn validity_warning(&self, q: f64) -> Option<String> {
        let total = self.threshold() + q.abs();
        (total > SINGLE_MODE_LIMIT).then(|| {
            format!(
                "single-mode approximation questionable: T_c + eps_int + |q| = {total} > {SINGLE_MODE_LIMIT}"
            )
        })
    }

    /// `(T_c + eps_int + q)^2 + omega^2`, rejected when it vanishes.
    pub(crate) fn denominator(&self, q: f64, omega: f64) -> Result<f64> {
        let d = (self.threshold() + q).powi(2) + omega * omega;
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Singular { q, omega })
        }
    }
}

/// Vacuum-normalized variances of the field entering the coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputQuadratureState {
    /// Variance of the signal (squeezed) quadrature.
    pub squeezed: f64,
    /// Variance of the orthogonal quadrature.
    pub anti: f64,
}

impl InputQuadratureState {
    pub fn new(squeezed: f64, anti: f64) -> Result<Self> {
        for (name, v) in [("V_sq", squeezed), ("V_anti", anti)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be positive and finite"),
                });
            }
        }
        if squeezed * anti < 1.0 - 1e-12 {
            return Err(Error::InvalidParameter {
                name: "V_sq * V_anti",
                reason: format!("{} violates the uncertainty bound", squeezed * anti),
            });
        }
        Ok(Self { squeezed, anti })
    }

    pub fn vacuum() -> Self {
        Self {
            squeezed: 1.0,
            anti: 1.0,
        }
    }

    /// Pure squeezed vacuum with `V_sq = 1/beta`.
    pub fn pure(beta: f64) -> Result<Self> {
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("{beta} must be finite and >= 1"),
            });
        }
        Ok(Self {
            squeezed: 1.0 / beta,
            anti: beta,
        })
    }

    pub fn is_pure(&self) -> bool {
        (self.squeezed * self.anti - 1.0).abs() <= 1e-12
    }
}

/// Physical scale converting normalized signal transfer to absolute units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScale {
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Intracavity power (W).
    pub power: f64,
}

impl PhysicalScale {
    pub fn new(wavelength: f64, power: f64) -> Result<Self> {
        for (name, v) in [("lambda", wavelength), ("P_c", power)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be positive"),
                });
            }
        }
        Ok(Self { wavelength, power })
    }

    /// `hbar lambda c / (8 pi P_c)`, the sensitivity unit.
    pub fn prefactor(&self) -> f64 {
        HBAR * self.wavelength * SPEED_OF_LIGHT / (8.0 * std::f64::consts::PI * self.power)
    }
}

/// Normalized sideband frequency for a physical frequency `f_hz` in a cavity
/// with free spectral range `fsr_hz`: `omega = 2 (2 pi f) / FSR`.
///
/// The factor 2 comes from the rate convention in which the amplitude decay
/// rate per roundtrip is `(T_c + eps_int + q) / 2`.
pub fn normalized_frequency(f_hz: f64, fsr_hz: f64) -> Result<f64> {
    if !(fsr_hz > 0.0 && fsr_hz.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "fsr",
            reason: format!("{fsr_hz} must be positive"),
        });
    }
    check_finite("frequency", f_hz)?;
    Ok(4.0 * std::f64::consts::PI * f_hz / fsr_hz)
}

/// Detected noise in the quadrature whose input variance is `v_in`.
///
/// `S = 1 - (1 - eps_read) / D * [4 T_c q + (1 - v_in) ((T_c - eps_int - q)^2 + omega^2)]`
/// with `D = (T_c + eps_int + q)^2 + omega^2`. For a pure input `v_in = 1/beta`.
pub fn quadrature_noise_spectrum(
    cav: &CavityParams,
    q: f64,
    v_in: f64,
    eps_read: f64,
    omega: f64,
) -> Result<f64> {
    check_fraction("eps_read", eps_read)?;
    check_finite("q", q)?;
    check_finite("omega", omega)?;
    if !(v_in > 0.0 && v_in.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "V_in",
            reason: format!("{v_in} must be positive and finite"),
        });
    }
    let d = cav.denominator(q, omega)?;
    let tc = cav.transmission;
    let detuned = (tc - cav.internal_loss - q).powi(2) + omega * omega;
    Ok(1.0 - (1.0 - eps_read) / d * (4.0 * tc * q + (1.0 - v_in) * detuned))
}

/// Detected noise of the orthogonal quadrature, which sees the opposite
/// parametric gain.
pub fn anti_quadrature_noise_spectrum(
    cav: &CavityParams,
    q: f64,
    v_anti: f64,
    eps_read: f64,
    omega: f64,
) -> Result<f64> {
    quadrature_noise_spectrum(cav, -q, v_anti, eps_read, omega)
}

/// Signal-transfer power `T_c (1 - eps_read) / D`, multiplied by
/// `8 pi P_c / (hbar lambda c)` when a scale is supplied.
pub fn signal_transfer_power(
    cav: &CavityParams,
    q: f64,
    eps_read: f64,
    omega: f64,
    scale: Option<&PhysicalScale>,
) -> Result<f64> {
    check_fraction("eps_read", eps_read)?;
    check_finite("q", q)?;
    check_finite("omega", omega)?;
    let d = cav.denominator(q, omega)?;
    let normalized = cav.transmission * (1.0 - eps_read) / d;
    Ok(match scale {
        Some(s) => normalized / s.prefactor(),
        None => normalized,
    })
}

/// Noise-to-signal ratio `S_sn / |T_x|^2` for an input whose decoherence has
/// already been applied.
pub fn sensitivity(
    cav: &CavityParams,
    q: f64,
    input: &InputQuadratureState,
    eps_read: f64,
    omega: f64,
    scale: Option<&PhysicalScale>,
) -> Result<f64> {
    let noise = quadrature_noise_spectrum(cav, q, input.squeezed, eps_read, omega)?;
    let transfer = signal_transfer_power(cav, q, eps_read, omega, scale)?;
    Ok(noise / transfer)
}

/// Lossless quantum Cramer-Rao bound at zero frequency,
/// `(T_c - q)^2 / (beta T_c)`.
pub fn qcrb(cav: &CavityParams, q: f64, beta: f64, scale: Option<&PhysicalScale>) -> Result<f64> {
    if cav.internal_loss != 0.0 {
        return Err(Error::InvalidParameter {
            name: "eps_int",
            reason: "the lossless bound requires eps_int = 0".into(),
        });
    }
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("{beta} must be >= 1"),
        });
    }
    check_finite("q", q)?;
    let normalized = (cav.transmission - q).powi(2) / (beta * cav.transmission);
    Ok(match scale {
        Some(s) => normalized * s.prefactor(),
        None => normalized,
    })
}

/// Sensitivity with the internal squeezer running at threshold,
/// `q = T_c + eps_int`.
pub fn threshold_sensitivity(
    cav: &CavityParams,
    input: &InputQuadratureState,
    eps_read: f64,
    omega: f64,
) -> Result<f64> {
    sensitivity(cav, cav.threshold(), input, eps_read, omega, None)
}

/// Per-frequency noise, transfer and sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub omega: Vec<f64>,
    pub noise: Vec<f64>,
    pub transfer: Vec<f64>,
    pub sensitivity: Vec<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Evaluates noise, transfer and sensitivity over a frequency grid.
pub fn spectrum(
    cav: &CavityParams,
    q: f64,
    input: &InputQuadratureState,
    eps_read: f64,
    omegas: &[f64],
    scale: Option<&PhysicalScale>,
) -> Result<SpectrumResult> {
    let mut out = SpectrumResult {
        omega: Vec::with_capacity(omegas.len()),
        noise: Vec::with_capacity(omegas.len()),
        transfer: Vec::with_capacity(omegas.len()),
        sensitivity: Vec::with_capacity(omegas.len()),
    };
    for &omega in omegas {
        let noise = quadrature_noise_spectrum(cav, q, input.squeezed, eps_read, omega)?;
        let transfer = signal_transfer_power(cav, q, eps_read, omega, scale)?;
        out.omega.push(omega);
        out.noise.push(noise);
        out.transfer.push(transfer);
        out.sensitivity.push(noise / transfer);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p0() -> CavityParams {
        CavityParams::new(0.11, 0.012).unwrap()
    }

    /// Literal transcription of the pure-state noise formula, kept apart from
    /// the generalized implementation.
    fn pure_state_formula(tc: f64, ei: f64, q: f64, beta: f64, er: f64, w: f64) -> f64 {
        1.0 - (1.0 - er) / ((tc + ei + q).powi(2) + w.powi(2))
            * (4.0 * tc * q + (1.0 - 1.0 / beta) * ((tc - ei - q).powi(2) + w.powi(2)))
    }

    #[test]
    fn vacuum_through_passive_cavity_is_shot_noise() {
        for &(er, w) in &[(0.0, 0.0), (0.3, 0.2), (0.9, 5.0)] {
            let s = quadrature_noise_spectrum(&p0(), 0.0, 1.0, er, w).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn squeezed_input_on_passive_cavity() {
        let s = quadrature_noise_spectrum(&p0(), 0.0, 0.0891, 0.10, 0.0).unwrap();
        assert!((s - 0.471_012_1).abs() < 1e-6, "{s}");
    }

    #[test]
    fn vacuum_at_threshold() {
        let s = quadrature_noise_spectrum(&p0(), 0.122, 1.0, 0.10, 0.0).unwrap();
        assert!((s - 0.188_524_6).abs() < 1e-6, "{s}");
    }

    #[test]
    fn anti_quadrature_examples() {
        let cav = p0();
        assert!(
            (anti_quadrature_noise_spectrum(&cav, 0.0, 1.0, 0.2, 0.1).unwrap() - 1.0).abs() < 1e-15
        );
        let a = anti_quadrature_noise_spectrum(&cav, 0.0, 10.40, 0.10, 0.0).unwrap();
        assert!((a - 6.4589).abs() < 1e-3, "{a}");
        let b = anti_quadrature_noise_spectrum(&cav, 0.0085, 10.40, 0.10, 0.0).unwrap();
        assert!((b - 8.710).abs() < 1e-2, "{b}");
    }

    #[test]
    fn amplification_pole_is_a_domain_error() {
        let cav = p0();
        let err = quadrature_noise_spectrum(&cav, -0.122, 0.5, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert!(signal_transfer_power(&cav, -0.122, 0.1, 0.0, None).is_err());
        // finite frequency lifts the pole
        assert!(signal_transfer_power(&cav, -0.122, 0.1, 0.01, None).is_ok());
    }

    #[test]
    fn transfer_examples() {
        let cav = p0();
        let t = signal_transfer_power(&cav, 0.0, 0.10, 0.0, None).unwrap();
        assert!((t - 6.6515).abs() < 1e-3);
        let half = signal_transfer_power(&cav, -0.061, 0.10, 0.0, None).unwrap();
        assert!((half - 4.0 * 0.11 * 0.9 / 0.122f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn six_db_deamplification_cap() {
        let lossless = CavityParams::new(0.11, 0.0).unwrap();
        let at_threshold = signal_transfer_power(&lossless, 0.11, 0.0, 0.0, None).unwrap();
        let passive = signal_transfer_power(&lossless, 0.0, 0.0, 0.0, None).unwrap();
        assert_eq!(at_threshold / passive, 0.25);
    }

    #[test]
    fn sensitivity_examples() {
        let cav = p0();
        let sq = InputQuadratureState::new(0.0891, 1.0 / 0.0891).unwrap();
        let s = sensitivity(&cav, 0.0, &sq, 0.10, 0.0, None).unwrap();
        assert!((s - 0.070_813_6).abs() < 1e-6, "{s}");
        let s = sensitivity(&cav, 0.0, &InputQuadratureState::vacuum(), 0.0, 0.0, None).unwrap();
        assert!((s - 0.122f64.powi(2) / 0.11).abs() < 1e-14);
        let impure = InputQuadratureState::new(0.162, 10.40).unwrap();
        let s = sensitivity(&cav, 0.0, &impure, 0.10, 0.0, None).unwrap();
        assert!((s - 0.07717).abs() < 1e-4, "{s}");
    }

    #[test]
    fn qcrb_examples() {
        let cav = CavityParams::new(0.11, 0.0).unwrap();
        assert_eq!(qcrb(&cav, 0.11, 3.0, None).unwrap(), 0.0);
        assert!((qcrb(&cav, 0.0, 1.0, None).unwrap() - 0.11).abs() < 1e-15);
        assert!((qcrb(&cav, 0.0, 11.22, None).unwrap() - 0.009804).abs() < 1e-6);
        assert!(qcrb(&p0(), 0.0, 2.0, None).is_err());
    }

    #[test]
    fn threshold_examples() {
        let lossless = CavityParams::new(0.11, 0.0).unwrap();
        let s =
            threshold_sensitivity(&lossless, &InputQuadratureState::vacuum(), 0.0, 0.0).unwrap();
        assert!(s.abs() < 1e-15);
        let impure = InputQuadratureState::new(0.162, 10.40).unwrap();
        let s = threshold_sensitivity(&p0(), &impure, 0.10, 0.0).unwrap();
        assert!((s - 0.10898).abs() < 1e-4, "{s}");
        let s = threshold_sensitivity(&p0(), &InputQuadratureState::vacuum(), 0.10, 0.0).unwrap();
        assert!((s - 0.11339).abs() < 1e-4, "{s}");
    }

    #[test]
    fn physical_scale_multiplies_transfer() {
        let cav = p0();
        let scale = PhysicalScale::new(1064e-9, 1.0).unwrap();
        let n = signal_transfer_power(&cav, 0.0, 0.1, 0.0, None).unwrap();
        let p = signal_transfer_power(&cav, 0.0, 0.1, 0.0, Some(&scale)).unwrap();
        assert!((p * scale.prefactor() / n - 1.0).abs() < 1e-14);
        let expected = HBAR * 1064e-9 * SPEED_OF_LIGHT / (8.0 * std::f64::consts::PI);
        assert!((scale.prefactor() / expected - 1.0).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(CavityParams::new(0.0, 0.01).is_err());
        assert!(CavityParams::new(0.1, 1.0).is_err());
        assert!(InputQuadratureState::new(0.5, 1.5).is_err());
        assert!(quadrature_noise_spectrum(&p0(), 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(p0().validity_warning(0.0).is_none());
        assert!(CavityParams::new(0.25, 0.06)
            .unwrap()
            .validity_warning(0.0)
            .is_some());
        assert!(p0().validity_warning(0.2).is_some());
    }

    #[test]
    fn frequency_conversion() {
        let w = normalized_frequency(5e6, 1e9).unwrap();
        assert!((w - 4.0 * std::f64::consts::PI * 5e-3).abs() < 1e-15);
    }

    #[test]
    fn spectrum_arrays_are_consistent() {
        let cav = p0();
        let input = InputQuadratureState::new(0.162, 10.40).unwrap();
        let omegas: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let r = spectrum(&cav, 0.02, &input, 0.1, &omegas, None).unwrap();
        assert_eq!(r.len(), 20);
        for i in 0..r.len() {
            assert_eq!(r.sensitivity[i], r.noise[i] / r.transfer[i]);
            assert!(r.noise[i] > 0.0);
        }
    }

    proptest! {
        #[test]
        fn generalization_matches_pure_formula(
            tc in 0.001f64..0.2, ei in 0.0f64..0.2, beta in 1.0f64..100.0,
            er in 0.0f64..0.99, frac in -0.99f64..0.99, w in 0.0f64..1.0,
        ) {
            let cav = CavityParams::new(tc, ei).unwrap();
            let q = frac * cav.threshold();
            let s = quadrature_noise_spectrum(&cav, q, 1.0 / beta, er, w).unwrap();
            let lit = pure_state_formula(tc, ei, q, beta, er, w);
            prop_assert!((s - lit).abs() <= 1e-14 * lit.abs().max(1.0));
        }

        #[test]
        fn noise_is_affine_in_input_variance(
            tc in 0.01f64..0.2, ei in 0.0f64..0.1, er in 0.0f64..0.9,
            frac in -0.9f64..0.9, w in 0.0f64..1.0,
        ) {
            let cav = CavityParams::new(tc, ei).unwrap();
            let q = frac * cav.threshold();
            let f = |v: f64| quadrature_noise_spectrum(&cav, q, v, er, w).unwrap();
            let (a, b, c) = (f(0.1), f(1.0), f(10.0));
            let slope = (b - a) / 0.9;
            prop_assert!(((c - b) / 9.0 - slope).abs() <= 1e-9 * slope.abs().max(1.0));
            let expected = (1.0 - er) * ((tc - ei - q).powi(2) + w * w)
                / ((tc + ei + q).powi(2) + w * w);
            prop_assert!((slope - expected).abs() <= 1e-9 * expected.max(1.0));
        }

        #[test]
        fn sensitivity_grows_with_frequency(
            tc in 0.01f64..0.2, ei in 0.0f64..0.1, er in 0.0f64..0.9,
            frac in -0.9f64..0.9, v in 0.05f64..1.0, w1 in 0.0f64..1.0, dw in 0.0f64..1.0,
        ) {
            let cav = CavityParams::new(tc, ei).unwrap();
            let q = frac * cav.threshold();
            let input = InputQuadratureState::new(v, 1.0 / v).unwrap();
            let s1 = sensitivity(&cav, q, &input, er, w1, None).unwrap();
            let s2 = sensitivity(&cav, q, &input, er, w1 + dw, None).unwrap();
            prop_assert!(s2 >= s1 * (1.0 - 1e-12));
        }
    }
}
