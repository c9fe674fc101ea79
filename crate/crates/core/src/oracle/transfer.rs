//! Frequency-domain input-output composition of the sensor.
//!
//! The intracavity quadratures obey, in time normalized to the roundtrip,
//!
//! ```text
//! dx_j/dt = -(kappa_c + kappa_l + s_j g) x_j + sqrt(2 kappa_c) x_in,j + sqrt(2 kappa_l) l_j
//! x_out,j = sqrt(2 kappa_c) x_j - x_in,j
//! ```
//!
//! with `kappa_c = T_c / 2`, `kappa_l = eps_int / 2`, `g = q / 2`, `s_1 = +1`
//! for the signal quadrature and `s_2 = -1` for the orthogonal one. The
//! signal force drives `x_1` at rate 1/2. The source field passes an
//! injection beamsplitter before the coupler and the output passes a readout
//! beamsplitter before detection. A sideband at `omega` in these units sits at
//! `Omega = 2 omega` in the units of the closed forms.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::decoherence::DecoherenceChain;
use crate::sensor::{check_fraction, CavityParams};
use crate::{Error, Result};

/// Complex transfer blocks from every input port to the detected quadrature
/// pair at one sideband frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTransfer {
    /// Frequency in closed-form units.
    pub omega: f64,
    /// From the squeeze source (before injection loss).
    pub source: Matrix2<Complex64>,
    /// From the vacuum entering at the injection loss.
    pub injection: Matrix2<Complex64>,
    /// From the vacuum entering through the internal loss.
    pub internal: Matrix2<Complex64>,
    /// From the vacuum entering at the readout loss.
    pub readout: Matrix2<Complex64>,
    /// Response of the detected quadratures to the signal force.
    pub signal: Vector2<Complex64>,
}

fn diag(a: Complex64, b: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(a, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), b)
}

fn rotation(theta: f64) -> Matrix2<Complex64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c).map(|v| Complex64::new(v, 0.0))
}

/// Builds the transfer blocks for internal gain `q` at closed-form frequency
/// `omega`. Phase jitter is not part of a single transfer; see
/// [`jitter_averaged`].
pub fn assemble_transfer(
    cav: &CavityParams,
    q: f64,
    chain: &DecoherenceChain,
    omega: f64,
) -> Result<QuadratureTransfer> {
    check_fraction("eps_read", chain.readout_loss())?;
    let kappa_c = cav.transmission() / 2.0;
    let kappa_l = cav.internal_loss() / 2.0;
    let g = q / 2.0;
    let w = omega / 2.0;

    let mut coupler = [Complex64::new(0.0, 0.0); 2];
    let mut loss = [Complex64::new(0.0, 0.0); 2];
    let mut drive = [Complex64::new(0.0, 0.0); 2];
    for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
        let pole = Complex64::new(kappa_c + kappa_l + sign * g, w);
        if pole.norm_sqr() == 0.0 {
            return Err(Error::Singular { q: sign * q, omega });
        }
        let resp = pole.inv();
        coupler[j] = resp * (2.0 * kappa_c) - 1.0;
        loss[j] = resp * (2.0 * (kappa_c * kappa_l).sqrt());
        if j == 0 {
            drive[j] = resp * ((2.0 * kappa_c).sqrt() * 0.5);
        }
    }

    let read = (1.0 - chain.readout_loss()).sqrt();
    let inj = (1.0 - chain.injection_loss()).sqrt();
    let c = diag(coupler[0], coupler[1]) * Complex64::new(read, 0.0);
    Ok(QuadratureTransfer {
        omega,
        source: c * Complex64::new(inj, 0.0),
        injection: c * Complex64::new(chain.injection_loss().sqrt(), 0.0),
        internal: diag(loss[0], loss[1]) * Complex64::new(read, 0.0),
        readout: Matrix2::identity() * Complex64::new(chain.readout_loss().sqrt(), 0.0),
        signal: Vector2::new(drive[0], drive[1]) * Complex64::new(read, 0.0),
    })
}

impl QuadratureTransfer {
    /// Same transfer detected in a frame rotated by `theta` relative to the
    /// cavity eigenbasis.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = rotation(theta);
        Self {
            omega: self.omega,
            source: r * self.source,
            injection: r * self.injection,
            internal: r * self.internal,
            readout: r * self.readout,
            signal: r * self.signal,
        }
    }

    fn ports(&self) -> [&Matrix2<Complex64>; 4] {
        [&self.source, &self.injection, &self.internal, &self.readout]
    }

    /// Spectral covariance of the detected quadratures for a source with
    /// quadrature variances `(v_sq, v_anti)`; all other ports carry vacuum.
    pub fn output_covariance(&self, v_sq: f64, v_anti: f64) -> Matrix2<f64> {
        let source_cov = diag(Complex64::new(v_sq, 0.0), Complex64::new(v_anti, 0.0));
        let mut out = self.source * source_cov * self.source.adjoint();
        for m in &self.ports()[1..] {
            out += *m * m.adjoint();
        }
        out.map(|v| v.re)
    }

    /// Detected noise in the signal quadrature.
    pub fn detected_noise(&self, v_sq: f64, v_anti: f64) -> f64 {
        self.output_covariance(v_sq, v_anti)[(0, 0)]
    }

    /// Detected noise in the orthogonal quadrature.
    pub fn orthogonal_noise(&self, v_sq: f64, v_anti: f64) -> f64 {
        self.output_covariance(v_sq, v_anti)[(1, 1)]
    }

    pub fn signal_power(&self) -> f64 {
        self.signal[0].norm_sqr()
    }

    /// Squared port magnitudes feeding detected quadrature `row`; they sum to
    /// one whenever the cavity is passive (`q = 0`).
    pub fn port_weights(&self, row: usize) -> [f64; 4] {
        let p = self.ports();
        std::array::from_fn(|i| p[i][(row, 0)].norm_sqr() + p[i][(row, 1)].norm_sqr())
    }

    /// Determinant of the source-to-output block.
    pub fn source_determinant(&self) -> Complex64 {
        self.source.determinant()
    }
}

/// Gaussian average over the detection-frame angle, computed by trapezoidal
/// quadrature. Returns `(noise, signal_power)` in the signal quadrature, the
/// signal averaged in amplitude before squaring.
pub fn jitter_averaged(
    transfer: &QuadratureTransfer,
    theta_rms: f64,
    v_sq: f64,
    v_anti: f64,
) -> (f64, f64) {
    if theta_rms == 0.0 {
        return (
            transfer.detected_noise(v_sq, v_anti),
            transfer.signal_power(),
        );
    }
    const NODES_PER_SIGMA: i32 = 8;
    const SIGMAS: i32 = 12;
    let h = theta_rms / NODES_PER_SIGMA as f64;
    let (mut wsum, mut noise, mut amp) = (0.0, 0.0, Complex64::new(0.0, 0.0));
    for k in -NODES_PER_SIGMA * SIGMAS..=NODES_PER_SIGMA * SIGMAS {
        let theta = k as f64 * h;
        let w = (-0.5 * (theta / theta_rms).powi(2)).exp();
        let t = transfer.rotated(theta);
        wsum += w;
        noise += w * t.detected_noise(v_sq, v_anti);
        amp += t.signal[0] * w;
    }
    (noise / wsum, (amp / wsum).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::{
        input_state_from_source, jitter_mixing_weight, ExternalSqueezeSource,
    };
    use crate::sensor::{
        anti_quadrature_noise_spectrum, quadrature_noise_spectrum, signal_transfer_power,
    };

    fn p0() -> CavityParams {
        CavityParams::new(0.11, 0.012).unwrap()
    }

    #[test]
    fn passive_lossless_cavity_is_all_pass() {
        let cav = CavityParams::new(0.11, 0.0).unwrap();
        let chain = DecoherenceChain::readout_only(0.0).unwrap();
        for w in [0.0, 0.05, 0.3, 2.0] {
            let t = assemble_transfer(&cav, 0.0, &chain, w).unwrap();
            assert!((t.source[(0, 0)].norm() - 1.0).abs() < 1e-15);
            assert!((t.detected_noise(1.0, 1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_closed_form_noise() {
        let cav = p0();
        let chain = DecoherenceChain::readout_only(0.10).unwrap();
        let t = assemble_transfer(&cav, 0.0, &chain, 0.0).unwrap();
        let n = t.detected_noise(0.0891, 1.0 / 0.0891);
        let closed = quadrature_noise_spectrum(&cav, 0.0, 0.0891, 0.10, 0.0).unwrap();
        assert!((n - closed).abs() < 1e-12);
        assert!((n - 0.471_012_1).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_channel_validates_sign_flip() {
        let cav = p0();
        let chain = DecoherenceChain::readout_only(0.10).unwrap();
        for (q, w) in [(0.0085, 0.0), (-0.05, 0.2), (0.1, 0.7)] {
            let t = assemble_transfer(&cav, q, &chain, w).unwrap();
            let n = t.orthogonal_noise(0.3, 10.40);
            let closed = anti_quadrature_noise_spectrum(&cav, q, 10.40, 0.10, w).unwrap();
            assert!(
                (n - closed).abs() < 1e-12 * closed,
                "{q} {w}: {n} vs {closed}"
            );
        }
        let t = assemble_transfer(&cav, 0.0085, &chain, 0.0).unwrap();
        assert!((t.orthogonal_noise(0.1, 10.40) - 8.710).abs() < 1e-2);
    }

    #[test]
    fn injection_port_reproduces_loss_map() {
        let cav = p0();
        let chain = DecoherenceChain::new(0.08, 0.0, 0.10).unwrap();
        let src = ExternalSqueezeSource::new(10.5).unwrap();
        let t = assemble_transfer(&cav, 0.03, &chain, 0.1).unwrap();
        let n = t.detected_noise(1.0 / src.beta(), src.beta());
        let input = input_state_from_source(&src, 0.08).unwrap();
        let closed = quadrature_noise_spectrum(&cav, 0.03, input.squeezed, 0.10, 0.1).unwrap();
        assert!((n - closed).abs() < 1e-12);
    }

    #[test]
    fn signal_power_matches_transfer() {
        let cav = p0();
        let chain = DecoherenceChain::readout_only(0.2).unwrap();
        let t = assemble_transfer(&cav, -0.04, &chain, 0.3).unwrap();
        let closed = signal_transfer_power(&cav, -0.04, 0.2, 0.3, None).unwrap();
        assert!((t.signal_power() - closed).abs() < 1e-12 * closed);
        assert_eq!(t.signal[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn port_weights_complete_for_passive_cavity() {
        let cav = p0();
        let chain = DecoherenceChain::new(0.08, 0.0, 0.3).unwrap();
        for w in [0.0, 0.1, 1.0] {
            let t = assemble_transfer(&cav, 0.0, &chain, w).unwrap();
            for row in 0..2 {
                let total: f64 = t.port_weights(row).iter().sum();
                assert!((total - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lossless_parametric_cavity_is_symplectic() {
        let cav = CavityParams::new(0.11, 0.0).unwrap();
        let chain = DecoherenceChain::readout_only(0.0).unwrap();
        let t = assemble_transfer(&cav, 0.05, &chain, 0.0).unwrap();
        let det = t.source_determinant();
        assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let t = assemble_transfer(&cav, 0.05, &chain, 0.4).unwrap();
        assert!((t.source_determinant().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pole_is_rejected() {
        let chain = DecoherenceChain::readout_only(0.1).unwrap();
        assert!(matches!(
            assemble_transfer(&p0(), -0.122, &chain, 0.0),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn jitter_average_matches_closed_weight() {
        let cav = p0();
        let chain = DecoherenceChain::readout_only(0.10).unwrap();
        let t = assemble_transfer(&cav, 0.02, &chain, 0.05).unwrap();
        for theta in [0.015, 0.05, 0.4] {
            let (n, sig) = jitter_averaged(&t, theta, 0.162, 10.40);
            let s = jitter_mixing_weight(theta);
            let expected =
                (1.0 - s) * t.detected_noise(0.162, 10.40) + s * t.orthogonal_noise(0.162, 10.40);
            assert!((n - expected).abs() < 1e-12 * expected, "{theta}");
            let expected_sig = t.signal_power() * (-theta * theta).exp();
            assert!((sig - expected_sig).abs() < 1e-12 * expected_sig);
        }
    }
}
