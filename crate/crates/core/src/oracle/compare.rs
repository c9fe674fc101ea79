//! Runs the closed forms against both oracles and collects discrepancies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sde::{run_sde, SdeRunSpec};
use super::transfer::{assemble_transfer, jitter_averaged};
use crate::decoherence::{
    input_state_from_source, measured_noise, measured_signal_transfer, DecoherenceChain,
    ExternalSqueezeSource, JitterModel,
};
use crate::sensor::{
    anti_quadrature_noise_spectrum, quadrature_noise_spectrum, signal_transfer_power, CavityParams,
    InputQuadratureState,
};
use crate::Result;

/// One configuration of the analytic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub cavity: CavityParams,
    pub q: f64,
    pub source: ExternalSqueezeSource,
    pub chain: DecoherenceChain,
    pub omega: f64,
}

/// Reproducible pseudo-random grid covering the stable parameter range.
pub fn default_grid(points: usize, seed: u64) -> Vec<GridPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|_| {
            let cavity =
                CavityParams::new(rng.random_range(0.01..0.3), rng.random_range(0.0..0.1)).unwrap();
            let q = rng.random_range(-0.95..0.95) * cavity.threshold();
            let source = ExternalSqueezeSource::new(rng.random_range(0.0..15.0)).unwrap();
            let chain = DecoherenceChain::new(
                rng.random_range(0.0..0.3),
                rng.random_range(0.0..0.1),
                rng.random_range(0.0..0.5),
            )
            .unwrap();
            GridPoint {
                cavity,
                q,
                source,
                chain,
                omega: rng.random_range(0.0..1.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeProbe {
    pub label: String,
    pub spec: SdeRunSpec,
}

/// Shot-noise, passive squeezed and parametric probes at the reference
/// cavity, each at the default ensemble size.
pub fn default_probes(seed: u64) -> Vec<SdeProbe> {
    let p0 = CavityParams::new(0.11, 0.012).unwrap();
    let squeezed = InputQuadratureState::new(0.0891, 1.0 / 0.0891).unwrap();
    vec![
        SdeProbe {
            label: "vacuum".into(),
            spec: SdeRunSpec::new(p0, 0.0, InputQuadratureState::vacuum(), 0.0, seed),
        },
        SdeProbe {
            label: "squeezed_passive".into(),
            spec: SdeRunSpec::new(p0, 0.0, squeezed, 0.10, seed.wrapping_add(1)),
        },
        SdeProbe {
            label: "squeezed_parametric".into(),
            spec: SdeRunSpec::new(p0, 0.0085, squeezed, 0.10, seed.wrapping_add(2)),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub analytic_tolerance: f64,
    pub z_threshold: f64,
    pub max_outlier_fraction: f64,
    /// Relative perturbation applied to every closed-form value before
    /// comparison; nonzero only to confirm that the checks can fail.
    pub fault: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            analytic_tolerance: 1e-12,
            z_threshold: 3.0,
            max_outlier_fraction: 0.01,
            fault: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCheck {
    pub point: usize,
    pub quantity: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeCheck {
    pub label: String,
    pub bins: usize,
    pub outlier_fraction: f64,
    pub max_abs_z: f64,
    /// DC bin of the signal quadrature.
    pub dc_estimate: f64,
    pub dc_expected: f64,
    pub dc_rel_stderr: f64,
    pub dc_z: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub options: CompareOptions,
    pub analytic_points: usize,
    pub analytic_checks: usize,
    pub max_rel_error: f64,
    /// Every analytic check above tolerance.
    pub failures: Vec<AnalyticCheck>,
    pub sde: Vec<SdeCheck>,
    pub pass: bool,
}

fn rel_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn analytic_values(p: &GridPoint) -> Result<Vec<(&'static str, f64, f64)>> {
    let input = input_state_from_source(&p.source, p.chain.injection_loss())?;
    let (cav, q, w, er) = (&p.cavity, p.q, p.omega, p.chain.readout_loss());
    let t = assemble_transfer(cav, q, &p.chain, w)?;
    let (v_src, v_src_anti) = (1.0 / p.source.beta(), p.source.beta());
    let (noise, signal) = jitter_averaged(&t, p.chain.theta_rms(), v_src, v_src_anti);
    Ok(vec![
        (
            "noise_signal_quadrature",
            quadrature_noise_spectrum(cav, q, input.squeezed, er, w)?,
            t.detected_noise(v_src, v_src_anti),
        ),
        (
            "noise_orthogonal_quadrature",
            anti_quadrature_noise_spectrum(cav, q, input.anti, er, w)?,
            t.orthogonal_noise(v_src, v_src_anti),
        ),
        (
            "signal_transfer",
            signal_transfer_power(cav, q, er, w, None)?,
            t.signal_power(),
        ),
        (
            "measured_noise",
            measured_noise(cav, q, &input, &p.chain, w, JitterModel::PumpFrame)?,
            noise,
        ),
        (
            "measured_signal_transfer",
            measured_signal_transfer(cav, q, &p.chain, w, JitterModel::PumpFrame)?,
            signal,
        ),
    ])
}

fn check_sde(probe: &SdeProbe, opts: &CompareOptions) -> SdeCheck {
    let fail = |e: String| SdeCheck {
        label: probe.label.clone(),
        bins: 0,
        outlier_fraction: 1.0,
        max_abs_z: f64::INFINITY,
        dc_estimate: f64::NAN,
        dc_expected: f64::NAN,
        dc_rel_stderr: f64::NAN,
        dc_z: f64::NAN,
        pass: false,
        error: Some(e),
    };
    let s = &probe.spec;
    let est = match run_sde(s) {
        Ok(e) => e,
        Err(e) => return fail(e.to_string()),
    };
    let perturb = 1.0 + opts.fault;
    let mut outliers = 0usize;
    let mut zmax = 0.0f64;
    let mut dc = (0.0, 0.0);
    for k in 0..est.omega.len() {
        let w = est.effective_omega[k];
        let expected = match (
            quadrature_noise_spectrum(&s.cavity, s.q, s.input.squeezed, s.eps_read, w),
            anti_quadrature_noise_spectrum(&s.cavity, s.q, s.input.anti, s.eps_read, w),
        ) {
            (Ok(a), Ok(b)) => [a * perturb, b * perturb],
            (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
        };
        let zs = [
            (est.signal_quadrature[k] - expected[0]) / est.signal_stderr[k],
            (est.orthogonal[k] - expected[1]) / est.orthogonal_stderr[k],
        ];
        if k == 0 {
            dc = (expected[0], zs[0]);
        }
        for z in zs {
            if !(z.abs() <= opts.z_threshold) {
                outliers += 1;
            }
            zmax = zmax.max(z.abs());
        }
    }
    let bins = 2 * est.omega.len();
    let outlier_fraction = outliers as f64 / bins as f64;
    SdeCheck {
        label: probe.label.clone(),
        bins,
        outlier_fraction,
        max_abs_z: zmax,
        dc_estimate: est.signal_quadrature[0],
        dc_expected: dc.0,
        dc_rel_stderr: est.signal_stderr[0] / est.signal_quadrature[0],
        dc_z: dc.1,
        pass: outlier_fraction < opts.max_outlier_fraction && dc.1.abs() <= opts.z_threshold,
        error: None,
    }
}

/// Compares the closed forms with the transfer-matrix composition on every
/// grid point and with the stochastic simulation on every probe. Problems
/// at individual points become failure entries, never errors.
pub fn compare_oracles(
    grid: &[GridPoint],
    probes: &[SdeProbe],
    opts: CompareOptions,
) -> DiscrepancyReport {
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut max_rel = 0.0f64;
    for (i, p) in grid.iter().enumerate() {
        match analytic_values(p) {
            Ok(values) => {
                for (quantity, closed, oracle) in values {
                    let closed = closed * (1.0 + opts.fault);
                    let err = rel_error(closed, oracle);
                    checks += 1;
                    max_rel = max_rel.max(err);
                    if !(err < opts.analytic_tolerance) {
                        failures.push(AnalyticCheck {
                            point: i,
                            quantity: quantity.into(),
                            closed_form: closed,
                            oracle,
                            rel_error: err,
                        });
                    }
                }
            }
            Err(e) => failures.push(AnalyticCheck {
                point: i,
                quantity: format!("evaluation failed: {e}"),
                closed_form: f64::NAN,
                oracle: f64::NAN,
                rel_error: f64::INFINITY,
            }),
        }
    }
    let sde: Vec<SdeCheck> = probes.iter().map(|p| check_sde(p, &opts)).collect();
    let pass = failures.is_empty() && sde.iter().all(|c| c.pass);
    DiscrepancyReport {
        options: opts,
        analytic_points: grid.len(),
        analytic_checks: checks,
        max_rel_error: max_rel,
        failures,
        sde,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_agrees_to_machine_precision() {
        let r = compare_oracles(&default_grid(64, 2024), &[], CompareOptions::default());
        assert!(r.pass, "{:?}", r.failures);
        assert_eq!(r.analytic_checks, 64 * 5);
        assert!(r.max_rel_error < 1e-12);
    }

    #[test]
    fn grid_is_reproducible() {
        assert_eq!(default_grid(8, 3), default_grid(8, 3));
        assert_ne!(default_grid(8, 3), default_grid(8, 4));
    }

    #[test]
    fn empty_grid_passes() {
        let r = compare_oracles(&[], &[], CompareOptions::default());
        assert!(r.pass);
        assert_eq!(r.analytic_checks, 0);
    }

    #[test]
    fn injected_fault_is_detected() {
        let opts = CompareOptions {
            fault: 1e-9,
            ..Default::default()
        };
        let r = compare_oracles(&default_grid(4, 1), &[], opts);
        assert!(!r.pass);
        assert_eq!(r.failures.len(), 20);
    }

    #[test]
    fn invalid_probe_is_reported() {
        let p0 = CavityParams::new(0.11, 0.012).unwrap();
        let probe = SdeProbe {
            label: "above".into(),
            spec: SdeRunSpec::new(p0, 0.2, InputQuadratureState::vacuum(), 0.0, 1),
        };
        let r = compare_oracles(&[], &[probe], CompareOptions::default());
        assert!(!r.pass);
        assert!(r.sde[0].error.as_deref().unwrap().contains("threshold"));
    }
}
