use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Baseline, OperatingPoint, SearchInterval};
use crate::decoherence::ExternalSqueezeSource;
use crate::{Error, Result};

/// Parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Normalized gain `g = -q / q_th`; every other parameter fixed.
    Gain,
    ReadoutLoss,
    SqueezeDb,
    ThetaRms,
    Omega,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub base: OperatingPoint,
    pub interval: Option<SearchInterval>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, grid: Vec<f64>, base: OperatingPoint) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "sweep grid is empty".into(),
            });
        }
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "sweep grid must be finite and strictly monotone".into(),
            });
        }
        Ok(Self {
            parameter,
            grid,
            base,
            interval: None,
        })
    }

    fn point_at(&self, value: f64) -> Result<OperatingPoint> {
        let mut p = self.base;
        match self.parameter {
            SweepParameter::Gain => {}
            SweepParameter::ReadoutLoss => p.chain = p.chain.with_readout_loss(value)?,
            SweepParameter::SqueezeDb => p.source = ExternalSqueezeSource::new(value)?,
            SweepParameter::ThetaRms => p.chain = p.chain.with_theta_rms(value)?,
            SweepParameter::Omega => p.omega = value,
        }
        Ok(p)
    }
}

/// One evaluated sweep row. For gain sweeps `q` is the swept gain and
/// `sensitivity` its measured value; otherwise they are the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    pub g: f64,
    pub sensitivity: f64,
    pub gain_no_internal_db: f64,
    pub gain_no_squeezing_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub value: f64,
    pub row: Option<SweepRow>,
    pub error: Option<String>,
}

fn evaluate(spec: &SweepSpec, value: f64) -> Result<SweepRow> {
    let point = spec.point_at(value)?;
    let cav = &point.cavity;
    let (q, sensitivity) = match spec.parameter {
        SweepParameter::Gain => {
            let q = cav.gain_from_normalized(value);
            (q, point.measured_sensitivity(q)?)
        }
        _ => {
            let r = point.optimize(spec.interval)?;
            (r.q_opt, r.s_opt)
        }
    };
    Ok(SweepRow {
        q,
        g: cav.normalized_gain(q),
        sensitivity,
        gain_no_internal_db: point.snr_gain_db(q, Baseline::NoInternal)?,
        gain_no_squeezing_db: point.snr_gain_db(q, Baseline::NoSqueezing)?,
    })
}

/// Evaluates every grid value independently (in parallel); failures are
/// recorded per row and do not stop the sweep.
pub fn sweep(spec: &SweepSpec) -> Vec<SweepOutcome> {
    spec.grid
        .par_iter()
        .map(|&value| match evaluate(spec, value) {
            Ok(row) => SweepOutcome {
                value,
                row: Some(row),
                error: None,
            },
            Err(e) => SweepOutcome {
                value,
                row: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::DecoherenceChain;
    use crate::sensor::CavityParams;

    fn base(db: f64, theta: f64, er: f64) -> OperatingPoint {
        OperatingPoint::new(
            CavityParams::new(0.11, 0.012).unwrap(),
            ExternalSqueezeSource::new(db).unwrap(),
            DecoherenceChain::new(0.08, theta, er).unwrap(),
            0.0,
        )
    }

    fn gain_grid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| -0.99 + 1.98 * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn gain_sweep_has_single_interior_maximum() {
        let spec =
            SweepSpec::new(SweepParameter::Gain, gain_grid(199), base(10.5, 0.05, 0.10)).unwrap();
        let rows: Vec<f64> = sweep(&spec)
            .into_iter()
            .map(|o| o.row.unwrap().gain_no_squeezing_db)
            .collect();
        let peak = rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(peak > 0 && peak < rows.len() - 1);
        assert!(rows[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(rows[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn readout_loss_sweep_is_flat() {
        let spec = SweepSpec::new(
            SweepParameter::ReadoutLoss,
            vec![0.10, 0.20, 0.30],
            base(10.5, 0.05, 0.10),
        )
        .unwrap();
        let gains: Vec<f64> = sweep(&spec)
            .into_iter()
            .map(|o| o.row.unwrap().gain_no_squeezing_db)
            .collect();
        let spread = gains.iter().cloned().fold(f64::MIN, f64::max)
            - gains.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.3, "{gains:?}");
    }

    #[test]
    fn squeezing_sweep_moves_toward_amplification() {
        let spec = SweepSpec::new(
            SweepParameter::SqueezeDb,
            vec![5.4, 8.6, 10.5],
            base(10.5, 0.0, 0.10),
        )
        .unwrap();
        let g: Vec<f64> = sweep(&spec).into_iter().map(|o| o.row.unwrap().g).collect();
        assert!(g[0] < 0.0 && g[0] < g[1] && g[1] < g[2], "{g:?}");
    }

    #[test]
    fn row_errors_do_not_stop_sweep() {
        let spec = SweepSpec::new(
            SweepParameter::ReadoutLoss,
            vec![0.1, 0.5, 1.5],
            base(10.5, 0.05, 0.10),
        )
        .unwrap();
        let out = sweep(&spec);
        assert_eq!(out.len(), 3);
        assert!(out[0].row.is_some() && out[1].row.is_some());
        assert!(out[2].row.is_none() && out[2].error.is_some());
    }

    #[test]
    fn grid_validation() {
        let b = base(10.5, 0.05, 0.10);
        assert!(SweepSpec::new(SweepParameter::Omega, vec![], b).is_err());
        assert!(SweepSpec::new(SweepParameter::Omega, vec![0.1, 0.1], b).is_err());
        assert!(SweepSpec::new(SweepParameter::Omega, vec![0.3, 0.2, 0.1], b).is_ok());
    }

    #[test]
    fn gain_parameterization_is_consistent() {
        let b = base(8.6, 0.04, 0.10);
        let spec = SweepSpec::new(SweepParameter::Gain, gain_grid(21), b).unwrap();
        for o in sweep(&spec) {
            let row = o.row.unwrap();
            assert!((row.g - o.value).abs() < 1e-15);
            assert_eq!(row.sensitivity, b.measured_sensitivity(row.q).unwrap());
        }
    }
}
