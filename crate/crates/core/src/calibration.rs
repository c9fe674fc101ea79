//! Parameter recovery from measured quadrature variances.
//!
//! Each measurement row holds the detected variance of the signal
//! quadrature and of the orthogonal quadrature at one relative pump
//! amplitude `a`, with the internal gain taken as `q = q_max * a`. The
//! forward model is the full decoherence chain with pump-frame jitter, which
//! swaps a fraction of the two quadratures. The fit minimizes
//! `sum ((model - measured) / err)^2` with a damped Gauss-Newton
//! (Levenberg-Marquardt) iteration started from the corners of the bounds
//! box.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decoherence::{
    input_state_from_source, jitter_mixing_weight, DecoherenceChain, ExternalSqueezeSource,
};
use crate::sensor::{anti_quadrature_noise_spectrum, quadrature_noise_spectrum, CavityParams};
use crate::{Error, Result};

/// Iteration cap for a single Levenberg-Marquardt start.
pub const MAX_ITERATIONS: usize = 200;
/// Smallest accepted ratio of extreme singular values of the column-scaled
/// Jacobian at the best fit.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Relative error assigned to noiseless synthetic data so that weights stay
/// finite.
pub const NOMINAL_RELATIVE_ERROR: f64 = 1e-3;
const MAX_STARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FitParameter {
    #[serde(rename = "T_c")]
    TC,
    #[serde(rename = "eps_int")]
    EpsInt,
    #[serde(rename = "eps_inj")]
    EpsInj,
    #[serde(rename = "eps_read")]
    EpsRead,
    #[serde(rename = "theta_rms")]
    ThetaRms,
    #[serde(rename = "r_ext")]
    RExt,
    #[serde(rename = "q_max")]
    QMax,
}

impl FitParameter {
    pub const ALL: [FitParameter; 7] = [
        Self::TC,
        Self::EpsInt,
        Self::EpsInj,
        Self::EpsRead,
        Self::ThetaRms,
        Self::RExt,
        Self::QMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TC => "T_c",
            Self::EpsInt => "eps_int",
            Self::EpsInj => "eps_inj",
            Self::EpsRead => "eps_read",
            Self::ThetaRms => "theta_rms",
            Self::RExt => "r_ext",
            Self::QMax => "q_max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Default search range.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            Self::TC => (0.001, 0.5),
            Self::EpsInt => (0.0, 0.2),
            Self::EpsInj => (0.0, 0.5),
            Self::EpsRead => (0.0, 0.6),
            Self::ThetaRms => (0.0, 0.2),
            Self::RExt => (0.0, 2.5),
            Self::QMax => (0.0, 0.3),
        }
    }
}

/// Full parameter set of the calibrated sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    #[serde(rename = "T_c")]
    pub t_c: f64,
    pub eps_int: f64,
    pub eps_inj: f64,
    pub eps_read: f64,
    pub theta_rms: f64,
    /// Squeeze parameter of the source, `beta = exp(2 r_ext)`.
    pub r_ext: f64,
    /// Internal gain at full pump amplitude.
    pub q_max: f64,
}

impl SensorParams {
    pub fn get(&self, p: FitParameter) -> f64 {
        match p {
            FitParameter::TC => self.t_c,
            FitParameter::EpsInt => self.eps_int,
            FitParameter::EpsInj => self.eps_inj,
            FitParameter::EpsRead => self.eps_read,
            FitParameter::ThetaRms => self.theta_rms,
            FitParameter::RExt => self.r_ext,
            FitParameter::QMax => self.q_max,
        }
    }

    pub fn set(&mut self, p: FitParameter, v: f64) {
        match p {
            FitParameter::TC => self.t_c = v,
            FitParameter::EpsInt => self.eps_int = v,
            FitParameter::EpsInj => self.eps_inj = v,
            FitParameter::EpsRead => self.eps_read = v,
            FitParameter::ThetaRms => self.theta_rms = v,
            FitParameter::RExt => self.r_ext = v,
            FitParameter::QMax => self.q_max = v,
        }
    }

    /// Detected `(signal, orthogonal)` quadrature variances at relative pump
    /// amplitude `a` and frequency `omega`.
    pub fn forward(&self, a: f64, omega: f64) -> Result<(f64, f64)> {
        let cav = CavityParams::new(self.t_c, self.eps_int)?;
        let q = self.q_max * a;
        if !(q.abs() < cav.threshold()) {
            return Err(Error::Unstable {
                q,
                threshold: cav.threshold(),
            });
        }
        let src = ExternalSqueezeSource::from_squeeze_parameter(self.r_ext)?;
        let chain = DecoherenceChain::new(self.eps_inj, self.theta_rms, self.eps_read)?;
        let input = input_state_from_source(&src, self.eps_inj)?;
        let sq = quadrature_noise_spectrum(&cav, q, input.squeezed, self.eps_read, omega)?;
        let anti = anti_quadrature_noise_spectrum(&cav, q, input.anti, self.eps_read, omega)?;
        let s = jitter_mixing_weight(chain.theta_rms());
        Ok(((1.0 - s) * sq + s * anti, (1.0 - s) * anti + s * sq))
    }
}

/// Variances measured at one pump setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePair {
    pub pump_setting: f64,
    pub omega: f64,
    #[serde(rename = "V_sq")]
    pub v_sq: f64,
    #[serde(rename = "V_anti")]
    pub v_anti: f64,
    pub err_sq: f64,
    pub err_anti: f64,
}

/// Forward-model variances on `pump_grid`, optionally with multiplicative
/// Gaussian noise of relative size `noise`. Reported errors are `noise * V`,
/// or [`NOMINAL_RELATIVE_ERROR`]`* V` when `noise` is zero.
pub fn synthesize_measurements(
    truth: &SensorParams,
    pump_grid: &[f64],
    omega: f64,
    noise: f64,
    seed: u64,
) -> Result<Vec<VariancePair>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "noise",
            reason: format!("{noise} must be a finite nonnegative fraction"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = if noise > 0.0 {
        noise
    } else {
        NOMINAL_RELATIVE_ERROR
    };
    pump_grid
        .iter()
        .map(|&a| {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter {
                    name: "pump_setting",
                    reason: format!("{a} outside [0, 1]"),
                });
            }
            let (sq, anti) = truth.forward(a, omega)?;
            let n1: f64 = StandardNormal.sample(&mut rng);
            let n2: f64 = StandardNormal.sample(&mut rng);
            Ok(VariancePair {
                pump_setting: a,
                omega,
                v_sq: sq * (1.0 + noise * n1),
                v_anti: anti * (1.0 + noise * n2),
                err_sq: rel * sq,
                err_anti: rel * anti,
            })
        })
        .collect()
}

/// Which parameters are fitted, where the rest are held, and the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub free: Vec<FitParameter>,
    /// Values for fixed parameters; free entries are ignored.
    pub fixed: SensorParams,
    pub bounds: Vec<(f64, f64)>,
}

impl FitModel {
    /// Uses [`FitParameter::default_bounds`] for every free parameter.
    pub fn new(free: Vec<FitParameter>, fixed: SensorParams) -> Result<Self> {
        let bounds = free.iter().map(|p| p.default_bounds()).collect();
        Self::with_bounds(free, fixed, bounds)
    }

    pub fn with_bounds(
        free: Vec<FitParameter>,
        fixed: SensorParams,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let bad = |reason: String| {
            Err(Error::InvalidParameter {
                name: "free",
                reason,
            })
        };
        if free.is_empty() {
            return bad("no free parameters".into());
        }
        if bounds.len() != free.len() {
            return bad("one bounds pair is needed per free parameter".into());
        }
        for (i, p) in free.iter().enumerate() {
            if free[..i].contains(p) {
                return bad(format!("{} listed twice", p.name()));
            }
            let (lo, hi) = bounds[i];
            let fraction = matches!(
                p,
                FitParameter::TC
                    | FitParameter::EpsInt
                    | FitParameter::EpsInj
                    | FitParameter::EpsRead
            );
            let unphysical =
                lo < 0.0 || (*p == FitParameter::TC && lo == 0.0) || (fraction && hi >= 1.0);
            if !(lo < hi) || !hi.is_finite() || unphysical {
                return bad(format!(
                    "bounds [{lo}, {hi}] for {} are not a physical range",
                    p.name()
                ));
            }
        }
        Ok(Self {
            free,
            fixed,
            bounds,
        })
    }

    fn params(&self, x: &DVector<f64>) -> SensorParams {
        let mut p = self.fixed;
        for (i, f) in self.free.iter().enumerate() {
            p.set(*f, x[i]);
        }
        p
    }

    fn clamp(&self, x: &mut DVector<f64>) {
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            x[i] = x[i].clamp(*lo, *hi);
        }
    }

    /// Start points: corners of the box inset to its 25%/75% points.
    fn starts(&self) -> Vec<DVector<f64>> {
        let n = self.free.len();
        let corners = 1usize
            .checked_shl(n as u32)
            .unwrap_or(usize::MAX)
            .min(MAX_STARTS);
        (0..corners)
            .map(|c| {
                DVector::from_fn(n, |i, _| {
                    let (lo, hi) = self.bounds[i];
                    let frac = if (c >> i) & 1 == 1 { 0.75 } else { 0.25 };
                    lo + frac * (hi - lo)
                })
            })
            .collect()
    }
}

/// Weighted residual of one data row for the signal and orthogonal
/// quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub pump_setting: f64,
    pub model_sq: f64,
    pub model_anti: f64,
    pub residual_sq: f64,
    pub residual_anti: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SensorParams,
    pub free: Vec<FitParameter>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Row-major covariance of the free parameters, `(J^T J)^-1` with
    /// residuals already divided by their errors.
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared weighted residuals.
    pub objective: f64,
    pub residuals: Vec<Residual>,
    pub iterations: usize,
    pub starts: usize,
    pub converged_starts: usize,
}

fn residuals(data: &[VariancePair], p: &SensorParams) -> Result<DVector<f64>> {
    let mut r = DVector::zeros(2 * data.len());
    for (i, d) in data.iter().enumerate() {
        let (sq, anti) = p.forward(d.pump_setting, d.omega)?;
        r[2 * i] = (sq - d.v_sq) / d.err_sq;
        r[2 * i + 1] = (anti - d.v_anti) / d.err_anti;
    }
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Error::NonFinite { x: f64::NAN })
    }
}

/// Weighted sum of squares at `params`.
pub fn objective(data: &[VariancePair], params: &SensorParams) -> Result<f64> {
    Ok(residuals(data, params)?.norm_squared())
}

fn jacobian(
    data: &[VariancePair],
    model: &FitModel,
    x: &DVector<f64>,
    r0: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(r0.len(), x.len());
    for i in 0..x.len() {
        let (lo, hi) = model.bounds[i];
        let h = 6e-6 * x[i].abs().max(0.1 * (hi - lo));
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        // second-order one-sided stencils at the box edges, where the model
        // may be undefined
        let eval = |d: f64| {
            let mut xs = x.clone();
            xs[i] += d;
            residuals(data, &model.params(&xs))
        };
        let col = if x[i] - h < lo {
            (eval(h)? * 4.0 - eval(2.0 * h)? - r0 * 3.0) / (2.0 * h)
        } else if x[i] + h > hi {
            (r0 * 3.0 - eval(-h)? * 4.0 + eval(-2.0 * h)?) / (2.0 * h)
        } else {
            (eval(h)? - eval(-h)?) / (2.0 * h)
        };
        j.set_column(i, &col);
    }
    Ok(j)
}

struct Local {
    x: DVector<f64>,
    cost: f64,
    iterations: usize,
}

fn levenberg_marquardt(
    data: &[VariancePair],
    model: &FitModel,
    start: DVector<f64>,
) -> Result<Local> {
    let mut x = start;
    let mut r = residuals(data, &model.params(&x))?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for it in 1..=MAX_ITERATIONS {
        let j = jacobian(data, model, &x, &r)?;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if cost == 0.0 || g.amax() <= 1e-14 * (1.0 + cost) {
            return Ok(Local {
                x,
                cost,
                iterations: it,
            });
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn = &x + &step;
            model.clamp(&mut xn);
            let trial = residuals(data, &model.params(&xn)).ok().map(|rn| {
                let c = rn.norm_squared();
                (rn, c)
            });
            match trial {
                Some((rn, cn)) if cn <= cost => {
                    let moved = (&xn - &x).amax();
                    let scale = x.amax().max(1e-3);
                    let gain = cost - cn;
                    x = xn;
                    r = rn;
                    cost = cn;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if moved <= 1e-13 * scale || gain <= 1e-15 * cost {
                        return Ok(Local {
                            x,
                            cost,
                            iterations: it,
                        });
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: a (possibly bound-constrained) minimum
            return Ok(Local {
                x,
                cost,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

fn check_data(data: &[VariancePair]) -> Result<()> {
    for (i, d) in data.iter().enumerate() {
        let vals = [
            d.pump_setting,
            d.omega,
            d.v_sq,
            d.v_anti,
            d.err_sq,
            d.err_anti,
        ];
        if vals.iter().any(|v| !v.is_finite()) || d.v_sq <= 0.0 || d.v_anti <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("row {i}: variances must be positive and finite"),
            });
        }
        if d.err_sq <= 0.0 || d.err_anti <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("row {i}: standard errors must be positive"),
            });
        }
        if data[..i]
            .iter()
            .any(|e| e.pump_setting == d.pump_setting && e.omega == d.omega)
        {
            return Err(Error::InvalidParameter {
                name: "data",
                reason: format!("row {i}: repeated pump setting {}", d.pump_setting),
            });
        }
    }
    Ok(())
}

/// Fits the free parameters of `model` to `data`.
pub fn fit_parameters(data: &[VariancePair], model: &FitModel) -> Result<FitResult> {
    check_data(data)?;
    let n_free = model.free.len();
    if 2 * data.len() < n_free + 2 {
        return Err(Error::Identifiability(format!(
            "{} residuals cannot determine {n_free} parameters with two to spare",
            2 * data.len()
        )));
    }
    // sort rows so the result does not depend on input order
    let mut data = data.to_vec();
    data.sort_by(|a, b| {
        a.pump_setting
            .total_cmp(&b.pump_setting)
            .then(a.omega.total_cmp(&b.omega))
    });

    let starts = model.starts();
    let mut best: Option<Local> = None;
    let (mut converged, mut last_err) = (0, None);
    for s in starts.iter().cloned() {
        match levenberg_marquardt(&data, model, s) {
            Ok(local) => {
                converged += 1;
                if best.as_ref().is_none_or(|b| local.cost < b.cost) {
                    best = Some(local);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some(best) = best else {
        return Err(match last_err {
            Some(Error::NoConvergence { iterations }) => Error::NoConvergence { iterations },
            Some(e) => Error::InvalidParameter {
                name: "start",
                reason: format!("no start point gave a valid model: {e}"),
            },
            None => Error::NoConvergence { iterations: 0 },
        });
    };

    let params = model.params(&best.x);
    let r = residuals(&data, &params)?;
    let j = jacobian(&data, model, &best.x, &r)?;
    let norms: Vec<f64> = j.column_iter().map(|c| c.norm()).collect();
    if norms.contains(&0.0) {
        return Err(Error::Identifiability(
            "a free parameter does not affect the data".into(),
        ));
    }
    let scaled = DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| j[(i, k)] / norms[k]);
    let sv = scaled.singular_values();
    let ratio = sv.min() / sv.max();
    if !(ratio >= RANK_TOLERANCE) {
        return Err(Error::Identifiability(format!(
            "Jacobian is rank-deficient (singular value ratio {ratio:.3e})"
        )));
    }
    let cov = (j.transpose() * &j)
        .try_inverse()
        .ok_or_else(|| Error::Identifiability("normal matrix is singular".into()))?;

    let residual_rows = data
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (sq, anti) = params.forward(d.pump_setting, d.omega)?;
            Ok(Residual {
                pump_setting: d.pump_setting,
                model_sq: sq,
                model_anti: anti,
                residual_sq: r[2 * i],
                residual_anti: r[2 * i + 1],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FitResult {
        params,
        free: model.free.clone(),
        values: best.x.iter().copied().collect(),
        std_errors: (0..n_free).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        covariance: (0..n_free)
            .map(|i| (0..n_free).map(|k| cov[(i, k)]).collect())
            .collect(),
        objective: best.cost,
        residuals: residual_rows,
        iterations: best.iterations,
        starts: starts.len(),
        converged_starts: converged,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TableRow {
    pump_setting: f64,
    #[serde(rename = "V_sq")]
    v_sq: f64,
    #[serde(rename = "V_anti")]
    v_anti: f64,
    err_sq: f64,
    err_anti: f64,
}

/// Parses a measurement table (`pump_setting,V_sq,V_anti,err_sq,err_anti`);
/// every row is taken at frequency `omega`.
pub fn read_measurement_table<R: Read>(
    reader: R,
    omega: f64,
) -> std::result::Result<Vec<VariancePair>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected = ["pump_setting", "V_sq", "V_anti", "err_sq", "err_anti"];
    let headers = rdr.headers().map_err(|e| e.to_string())?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format!("expected header {}", expected.join(",")));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TableRow>().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", i + 1))?;
        out.push(VariancePair {
            pump_setting: row.pump_setting,
            omega,
            v_sq: row.v_sq,
            v_anti: row.v_anti,
            err_sq: row.err_sq,
            err_anti: row.err_anti,
        });
    }
    if out.is_empty() {
        return Err("measurement table has no rows".into());
    }
    check_data(&out).map_err(|e| e.to_string())?;
    Ok(out)
}

pub fn write_measurement_table<W: Write>(writer: W, data: &[VariancePair]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in data {
        w.serialize(TableRow {
            pump_setting: d.pump_setting,
            v_sq: d.v_sq,
            v_anti: d.v_anti,
            err_sq: d.err_sq,
            err_anti: d.err_anti,
        })?;
    }
    w.flush()
}
