//! Run configuration file.
//!
//! Every section is optional at parse time; each command then demands the
//! keys it needs, so a missing physics value is reported rather than
//! defaulted.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::calibration::{FitModel, FitParameter, SensorParams};
use crate::decoherence::{DecoherenceChain, ExternalSqueezeSource, JitterModel};
use crate::limits::{Baseline, OperatingPoint};
use crate::sensor::{normalized_frequency, CavityParams, PhysicalScale};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    #[serde(rename = "T_c", skip_serializing_if = "Option::is_none")]
    pub t_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_int: Option<f64>,
    /// Free spectral range; enables `frequency_hz` in the analysis section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fsr_hz: Option<f64>,
    /// Wavelength in meters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Intracavity power in watts.
    #[serde(rename = "P_c", skip_serializing_if = "Option::is_none")]
    pub p_c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub squeeze_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_inj: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_rms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_read: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(v) => vec![*v],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub label: String,
    pub squeeze_db: f64,
    pub theta_rms: f64,
    pub eps_read: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Normalized frequency, one value or a list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<OneOrMany>,
    /// Physical frequency in Hz, one value or a list; needs `cavity.fsr_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<OneOrMany>,
    /// Normalized gain `g = -q / q_th` used by `spectrum`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_grid: Option<GainGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter_model: Option<JitterModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panel: Vec<Panel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Run the stochastic probes (default true).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sde: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sde_trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sde_segments: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub free: Vec<String>,
    /// Internal gain at full pump; required unless fitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    /// Frequency at which the table was measured (default 0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub bounds: std::collections::BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Vec<OutputFormat>>,
}

/// A configuration problem; always exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        Self(e.to_string())
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

fn require<T: Copy>(v: Option<T>, key: &str) -> ConfigResult<T> {
    v.ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    fn cavity_section(&self) -> CavitySection {
        self.cavity.clone().unwrap_or_default()
    }

    fn source_section(&self) -> SourceSection {
        self.source.clone().unwrap_or_default()
    }

    pub fn analysis(&self) -> AnalysisSection {
        self.analysis.clone().unwrap_or_default()
    }

    pub fn cavity_params(&self) -> ConfigResult<CavityParams> {
        let c = self.cavity_section();
        Ok(CavityParams::new(
            require(c.t_c, "cavity.T_c")?,
            require(c.eps_int, "cavity.eps_int")?,
        )?)
    }

    pub fn physical_scale(&self) -> ConfigResult<Option<PhysicalScale>> {
        let c = self.cavity_section();
        match (c.lambda, c.p_c) {
            (Some(l), Some(p)) => Ok(Some(PhysicalScale::new(l, p)?)),
            (None, None) => Ok(None),
            _ => Err(ConfigError(
                "cavity.lambda and cavity.P_c must be given together".into(),
            )),
        }
    }

    pub fn squeeze_source(&self) -> ConfigResult<ExternalSqueezeSource> {
        Ok(ExternalSqueezeSource::new(require(
            self.source_section().squeeze_db,
            "source.squeeze_db",
        )?)?)
    }

    pub fn eps_read(&self) -> ConfigResult<f64> {
        require(
            self.readout.as_ref().and_then(|r| r.eps_read),
            "readout.eps_read",
        )
    }

    pub fn chain(&self) -> ConfigResult<DecoherenceChain> {
        let s = self.source_section();
        Ok(DecoherenceChain::new(
            require(s.eps_inj, "source.eps_inj")?,
            require(s.theta_rms, "source.theta_rms")?,
            self.eps_read()?,
        )?)
    }

    pub fn jitter_model(&self) -> JitterModel {
        self.analysis().jitter_model.unwrap_or_default()
    }

    pub fn baseline(&self) -> Baseline {
        self.analysis().baseline.unwrap_or(Baseline::NoSqueezing)
    }

    /// Normalized analysis frequencies from `omega` or `frequency_hz`.
    pub fn omegas(&self) -> ConfigResult<Vec<f64>> {
        let a = self.analysis();
        let values = match (&a.omega, &a.frequency_hz) {
            (Some(_), Some(_)) => {
                return Err(ConfigError(
                    "give either analysis.omega or analysis.frequency_hz, not both".into(),
                ))
            }
            (Some(o), None) => o.values(),
            (None, Some(f)) => {
                let fsr = require(self.cavity_section().fsr_hz, "cavity.fsr_hz")?;
                f.values()
                    .into_iter()
                    .map(|hz| normalized_frequency(hz, fsr))
                    .collect::<crate::Result<_>>()?
            }
            (None, None) => {
                return Err(ConfigError("missing required key `analysis.omega`".into()))
            }
        };
        if values.is_empty() {
            return Err(ConfigError("analysis.omega is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ConfigError(format!(
                "analysis frequency {v} must be finite and >= 0"
            )));
        }
        Ok(values)
    }

    /// Single analysis frequency; lists are rejected.
    pub fn omega(&self) -> ConfigResult<f64> {
        let v = self.omegas()?;
        if v.len() != 1 {
            return Err(ConfigError(
                "this command needs a single analysis frequency".into(),
            ));
        }
        Ok(v[0])
    }

    pub fn operating_point(&self, omega: f64) -> ConfigResult<OperatingPoint> {
        let mut p = OperatingPoint::new(
            self.cavity_params()?,
            self.squeeze_source()?,
            self.chain()?,
            omega,
        );
        p.jitter_model = self.jitter_model();
        Ok(p)
    }

    pub fn gain(&self) -> ConfigResult<f64> {
        let g = require(self.analysis().g, "analysis.g")?;
        if !(g.is_finite() && g.abs() < 1.0) {
            return Err(ConfigError(format!("analysis.g = {g} must lie in (-1, 1)")));
        }
        Ok(g)
    }

    pub fn gain_grid(&self) -> ConfigResult<Vec<f64>> {
        let gg = require(self.analysis().gain_grid, "analysis.gain_grid")?;
        if gg.points < 2 || !(gg.min < gg.max) || gg.min <= -1.0 || gg.max >= 1.0 {
            return Err(ConfigError(
                "analysis.gain_grid needs -1 < min < max < 1 and at least 2 points".into(),
            ));
        }
        let n = gg.points - 1;
        Ok((0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                gg.min * (1.0 - t) + gg.max * t
            })
            .collect())
    }

    /// Panels for the gain-curve figure; defaults to one panel built from the
    /// source and readout sections.
    pub fn panels(&self) -> ConfigResult<Vec<Panel>> {
        let a = self.analysis();
        if !a.panel.is_empty() {
            let mut labels: Vec<&str> = a.panel.iter().map(|p| p.label.as_str()).collect();
            labels.sort_unstable();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                return Err(ConfigError("analysis.panel labels must be distinct".into()));
            }
            for p in &a.panel {
                ExternalSqueezeSource::new(p.squeeze_db)?;
                DecoherenceChain::new(0.0, p.theta_rms, p.eps_read)?;
                if p.label.is_empty() {
                    return Err(ConfigError("analysis.panel label is empty".into()));
                }
            }
            return Ok(a.panel);
        }
        let chain = self.chain()?;
        Ok(vec![Panel {
            label: "default".into(),
            squeeze_db: self.squeeze_source()?.squeeze_db(),
            theta_rms: chain.theta_rms(),
            eps_read: chain.readout_loss(),
        }])
    }

    pub fn seed(&self) -> Option<u64> {
        self.run.seed
    }

    pub fn formats(&self) -> Vec<OutputFormat> {
        self.run
            .format
            .clone()
            .unwrap_or_else(|| vec![OutputFormat::Csv, OutputFormat::Json])
    }

    pub fn out_dir(&self) -> PathBuf {
        self.run
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("sqzcav-out"))
    }

    /// Fit model with fixed values taken from the physics sections. Keys of
    /// fitted parameters may be omitted.
    pub fn fit_model(&self) -> ConfigResult<(FitModel, f64)> {
        let cal = self
            .calibration
            .clone()
            .ok_or_else(|| ConfigError("missing required section `calibration`".into()))?;
        let mut free = Vec::new();
        for name in &cal.free {
            let p = FitParameter::from_name(name)
                .ok_or_else(|| ConfigError(format!("unknown fit parameter `{name}`")))?;
            free.push(p);
        }
        for key in cal.bounds.keys() {
            let p = FitParameter::from_name(key).ok_or_else(|| {
                ConfigError(format!(
                    "unknown fit parameter `{key}` in calibration.bounds"
                ))
            })?;
            if !free.contains(&p) {
                return Err(ConfigError(format!(
                    "bounds given for `{key}`, which is not free"
                )));
            }
        }
        let c = self.cavity_section();
        let s = self.source_section();
        let is_free = |p: FitParameter| free.contains(&p);
        let value = |p: FitParameter, v: Option<f64>, key: &str| -> ConfigResult<f64> {
            if is_free(p) {
                Ok(v.unwrap_or(f64::NAN))
            } else {
                require(v, key)
            }
        };
        let r_ext = if is_free(FitParameter::RExt) {
            f64::NAN
        } else {
            self.squeeze_source()?.squeeze_parameter()
        };
        let fixed = SensorParams {
            t_c: value(FitParameter::TC, c.t_c, "cavity.T_c")?,
            eps_int: value(FitParameter::EpsInt, c.eps_int, "cavity.eps_int")?,
            eps_inj: value(FitParameter::EpsInj, s.eps_inj, "source.eps_inj")?,
            eps_read: value(
                FitParameter::EpsRead,
                self.readout.as_ref().and_then(|r| r.eps_read),
                "readout.eps_read",
            )?,
            theta_rms: value(FitParameter::ThetaRms, s.theta_rms, "source.theta_rms")?,
            r_ext,
            q_max: value(FitParameter::QMax, cal.q_max, "calibration.q_max")?,
        };
        // validate the fixed values through the library constructors
        let probe = |p: FitParameter, v: f64| if is_free(p) { None } else { Some(v) };
        if let (Some(t), Some(e)) = (
            probe(FitParameter::TC, fixed.t_c),
            probe(FitParameter::EpsInt, fixed.eps_int),
        ) {
            CavityParams::new(t, e)?;
        }
        DecoherenceChain::new(
            probe(FitParameter::EpsInj, fixed.eps_inj).unwrap_or(0.0),
            probe(FitParameter::ThetaRms, fixed.theta_rms).unwrap_or(0.0),
            probe(FitParameter::EpsRead, fixed.eps_read).unwrap_or(0.0),
        )?;
        let bounds = free
            .iter()
            .map(|p| {
                cal.bounds
                    .get(p.name())
                    .map(|b| (b[0], b[1]))
                    .unwrap_or(p.default_bounds())
            })
            .collect();
        let model = FitModel::with_bounds(free, fixed, bounds)?;
        let omega = cal.omega.unwrap_or(0.0);
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(ConfigError(format!(
                "calibration.omega = {omega} must be finite and >= 0"
            )));
        }
        Ok((model, omega))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[cavity]
T_c = 0.11
eps_int = 0.012

[source]
squeeze_db = 10.5
eps_inj = 0.08
theta_rms = 0.05

[readout]
eps_read = 0.10

[analysis]
omega = [0.0, 0.1]
g = 0.0
gain_grid = { min = -0.9, max = 0.9, points = 5 }

[run]
seed = 7
"#;

    #[test]
    fn parses_full_config() {
        let c = RunConfig::parse(FULL).unwrap();
        assert_eq!(c.omegas().unwrap(), vec![0.0, 0.1]);
        let grid = c.gain_grid().unwrap();
        for (g, want) in grid.iter().zip([-0.9, -0.45, 0.0, 0.45, 0.9]) {
            assert!((g - want).abs() < 1e-15);
        }
        assert!((0..5).all(|i| grid[i] == -grid[4 - i]));
        assert_eq!(c.baseline(), Baseline::NoSqueezing);
        assert_eq!(c.formats(), vec![OutputFormat::Csv, OutputFormat::Json]);
        assert!(c.operating_point(0.0).is_ok());
        assert!(c.omega().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = FULL.replace("eps_read = 0.10", "eps_read = 0.10\neps_raed = 0.1");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn missing_physics_key_is_reported() {
        let text = FULL.replace("eps_int = 0.012\n", "");
        let c = RunConfig::parse(&text).unwrap();
        let e = c.cavity_params().unwrap_err();
        assert!(e.0.contains("cavity.eps_int"), "{e}");
    }

    #[test]
    fn invalid_loss_is_rejected() {
        let c = RunConfig::parse(&FULL.replace("eps_read = 0.10", "eps_read = 1.2")).unwrap();
        assert!(c.chain().is_err());
    }

    #[test]
    fn physical_frequency_needs_fsr() {
        let text = FULL.replace("omega = [0.0, 0.1]", "frequency_hz = 5e6");
        assert!(RunConfig::parse(&text).unwrap().omegas().is_err());
        let text = text.replace("eps_int = 0.012", "eps_int = 0.012\nfsr_hz = 1e9");
        let w = RunConfig::parse(&text).unwrap().omegas().unwrap();
        assert!((w[0] - 4.0 * std::f64::consts::PI * 5e6 / 1e9).abs() < 1e-15);
    }

    #[test]
    fn fit_model_from_config() {
        let text =
            format!("{FULL}\n[calibration]\nfree = [\"eps_read\", \"theta_rms\"]\nq_max = 0.1\n");
        let (m, w) = RunConfig::parse(&text).unwrap().fit_model().unwrap();
        assert_eq!(m.free, vec![FitParameter::EpsRead, FitParameter::ThetaRms]);
        assert_eq!(w, 0.0);
        assert_eq!(m.fixed.q_max, 0.1);
        let text = format!("{FULL}\n[calibration]\nfree = [\"eps_read\"]\n");
        assert!(RunConfig::parse(&text).unwrap().fit_model().is_err());
        let text = format!("{FULL}\n[calibration]\nfree = [\"bogus\"]\nq_max = 0.1\n");
        assert!(RunConfig::parse(&text).unwrap().fit_model().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse(FULL).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
