//! Command-line front end of the `sqzcav` binary.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or parse error,
//! 3 domain error (singular or unstable parameters), 4 verification failure,
//! 5 non-identifiable fit, 6 fit did not converge.

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::calibration::{fit_parameters, read_measurement_table, FitResult, VariancePair};
use crate::decoherence::{
    measured_noise, measured_sensitivity, measured_signal_transfer, DecoherenceChain,
    ExternalSqueezeSource,
};
use crate::limits::{
    fundamental_limit, gain_reconciliation_report, snr_gain_db, sweep, Baseline,
    GainReconciliation, OptimizationResult, SweepParameter, SweepSpec,
};
use crate::oracle::{
    compare_oracles, default_grid, default_probes, CompareOptions, DiscrepancyReport,
};
use crate::sensor::{
    anti_quadrature_noise_spectrum, quadrature_noise_spectrum, InputQuadratureState,
};
use crate::Error;

pub use config::{ConfigError, OutputFormat, RunConfig};
pub use output::{OutputFile, ResultEnvelope};

use output::{cell, csv_file, json_file, slug, write_all};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_IDENTIFIABILITY: i32 = 5;
pub const EXIT_NO_CONVERGENCE: i32 = 6;

/// Default size of the analytic verification grid.
pub const DEFAULT_VERIFY_POINTS: usize = 64;
/// Relative perturbation used by the hidden fault-injection flag.
const INJECTED_FAULT: f64 = 1e-6;

const DEVIATION_NOTE: &str = "Peak SNR gains here come from the single-mode model with the stated \
parameters only. Reported experimental enhancements of about 4 dB at these settings depend on \
baseline and measurement-frequency details that the parameters do not fix, so absolute levels \
are not expected to match; the trends (peak moving toward amplification with stronger squeezing, \
flatness in readout loss, degradation near g = -1 with jitter) are.";

#[derive(Debug, Parser)]
#[command(
    name = "sqzcav",
    version,
    about = "Quantum-noise model and optimizer for squeezed cavity sensors"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated output formats; overrides `run.format`.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Option<Vec<OutputFormat>>,
    /// Record the wall-clock time in JSON output (breaks byte-identical reruns).
    #[arg(long, global = true)]
    stamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noise, transfer and sensitivity over the analysis frequencies at gain `analysis.g`.
    Spectrum,
    /// Optimal internal gain at a single frequency, with the closed-form comparison.
    Optimize,
    /// SNR gain against normalized gain for each configured panel.
    Figure3,
    /// Check the closed forms against the transfer-matrix and stochastic oracles.
    Verify {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Fit sensor parameters to a measurement table.
    Calibrate {
        /// CSV with header pump_setting,V_sq,V_anti,err_sq,err_anti.
        #[arg(long)]
        data: PathBuf,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: format!("configuration error: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Identifiability(_) => EXIT_IDENTIFIABILITY,
            Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            Error::MissingSeed => EXIT_CONFIG,
            _ => EXIT_DOMAIN,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

struct Context {
    config: RunConfig,
    formats: Vec<OutputFormat>,
    timestamp: Option<u64>,
}

impl Context {
    fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }

    fn envelope<T: Serialize>(
        &self,
        name: &str,
        command: &'static str,
        warnings: Vec<String>,
        result: T,
    ) -> OutputFile {
        json_file(
            name,
            &ResultEnvelope {
                tool: output::TOOL,
                version: output::VERSION,
                command,
                config: &self.config,
                timestamp: self.timestamp,
                warnings,
                result,
            },
        )
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("sqzcav: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli) -> Result<i32, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.run.seed = Some(seed);
    }
    if let Some(f) = &cli.format {
        config.run.format = Some(f.clone());
    }
    if let Some(out) = &cli.out {
        config.run.out = Some(out.clone());
    }
    let out_dir = config.out_dir();
    let formats = config.formats();
    if formats.is_empty() {
        return Err(ConfigError("run.format is empty".into()).into());
    }
    // the echo describes what was computed, not where it was written
    config.run.out = None;
    let timestamp = cli.stamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let ctx = Context {
        config,
        formats,
        timestamp,
    };

    let (files, code) = match &cli.command {
        Command::Spectrum => (cmd_spectrum(&ctx)?, EXIT_OK),
        Command::Optimize => (cmd_optimize(&ctx)?, EXIT_OK),
        Command::Figure3 => (cmd_figure3(&ctx)?, EXIT_OK),
        Command::Verify { inject_fault } => {
            let (files, pass) = cmd_verify(&ctx, *inject_fault)?;
            (files, if pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Calibrate { data } => (cmd_calibrate(&ctx, data)?, EXIT_OK),
    };
    write_all(&out_dir, &files).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot write to {}: {e}", out_dir.display()),
    })?;
    if code == EXIT_VERIFY {
        eprintln!("sqzcav: verification failed; see verify.json");
    }
    Ok(code)
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    omega: f64,
    #[serde(rename = "S_sn")]
    s_sn: f64,
    #[serde(rename = "S_anti")]
    s_anti: f64,
    #[serde(rename = "S_eff")]
    s_eff: f64,
    #[serde(rename = "T2")]
    t2: f64,
    #[serde(rename = "S_x")]
    s_x: f64,
    snr_gain_db: f64,
}

#[derive(Debug, Serialize)]
struct SpectrumResult {
    g: f64,
    q: f64,
    baseline: Baseline,
    input: InputQuadratureState,
    /// Multiply normalized sensitivities by this to get physical units.
    physical_prefactor: Option<f64>,
    fundamental_limit: f64,
    rows: Vec<SpectrumRow>,
}

fn cmd_spectrum(ctx: &Context) -> Result<Vec<OutputFile>, Failure> {
    let cfg = &ctx.config;
    let cav = cfg.cavity_params()?;
    let src = cfg.squeeze_source()?;
    let chain = cfg.chain()?;
    let omegas = cfg.omegas()?;
    let g = cfg.gain()?;
    let scale = cfg.physical_scale()?;
    let model = cfg.jitter_model();
    let baseline = cfg.baseline();
    let q = cav.gain_from_normalized(g);
    let input = crate::decoherence::input_state_from_source(&src, chain.injection_loss())?;
    let er = chain.readout_loss();

    let mut rows = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        rows.push(SpectrumRow {
            omega: w,
            s_sn: quadrature_noise_spectrum(&cav, q, input.squeezed, er, w)?,
            s_anti: anti_quadrature_noise_spectrum(&cav, q, input.anti, er, w)?,
            s_eff: measured_noise(&cav, q, &input, &chain, w, model)?,
            t2: measured_signal_transfer(&cav, q, &chain, w, model)?,
            s_x: measured_sensitivity(&cav, q, &input, &chain, w, model)?,
            snr_gain_db: snr_gain_db(&cav, &input, &chain, w, q, baseline, model)?,
        });
    }
    let warnings = cav.validity_warning(q).into_iter().collect();
    let mut files = Vec::new();
    if ctx.wants(OutputFormat::Csv) {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                [
                    r.omega,
                    r.s_sn,
                    r.s_anti,
                    r.s_eff,
                    r.t2,
                    r.s_x,
                    r.snr_gain_db,
                ]
                .map(cell)
                .to_vec()
            })
            .collect();
        files.push(csv_file(
            "spectrum.csv",
            &[
                "omega",
                "S_sn",
                "S_anti",
                "S_eff",
                "T2",
                "S_x",
                "snr_gain_db",
            ],
            &table,
        ));
    }
    if ctx.wants(OutputFormat::Json) {
        let result = SpectrumResult {
            g,
            q,
            baseline,
            input,
            physical_prefactor: scale.map(|s| s.prefactor()),
            fundamental_limit: fundamental_limit(&cav, None),
            rows,
        };
        files.push(ctx.envelope("spectrum.json", "spectrum", warnings, result));
    }
    Ok(files)
}

#[derive(Debug, Serialize)]
struct OptimizeResult {
    omega: f64,
    input: InputQuadratureState,
    optimum: OptimizationResult,
    fundamental_limit: f64,
    /// Closed-form optimum comparison for pure squeezing with
    /// `beta = 1 / V_sq` at the configured readout loss.
    reconciliation: GainReconciliation,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(cell).unwrap_or_default()
}

fn cmd_optimize(ctx: &Context) -> Result<Vec<OutputFile>, Failure> {
    let cfg = &ctx.config;
    let omega = cfg.omega()?;
    let point = cfg.operating_point(omega)?;
    let input = point.input()?;
    let optimum = point.optimize(None)?;
    let reconciliation = gain_reconciliation_report(
        &point.cavity,
        1.0 / input.squeezed,
        point.chain.readout_loss(),
    )?;
    let warnings = point
        .cavity
        .validity_warning(optimum.q_opt)
        .into_iter()
        .collect();
    let mut files = Vec::new();
    if ctx.wants(OutputFormat::Csv) {
        let o = &optimum;
        files.push(csv_file(
            "optimize.csv",
            &[
                "omega",
                "q_opt",
                "g_opt",
                "S_opt",
                "q_threshold",
                "analytic_q_opt",
                "analytic_S_opt",
            ],
            &[vec![
                cell(omega),
                cell(o.q_opt),
                cell(o.g_opt),
                cell(o.s_opt),
                cell(o.q_threshold),
                opt_cell(o.analytic_q_opt),
                opt_cell(o.analytic_s_opt),
            ]],
        ));
    }
    if ctx.wants(OutputFormat::Json) {
        let result = OptimizeResult {
            omega,
            input,
            optimum,
            fundamental_limit: fundamental_limit(&point.cavity, None),
            reconciliation,
        };
        files.push(ctx.envelope("optimize.json", "optimize", warnings, result));
    }
    Ok(files)
}

#[derive(Debug, Serialize)]
struct PanelSummary {
    label: String,
    file: String,
    squeeze_db: f64,
    theta_rms: f64,
    eps_read: f64,
    /// Optimum of the measured sensitivity over `|g| < 0.999`.
    g_opt: f64,
    q_opt: f64,
    peak_gain_no_internal_db: f64,
    peak_gain_no_squeezing_db: f64,
    /// Largest sampled no-squeezing gain on the grid and its location.
    grid_peak_g: f64,
    grid_peak_gain_no_squeezing_db: f64,
}

#[derive(Debug, Serialize)]
struct Figure3Result {
    omega: f64,
    eps_inj: f64,
    panels: Vec<PanelSummary>,
    expected_deviation: &'static str,
}

fn cmd_figure3(ctx: &Context) -> Result<Vec<OutputFile>, Failure> {
    let cfg = &ctx.config;
    let omega = cfg.omega()?;
    let cav = cfg.cavity_params()?;
    let eps_inj = cfg
        .source
        .as_ref()
        .and_then(|s| s.eps_inj)
        .ok_or_else(|| ConfigError("missing required key `source.eps_inj`".into()))?;
    let grid = cfg.gain_grid()?;
    let panels = cfg.panels()?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for p in &panels {
        let mut point = crate::limits::OperatingPoint::new(
            cav,
            ExternalSqueezeSource::new(p.squeeze_db)?,
            DecoherenceChain::new(eps_inj, p.theta_rms, p.eps_read)?,
            omega,
        );
        point.jitter_model = cfg.jitter_model();
        let spec = SweepSpec::new(SweepParameter::Gain, grid.clone(), point)?;
        let mut rows = Vec::with_capacity(grid.len());
        for o in sweep(&spec) {
            match (o.row, o.error) {
                (Some(r), _) => rows.push(r),
                (None, e) => {
                    return Err(Failure {
                        code: EXIT_DOMAIN,
                        message: format!(
                            "panel {}: g = {}: {}",
                            p.label,
                            o.value,
                            e.unwrap_or_default()
                        ),
                    })
                }
            }
        }
        let opt = point.optimize(None)?;
        let best = rows
            .iter()
            .max_by(|a, b| a.gain_no_squeezing_db.total_cmp(&b.gain_no_squeezing_db))
            .expect("grid has at least two points");
        let file = format!("figure3_{}.csv", slug(&p.label));
        if let Some(w) =
            cav.validity_warning(grid.iter().fold(0.0f64, |m, g| m.max(g.abs())) * cav.threshold())
        {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        summaries.push(PanelSummary {
            label: p.label.clone(),
            file: file.clone(),
            squeeze_db: p.squeeze_db,
            theta_rms: p.theta_rms,
            eps_read: p.eps_read,
            g_opt: opt.g_opt,
            q_opt: opt.q_opt,
            peak_gain_no_internal_db: point.snr_gain_db(opt.q_opt, Baseline::NoInternal)?,
            peak_gain_no_squeezing_db: point.snr_gain_db(opt.q_opt, Baseline::NoSqueezing)?,
            grid_peak_g: best.g,
            grid_peak_gain_no_squeezing_db: best.gain_no_squeezing_db,
        });
        if ctx.wants(OutputFormat::Csv) {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    [r.g, r.q, r.gain_no_internal_db, r.gain_no_squeezing_db]
                        .map(cell)
                        .to_vec()
                })
                .collect();
            files.push(csv_file(
                &file,
                &[
                    "g",
                    "q",
                    "snr_gain_db_no_internal",
                    "snr_gain_db_no_squeezing",
                ],
                &table,
            ));
        }
    }
    let mut names: Vec<&str> = summaries.iter().map(|s| s.file.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(ConfigError("panel labels map to the same file name".into()).into());
    }
    if ctx.wants(OutputFormat::Json) {
        let result = Figure3Result {
            omega,
            eps_inj,
            panels: summaries,
            expected_deviation: DEVIATION_NOTE,
        };
        files.push(ctx.envelope("figure3_summary.json", "figure3", warnings, result));
    }
    Ok(files)
}

fn cmd_verify(ctx: &Context, inject_fault: bool) -> Result<(Vec<OutputFile>, bool), Failure> {
    let cfg = &ctx.config;
    let seed = cfg.seed().ok_or(Error::MissingSeed)?;
    let v = cfg.verify.clone().unwrap_or_default();
    let grid = default_grid(v.grid_points.unwrap_or(DEFAULT_VERIFY_POINTS), seed);
    let mut probes = if v.sde.unwrap_or(true) {
        default_probes(seed)
    } else {
        Vec::new()
    };
    for p in &mut probes {
        if let Some(t) = v.sde_trajectories {
            p.spec.trajectories = t;
        }
        if let Some(s) = v.sde_segments {
            p.spec.segments_per_trajectory = s;
        }
        p.spec
            .validate()
            .map_err(|e| ConfigError(format!("verify: probe {}: {e}", p.label)))?;
    }
    let opts = CompareOptions {
        fault: if inject_fault { INJECTED_FAULT } else { 0.0 },
        ..CompareOptions::default()
    };
    let report: DiscrepancyReport = compare_oracles(&grid, &probes, opts);
    let pass = report.pass;
    let mut files = Vec::new();
    if ctx.wants(OutputFormat::Csv) {
        let table: Vec<Vec<String>> = report
            .sde
            .iter()
            .map(|c| {
                vec![
                    c.label.clone(),
                    c.bins.to_string(),
                    cell(c.outlier_fraction),
                    cell(c.max_abs_z),
                    cell(c.dc_estimate),
                    cell(c.dc_expected),
                    cell(c.dc_rel_stderr),
                    cell(c.dc_z),
                    c.pass.to_string(),
                ]
            })
            .collect();
        files.push(csv_file(
            "verify_sde.csv",
            &[
                "probe",
                "bins",
                "outlier_fraction",
                "max_abs_z",
                "dc_estimate",
                "dc_expected",
                "dc_rel_stderr",
                "dc_z",
                "pass",
            ],
            &table,
        ));
    }
    // the report is always written
    files.push(ctx.envelope("verify.json", "verify", Vec::new(), report));
    Ok((files, pass))
}

#[derive(Debug, Serialize)]
struct CalibrationOutput {
    omega: f64,
    data: Vec<VariancePair>,
    fit: FitResult,
}

fn cmd_calibrate(ctx: &Context, data_path: &PathBuf) -> Result<Vec<OutputFile>, Failure> {
    let (model, omega) = ctx.config.fit_model()?;
    let file = std::fs::File::open(data_path).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("cannot read {}: {e}", data_path.display()),
    })?;
    let data = read_measurement_table(file, omega)
        .map_err(|e| ConfigError(format!("{}: {e}", data_path.display())))?;
    let fit = fit_parameters(&data, &model)?;
    let mut files = Vec::new();
    if ctx.wants(OutputFormat::Csv) {
        let table: Vec<Vec<String>> = fit
            .residuals
            .iter()
            .map(|r| {
                [
                    r.pump_setting,
                    r.model_sq,
                    r.model_anti,
                    r.residual_sq,
                    r.residual_anti,
                ]
                .map(cell)
                .to_vec()
            })
            .collect();
        files.push(csv_file(
            "calibration_residuals.csv",
            &[
                "pump_setting",
                "model_V_sq",
                "model_V_anti",
                "residual_sq",
                "residual_anti",
            ],
            &table,
        ));
    }
    if ctx.wants(OutputFormat::Json) {
        let result = CalibrationOutput { omega, data, fit };
        files.push(ctx.envelope("calibration.json", "calibrate", Vec::new(), result));
    }
    Ok(files)
}
