//! Synthesizes two-quadrature variance measurements over a pump sweep, fits
//! them back, and optionally writes the table for `sqzcav calibrate`.
//!
//! ```bash
//! cargo run --example calibrate_roundtrip -- measurements.csv
//! ```

use sqzcav::calibration::{
    fit_parameters, synthesize_measurements, write_measurement_table, FitModel, FitParameter,
    SensorParams,
};
use sqzcav::decoherence::ExternalSqueezeSource;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = SensorParams {
        t_c: 0.11,
        eps_int: 0.012,
        eps_inj: 0.08,
        eps_read: 0.10,
        theta_rms: 0.05,
        r_ext: ExternalSqueezeSource::new(10.5)?.squeeze_parameter(),
        q_max: 0.1,
    };
    let pumps = [0.0, 0.25, 0.5, 0.75, 1.0];
    let free = vec![
        FitParameter::EpsRead,
        FitParameter::ThetaRms,
        FitParameter::QMax,
    ];
    let model = FitModel::new(free.clone(), truth)?;

    for noise in [0.0, 0.01] {
        let data = synthesize_measurements(&truth, &pumps, 0.0, noise, 42)?;
        let fit = fit_parameters(&data, &model)?;
        println!("relative noise {noise}: chi^2 = {:.3e}", fit.objective);
        for (i, p) in free.iter().enumerate() {
            println!(
                "  {:>9} = {:.7} +- {:.2e} (true {})",
                p.name(),
                fit.values[i],
                fit.std_errors[i],
                truth.get(*p)
            );
        }
        if noise == 0.0 {
            if let Some(path) = std::env::args().nth(1) {
                write_measurement_table(std::fs::File::create(&path)?, &data)?;
                println!("  wrote {path}");
            }
        }
    }
    Ok(())
}
