//! SNR gain against normalized internal gain for several squeezing levels
//! and readout losses. With weak squeezing the best setting squeezes the
//! signal quadrature (g < 0); with strong squeezing it amplifies (g > 0).
//!
//! ```bash
//! cargo run --example regime_map
//! ```

use sqzcav::decoherence::{DecoherenceChain, ExternalSqueezeSource};
use sqzcav::limits::{sweep, Baseline, OperatingPoint, SweepParameter, SweepSpec};
use sqzcav::sensor::CavityParams;

fn main() -> sqzcav::Result<()> {
    let cav = CavityParams::new(0.11, 0.012)?;
    let datasets = [
        (5.4, 0.015, 0.10),
        (8.6, 0.040, 0.10),
        (10.5, 0.050, 0.10),
        (10.5, 0.050, 0.20),
        (10.5, 0.050, 0.30),
    ];
    let grid: Vec<f64> = (0..=20).map(|i| -0.95 + 0.095 * i as f64).collect();

    for (db, theta, eps_read) in datasets {
        let point = OperatingPoint::new(
            cav,
            ExternalSqueezeSource::new(db)?,
            DecoherenceChain::new(0.08, theta, eps_read)?,
            0.0,
        );
        let best = point.optimize(None)?;
        println!(
            "{db} dB, {:.0} mrad, {:.0}% loss: g_opt = {:+.3}, gain {:.3} dB vs no squeezing, {:.3} dB vs no internal",
            theta * 1e3,
            eps_read * 100.0,
            best.g_opt,
            point.snr_gain_db(best.q_opt, Baseline::NoSqueezing)?,
            point.snr_gain_db(best.q_opt, Baseline::NoInternal)?,
        );
        let rows = sweep(&SweepSpec::new(SweepParameter::Gain, grid.clone(), point)?);
        let line: Vec<String> = rows
            .iter()
            .filter_map(|o| o.row.as_ref())
            .map(|r| format!("{:+.1}", r.gain_no_squeezing_db))
            .collect();
        println!("  g from -0.95 to 0.95: {}", line.join(" "));
    }
    Ok(())
}
