//! Optimum against one parameter at a time: readout loss, squeezing level
//! and phase jitter. Each row reoptimizes the internal gain.
//!
//! ```bash
//! cargo run --example parameter_sweep
//! ```

use sqzcav::decoherence::{DecoherenceChain, ExternalSqueezeSource};
use sqzcav::limits::{sweep, OperatingPoint, SweepParameter, SweepSpec};
use sqzcav::sensor::CavityParams;

fn main() -> sqzcav::Result<()> {
    let base = OperatingPoint::new(
        CavityParams::new(0.11, 0.012)?,
        ExternalSqueezeSource::new(10.5)?,
        DecoherenceChain::new(0.08, 0.05, 0.10)?,
        0.0,
    );
    let sweeps = [
        (
            SweepParameter::ReadoutLoss,
            vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
        ),
        (SweepParameter::SqueezeDb, vec![3.0, 6.0, 9.0, 12.0, 15.0]),
        (SweepParameter::ThetaRms, vec![0.0, 0.02, 0.05, 0.1, 0.15]),
        (SweepParameter::Omega, vec![0.0, 0.05, 0.1, 0.2]),
    ];
    for (parameter, grid) in sweeps {
        println!("{parameter:?}");
        for o in sweep(&SweepSpec::new(parameter, grid, base)?) {
            match o.row {
                Some(r) => println!(
                    "  {:>6} g_opt {:+.4}  S_x {:.5}  {:+.3} dB vs no squeezing",
                    o.value, r.g, r.sensitivity, r.gain_no_squeezing_db
                ),
                None => println!("  {:>6} failed: {}", o.value, o.error.unwrap_or_default()),
            }
        }
    }
    Ok(())
}
