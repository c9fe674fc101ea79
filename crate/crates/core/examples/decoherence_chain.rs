//! How injection loss, phase jitter and readout loss erode the squeezing
//! seen at the detector, and how the two jitter models differ near the
//! squeezing threshold.
//!
//! ```bash
//! cargo run --example decoherence_chain
//! ```

use sqzcav::decoherence::{
    input_state_from_source, jitter_mixing_weight, measured_noise, DecoherenceChain,
    ExternalSqueezeSource, JitterModel,
};
use sqzcav::sensor::CavityParams;

fn main() -> sqzcav::Result<()> {
    let cav = CavityParams::new(0.11, 0.012)?;
    let src = ExternalSqueezeSource::new(10.5)?;
    println!(
        "source: {:.1} dB, beta = {:.4}, r = {:.4}",
        src.squeeze_db(),
        src.beta(),
        src.squeeze_parameter()
    );

    for eps_inj in [0.0, 0.08, 0.2] {
        let v = input_state_from_source(&src, eps_inj)?;
        println!(
            "eps_inj = {eps_inj:.2}: V_sq = {:.5}, V_anti = {:.4}",
            v.squeezed, v.anti
        );
    }

    let input = input_state_from_source(&src, 0.08)?;
    println!();
    println!(
        "{:>7} {:>9} {:>11} {:>11}",
        "theta", "s", "pump-frame", "input-frame"
    );
    for theta in [0.0, 0.015, 0.05, 0.1, 0.2] {
        let chain = DecoherenceChain::new(0.08, theta, 0.10)?;
        println!(
            "{theta:>7.3} {:>9.6} {:>11.5} {:>11.5}",
            jitter_mixing_weight(theta),
            measured_noise(&cav, 0.0, &input, &chain, 0.0, JitterModel::PumpFrame)?,
            measured_noise(&cav, 0.0, &input, &chain, 0.0, JitterModel::InputFrame)?,
        );
    }

    // Close to the squeezing threshold the orthogonal quadrature is strongly
    // amplified, and only the pump-frame model leaks it into the readout.
    println!();
    let chain = DecoherenceChain::new(0.08, 0.05, 0.10)?;
    for g in [-0.5, -0.9, -0.99] {
        let q = cav.gain_from_normalized(g);
        println!(
            "g = {g:+.2}: pump-frame noise {:.4}, input-frame noise {:.4}",
            measured_noise(&cav, q, &input, &chain, 0.0, JitterModel::PumpFrame)?,
            measured_noise(&cav, q, &input, &chain, 0.0, JitterModel::InputFrame)?,
        );
    }
    Ok(())
}
