//! Closed-form output noise, signal transfer and sensitivity of the sensor
//! cavity for a few internal gains, plus the threshold and lossless
//! benchmarks.
//!
//! ```bash
//! cargo run --example sensitivity_spectrum
//! ```

use sqzcav::sensor::{
    qcrb, spectrum, threshold_sensitivity, CavityParams, InputQuadratureState, PhysicalScale,
};

fn main() -> sqzcav::Result<()> {
    let cav = CavityParams::new(0.11, 0.012)?;
    let input = InputQuadratureState::pure(10f64.powf(1.05))?; // 10.5 dB, no loss
    let eps_read = 0.10;
    let omegas = [0.0, 0.02, 0.05, 0.1, 0.2, 0.5];

    for g in [-0.5, 0.0, 0.5] {
        let q = cav.gain_from_normalized(g);
        let s = spectrum(&cav, q, &input, eps_read, &omegas, None)?;
        println!("g = {g:+.2} (q = {q:+.4})");
        println!(
            "  {:>6} {:>10} {:>10} {:>10}",
            "omega", "noise", "transfer", "S_x"
        );
        for i in 0..s.len() {
            println!(
                "  {:>6.3} {:>10.5} {:>10.4} {:>10.5}",
                s.omega[i], s.noise[i], s.transfer[i], s.sensitivity[i]
            );
        }
    }

    let at_threshold = threshold_sensitivity(&cav, &InputQuadratureState::vacuum(), eps_read, 0.0)?;
    println!("vacuum input, squeezer at threshold: S_x = {at_threshold:.6}");

    let lossless = CavityParams::new(0.11, 0.0)?;
    let scale = PhysicalScale::new(1064e-9, 1.0)?;
    for q in [0.0, 0.05, 0.1] {
        println!(
            "lossless bound at q = {q:.2}: {:.6} (normalized), {:.3e} (physical)",
            qcrb(&lossless, q, 10.0, None)?,
            qcrb(&lossless, q, 10.0, Some(&scale))?
        );
    }
    Ok(())
}
