//! Optimal internal gain: closed form against numerical minimization, the
//! comparison with the commonly quoted optimum, and the internal-loss limit
//! reached for very strong squeezing.
//!
//! ```bash
//! cargo run --example optimal_gain
//! ```

use sqzcav::decoherence::{DecoherenceChain, JitterModel};
use sqzcav::limits::{
    fundamental_limit, gain_reconciliation_report, optimal_gain_analytic,
    optimal_sensitivity_analytic, optimize_gain_numeric,
};
use sqzcav::sensor::{CavityParams, InputQuadratureState};

fn main() -> sqzcav::Result<()> {
    let cav = CavityParams::new(0.11, 0.012)?;
    let beta = 11.22;

    println!(
        "{:>8} {:>11} {:>11} {:>11} {:>11}",
        "eps_read", "q_opt", "numeric", "S_opt", "numeric"
    );
    for eps_read in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let chain = DecoherenceChain::readout_only(eps_read)?;
        let r = optimize_gain_numeric(
            &cav,
            &InputQuadratureState::pure(beta)?,
            &chain,
            0.0,
            JitterModel::PumpFrame,
            None,
        )?;
        println!(
            "{eps_read:>8.2} {:>11.7} {:>11.7} {:>11.7} {:>11.7}",
            optimal_gain_analytic(&cav, beta, eps_read)?,
            r.q_opt,
            optimal_sensitivity_analytic(&cav, beta, eps_read)?,
            r.s_opt
        );
    }

    let report = gain_reconciliation_report(&cav, beta, 0.10)?;
    println!();
    println!("{}", report.note);

    println!();
    println!(
        "internal-loss limit 4 eps_int = {}",
        fundamental_limit(&cav, None)
    );
    for db in [10.0, 20.0, 40.0, 80.0] {
        let b = 10f64.powf(db / 10.0);
        println!(
            "{db:>4} dB: S_opt = {:.8}, q_opt = {:+.6} (threshold {})",
            optimal_sensitivity_analytic(&cav, b, 0.10)?,
            optimal_gain_analytic(&cav, b, 0.10)?,
            cav.threshold()
        );
    }
    Ok(())
}
