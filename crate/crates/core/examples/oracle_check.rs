//! Cross-checks the closed-form spectra against the exact transfer-matrix
//! composition on a random grid and against a small stochastic simulation.
//!
//! ```bash
//! cargo run --release --example oracle_check
//! ```

use sqzcav::oracle::{compare_oracles, default_grid, default_probes, CompareOptions};

fn main() {
    let grid = default_grid(256, 7);
    let mut probes = default_probes(7);
    for p in &mut probes {
        // half the default ensemble keeps the example quick
        p.spec.trajectories = 32;
    }
    let report = compare_oracles(&grid, &probes, CompareOptions::default());
    println!(
        "transfer matrix: {} checks on {} points, max relative error {:.2e}",
        report.analytic_checks, report.analytic_points, report.max_rel_error
    );
    for c in &report.sde {
        println!(
            "{:>20}: DC {:.4} vs {:.4} (std. error {:.1}%), |z| > 3 in {:.2}% of {} bins",
            c.label,
            c.dc_estimate,
            c.dc_expected,
            100.0 * c.dc_rel_stderr,
            100.0 * c.outlier_fraction,
            c.bins
        );
    }
    println!(
        "{}",
        if report.pass {
            "all checks pass"
        } else {
            "CHECKS FAILED"
        }
    );
}
