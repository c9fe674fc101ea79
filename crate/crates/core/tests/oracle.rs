use proptest::prelude::*;
use sqzcav::oracle::{
    compare_oracles, default_grid, run_sde, simulate_signal_transfer, CompareOptions, SdeRunSpec,
};
use sqzcav::sensor::{
    quadrature_noise_spectrum, signal_transfer_power, CavityParams, InputQuadratureState,
};
use sqzcav::Error;

fn cav() -> CavityParams {
    CavityParams::new(0.11, 0.05).unwrap()
}

fn spec(q: f64, input: InputQuadratureState, er: f64, dt: f64, segment_len: usize) -> SdeRunSpec {
    SdeRunSpec {
        dt,
        segment_len,
        segments_per_trajectory: 40,
        trajectories: 8,
        ..SdeRunSpec::new(cav(), q, input, er, 11)
    }
}

/// Mean and standard error of the first `n` nonzero bins, treated as
/// independent.
fn low_band(est: &sqzcav::oracle::PsdEstimate, n: usize) -> (f64, f64, f64) {
    let bins = 1..=n;
    let mean = bins.clone().map(|k| est.signal_quadrature[k]).sum::<f64>() / n as f64;
    let se = bins
        .clone()
        .map(|k| est.signal_stderr[k].powi(2))
        .sum::<f64>()
        .sqrt()
        / n as f64;
    let w = bins.map(|k| est.effective_omega[k]).sum::<f64>() / n as f64;
    (mean, se, w)
}

#[test]
fn halving_the_step_agrees_within_errors() {
    let input = InputQuadratureState::new(0.3, 4.0).unwrap();
    let coarse = run_sde(&spec(0.02, input, 0.1, 0.5, 2048)).unwrap();
    let fine = run_sde(&spec(0.02, input, 0.1, 0.25, 4096)).unwrap();
    // same bin spacing, so bin k is the same frequency in both runs
    assert!((coarse.omega[10] - fine.omega[10]).abs() < 1e-12);
    let (a, sa, wa) = low_band(&coarse, 20);
    let (b, sb, wb) = low_band(&fine, 20);
    assert!(
        (a - b).abs() < 3.0 * (sa * sa + sb * sb).sqrt(),
        "{a} vs {b}"
    );
    for (v, se, w) in [(a, sa, wa), (b, sb, wb)] {
        let expected = quadrature_noise_spectrum(&cav(), 0.02, 0.3, 0.1, w).unwrap();
        assert!(
            (v - expected).abs() < 3.0 * se,
            "{v} vs {expected} (se {se})"
        );
    }
}

#[test]
fn result_is_independent_of_thread_count() {
    let s = spec(
        -0.03,
        InputQuadratureState::new(0.5, 2.0).unwrap(),
        0.2,
        0.5,
        2048,
    );
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_sde(&s).unwrap());
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_sde(&s).unwrap());
    assert_eq!(single, many);
}

#[test]
fn vacuum_is_flat() {
    // only at zero gain: the cavity squeezes vacuum too
    // enough batches that the standard error itself is well determined
    let s = SdeRunSpec {
        trajectories: 48,
        ..spec(0.0, InputQuadratureState::vacuum(), 0.0, 0.5, 2048)
    };
    let est = run_sde(&s).unwrap();
    for (psd, se) in [
        (&est.signal_quadrature, &est.signal_stderr),
        (&est.orthogonal, &est.orthogonal_stderr),
    ] {
        let outliers = (1..psd.len())
            .filter(|&k| ((psd[k] - 1.0) / se[k]).abs() > 3.0)
            .count();
        assert!((outliers as f64) < 0.01 * psd.len() as f64, "{outliers}");
    }
}

#[test]
fn invalid_runs_are_rejected() {
    let v = InputQuadratureState::vacuum();
    let mut s = spec(0.0, v, 0.1, 0.5, 2048);
    s.seed = None;
    assert_eq!(run_sde(&s), Err(Error::MissingSeed));
    assert!(matches!(
        run_sde(&spec(0.16, v, 0.1, 0.5, 2048)),
        Err(Error::Unstable { .. })
    ));
    assert!(matches!(
        run_sde(&spec(0.0, v, 1.0, 0.5, 2048)),
        Err(Error::InvalidParameter { .. })
    ));
    assert!(matches!(
        run_sde(&spec(0.0, v, 0.1, 0.5, 1000)),
        Err(Error::InvalidParameter { .. })
    ));
    assert!(matches!(
        run_sde(&spec(0.0, v, 0.1, 0.5, 64)),
        Err(Error::Unresolved { .. })
    ));
}

#[test]
fn injected_fault_is_caught() {
    let grid = default_grid(16, 3);
    assert!(compare_oracles(&grid, &[], CompareOptions::default()).pass);
    let faulty = CompareOptions {
        fault: 1e-6,
        ..CompareOptions::default()
    };
    let report = compare_oracles(&grid, &[], faulty);
    assert!(!report.pass);
    assert!(!report.failures.is_empty());
}

proptest! {
    #[test]
    fn tone_response_matches_closed_form(g in -0.9..0.9f64, w in 0.0..1.0f64, dt in 0.05..0.3f64) {
        let c = cav();
        let q = c.gain_from_normalized(g);
        let sim = simulate_signal_transfer(&c, q, 0.2, w, dt).unwrap();
        let closed = signal_transfer_power(&c, q, 0.2, w, None).unwrap();
        prop_assert!((sim - closed).abs() < 1e-8 * closed);
    }
}
