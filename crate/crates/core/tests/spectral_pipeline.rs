use std::f64::consts::TAU;

use strobosq::analytic::{sideband_squeezing, LightSpectrumInputs};
use strobosq::dynamics::{
    read_checkpoint, trajectory_seed, write_checkpoint, Checkpoint, SimulationOptions, Simulator, TimeGrid,
};
use strobosq::params::InteractionRates;
use strobosq::spectral::{
    default_frequency_grid, estimate_from_checkpoint, headline_squeezing, shot_noise_reference,
    sideband_frequency_grid, simulate_spectrum, squeezing_ratio, DEFAULT_EXCLUSION,
};
use strobosq::strobe::StroboConfig;

const LARMOR: f64 = TAU * 500e3;

fn setup(d: f64) -> (InteractionRates, StroboConfig, TimeGrid, f64) {
    let gamma = LARMOR / 100.0;
    let rates = InteractionRates::from_reduced(0.1, gamma, 1.0, d, LARMOR).unwrap();
    let strobo = StroboConfig::locked(d, LARMOR).unwrap();
    let grid = TimeGrid::auto(&strobo, LARMOR, 1.0 / gamma).unwrap();
    (rates, strobo, grid, gamma)
}

#[test]
fn checkpoint_spectrum_equals_streaming_spectrum() {
    let (rates, strobo, grid, gamma) = setup(0.08);
    let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
    let n = 40;
    let records = (0..n).map(|k| sim.record(trajectory_seed(3, k))).collect();
    let ck = Checkpoint {
        rates,
        strobo,
        grid,
        records,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    write_checkpoint(&path, &ck).unwrap();
    let back = read_checkpoint(&path).unwrap();

    let freqs = default_frequency_grid(LARMOR, gamma);
    let stored = estimate_from_checkpoint(&back, &freqs).unwrap();
    let streamed = simulate_spectrum(&sim, &freqs, n as usize, 3).unwrap();
    assert_eq!(stored, streamed);
}

#[test]
fn dip_at_larmor_is_significant() {
    let (rates, strobo, grid, gamma) = setup(0.08);
    let freqs = default_frequency_grid(LARMOR, gamma);
    let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
    let signal = simulate_spectrum(&sim, &freqs, 1000, 1).unwrap();
    let (reference, _) = shot_noise_reference(
        &rates,
        &strobo,
        &grid,
        &freqs,
        1000,
        2,
        &[LARMOR],
        DEFAULT_EXCLUSION * gamma,
    )
    .unwrap();
    let ratio = squeezing_ratio(&signal, &reference).unwrap();
    let h = headline_squeezing(&ratio, LARMOR, gamma).unwrap();
    assert!(h.xi_l2 < 1.0 - 3.0 * h.stderr, "{h:?}");
    assert!((h.omega - LARMOR).abs() <= gamma);
}

#[test]
fn higher_sidebands_squeeze_less() {
    let d = 0.25;
    let (rates, strobo, grid, gamma) = setup(d);
    let orders = [0, 1, 2];
    let freqs = sideband_frequency_grid(LARMOR, gamma, &orders);
    let centers: Vec<f64> = orders.iter().map(|&n| (2 * n + 1) as f64 * LARMOR).collect();
    let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
    let signal = simulate_spectrum(&sim, &freqs, 3000, 5).unwrap();
    let (reference, _) = shot_noise_reference(
        &rates,
        &strobo,
        &grid,
        &freqs,
        3000,
        6,
        &centers,
        DEFAULT_EXCLUSION * gamma,
    )
    .unwrap();
    let ratio = squeezing_ratio(&signal, &reference).unwrap();
    let inputs = LightSpectrumInputs::new(gamma, 1.0, 0.1, d, grid.total_time, LARMOR);
    let mut last: Option<(f64, f64)> = None;
    for (&n, &c) in orders.iter().zip(&centers) {
        let h = headline_squeezing(&ratio, c, gamma).unwrap();
        let want = sideband_squeezing(n, &inputs).unwrap();
        assert!(
            (h.xi_l2 - want).abs() < 4.0 * h.stderr + 0.02,
            "n = {n}: {} vs {want}",
            h.xi_l2
        );
        if let Some((prev, prev_se)) = last {
            assert!(
                h.xi_l2 > prev + 2.0 * (h.stderr.hypot(prev_se)),
                "n = {n}: {} after {prev}",
                h.xi_l2
            );
        }
        last = Some((h.xi_l2, h.stderr));
    }
}
