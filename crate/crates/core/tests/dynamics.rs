use std::f64::consts::TAU;

use strobosq::analytic::{spin_squeezing_param, SpinSqueezingInputs};
use strobosq::dynamics::{
    ensemble_final_states, ensemble_variance_with, final_moments, GaussianSpinState, SimulationOptions, Simulator,
    TimeGrid,
};
use strobosq::params::InteractionRates;
use strobosq::strobe::StroboConfig;

const LARMOR: f64 = TAU * 500e3;

fn setup(d: f64, gt: f64) -> (InteractionRates, StroboConfig, TimeGrid) {
    let gamma = LARMOR / 100.0;
    let rates = InteractionRates::from_reduced(0.1, gamma, 1.0, d, LARMOR).unwrap();
    let strobo = StroboConfig::locked(d, LARMOR).unwrap();
    let grid = TimeGrid::auto(&strobo, LARMOR, gt / gamma).unwrap();
    (rates, strobo, grid)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn monte_carlo_matches_moments_at_several_angles() {
    let (rates, strobo, grid) = setup(0.08, 1.0);
    let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
    let exact = final_moments(&rates, &strobo, &grid, &GaussianSpinState::coherent()).unwrap();
    for (i, th) in [0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|k| k * std::f64::consts::PI)
        .enumerate()
    {
        let ev = ensemble_variance_with(&sim, 4000, 30 + i as u64, th).unwrap();
        let want = exact.variance_along(th);
        assert!(
            (ev.variance - want).abs() < 3.0 * ev.std_error,
            "angle {th}: {} vs {want} (se {})",
            ev.variance,
            ev.std_error
        );
    }
}

#[test]
fn moments_track_closed_form_over_time() {
    let (rates, strobo, _) = setup(0.25, 1.0);
    let gamma = LARMOR / 100.0;
    for gt in [0.2, 1.0, 3.0] {
        let grid = TimeGrid::auto(&strobo, LARMOR, gt / gamma).unwrap();
        let m = 2.0
            * final_moments(&rates, &strobo, &grid, &GaussianSpinState::coherent())
                .unwrap()
                .variance_along(0.0);
        let a = spin_squeezing_param(&SpinSqueezingInputs {
            gamma_total: gamma,
            epsilon: 1.0,
            duty: 0.25,
            zeta2: 0.1,
            time: grid.total_time,
            t1: None,
            quad_angle: 0.0,
        })
        .unwrap();
        assert!((m / a - 1.0).abs() < 1e-2, "gamma T = {gt}: {m} vs {a}");
    }
}

/// Correlation of the demodulated early output quadrature with p_A(T).
fn early_record_correlation(rates: &InteractionRates, strobo: &StroboConfig, grid: &TimeGrid, n: u64) -> f64 {
    let sim = Simulator::new(rates, strobo, grid, SimulationOptions::default()).unwrap();
    let cutoff = grid.total_time / 10.0;
    let (mut q, mut pa) = (Vec::new(), Vec::new());
    for k in 0..n {
        let mut s = 0.0;
        let end = sim.run_on_pulse(k, |st| {
            let t = grid.time(st.step);
            if t < cutoff {
                s += st.light_out[1] * (LARMOR * t).sin() * grid.dt;
            }
        });
        q.push(s);
        pa.push(end[1]);
    }
    pearson(&q, &pa)
}

#[test]
fn in_loop_correlation_follows_coupling_sign() {
    let n = 10_000;
    let (rates, strobo, grid) = setup(0.08, 1.0);
    let flipped = InteractionRates {
        kappa: -rates.kappa,
        ..rates
    };
    let plus = early_record_correlation(&rates, &strobo, &grid, n);
    let minus = early_record_correlation(&flipped, &strobo, &grid, n);
    // the sample correlation of independent series has se 1/sqrt(n)
    let three_sigma = 3.0 / (n as f64).sqrt();
    assert!(plus.abs() > three_sigma && minus.abs() > three_sigma, "{plus} {minus}");
    assert!(plus * minus < 0.0, "{plus} {minus}");
}

#[test]
fn without_atoms_output_is_uncorrelated_with_spin() {
    let (rates, strobo, grid) = setup(0.08, 1.0);
    let off = InteractionRates { kappa: 0.0, ..rates };
    let r = early_record_correlation(&off, &strobo, &grid, 2000);
    assert!(r.abs() < 4.0 / 2000f64.sqrt(), "{r}");
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let (rates, strobo, grid) = setup(0.5, 1.0);
    let sim = Simulator::new(&rates, &strobo, &grid, SimulationOptions::default()).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                ensemble_final_states(&sim, 300, 9),
                ensemble_variance_with(&sim, 300, 9, 0.3).unwrap(),
            )
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}
