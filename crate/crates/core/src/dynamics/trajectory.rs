use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::grid::{StepTable, TimeGrid};
use super::rng::{streams, trajectory_seed};
use super::state::GaussianSpinState;
use crate::error::{Error, Result};
use crate::params::InteractionRates;
use crate::strobe::StroboConfig;

/// Minimum ensemble size accepted by [`ensemble_variance`].
pub const MIN_ENSEMBLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Full,
    /// Every random draw is replaced by zero, including the initial-state
    /// draw; the trajectory follows the mean.
    Suppressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    pub initial: GaussianSpinState,
    pub noise: NoiseMode,
}

/// One integration step as seen by an observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub step: usize,
    pub phi: f64,
    /// `(x_A, p_A)` at the start of the step.
    pub atom: [f64; 2],
    /// `(x_L^in, p_L^in)` white-noise samples of the step.
    pub light_in: [f64; 2],
    /// `(x_L^out, p_L^out)` built from the same input samples.
    pub light_out: [f64; 2],
}

/// A full trajectory on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// Step start times `k dt`.
    pub times: Vec<f64>,
    /// `(x_A, p_A)` at each step start.
    pub atom_series: Vec<[f64; 2]>,
    /// Per-step `(x_L^out, p_L^out)` samples.
    pub light_out_series: Vec<[f64; 2]>,
    /// `(x_A, p_A)` at the end of the run.
    pub final_state: [f64; 2],
}

/// Integrates the rotating-frame input-output equations on a fixed grid.
///
/// The scheme is Euler-Maruyama with the (linear, isotropic) damping
/// integrated exactly over each step: with `r = gamma_s phi + gamma_ex`,
///
/// ```text
/// X_{k+1} = e^{-r dt} X_k + e^{-r dt/2} dt B_k xi_k
/// ```
///
/// where `xi_k` holds the light and Langevin white-noise samples of step `k`
/// (variance `1 / (2 dt)` each) and `B_k` their coefficients at the step
/// midpoint. The output light of step `k` uses the state at the step start
/// and the same `xi_k`.
///
/// Draws that cannot influence the atoms are skipped: light inputs while
/// the probe is off come from a separate stream used only when the full
/// record is requested, and Langevin forces are drawn only when
/// `gamma_ex > 0`.
#[derive(Debug, Clone)]
pub struct Simulator {
    rates: InteractionRates,
    strobo: StroboConfig,
    grid: TimeGrid,
    opts: SimulationOptions,
    table: StepTable,
    sigma: f64,
    decay: [f64; 2],
    half_decay: [f64; 2],
    langevin: f64,
}

impl Simulator {
    pub fn new(
        rates: &InteractionRates,
        strobo: &StroboConfig,
        grid: &TimeGrid,
        opts: SimulationOptions,
    ) -> Result<Self> {
        check_grid(rates, strobo, grid)?;
        if !opts.initial.is_physical(1e-9) {
            return Err(Error::invalid(
                "initial",
                "initial covariance must be symmetric with det >= 1/4",
            ));
        }
        let gamma_s = rates.gamma_s();
        let r_off = rates.gamma_ex;
        let r_on = gamma_s + rates.gamma_ex;
        let dt = grid.dt;
        Ok(Self {
            rates: *rates,
            strobo: *strobo,
            grid: *grid,
            opts,
            table: StepTable::new(strobo, grid, rates.larmor),
            sigma: (0.5 / dt).sqrt(),
            decay: [(-r_off * dt).exp(), (-r_on * dt).exp()],
            half_decay: [(-0.5 * r_off * dt).exp(), (-0.5 * r_on * dt).exp()],
            langevin: (2.0 * rates.gamma_ex).sqrt(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn strobo(&self) -> &StroboConfig {
        &self.strobo
    }

    pub fn rates(&self) -> &InteractionRates {
        &self.rates
    }

    /// State at the end of the run.
    pub fn final_state(&self, seed: u64) -> [f64; 2] {
        self.drive(seed, false, |_| {})
    }

    /// Visits only the steps where the probe is on.
    pub fn run_on_pulse(&self, seed: u64, visit: impl FnMut(&StepSample)) -> [f64; 2] {
        self.drive(seed, false, visit)
    }

    /// Visits every step.
    pub fn run_observed(&self, seed: u64, visit: impl FnMut(&StepSample)) -> [f64; 2] {
        self.drive(seed, true, visit)
    }

    pub fn record(&self, seed: u64) -> TrajectoryRecord {
        let n = self.grid.n_steps;
        let mut times = Vec::with_capacity(n);
        let mut atom_series = Vec::with_capacity(n);
        let mut light_out_series = Vec::with_capacity(n);
        let final_state = self.run_observed(seed, |s| {
            times.push(self.grid.time(s.step));
            atom_series.push(s.atom);
            light_out_series.push(s.light_out);
        });
        TrajectoryRecord {
            seed,
            times,
            atom_series,
            light_out_series,
            final_state,
        }
    }

    fn drive(&self, seed: u64, visit_off: bool, mut visit: impl FnMut(&StepSample)) -> [f64; 2] {
        let (mut main, mut vacuum) = streams(seed);
        let noisy = self.opts.noise == NoiseMode::Full;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if noisy {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };

        let init = &self.opts.initial;
        let l = init.cholesky();
        let z0 = draw(&mut main);
        let z1 = draw(&mut main);
        let mut x = init.mean[0] + l[0][0] * z0;
        let mut p = init.mean[1] + l[1][0] * z0 + l[1][1] * z1;

        let kappa = self.rates.kappa;
        let zk = self.rates.zeta2 * kappa;
        let dt = self.grid.dt;
        let sigma = self.sigma;
        let has_langevin = self.rates.gamma_ex > 0.0;
        let t = &self.table;

        for k in 0..t.len() {
            let phi = t.phi[k];
            let on = phi > 0.0;
            if !on && !visit_off && !has_langevin {
                // nothing acts on the atoms and nobody is watching
                continue;
            }
            let (x_in, p_in) = if on {
                let p_in = sigma * draw(&mut main);
                let x_in = sigma * draw(&mut main);
                (x_in, p_in)
            } else if visit_off {
                let p_in = sigma * draw(&mut vacuum);
                let x_in = sigma * draw(&mut vacuum);
                (x_in, p_in)
            } else {
                (0.0, 0.0)
            };
            let (fx, fp) = if has_langevin {
                (sigma * draw(&mut main), sigma * draw(&mut main))
            } else {
                (0.0, 0.0)
            };
            let (c, s) = (t.cos[k], t.sin[k]);

            if on || visit_off {
                let x_out = x_in + kappa * phi * (-x * s + p * c);
                let p_out = p_in - zk * phi * (x * c + p * s);
                visit(&StepSample {
                    step: k,
                    phi,
                    atom: [x, p],
                    light_in: [x_in, p_in],
                    light_out: [x_out, p_out],
                });
            }

            let idx = on as usize;
            let inj_x = kappa * phi * c * p_in + zk * phi * s * x_in + self.langevin * fx;
            let inj_p = kappa * phi * s * p_in - zk * phi * c * x_in + self.langevin * fp;
            let dec = self.decay[idx];
            let half = self.half_decay[idx] * dt;
            x = dec * x + half * inj_x;
            p = dec * p + half * inj_p;
        }
        [x, p]
    }
}

pub(crate) fn check_grid(rates: &InteractionRates, strobo: &StroboConfig, grid: &TimeGrid) -> Result<()> {
    if !(rates.zeta2 > 0.0) {
        return Err(Error::Regime { zeta2: rates.zeta2 });
    }
    if !rates.kappa.is_finite() || !(rates.gamma_ex >= 0.0) {
        return Err(Error::invalid("rates", "kappa must be finite and gamma_ex >= 0"));
    }
    let expected = TimeGrid::new(strobo, rates.larmor, grid.total_time, grid.samples_per_period)?;
    if expected.n_steps != grid.n_steps || (expected.dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(Error::Grid(format!(
            "grid ({} steps of {:e} s) is not commensurate with the pulse train",
            grid.n_steps, grid.dt
        )));
    }
    Ok(())
}

/// Runs one trajectory and keeps every step.
pub fn simulate_trajectory(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    seed: u64,
    opts: SimulationOptions,
) -> Result<TrajectoryRecord> {
    Ok(Simulator::new(rates, strobo, grid, opts)?.record(seed))
}

/// Final states of trajectories `0..n_traj`, in trajectory order.
pub fn ensemble_final_states(sim: &Simulator, n_traj: usize, base_seed: u64) -> Vec<[f64; 2]> {
    (0..n_traj as u64)
        .into_par_iter()
        .map(|k| sim.final_state(trajectory_seed(base_seed, k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleVariance {
    /// Unbiased sample variance of the rotated quadrature at `T`.
    pub variance: f64,
    /// Jackknife standard error of `variance`.
    pub std_error: f64,
    pub mean: f64,
    pub n_traj: usize,
}

/// Sample variance of `q = p_A cos(theta/2) + x_A sin(theta/2)` at the end
/// of `n_traj` independent trajectories.
pub fn ensemble_variance(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    n_traj: usize,
    base_seed: u64,
    quad_angle: f64,
) -> Result<EnsembleVariance> {
    let sim = Simulator::new(rates, strobo, grid, SimulationOptions::default())?;
    ensemble_variance_with(&sim, n_traj, base_seed, quad_angle)
}

pub fn ensemble_variance_with(
    sim: &Simulator,
    n_traj: usize,
    base_seed: u64,
    quad_angle: f64,
) -> Result<EnsembleVariance> {
    if n_traj < MIN_ENSEMBLE {
        return Err(Error::invalid(
            "n_traj",
            format!("at least {MIN_ENSEMBLE} trajectories are required, got {n_traj}"),
        ));
    }
    let (s, c) = (0.5 * quad_angle).sin_cos();
    let q: Vec<f64> = ensemble_final_states(sim, n_traj, base_seed)
        .iter()
        .map(|st| st[1] * c + st[0] * s)
        .collect();
    let (mean, variance, std_error) = jackknife_variance(&q);
    Ok(EnsembleVariance {
        variance,
        std_error,
        mean,
        n_traj,
    })
}

/// Returns `(mean, unbiased variance, jackknife standard error of the
/// variance)`. Sums run in slice order.
pub fn jackknife_variance(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len();
    assert!(n >= 3, "jackknife needs at least three samples");
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let ss: f64 = samples.iter().map(|q| (q - mean).powi(2)).sum();
    let var = ss / (nf - 1.0);
    // leave-one-out variances in closed form
    let loo = |q: f64| (ss - nf / (nf - 1.0) * (q - mean).powi(2)) / (nf - 2.0);
    let loo_mean = samples.iter().map(|&q| loo(q)).sum::<f64>() / nf;
    let jk: f64 = samples.iter().map(|&q| (loo(q) - loo_mean).powi(2)).sum();
    (mean, var, ((nf - 1.0) / nf * jk).sqrt())
}
