//! Time-domain integration of the atom-light equations in the rotating frame
//! of the spins.
//!
//! Two engines share one grid: a stochastic Euler-Maruyama integrator that
//! produces single trajectories (atoms and output light), and a
//! deterministic propagator for the Gaussian moments.

mod checkpoint;
mod grid;
mod moments;
mod rng;
mod state;
mod trajectory;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub(crate) use grid::StepTable;
pub use grid::{TimeGrid, MIN_SAMPLES_PER_LARMOR, MIN_WINDOW_SAMPLES};
pub use moments::{final_moments, propagate_moments};
pub use rng::{mix64, trajectory_seed};
pub use state::GaussianSpinState;
pub use trajectory::{
    ensemble_final_states, ensemble_variance, ensemble_variance_with, jackknife_variance, simulate_trajectory,
    EnsembleVariance, NoiseMode, SimulationOptions, Simulator, StepSample, TrajectoryRecord, MIN_ENSEMBLE,
};
