use super::grid::{StepTable, TimeGrid};
use super::state::GaussianSpinState;
use super::trajectory::check_grid;
use crate::error::Result;
use crate::params::InteractionRates;
use crate::strobe::StroboConfig;

/// Deterministic evolution of the Gaussian moments of `(x_A, p_A)`.
///
/// Returns `n_steps + 1` states, the first being `initial`. The mean decays
/// exactly; the covariance obeys `dC/dt = -2 r C + D(t)` and is advanced with
/// RK4 inside each step (the profile is constant there).
pub fn propagate_moments(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    initial: &GaussianSpinState,
) -> Result<Vec<GaussianSpinState>> {
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    out.push(*initial);
    evolve(rates, strobo, grid, initial, |s| out.push(*s))?;
    Ok(out)
}

/// Only the state at the end of the grid.
pub fn final_moments(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    initial: &GaussianSpinState,
) -> Result<GaussianSpinState> {
    evolve(rates, strobo, grid, initial, |_| {})
}

fn evolve(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    initial: &GaussianSpinState,
    mut visit: impl FnMut(&GaussianSpinState),
) -> Result<GaussianSpinState> {
    check_grid(rates, strobo, grid)?;
    let table = StepTable::new(strobo, grid, rates.larmor);
    let k2 = rates.kappa * rates.kappa;
    let z4 = rates.zeta2 * rates.zeta2;
    let gamma_s = rates.gamma_s();
    let gex = rates.gamma_ex;
    let w = rates.larmor;
    let dt = grid.dt;

    let diffusion = |phi: f64, t: f64| -> [f64; 3] {
        let (s, c) = (w * t).sin_cos();
        let a = 0.5 * k2 * phi * phi;
        [
            a * (c * c + z4 * s * s) + gex,
            a * (s * s + z4 * c * c) + gex,
            a * (1.0 - z4) * s * c,
        ]
    };

    let mut st = *initial;
    // [xx, pp, xp]
    let mut cv = [st.cov[0][0], st.cov[1][1], st.cov[0][1]];
    for k in 0..table.len() {
        let phi = table.phi[k];
        let r = gamma_s * phi * phi + gex;
        let t0 = k as f64 * dt;
        let rhs = |c: &[f64; 3], t: f64| {
            let d = diffusion(phi, t);
            [-2.0 * r * c[0] + d[0], -2.0 * r * c[1] + d[1], -2.0 * r * c[2] + d[2]]
        };
        let add = |c: &[f64; 3], k: &[f64; 3], h: f64| [c[0] + h * k[0], c[1] + h * k[1], c[2] + h * k[2]];
        let k1 = rhs(&cv, t0);
        let k2_ = rhs(&add(&cv, &k1, 0.5 * dt), t0 + 0.5 * dt);
        let k3 = rhs(&add(&cv, &k2_, 0.5 * dt), t0 + 0.5 * dt);
        let k4 = rhs(&add(&cv, &k3, dt), t0 + dt);
        for i in 0..3 {
            cv[i] += dt / 6.0 * (k1[i] + 2.0 * k2_[i] + 2.0 * k3[i] + k4[i]);
        }
        let decay = (-r * dt).exp();
        st.mean = [st.mean[0] * decay, st.mean[1] * decay];
        st.cov = [[cv[0], cv[2]], [cv[2], cv[1]]];
        visit(&st);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{spin_variance, SpinSqueezingInputs};
    use std::f64::consts::{PI, TAU};

    const LARMOR: f64 = TAU * 500e3;

    fn setup(d: f64, gt: f64, eps: f64) -> (InteractionRates, StroboConfig, TimeGrid) {
        let gamma = LARMOR / 100.0;
        let rates = InteractionRates::from_reduced(0.1, gamma, eps, d, LARMOR).unwrap();
        let strobo = StroboConfig::locked(d, LARMOR).unwrap();
        let grid = TimeGrid::auto(&strobo, LARMOR, gt / gamma).unwrap();
        (rates, strobo, grid)
    }

    #[test]
    fn coherent_state_stays_physical() {
        let (rates, strobo, grid) = setup(0.08, 1.0, 0.9);
        let states = propagate_moments(&rates, &strobo, &grid, &GaussianSpinState::coherent()).unwrap();
        assert_eq!(states.len(), grid.n_steps + 1);
        for s in &states {
            assert!(s.det() >= 0.25 - 1e-9, "det = {}", s.det());
        }
    }

    #[test]
    fn matches_closed_form_spin_variance() {
        for &(d, theta) in &[(0.08, 0.0), (0.08, PI), (0.5, 0.0), (1.0, 0.0)] {
            let (rates, strobo, grid) = setup(d, 1.0, 0.9);
            let fin = final_moments(&rates, &strobo, &grid, &GaussianSpinState::coherent()).unwrap();
            let inputs = SpinSqueezingInputs {
                gamma_total: rates.gamma_total(d),
                epsilon: 0.9,
                duty: d,
                zeta2: 0.1,
                time: grid.total_time,
                t1: None,
                quad_angle: theta,
            };
            let exact = spin_variance(&inputs).unwrap();
            let got = fin.variance_along(theta);
            assert!(
                (got / exact - 1.0).abs() < 2e-3,
                "d={d} theta={theta}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn step_halving_converges() {
        let (rates, strobo, grid) = setup(0.08, 1.0, 0.9);
        let c = GaussianSpinState::coherent();
        let a = final_moments(&rates, &strobo, &grid, &c).unwrap();
        let b = final_moments(&rates, &strobo, &grid.refined(2), &c).unwrap();
        let va = a.variance_along(0.0);
        let vb = b.variance_along(0.0);
        assert!((va / vb - 1.0).abs() < 1e-4, "{va} vs {vb}");
    }
}
