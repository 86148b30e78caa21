use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::strobe::StroboConfig;

/// Minimum number of samples per Larmor period.
pub const MIN_SAMPLES_PER_LARMOR: f64 = 200.0;
/// Minimum number of samples inside one pulse window.
pub const MIN_WINDOW_SAMPLES: usize = 20;

const ALIGN_TOL: f64 = 1e-6;

/// Uniform time grid commensurate with the pulse train.
///
/// The step is `period / samples_per_period` and the total time is a whole
/// number of stroboscopic periods, so every pulse edge falls on a grid point
/// and the probe is on for exactly `duty` of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    /// Effective duration `n_steps * dt` (s).
    pub total_time: f64,
    pub n_steps: usize,
    pub samples_per_period: usize,
}

impl TimeGrid {
    /// Grid with an explicit resolution; `requested_time` is rounded to the
    /// nearest whole number of stroboscopic periods.
    pub fn new(strobo: &StroboConfig, larmor: f64, requested_time: f64, samples_per_period: usize) -> Result<Self> {
        strobo.validate()?;
        if !(larmor > 0.0) {
            return Err(Error::invalid("larmor", format!("must be > 0, got {larmor}")));
        }
        if !(requested_time >= 0.0 && requested_time.is_finite()) {
            return Err(Error::invalid("time", format!("must be >= 0, got {requested_time}")));
        }
        if samples_per_period == 0 {
            return Err(Error::Grid("samples_per_period must be >= 1".into()));
        }
        let period = strobo.period();
        let dt = period / samples_per_period as f64;
        let phase_per_step = dt * larmor;
        if phase_per_step > TAU / MIN_SAMPLES_PER_LARMOR * (1.0 + 1e-12) {
            return Err(Error::Grid(format!(
                "dt * larmor = 2 pi / {:.1}; at least {MIN_SAMPLES_PER_LARMOR} samples per Larmor period are required \
                 (raise samples_per_period to >= {})",
                TAU / phase_per_step,
                min_samples_for_larmor(strobo, larmor)
            )));
        }
        if strobo.duty < 1.0 {
            let window = strobo.duty * samples_per_period as f64;
            if (window - window.round()).abs() > ALIGN_TOL {
                return Err(Error::Grid(format!(
                    "pulse window spans {window} samples; it must be a whole number"
                )));
            }
            if (window.round() as usize) < MIN_WINDOW_SAMPLES {
                return Err(Error::Grid(format!(
                    "pulse window spans {} samples; at least {MIN_WINDOW_SAMPLES} are required",
                    window.round()
                )));
            }
            let edge = strobo.phase / TAU * samples_per_period as f64 - 0.5 * window;
            if (edge - edge.round()).abs() > ALIGN_TOL {
                return Err(Error::Grid(format!(
                    "pulse edges fall {:.3} samples off the grid; choose samples_per_period so that \
                     duty * samples_per_period / 2 and the phase offset are whole numbers",
                    edge - edge.round()
                )));
            }
        }
        let n_periods = (requested_time / period).round() as usize;
        let n_steps = n_periods * samples_per_period;
        Ok(Self {
            dt,
            total_time: n_steps as f64 * dt,
            n_steps,
            samples_per_period,
        })
    }

    /// Coarsest valid grid, searching `samples_per_period` upward from the
    /// Larmor-resolution bound.
    pub fn auto(strobo: &StroboConfig, larmor: f64, requested_time: f64) -> Result<Self> {
        Self::with_min_samples(strobo, larmor, requested_time, 1)
    }

    pub fn with_min_samples(
        strobo: &StroboConfig,
        larmor: f64,
        requested_time: f64,
        min_samples: usize,
    ) -> Result<Self> {
        strobo.validate()?;
        let mut m = min_samples.max(min_samples_for_larmor(strobo, larmor)).max(1);
        if strobo.duty < 1.0 {
            m = m.max((MIN_WINDOW_SAMPLES as f64 / strobo.duty).ceil() as usize);
        }
        let limit = m.saturating_mul(1000).max(100_000);
        let mut last_err = None;
        while m <= limit {
            match Self::new(strobo, larmor, requested_time, m) {
                Ok(g) => return Ok(g),
                Err(e) => last_err = Some(e),
            }
            m += 1;
        }
        Err(Error::Grid(format!(
            "no grid up to {limit} samples per period aligns the pulse edges for duty {} and phase {} ({})",
            strobo.duty,
            strobo.phase,
            last_err.map(|e| e.to_string()).unwrap_or_default()
        )))
    }

    /// Same duration with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let dt = self.dt / factor as f64;
        let n_steps = self.n_steps * factor;
        Self {
            dt,
            total_time: n_steps as f64 * dt,
            n_steps,
            samples_per_period: self.samples_per_period * factor,
        }
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

fn min_samples_for_larmor(strobo: &StroboConfig, larmor: f64) -> usize {
    // dt * larmor <= 2 pi / 200  <=>  M >= 200 * larmor * period / (2 pi)
    let m = MIN_SAMPLES_PER_LARMOR * larmor * strobo.period() / TAU;
    (m - 1e-9).ceil().max(1.0) as usize
}

/// Per-step coefficients: the profile and the Larmor phase at the step
/// midpoint.
#[derive(Debug, Clone)]
pub(crate) struct StepTable {
    pub phi: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl StepTable {
    pub fn new(strobo: &StroboConfig, grid: &TimeGrid, larmor: f64) -> Self {
        let n = grid.n_steps;
        let mut phi = Vec::with_capacity(n);
        let mut cos = Vec::with_capacity(n);
        let mut sin = Vec::with_capacity(n);
        for k in 0..n {
            let t = (k as f64 + 0.5) * grid.dt;
            phi.push(strobo.profile(t));
            let (s, c) = (larmor * t).sin_cos();
            cos.push(c);
            sin.push(s);
        }
        Self { phi, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strobe(d: f64) -> StroboConfig {
        StroboConfig::locked(d, TAU * 500e3).unwrap()
    }

    #[test]
    fn auto_grid_for_operating_point() {
        let s = strobe(0.08);
        let g = TimeGrid::auto(&s, TAU * 500e3, 1e-3).unwrap();
        assert_eq!(g.samples_per_period, 250);
        assert_eq!(g.n_steps % 250, 0);
        assert!((g.total_time - 1e-3).abs() <= 0.5 * s.period());
        let g = TimeGrid::auto(&strobe(0.5), TAU * 500e3, 1e-3).unwrap();
        assert_eq!(g.samples_per_period, 100);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        // dt * larmor = 2 pi / 50
        let s = strobe(1.0);
        let err = TimeGrid::new(&s, TAU * 500e3, 1e-4, 25).unwrap_err();
        assert!(matches!(err, Error::Grid(_)));
        assert!(err.to_string().contains("2 pi / 50.0"), "{err}");
    }

    #[test]
    fn misaligned_window_is_rejected() {
        let s = strobe(0.08);
        // 24-sample window, edges at +-12
        assert!(TimeGrid::new(&s, TAU * 500e3, 1e-4, 300).is_ok());
        // 20.8-sample window
        assert!(TimeGrid::new(&s, TAU * 500e3, 1e-4, 260).is_err());
        // 18-sample window, too short
        assert!(TimeGrid::new(&s, TAU * 500e3, 1e-4, 225).is_err());
        // 25-sample window, edges at +-12.5
        assert!(TimeGrid::new(&strobe(0.1), TAU * 500e3, 1e-4, 250).is_err());
    }

    #[test]
    fn refined_grid_keeps_duration() {
        let g = TimeGrid::auto(&strobe(0.08), TAU * 500e3, 2e-4).unwrap();
        let h = g.refined(2);
        assert_eq!(h.n_steps, 2 * g.n_steps);
        assert!((h.total_time - g.total_time).abs() < 1e-18);
    }

    #[test]
    fn table_duty_is_exact() {
        let s = strobe(0.08);
        let g = TimeGrid::auto(&s, TAU * 500e3, 1e-4).unwrap();
        let t = StepTable::new(&s, &g, TAU * 500e3);
        let on: f64 = t.phi.iter().sum();
        assert_eq!(on as usize * 250, 20 * g.n_steps);
    }
}
