//! The stroboscopic pulse train and its Fourier description.
//!
//! The probe is on during a window of width `duty * period` every period
//! `2 pi / omega_m`. The window is centered on `t = phase / omega_m`, which
//! makes the Fourier coefficients `A_n = d sinc(pi n d)` real. With the
//! default `phase = 0` the first window is centered on `t = 0`. Membership is
//! half-open, `(center - w/2, center + w/2]`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::params::check_duty;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StroboConfig {
    /// Duty cycle in (0, 1].
    pub duty: f64,
    /// Stroboscopic angular frequency (rad/s), nominally twice the Larmor
    /// frequency.
    pub omega_m: f64,
    /// Offset of the window center, in radians of the stroboscopic cycle.
    pub phase: f64,
    /// Harmonic cutoff for truncated sums.
    pub n_max: usize,
}

impl StroboConfig {
    /// Pulse train locked to `2 * larmor` with the default harmonic cutoff.
    pub fn locked(duty: f64, larmor: f64) -> Result<Self> {
        Self::new(duty, 2.0 * larmor, 0.0, default_n_max(duty))
    }

    pub fn new(duty: f64, omega_m: f64, phase: f64, n_max: usize) -> Result<Self> {
        let cfg = Self {
            duty,
            omega_m,
            phase,
            n_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_duty(self.duty)?;
        if !(self.omega_m > 0.0 && self.omega_m.is_finite()) {
            return Err(Error::invalid("omega_m", format!("must be > 0, got {}", self.omega_m)));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        if self.n_max < 1 {
            return Err(Error::invalid("n_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega_m
    }

    /// Rectangular profile `phi(t)`, 1 inside the window and 0 outside.
    pub fn profile(&self, t: f64) -> f64 {
        if self.duty >= 1.0 {
            return 1.0;
        }
        let s = (t / self.period() - self.phase / TAU).rem_euclid(1.0);
        let half = 0.5 * self.duty;
        if s <= half || s > 1.0 - half {
            1.0
        } else {
            0.0
        }
    }

    /// Fourier partial sum of the profile over `|n| <= n_max`.
    pub fn partial_sum(&self, t: f64, n_max: usize) -> f64 {
        let x = self.omega_m * t - self.phase;
        let mut acc = fourier_coeff(0, self.duty);
        for n in 1..=n_max as i64 {
            acc += 2.0 * fourier_coeff(n, self.duty) * (n as f64 * x).cos();
        }
        acc
    }
}

/// Harmonic cutoff `ceil(10 / d)` used when none is given.
pub fn default_n_max(duty: f64) -> usize {
    ((10.0 / duty).ceil() as usize).max(1)
}

/// `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// `A_n = d sinc(pi n d)`.
pub fn fourier_coeff(n: i64, duty: f64) -> f64 {
    duty * sinc(PI * n as f64 * duty)
}

/// Sideband weights `alpha(n)` and `beta(n)` of the output-light spectrum.
pub fn alpha_beta(n: i64, duty: f64) -> (f64, f64) {
    let s0 = sinc(PI * duty);
    let sn = sinc(PI * n as f64 * duty);
    let sn1 = sinc(PI * (n + 1) as f64 * duty);
    (sn * sn + sn1 * sn1, s0 * sn * sn1)
}
