//! Physical constants of the atom-light system and the couplings derived
//! from them.
//!
//! SI units throughout. Angular frequencies are stored in rad/s; the
//! configuration file takes frequencies in Hz and converts on load.
//!
//! Every observable computed downstream depends on `kappa` only through
//! `kappa^2` (or through `kappa * zeta^2` in sign-odd correlations), so the
//! sign produced by the coupling formula is kept as-is.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default relative tolerance for the pole exclusion in [`a_coefficients`].
pub const POLE_TOLERANCE: f64 = 1e-9;

/// Dimensioned constants of the probe/ensemble system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Excited-state decay rate (rad/s).
    pub gamma_natural: f64,
    /// Probe wavelength (m).
    pub wavelength: f64,
    /// Probe detuning from F=2 -> F'=3 (rad/s); positive is red.
    pub detuning: f64,
    /// F'=1 / F'=3 splitting (rad/s).
    pub delta13: f64,
    /// F'=2 / F'=3 splitting (rad/s).
    pub delta23: f64,
    /// Beam cross-section (m^2).
    pub beam_area: f64,
    /// Cell length (m).
    pub cell_length: f64,
    /// Photon flux (photons/s).
    pub photon_flux: f64,
    pub atom_number: f64,
    /// Larmor frequency (rad/s).
    pub larmor: f64,
    /// Extra transverse decay (1/s).
    pub gamma_ex: f64,
    /// Longitudinal relaxation time (s).
    pub t1: f64,
}

impl PhysicalParams {
    /// Rb D2 probe settings of the reference experiment.
    ///
    /// `atom_number` and `gamma_ex` were never published; the values here are
    /// order-of-magnitude placeholders.
    pub fn reference() -> Self {
        let wavelength = 780e-9;
        Self {
            gamma_natural: TAU * 6.07e6,
            wavelength,
            detuning: TAU * 1.66e9,
            delta13: TAU * 423.60e6,
            delta23: TAU * 266.65e6,
            beam_area: 7e-3 * 7e-3,
            cell_length: 20e-3,
            photon_flux: photon_flux_from_power(1.18e-3, wavelength),
            // placeholder
            atom_number: 1e11,
            larmor: TAU * 499.60e3,
            // placeholder
            gamma_ex: 0.0,
            t1: 18e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_natural", self.gamma_natural),
            ("wavelength", self.wavelength),
            ("beam_area", self.beam_area),
            ("cell_length", self.cell_length),
            ("photon_flux", self.photon_flux),
            ("atom_number", self.atom_number),
            ("larmor", self.larmor),
            ("t1", self.t1),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.gamma_ex.is_finite() && self.gamma_ex >= 0.0) {
            return Err(Error::invalid(
                "gamma_ex",
                format!("must be >= 0, got {}", self.gamma_ex),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if self.detuning == 0.0 {
            return Err(Error::ZeroDetuning);
        }
        Ok(())
    }

    /// Keys accepted by [`PhysicalParams::from_key_values`].
    pub const KEYS: &'static [&'static str] = &[
        "gamma_natural",
        "wavelength",
        "detuning",
        "delta13",
        "delta23",
        "beam_area",
        "cell_length",
        "photon_flux",
        "probe_power",
        "atom_number",
        "larmor",
        "gamma_ex",
        "t1",
    ];

    /// Builds parameters from a `key = value` table.
    ///
    /// Units as written in the file: `gamma_natural`, `detuning`, `delta13`,
    /// `delta23`, `larmor` in Hz (converted to rad/s); `wavelength`,
    /// `cell_length` in m; `beam_area` in m^2; `photon_flux` in photons/s or
    /// `probe_power` in W (not both); `gamma_ex` in 1/s; `t1` in s. Missing
    /// keys fall back to [`PhysicalParams::reference`]. Unknown keys are an
    /// error.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(Self::KEYS)?;
        let mut p = Self::reference();
        let hz = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = kv.get_f64(key)? {
                *slot = TAU * v;
            }
            Ok(())
        };
        hz("gamma_natural", &mut p.gamma_natural)?;
        hz("detuning", &mut p.detuning)?;
        hz("delta13", &mut p.delta13)?;
        hz("delta23", &mut p.delta23)?;
        hz("larmor", &mut p.larmor)?;
        let plain = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = kv.get_f64(key)? {
                *slot = v;
            }
            Ok(())
        };
        plain("wavelength", &mut p.wavelength)?;
        plain("beam_area", &mut p.beam_area)?;
        plain("cell_length", &mut p.cell_length)?;
        plain("atom_number", &mut p.atom_number)?;
        plain("gamma_ex", &mut p.gamma_ex)?;
        plain("t1", &mut p.t1)?;
        match (kv.get_f64("photon_flux")?, kv.get_f64("probe_power")?) {
            (Some(_), Some(_)) => {
                let loc = kv.location("probe_power").unwrap_or("config");
                return Err(Error::config(loc, "give either photon_flux or probe_power, not both"));
            }
            (Some(flux), None) => p.photon_flux = flux,
            (None, Some(power)) => p.photon_flux = photon_flux_from_power(power, p.wavelength),
            (None, None) => {
                p.photon_flux = photon_flux_from_power(1.18e-3, p.wavelength);
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::from_file(path)?)
    }
}

/// Converts optical power (W) at `wavelength` (m) to photon flux (1/s).
pub fn photon_flux_from_power(power: f64, wavelength: f64) -> f64 {
    power * wavelength / (TAU * HBAR * SPEED_OF_LIGHT)
}

/// Scalar, vector and tensor interaction coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ACoefficients {
    /// Scalar term; exposed for completeness, unused downstream.
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ACoefficients {
    /// `zeta^2 = -6 a2 / a1`, or `None` when `a1 == 0`.
    pub fn zeta2(&self) -> Option<f64> {
        (self.a1 != 0.0).then(|| -6.0 * self.a2 / self.a1)
    }
}

/// Evaluates the D2-line interaction coefficients at `detuning` with the
/// default pole tolerance.
pub fn a_coefficients(detuning: f64, delta13: f64, delta23: f64) -> Result<ACoefficients> {
    a_coefficients_with_tol(detuning, delta13, delta23, POLE_TOLERANCE)
}

pub fn a_coefficients_with_tol(detuning: f64, delta13: f64, delta23: f64, tol: f64) -> Result<ACoefficients> {
    if detuning == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    for pole in [delta13, delta23] {
        if (detuning - pole).abs() <= tol * detuning.abs().max(pole.abs()) {
            return Err(Error::Pole { detuning, pole, tol });
        }
    }
    let r13 = 1.0 / (1.0 - delta13 / detuning);
    let r23 = 1.0 / (1.0 - delta23 / detuning);
    Ok(ACoefficients {
        a0: SQRT_2 / 20.0 * (r13 + 15.0 * r23 + 24.0),
        a1: SQRT_2 / 100.0 * (-15.0 * r13 - 25.0 * r23 + 140.0),
        a2: SQRT_2 / 40.0 * (r13 - 5.0 * r23 + 4.0),
    })
}

/// Couplings of the effective quadratic interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCouplings {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub zeta2: f64,
    /// Coupling strength (1/sqrt(s)), sign as given by the formula.
    pub kappa: f64,
    /// Beam-splitter weight `kappa (zeta^2 + 1) / 2`.
    pub mu_plus: f64,
    /// Two-mode-squeezing weight `kappa (zeta^2 - 1) / 2`.
    pub mu_minus: f64,
    /// Peak light-induced decay `zeta^2 kappa^2 / 2` (1/s).
    pub gamma_s: f64,
    /// Total transverse decay `d gamma_s + gamma_ex` (1/s).
    pub gamma_total: f64,
    /// Fraction of the decay caused by the probe.
    pub epsilon: f64,
}

/// Computes every coupling quantity for a probe of duty cycle `duty`.
pub fn derive_couplings(params: &PhysicalParams, duty: f64) -> Result<DerivedCouplings> {
    params.validate()?;
    check_duty(duty)?;
    let a = a_coefficients(params.detuning, params.delta13, params.delta23)?;
    let zeta2 = a
        .zeta2()
        .ok_or_else(|| Error::invalid("detuning", "a1 vanishes at this detuning"))?;
    if !(zeta2 > 0.0) {
        return Err(Error::Regime { zeta2 });
    }
    let kappa =
        -params.gamma_natural * params.wavelength.powi(2) * a.a1 * (params.photon_flux * params.atom_number).sqrt()
            / (16.0 * PI * params.beam_area * params.detuning);
    let gamma_s = zeta2 * kappa * kappa / 2.0;
    let gamma_total = gamma_s * duty + params.gamma_ex;
    let epsilon = if gamma_total > 0.0 {
        gamma_s * duty / gamma_total
    } else {
        0.0
    };
    Ok(DerivedCouplings {
        a0: a.a0,
        a1: a.a1,
        a2: a.a2,
        zeta2,
        kappa,
        mu_plus: kappa * (zeta2 + 1.0) / 2.0,
        mu_minus: kappa * (zeta2 - 1.0) / 2.0,
        gamma_s,
        gamma_total,
        epsilon,
    })
}

pub(crate) fn check_duty(duty: f64) -> Result<()> {
    if !(duty > 0.0 && duty <= 1.0) {
        return Err(Error::invalid("duty", format!("must lie in (0, 1], got {duty}")));
    }
    Ok(())
}

/// The rates that drive the stochastic input-output equations.
///
/// This is the common currency between the physical parameter set and the
/// reduced `(zeta^2, gamma, epsilon)` description used by the closed-form
/// expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionRates {
    /// Coupling (1/sqrt(s)).
    pub kappa: f64,
    pub zeta2: f64,
    /// Extra transverse decay (1/s).
    pub gamma_ex: f64,
    /// Larmor frequency (rad/s).
    pub larmor: f64,
}

impl InteractionRates {
    pub fn from_couplings(c: &DerivedCouplings, params: &PhysicalParams) -> Self {
        Self {
            kappa: c.kappa,
            zeta2: c.zeta2,
            gamma_ex: params.gamma_ex,
            larmor: params.larmor,
        }
    }

    /// Rates reproducing a given total decay `gamma_total` and probe fraction
    /// `epsilon` at duty cycle `duty`. `kappa` is taken positive.
    pub fn from_reduced(zeta2: f64, gamma_total: f64, epsilon: f64, duty: f64, larmor: f64) -> Result<Self> {
        if !(zeta2 > 0.0) {
            return Err(Error::Regime { zeta2 });
        }
        check_duty(duty)?;
        if !(gamma_total > 0.0 && gamma_total.is_finite()) {
            return Err(Error::invalid("gamma_total", format!("must be > 0, got {gamma_total}")));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
        }
        if !(larmor > 0.0) {
            return Err(Error::invalid("larmor", format!("must be > 0, got {larmor}")));
        }
        let gamma_s = epsilon * gamma_total / duty;
        Ok(Self {
            kappa: (2.0 * gamma_s / zeta2).sqrt(),
            zeta2,
            gamma_ex: (1.0 - epsilon) * gamma_total,
            larmor,
        })
    }

    /// Same rates with the probe switched off (`kappa = 0`).
    pub fn without_atoms(&self) -> Self {
        Self { kappa: 0.0, ..*self }
    }

    pub fn gamma_s(&self) -> f64 {
        self.zeta2 * self.kappa * self.kappa / 2.0
    }

    pub fn gamma_total(&self, duty: f64) -> f64 {
        self.gamma_s() * duty + self.gamma_ex
    }

    pub fn epsilon(&self, duty: f64) -> f64 {
        let g = self.gamma_total(duty);
        if g > 0.0 {
            self.gamma_s() * duty / g
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const D13: f64 = TAU * 423.60e6;
    const D23: f64 = TAU * 266.65e6;

    #[test]
    fn far_detuned_limit() {
        let a = a_coefficients(1e30, D13, D23).unwrap();
        assert_relative_eq!(a.a0, 2.0 * SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(a.a1, SQRT_2, max_relative = 1e-12);
        assert!(a.a2.abs() < 1e-12);
    }

    #[test]
    fn red_operating_point_is_unbalanced() {
        // Brackets evaluated by hand: 1/(1-423.60/1660) and 1/(1-266.65/1660).
        let r13 = 1660.0 / (1660.0 - 423.60);
        let r23 = 1660.0 / (1660.0 - 266.65);
        let a1 = SQRT_2 / 100.0 * (-15.0 * r13 - 25.0 * r23 + 140.0);
        let a2 = SQRT_2 / 40.0 * (r13 - 5.0 * r23 + 4.0);
        let a = a_coefficients(TAU * 1.66e9, D13, D23).unwrap();
        assert_relative_eq!(a.a1, a1, max_relative = 1e-12);
        assert_relative_eq!(a.a2, a2, max_relative = 1e-12);
        let z2 = a.zeta2().unwrap();
        assert!(z2 > 0.0);
        assert_relative_eq!(z2, 0.102_29, max_relative = 1e-3);
    }

    #[test]
    fn blue_branch_flips_ratio_sign() {
        let a = a_coefficients(-TAU * 2.5e9, D13, D23).unwrap();
        assert!(a.a1 > 0.0);
        assert!(a.a2 / a.a1 > 0.0);
        let p = PhysicalParams {
            detuning: -TAU * 2.5e9,
            ..PhysicalParams::reference()
        };
        assert!(matches!(derive_couplings(&p, 0.08), Err(Error::Regime { .. })));
    }

    #[test]
    fn poles_and_zero_are_rejected() {
        assert!(matches!(a_coefficients(0.0, D13, D23), Err(Error::ZeroDetuning)));
        assert!(matches!(a_coefficients(D13, D13, D23), Err(Error::Pole { .. })));
        assert!(matches!(
            a_coefficients(D23 * (1.0 + 1e-12), D13, D23),
            Err(Error::Pole { .. })
        ));
        assert!(a_coefficients(D23 * (1.0 + 1e-6), D13, D23).is_ok());
    }

    #[test]
    fn reference_params_give_finite_coupling() {
        let p = PhysicalParams::reference();
        let c = derive_couplings(&p, 0.08).unwrap();
        assert!(c.kappa.is_finite() && c.kappa != 0.0);
        assert!(c.gamma_s > 0.0);
        assert_relative_eq!(c.mu_plus - c.mu_minus, c.kappa, max_relative = 1e-14);
        assert_relative_eq!(
            (c.mu_plus + c.mu_minus) / (c.mu_plus - c.mu_minus),
            c.zeta2,
            max_relative = 1e-12
        );
        // gamma_ex = 0 in the reference set
        assert_eq!(c.epsilon, 1.0);
    }

    #[test]
    fn photon_flux_of_reference_power() {
        // 1.18 mW at 780 nm: P lambda / (h c)
        let expected = 1.18e-3 * 780e-9 / (6.626_070_15e-34 * SPEED_OF_LIGHT);
        assert_relative_eq!(photon_flux_from_power(1.18e-3, 780e-9), expected, max_relative = 1e-9);
    }

    #[test]
    fn reduced_rates_round_trip() {
        let r = InteractionRates::from_reduced(0.1, 1e3, 0.7, 0.08, 1e6).unwrap();
        assert_relative_eq!(r.gamma_total(0.08), 1e3, max_relative = 1e-12);
        assert_relative_eq!(r.epsilon(0.08), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn config_units_and_unknown_keys() {
        let kv = KeyValues::parse("detuning = 1.66e9\nlarmor = 499.6e3\nprobe_power = 1e-3\n", "t").unwrap();
        let p = PhysicalParams::from_key_values(&kv).unwrap();
        assert_relative_eq!(p.detuning, TAU * 1.66e9);
        assert_relative_eq!(p.larmor, TAU * 499.6e3);
        assert_relative_eq!(p.photon_flux, photon_flux_from_power(1e-3, 780e-9));
        let bad = KeyValues::parse("detunning = 1e9\n", "t").unwrap();
        assert!(matches!(
            PhysicalParams::from_key_values(&bad),
            Err(Error::Config { .. })
        ));
        let both = KeyValues::parse("probe_power = 1e-3\nphoton_flux = 1e15\n", "t").unwrap();
        assert!(PhysicalParams::from_key_values(&both).is_err());
    }
}
