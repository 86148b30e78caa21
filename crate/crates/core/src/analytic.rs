//! Closed-form squeezing expressions and the fitting-function families built
//! on them.
//!
//! All variances use the normalized quadrature convention in which the
//! coherent-spin-state and shot-noise levels are both 1/2. The expressions
//! hold in the regime `omega_m >> gamma`; [`crate::dynamics`] integrates the
//! underlying equations without that approximation.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::strobe::{alpha_beta, default_n_max, sinc};

/// Shot-noise level of the normalized output quadrature.
pub const SHOT_NOISE: f64 = 0.5;

/// Relative size of the outermost sideband term above which a truncated
/// spectrum sum is flagged.
pub const TRUNCATION_THRESHOLD: f64 = 1e-6;

/// Below this `larmor / gamma_total` the spectrum is flagged as outside its
/// validity regime.
pub const REGIME_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSqueezingInputs {
    /// Total transverse decay (1/s).
    pub gamma_total: f64,
    pub epsilon: f64,
    pub duty: f64,
    pub zeta2: f64,
    /// Interaction time (s).
    pub time: f64,
    /// Longitudinal relaxation time (s); `None` disables the Wineland factor.
    pub t1: Option<f64>,
    /// Direction of the measured quadrature in phase space (rad); `0`
    /// measures `p_A`.
    pub quad_angle: f64,
}

impl SpinSqueezingInputs {
    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma_total, self.epsilon, self.duty, self.zeta2, self.time)?;
        check_t1(self.t1)?;
        if !self.quad_angle.is_finite() {
            return Err(Error::invalid("quad_angle", "must be finite"));
        }
        Ok(())
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma_total * self.time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSpectrumInputs {
    pub gamma_total: f64,
    pub epsilon: f64,
    pub zeta2: f64,
    pub duty: f64,
    pub time: f64,
    /// Larmor frequency (rad/s).
    pub larmor: f64,
    /// Sideband cutoff; the sum runs over `-n_max..=n_max`.
    pub n_max: usize,
    pub t1: Option<f64>,
}

impl LightSpectrumInputs {
    /// Inputs with the default cutoff `ceil(10 / d)`.
    pub fn new(gamma_total: f64, epsilon: f64, zeta2: f64, duty: f64, time: f64, larmor: f64) -> Self {
        Self {
            gamma_total,
            epsilon,
            zeta2,
            duty,
            time,
            larmor,
            n_max: default_n_max(duty),
            t1: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_common(self.gamma_total, self.epsilon, self.duty, self.zeta2, self.time)?;
        check_t1(self.t1)?;
        if !(self.larmor > 0.0 && self.larmor.is_finite()) {
            return Err(Error::invalid("larmor", format!("must be > 0, got {}", self.larmor)));
        }
        if self.n_max < 1 {
            return Err(Error::invalid("n_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn gamma_t(&self) -> f64 {
        self.gamma_total * self.time
    }
}

fn check_common(gamma_total: f64, epsilon: f64, duty: f64, zeta2: f64, time: f64) -> Result<()> {
    if !(gamma_total > 0.0 && gamma_total.is_finite()) {
        return Err(Error::invalid("gamma_total", format!("must be > 0, got {gamma_total}")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    if !(duty > 0.0 && duty <= 1.0) {
        return Err(Error::invalid("duty", format!("must lie in (0, 1], got {duty}")));
    }
    if !(zeta2 > 0.0 && zeta2.is_finite()) {
        return Err(Error::Regime { zeta2 });
    }
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::invalid("time", format!("must be >= 0, got {time}")));
    }
    Ok(())
}

fn check_t1(t1: Option<f64>) -> Result<()> {
    match t1 {
        Some(t) if !(t > 0.0) => Err(Error::invalid("t1", format!("must be > 0, got {t}"))),
        _ => Ok(()),
    }
}

/// `e^{2T/T1}`, or 1 without a `T1`.
pub fn wineland_factor(time: f64, t1: Option<f64>) -> f64 {
    t1.map_or(1.0, |t1| (2.0 * time / t1).exp())
}

/// Noise factor `D_A(theta)` of the spin variance.
pub fn spin_noise_factor(duty: f64, zeta2: f64, quad_angle: f64) -> f64 {
    let s = quad_angle.cos() * sinc(PI * duty);
    0.5 * (1.0 - s) / zeta2 + 0.5 * (1.0 + s) * zeta2
}

/// Variance of the measured spin quadrature at time `T`.
pub fn spin_variance(inputs: &SpinSqueezingInputs) -> Result<f64> {
    inputs.validate()?;
    let decay = (-2.0 * inputs.gamma_t()).exp();
    let eps = inputs.epsilon;
    let d_a = spin_noise_factor(inputs.duty, inputs.zeta2, inputs.quad_angle);
    let f_a = (1.0 - eps) * (1.0 - decay);
    Ok(0.5 * (decay + eps * (1.0 - decay) * d_a + f_a))
}

/// Squeezing parameter `xi_A^2 = Var / Var_CSS`, including the Wineland
/// factor when `t1` is set.
pub fn spin_squeezing_param(inputs: &SpinSqueezingInputs) -> Result<f64> {
    Ok(2.0 * spin_variance(inputs)? * wineland_factor(inputs.time, inputs.t1))
}

/// Squeezing in dB, `-10 log10(xi^2)`; positive means squeezed.
pub fn spin_squeezing_db(inputs: &SpinSqueezingInputs) -> Result<f64> {
    Ok(to_db(spin_squeezing_param(inputs)?))
}

pub fn to_db(xi2: f64) -> f64 {
    // + 0.0 turns -0 into 0 for xi2 = 1
    -10.0 * xi2.log10() + 0.0
}

/// Time-shape factors `(f1, f2)` of the light spectrum at `gamma T = x`.
pub fn time_factors(gamma_t: f64) -> (f64, f64) {
    if gamma_t == 0.0 {
        return (0.0, 0.0);
    }
    let rise = -(-gamma_t).exp_m1();
    (rise * rise / gamma_t, 2.0 - 2.0 * rise / gamma_t)
}

/// Per-sideband breakdown of the light-spectrum weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandTerms {
    pub d_corr: f64,
    pub d_qba: f64,
    pub f_l: f64,
}

impl SidebandTerms {
    /// Net dip weight `D_corr - D_QBA - F_L`.
    pub fn weight(&self) -> f64 {
        self.d_corr - self.d_qba - self.f_l
    }
}

pub fn sideband_terms(n: i64, epsilon: f64, zeta2: f64, duty: f64, gamma_t: f64) -> SidebandTerms {
    let (f1, f2) = time_factors(gamma_t);
    let (a, b) = alpha_beta(n, duty);
    let z4 = zeta2 * zeta2;
    SidebandTerms {
        d_corr: epsilon * f2 * a,
        d_qba: epsilon * zeta2 * f1 * a + epsilon * epsilon * (f2 - f1) * (0.5 * (1.0 + z4) * a + (1.0 - z4) * b),
        f_l: epsilon * (1.0 - epsilon) * zeta2 * (f2 - f1) * a,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSpectrumPoint {
    /// Output spectrum `S(omega)` (shot noise = 1/2).
    pub s_lss: f64,
    /// `S / S_SN`, times `e^{2T/T1}` when `t1` is set.
    pub xi_l2: f64,
    /// The outermost retained sidebands contribute more than
    /// [`TRUNCATION_THRESHOLD`] relative to `s_lss`.
    pub truncation_warning: bool,
    /// `larmor / gamma_total` is below [`REGIME_RATIO`].
    pub regime_warning: bool,
}

/// Output-light spectrum at angular frequency `omega` (rad/s).
pub fn light_spectrum(omega: f64, inputs: &LightSpectrumInputs) -> Result<LightSpectrumPoint> {
    inputs.validate()?;
    let g = inputs.gamma_total;
    let g2 = g * g;
    let gt = inputs.gamma_t();
    let n_max = inputs.n_max as i64;
    let term = |n: i64| {
        let w = sideband_terms(n, inputs.epsilon, inputs.zeta2, inputs.duty, gt).weight();
        let detune = omega - (2 * n + 1) as f64 * inputs.larmor;
        g2 * w / (g2 + detune * detune)
    };
    let mut sum = 0.0;
    for n in -n_max..=n_max {
        sum += term(n);
    }
    let s_lss = SHOT_NOISE * (1.0 - sum);
    let edge = SHOT_NOISE * (term(n_max).abs() + term(-n_max).abs());
    Ok(LightSpectrumPoint {
        s_lss,
        xi_l2: s_lss / SHOT_NOISE * wineland_factor(inputs.time, inputs.t1),
        truncation_warning: edge > TRUNCATION_THRESHOLD * s_lss.abs(),
        regime_warning: inputs.larmor / g < REGIME_RATIO,
    })
}

/// Light squeezing at the center of the `n`-th squeezing peak,
/// `omega = (2n + 1) larmor`, from that peak's resonant term alone.
pub fn sideband_squeezing(n: u32, inputs: &LightSpectrumInputs) -> Result<f64> {
    inputs.validate()?;
    let w = sideband_terms(n as i64, inputs.epsilon, inputs.zeta2, inputs.duty, inputs.gamma_t()).weight();
    Ok((1.0 - w) * wineland_factor(inputs.time, inputs.t1))
}

/// Abscissa of the `sideband_ab` family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SidebandAxis {
    /// Abscissa is the duty cycle at fixed sideband `order`.
    Duty { order: u32 },
    /// Abscissa is the sideband index at fixed `duty`.
    Order { duty: f64 },
}

/// The fitting-function families used to reduce squeezing data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    /// `(b1 + b2 e^{-2 gamma T}) e^{2T/T1}`; params `[b1, b2, gamma]`.
    TimeExp { t1: Option<f64> },
    /// `c1 + c2 sinc(pi d)`; params `[c1, c2]`.
    DutySinc,
    /// `d1 + d2 cos(theta)`; params `[d1, d2]`.
    AngleCos,
    /// `1 - e1 alpha - e2 beta`; params `[e1, e2]`.
    SidebandAb(SidebandAxis),
    /// `(1 - g1 f1(gamma T) - g2 f2(gamma T)) e^{2T/T1}`; params
    /// `[g1, g2, gamma]`.
    TimeF1f2 { t1: Option<f64> },
    /// `A w^2 / (w^2 + (x - x0)^2) + C`; params `[A, w, x0, C]`.
    Lorentzian,
}

impl FitModel {
    pub const IDS: [&'static str; 6] = [
        "time_exp",
        "duty_sinc",
        "angle_cos",
        "sideband_ab",
        "time_f1f2",
        "lorentzian",
    ];

    pub fn id(&self) -> &'static str {
        match self {
            FitModel::TimeExp { .. } => "time_exp",
            FitModel::DutySinc => "duty_sinc",
            FitModel::AngleCos => "angle_cos",
            FitModel::SidebandAb(_) => "sideband_ab",
            FitModel::TimeF1f2 { .. } => "time_f1f2",
            FitModel::Lorentzian => "lorentzian",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            FitModel::TimeExp { .. } => &["b1", "b2", "gamma"],
            FitModel::DutySinc => &["c1", "c2"],
            FitModel::AngleCos => &["d1", "d2"],
            FitModel::SidebandAb(_) => &["e1", "e2"],
            FitModel::TimeF1f2 { .. } => &["g1", "g2", "gamma"],
            FitModel::Lorentzian => &["amplitude", "width", "center", "offset"],
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_names().len()
    }

    /// Evaluates the model at one abscissa. `params` must have
    /// [`FitModel::param_count`] entries.
    pub fn eval(&self, params: &[f64], x: f64) -> f64 {
        match *self {
            FitModel::TimeExp { t1 } => (params[0] + params[1] * (-2.0 * params[2] * x).exp()) * wineland_factor(x, t1),
            FitModel::DutySinc => params[0] + params[1] * sinc(PI * x),
            FitModel::AngleCos => params[0] + params[1] * x.cos(),
            FitModel::SidebandAb(axis) => {
                let (a, b) = match axis {
                    SidebandAxis::Duty { order } => alpha_beta(order as i64, x),
                    SidebandAxis::Order { duty } => alpha_beta(x.round() as i64, duty),
                };
                1.0 - params[0] * a - params[1] * b
            }
            FitModel::TimeF1f2 { t1 } => {
                let (f1, f2) = time_factors(params[2] * x);
                (1.0 - params[0] * f1 - params[1] * f2) * wineland_factor(x, t1)
            }
            FitModel::Lorentzian => {
                let w2 = params[1] * params[1];
                let dx = x - params[2];
                params[0] * w2 / (w2 + dx * dx) + params[3]
            }
        }
    }

    pub fn eval_many(&self, params: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(
                "parameters",
                format!(
                    "{} expects {} parameters, got {}",
                    self.id(),
                    self.param_count(),
                    params.len()
                ),
            ));
        }
        Ok(xs.iter().map(|&x| self.eval(params, x)).collect())
    }
}

impl FromStr for FitModel {
    type Err = Error;

    /// Parses a model id with default context: no `T1`, and `sideband_ab`
    /// over the duty cycle at order 0.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "time_exp" => FitModel::TimeExp { t1: None },
            "duty_sinc" => FitModel::DutySinc,
            "angle_cos" => FitModel::AngleCos,
            "sideband_ab" => FitModel::SidebandAb(SidebandAxis::Duty { order: 0 }),
            "time_f1f2" => FitModel::TimeF1f2 { t1: None },
            "lorentzian" => FitModel::Lorentzian,
            other => return Err(Error::UnknownModel(other.to_string())),
        })
    }
}

/// Evaluates the model named `model_id` on `abscissa`.
pub fn fit_models(model_id: &str, parameters: &[f64], abscissa: &[f64]) -> Result<Vec<f64>> {
    model_id.parse::<FitModel>()?.eval_many(parameters, abscissa)
}

/// `[b1, b2]` such that `xi_A^2(T) = b1 + b2 e^{-2 gamma T}` (no `T1`).
pub fn time_exp_coefficients(epsilon: f64, duty: f64, zeta2: f64, quad_angle: f64) -> [f64; 2] {
    let d_a = spin_noise_factor(duty, zeta2, quad_angle);
    [epsilon * d_a + 1.0 - epsilon, epsilon * (1.0 - d_a)]
}

/// `[c1, c2]` such that `xi_{A,W}^2(d) = c1 + c2 sinc(pi d)` with the decay
/// rate and `epsilon` held fixed while `d` varies.
pub fn duty_sinc_coefficients(inputs: &SpinSqueezingInputs) -> [f64; 2] {
    let decay = (-2.0 * inputs.gamma_t()).exp();
    let w = wineland_factor(inputs.time, inputs.t1);
    let eps = inputs.epsilon;
    let z = inputs.zeta2;
    let c = inputs.quad_angle.cos();
    let c1 = decay + (1.0 - decay) * (eps * 0.5 * (1.0 / z + z) + 1.0 - eps);
    let c2 = eps * (1.0 - decay) * 0.5 * c * (z - 1.0 / z);
    [c1 * w, c2 * w]
}

/// `[d1, d2]` such that `xi_{A,W}^2(theta) = d1 + d2 cos(theta)`.
pub fn angle_cos_coefficients(inputs: &SpinSqueezingInputs) -> [f64; 2] {
    let decay = (-2.0 * inputs.gamma_t()).exp();
    let w = wineland_factor(inputs.time, inputs.t1);
    let eps = inputs.epsilon;
    let z = inputs.zeta2;
    let s = sinc(PI * inputs.duty);
    let d1 = decay + (1.0 - decay) * (eps * 0.5 * (1.0 / z + z) + 1.0 - eps);
    let d2 = eps * (1.0 - decay) * 0.5 * s * (z - 1.0 / z);
    [d1 * w, d2 * w]
}

/// `[e1, e2]` such that `xi_L^2(n, d) = 1 - e1 alpha(n, d) - e2 beta(n, d)`.
pub fn sideband_coefficients(epsilon: f64, zeta2: f64, gamma_t: f64) -> [f64; 2] {
    let (f1, f2) = time_factors(gamma_t);
    let z4 = zeta2 * zeta2;
    let e1 = epsilon * f2
        - epsilon * zeta2 * f1
        - epsilon * epsilon * (f2 - f1) * 0.5 * (1.0 + z4)
        - epsilon * (1.0 - epsilon) * zeta2 * (f2 - f1);
    let e2 = -epsilon * epsilon * (f2 - f1) * (1.0 - z4);
    [e1, e2]
}

/// `[g1, g2]` such that `xi_L^2(T) = 1 - g1 f1 - g2 f2` at sideband `n`.
pub fn time_f1f2_coefficients(n: i64, epsilon: f64, zeta2: f64, duty: f64) -> [f64; 2] {
    let (a, b) = alpha_beta(n, duty);
    let z4 = zeta2 * zeta2;
    let qba = epsilon * epsilon * (0.5 * (1.0 + z4) * a + (1.0 - z4) * b);
    let thermal = epsilon * (1.0 - epsilon) * zeta2 * a;
    let g1 = -epsilon * zeta2 * a + qba + thermal;
    let g2 = epsilon * a - qba - thermal;
    [g1, g2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spin(gt: f64, eps: f64, d: f64, z2: f64, angle: f64) -> SpinSqueezingInputs {
        SpinSqueezingInputs {
            gamma_total: 1e3,
            epsilon: eps,
            duty: d,
            zeta2: z2,
            time: gt / 1e3,
            t1: None,
            quad_angle: angle,
        }
    }

    fn light(gt: f64, eps: f64, z2: f64, d: f64) -> LightSpectrumInputs {
        LightSpectrumInputs::new(1e3, eps, z2, d, gt / 1e3, 1e3 * 1e4)
    }

    #[test]
    fn qnd_point_is_neutral() {
        for gt in [0.0, 0.1, 1.0, 7.0] {
            for d in [0.01, 0.08, 0.5, 1.0] {
                for th in [0.0, 0.7, PI] {
                    let v = spin_variance(&spin(gt, 1.0, d, 1.0, th)).unwrap();
                    assert!((v - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn initial_state_is_css() {
        let v = spin_variance(&spin(0.0, 0.4, 0.08, 0.1, 0.3)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn long_time_limit_is_noise_factor() {
        let s = (0.08 * PI).sin() / (0.08 * PI);
        let d_a = 0.5 * (1.0 - s) * 10.0 + 0.5 * (1.0 + s) * 0.1;
        let v = spin_variance(&spin(10.0, 1.0, 0.08, 0.1, 0.0)).unwrap();
        assert!((2.0 * v - d_a).abs() < 1e-8);
        assert!((d_a - 0.152).abs() < 1e-4);
    }

    #[test]
    fn db_convention() {
        assert_eq!(to_db(1.0), 0.0);
        assert_relative_eq!(to_db(0.1), 10.0, max_relative = 1e-14);
        // d -> 0, long time: D_A -> zeta^2 = 0.1
        let db = spin_squeezing_db(&spin(40.0, 1.0, 1e-6, 0.1, 0.0)).unwrap();
        assert!((db - 10.0).abs() < 1e-6, "{db}");
    }

    #[test]
    fn wineland_factor_applies_only_when_requested() {
        let mut i = spin(1.0, 1.0, 0.08, 0.1, 0.0);
        let bare = spin_squeezing_param(&i).unwrap();
        i.t1 = Some(18e-3);
        let w = spin_squeezing_param(&i).unwrap();
        assert_relative_eq!(w, bare * (2.0 * i.time / 18e-3).exp(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_nonpositive_zeta2() {
        assert!(matches!(
            spin_variance(&spin(1.0, 1.0, 0.1, 0.0, 0.0)),
            Err(Error::Regime { .. })
        ));
        assert!(matches!(
            spin_variance(&spin(1.0, 1.0, 0.1, -0.2, 0.0)),
            Err(Error::Regime { .. })
        ));
    }

    #[test]
    fn spin_variance_decreases_with_time_below_qnd() {
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let v = spin_variance(&spin(0.05 * k as f64, 1.0, 0.08, 0.3, 0.0)).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn angle_extremes() {
        let v = |th: f64| spin_variance(&spin(1.3, 0.9, 0.2, 0.4, th)).unwrap();
        let lo = v(0.0);
        let hi = v(PI);
        for k in 0..=64 {
            let th = k as f64 * 2.0 * PI / 64.0;
            assert!(lo <= v(th) + 1e-15 && v(th) <= hi + 1e-15);
        }
    }

    #[test]
    fn dark_spectrum_is_shot_noise() {
        for w in [0.0, 1e7, 3e7, 1.234e8] {
            let p = light_spectrum(w, &light(1.0, 0.0, 0.1, 0.08)).unwrap();
            assert_eq!(p.s_lss, 0.5);
            assert_eq!(p.xi_l2, 1.0);
        }
    }

    #[test]
    fn continuous_drive_keeps_first_sideband_squeezed() {
        // f1 = (1 - e^-1)^2, f2 = 2 - 2 (1 - e^-1)
        let r = 1.0 - (-1.0f64).exp();
        let (f1, f2) = (r * r, 2.0 - 2.0 * r);
        let expected = 1.0 - (f2 - (0.1 * f1 + (f2 - f1) * 0.5 * 1.01));
        let i = light(1.0, 1.0, 0.1, 1.0);
        assert_relative_eq!(sideband_squeezing(0, &i).unwrap(), expected, max_relative = 1e-12);
        assert!((expected - 0.474).abs() < 1e-3);
        let p = light_spectrum(i.larmor, &i).unwrap();
        assert!((p.xi_l2 - expected).abs() < 1e-6);
        for n in 1..4 {
            assert_eq!(sideband_squeezing(n, &i).unwrap(), 1.0);
        }
    }

    #[test]
    fn short_duty_endpoint() {
        let x = sideband_squeezing(0, &light(1.0, 1.0, 0.1, 0.01)).unwrap();
        assert!((x - 0.28).abs() < 1e-2, "{x}");
    }

    #[test]
    fn higher_sidebands_squeeze_less() {
        let i = light(1.0, 1.0, 0.1, 0.1);
        let v: Vec<f64> = (0..3).map(|n| sideband_squeezing(n, &i).unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
    }

    #[test]
    fn smaller_duty_helps_first_sideband() {
        let ds = [0.05, 0.08, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
        let v: Vec<f64> = ds
            .iter()
            .map(|&d| sideband_squeezing(0, &light(1.0, 1.0, 0.1, d)).unwrap())
            .collect();
        for w in v.windows(2) {
            assert!(w[0] <= w[1], "{v:?}");
        }
    }

    #[test]
    fn spectrum_is_symmetric_about_each_peak() {
        let i = light(1.0, 1.0, 0.1, 0.08);
        for n in 0..3 {
            let c = (2 * n + 1) as f64 * i.larmor;
            for k in 1..=10 {
                let delta = 0.5 * k as f64 * i.gamma_total;
                let a = light_spectrum(c + delta, &i).unwrap().s_lss;
                let b = light_spectrum(c - delta, &i).unwrap().s_lss;
                assert!((a - b).abs() < 1e-9, "n={n} k={k}: {a} {b}");
            }
        }
    }

    #[test]
    fn spectrum_returns_to_shot_noise_between_peaks() {
        let i = light(1.0, 1.0, 0.1, 0.08);
        let p = light_spectrum(2.0 * i.larmor, &i).unwrap();
        assert!((p.xi_l2 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn truncation_and_regime_flags() {
        let mut i = light(1.0, 1.0, 0.1, 0.08);
        i.n_max = 1;
        assert!(light_spectrum(3.0 * i.larmor, &i).unwrap().truncation_warning);
        i.larmor = 5.0 * i.gamma_total;
        assert!(light_spectrum(i.larmor, &i).unwrap().regime_warning);
    }

    #[test]
    fn coefficient_families_reproduce_closed_forms() {
        let base = SpinSqueezingInputs {
            t1: Some(0.02),
            ..spin(0.8, 0.85, 0.08, 0.2, 0.0)
        };
        let [c1, c2] = duty_sinc_coefficients(&base);
        let [d1, d2] = angle_cos_coefficients(&base);
        for k in 1..=20 {
            let d = k as f64 / 20.0;
            let i = SpinSqueezingInputs { duty: d, ..base };
            let direct = spin_squeezing_param(&i).unwrap();
            assert_relative_eq!(FitModel::DutySinc.eval(&[c1, c2], d), direct, max_relative = 1e-13);
            let th = k as f64 * 0.3;
            let i = SpinSqueezingInputs { quad_angle: th, ..base };
            let direct = spin_squeezing_param(&i).unwrap();
            assert_relative_eq!(FitModel::AngleCos.eval(&[d1, d2], th), direct, max_relative = 1e-13);
        }
        let [b1, b2] = time_exp_coefficients(0.85, 0.08, 0.2, 0.0);
        let m = FitModel::TimeExp { t1: None };
        for k in 0..10 {
            let t = k as f64 * 3e-4;
            let i = SpinSqueezingInputs {
                time: t,
                t1: None,
                ..base
            };
            assert_relative_eq!(
                m.eval(&[b1, b2, 1e3], t),
                spin_squeezing_param(&i).unwrap(),
                max_relative = 1e-13
            );
        }
        let [e1, e2] = sideband_coefficients(0.9, 0.1, 1.0);
        let [g1, g2] = time_f1f2_coefficients(1, 0.9, 0.1, 0.08);
        for n in 0..3u32 {
            let i = light(1.0, 0.9, 0.1, 0.08);
            let direct = sideband_squeezing(n, &i).unwrap();
            let fam = FitModel::SidebandAb(SidebandAxis::Order { duty: 0.08 });
            assert_relative_eq!(fam.eval(&[e1, e2], n as f64), direct, max_relative = 1e-13);
        }
        for k in 1..10 {
            let gt = 0.3 * k as f64;
            let i = light(gt, 0.9, 0.1, 0.08);
            let direct = sideband_squeezing(1, &i).unwrap();
            let fam = FitModel::TimeF1f2 { t1: None };
            assert_relative_eq!(fam.eval(&[g1, g2, 1e3], gt / 1e3), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn model_registry() {
        assert_eq!(
            fit_models("time_exp", &[0.3, 0.0, 5.0], &[0.0, 1.0, 9.0]).unwrap(),
            vec![0.3; 3]
        );
        let y = fit_models("angle_cos", &[0.4, 0.2], &[PI / 2.0]).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-16);
        assert!(matches!(fit_models("gauss", &[], &[]), Err(Error::UnknownModel(_))));
        assert!(fit_models("duty_sinc", &[1.0], &[0.1]).is_err());
        for id in FitModel::IDS {
            assert_eq!(id.parse::<FitModel>().unwrap().id(), id);
        }
    }
}
