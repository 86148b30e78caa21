//! Output-light spectra from simulated trajectories, normalized the way the
//! measured spectra are: against an atom-free shot-noise reference fitted
//! with a Lorentzian outside an exclusion window.
//!
//! The estimator is the ensemble-averaged periodogram of `y = phi p_L^out`,
//!
//! ```text
//! S(omega) = < |sum_k y_k e^{i omega t_k} dt|^2 > / (d T)
//! ```
//!
//! evaluated directly at absolute angular frequencies (no FFT, no extra
//! taper). Its expectation is the finite-time double-integral spectrum;
//! vacuum input gives 1/2.

use std::io::Write;

use rayon::prelude::*;

use crate::analytic::{FitModel, SHOT_NOISE};
use crate::dynamics::{
    trajectory_seed, Checkpoint, SimulationOptions, Simulator, StepTable, TimeGrid, TrajectoryRecord, MIN_ENSEMBLE,
};
use crate::error::{Error, Result};
use crate::fitlab::{fit, FitProblem, FitResult, DEFAULT_TOL};
use crate::params::InteractionRates;
use crate::strobe::StroboConfig;

/// Default exclusion half-width of the reference fit, in units of `gamma`.
pub const DEFAULT_EXCLUSION: f64 = 3.0;
/// Half-width of the default grid, in units of `gamma`.
pub const GRID_HALF_SPAN: f64 = 20.0;
/// Bin spacing of the default grid, in units of `gamma`.
pub const GRID_STEP: f64 = 0.1;
/// Half-width of the window searched for the headline squeezing, in units
/// of `gamma`.
pub const HEADLINE_WINDOW: f64 = 1.0;

/// Iteration cap for the Lorentzian fits here. On nearly flat noise the
/// amplitude, width and center share a shallow valley and the damped
/// iteration creeps along it for several hundred steps.
pub const SPECTRAL_FIT_MAX_ITER: usize = 5000;

/// Trajectories reduced together before chunk totals are combined; fixed so
/// that results do not depend on the number of workers.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Angular frequencies (rad/s).
    pub freqs: Vec<f64>,
    pub s_est: Vec<f64>,
    /// Shot-noise level per bin: 1/2 until a reference is applied.
    pub s_shot: Vec<f64>,
    /// `s_est / s_shot`.
    pub xi_l2: Vec<f64>,
    /// Ensemble standard error of `xi_l2`.
    pub stderr: Vec<f64>,
    pub n_ensemble: usize,
}

impl SpectrumResult {
    fn from_moments(freqs: &[f64], sum: &[f64], sum_sq: &[f64], n: usize) -> Self {
        let nf = n as f64;
        let s_est: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let stderr: Vec<f64> = sum_sq
            .iter()
            .zip(&s_est)
            .map(|(sq, m)| {
                if n < 2 {
                    f64::NAN
                } else {
                    ((sq / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt()
                }
            })
            .collect();
        let mut out = Self {
            freqs: freqs.to_vec(),
            s_shot: vec![SHOT_NOISE; freqs.len()],
            xi_l2: Vec::new(),
            stderr: Vec::new(),
            s_est,
            n_ensemble: n,
        };
        out.xi_l2 = out.s_est.iter().map(|s| s / SHOT_NOISE).collect();
        out.stderr = stderr.iter().map(|e| e / SHOT_NOISE).collect();
        out
    }

    /// Standard error of `s_est`.
    pub fn s_est_stderr(&self) -> Vec<f64> {
        self.stderr.iter().zip(&self.s_shot).map(|(e, s)| e * s).collect()
    }

    /// Writes `omega_rad_s,s_est,s_shot,xi_l2,stderr` rows with 17
    /// significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "omega_rad_s,s_est,s_shot,xi_l2,stderr")?;
        for i in 0..self.freqs.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.freqs[i], self.s_est[i], self.s_shot[i], self.xi_l2[i], self.stderr[i]
            )?;
        }
        Ok(())
    }
}

/// `center +- 20 gamma` in steps of `gamma / 10`.
pub fn default_frequency_grid(center: f64, gamma: f64) -> Vec<f64> {
    let half = (GRID_HALF_SPAN / GRID_STEP).round() as i64;
    (-half..=half).map(|j| center + j as f64 * GRID_STEP * gamma).collect()
}

/// Default grids around the squeezing peaks `(2n + 1) larmor`, concatenated
/// in the order of `orders`.
pub fn sideband_frequency_grid(larmor: f64, gamma: f64, orders: &[u32]) -> Vec<f64> {
    orders
        .iter()
        .flat_map(|&n| default_frequency_grid((2 * n + 1) as f64 * larmor, gamma))
        .collect()
}

/// `e^{i omega t_k} dt` for every bin and every step where the probe is on.
struct Basis {
    steps: Vec<usize>,
    phi: Vec<f64>,
    /// Row-major `[bin][on-step]`.
    re: Vec<f64>,
    im: Vec<f64>,
    norm: f64,
}

impl Basis {
    fn new(strobo: &StroboConfig, grid: &TimeGrid, larmor: f64, freqs: &[f64]) -> Self {
        let table = StepTable::new(strobo, grid, larmor);
        let steps: Vec<usize> = (0..table.len()).filter(|&k| table.phi[k] > 0.0).collect();
        let phi: Vec<f64> = steps.iter().map(|&k| table.phi[k]).collect();
        let mut re = Vec::with_capacity(freqs.len() * steps.len());
        let mut im = Vec::with_capacity(freqs.len() * steps.len());
        for &w in freqs {
            for &k in &steps {
                let (s, c) = (w * grid.time(k)).sin_cos();
                re.push(c * grid.dt);
                im.push(s * grid.dt);
            }
        }
        Self {
            steps,
            phi,
            re,
            im,
            norm: 1.0 / (strobo.duty * grid.total_time),
        }
    }

    /// Periodogram of one record given `p_L^out` on the on-pulse steps.
    fn periodogram(&self, p_out: &[f64], out: &mut [f64]) {
        let m = self.steps.len();
        let y: Vec<f64> = p_out.iter().zip(&self.phi).map(|(p, f)| p * f).collect();
        for (b, o) in out.iter_mut().enumerate() {
            let re = &self.re[b * m..(b + 1) * m];
            let im = &self.im[b * m..(b + 1) * m];
            let (mut a, mut c) = (0.0, 0.0);
            for k in 0..m {
                a += re[k] * y[k];
                c += im[k] * y[k];
            }
            *o = (a * a + c * c) * self.norm;
        }
    }
}

/// Sums periodograms over `0..n` in fixed chunks, combining chunk totals in
/// index order.
fn reduce(n: usize, bins: usize, one: impl Fn(usize, &mut [f64]) + Sync) -> (Vec<f64>, Vec<f64>) {
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; bins];
            let mut sq = vec![0.0; bins];
            let mut buf = vec![0.0; bins];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                one(i, &mut buf);
                for b in 0..bins {
                    sum[b] += buf[b];
                    sq[b] += buf[b] * buf[b];
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    for (s, q) in chunks {
        for b in 0..bins {
            sum[b] += s[b];
            sq[b] += q[b];
        }
    }
    (sum, sq)
}

/// Spectrum of stored trajectories on `freqs`.
pub fn estimate_spectrum(
    records: &[TrajectoryRecord],
    strobo: &StroboConfig,
    grid: &TimeGrid,
    larmor: f64,
    freqs: &[f64],
) -> Result<SpectrumResult> {
    if records.is_empty() {
        return Err(Error::invalid("records", "ensemble is empty"));
    }
    for r in records {
        let n = grid.n_steps;
        if r.times.len() != n || r.light_out_series.len() != n {
            return Err(Error::GridMismatch(format!(
                "record {} has {} steps, grid has {n}",
                r.seed,
                r.light_out_series.len()
            )));
        }
        let tol = 1e-9 * grid.dt;
        if (0..n).any(|k| (r.times[k] - grid.time(k)).abs() > tol) {
            return Err(Error::GridMismatch(format!(
                "record {} is sampled on a different grid",
                r.seed
            )));
        }
    }
    let basis = Basis::new(strobo, grid, larmor, freqs);
    let (sum, sq) = reduce(records.len(), freqs.len(), |i, out| {
        let p: Vec<f64> = basis.steps.iter().map(|&k| records[i].light_out_series[k][1]).collect();
        basis.periodogram(&p, out);
    });
    Ok(SpectrumResult::from_moments(freqs, &sum, &sq, records.len()))
}

/// Spectrum of the trajectories stored in a checkpoint.
pub fn estimate_from_checkpoint(ck: &Checkpoint, freqs: &[f64]) -> Result<SpectrumResult> {
    estimate_spectrum(&ck.records, &ck.strobo, &ck.grid, ck.rates.larmor, freqs)
}

/// Simulates `n_traj` trajectories and accumulates their spectrum without
/// storing them.
pub fn simulate_spectrum(sim: &Simulator, freqs: &[f64], n_traj: usize, base_seed: u64) -> Result<SpectrumResult> {
    if n_traj == 0 {
        return Err(Error::invalid("n_traj", "must be >= 1"));
    }
    let basis = Basis::new(sim.strobo(), sim.grid(), sim.rates().larmor, freqs);
    let m = basis.steps.len();
    let (sum, sq) = reduce(n_traj, freqs.len(), |i, out| {
        let mut p = Vec::with_capacity(m);
        sim.run_on_pulse(trajectory_seed(base_seed, i as u64), |s| p.push(s.light_out[1]));
        debug_assert_eq!(p.len(), m);
        basis.periodogram(&p, out);
    });
    Ok(SpectrumResult::from_moments(freqs, &sum, &sq, n_traj))
}

/// A fitted shot-noise level on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseReference {
    pub freqs: Vec<f64>,
    /// Fitted curve on every bin.
    pub values: Vec<f64>,
    /// One fit per center, `[amplitude, width, center, offset]` in absolute
    /// units.
    pub fits: Vec<FitResult>,
}

/// Fits `A w^2 / (w^2 + (x - x0)^2) + C` to the bins farther than
/// `exclusion_halfwidth` from `center` and evaluates the fit on all bins.
/// The width is held between `width_guess` and twice the grid span, and
/// the center within `width_guess` of `center`.
pub fn fit_reference(
    freqs: &[f64],
    values: &[f64],
    center: f64,
    exclusion_halfwidth: f64,
    width_guess: f64,
) -> Result<ShotNoiseReference> {
    fit_reference_segments(freqs, values, &[center], exclusion_halfwidth, width_guess)
}

/// [`fit_reference`] on a grid spanning several peaks: every bin belongs to
/// the nearest of `centers`, and each segment is fitted on its own.
pub fn fit_reference_segments(
    freqs: &[f64],
    values: &[f64],
    centers: &[f64],
    exclusion_halfwidth: f64,
    width_guess: f64,
) -> Result<ShotNoiseReference> {
    if freqs.len() != values.len() {
        return Err(Error::GridMismatch(format!(
            "{} bins vs {} values",
            freqs.len(),
            values.len()
        )));
    }
    if centers.is_empty() {
        return Err(Error::invalid("centers", "at least one center is required"));
    }
    if !(exclusion_halfwidth >= 0.0) {
        return Err(Error::invalid("exclusion_halfwidth", "must be >= 0"));
    }
    let owner: Vec<usize> = freqs
        .iter()
        .map(|w| {
            (0..centers.len())
                .min_by(|&a, &b| (w - centers[a]).abs().total_cmp(&(w - centers[b]).abs()))
                .unwrap()
        })
        .collect();
    // frequencies are fitted relative to the center, in units of the width
    // guess, to keep the problem well scaled
    let scale = if width_guess > 0.0 { width_guess } else { 1.0 };
    let mut curve = vec![0.0; freqs.len()];
    let mut fits = Vec::with_capacity(centers.len());
    for (c, &center) in centers.iter().enumerate() {
        let (x, y): (Vec<f64>, Vec<f64>) = (0..freqs.len())
            .filter(|&i| owner[i] == c && (freqs[i] - center).abs() >= exclusion_halfwidth)
            .map(|i| ((freqs[i] - center) / scale, values[i]))
            .unzip();
        if x.len() < 5 {
            return Err(Error::Fit(format!(
                "only {} bins left outside the exclusion window around {center}",
                x.len()
            )));
        }
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        let floor = sorted[sorted.len() / 2];
        // nothing inside the exclusion window constrains the fit, so the
        // Lorentzian may not be narrower than the width guess nor centered
        // outside that window; otherwise noise can pull a spike into it.
        // On flat data a width beyond twice the span only trades amplitude
        // against offset without end, so it is capped there.
        let span = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let problem = FitProblem::new(FitModel::Lorentzian, x, y, vec![0.0, 1.0, 0.0, floor]).with_bounds(vec![
            (f64::NEG_INFINITY, f64::INFINITY),
            (1.0, (2.0 * span).max(1.0)),
            (-1.0, 1.0),
            (f64::NEG_INFINITY, f64::INFINITY),
        ]);
        let res = fit(&problem, DEFAULT_TOL, SPECTRAL_FIT_MAX_ITER)?.ensure_converged()?;
        for i in (0..freqs.len()).filter(|&i| owner[i] == c) {
            curve[i] = FitModel::Lorentzian.eval(&res.params, (freqs[i] - center) / scale);
        }
        let mut params = res.params.clone();
        params[1] = params[1].abs() * scale;
        params[2] = center + params[2] * scale;
        fits.push(FitResult { params, ..res });
    }
    Ok(ShotNoiseReference {
        freqs: freqs.to_vec(),
        values: curve,
        fits,
    })
}

/// Simulates an atom-free ensemble with the same pulse train and grid and
/// fits its spectrum outside `center +- exclusion_halfwidth` for each of
/// `centers`. Also returns the raw reference spectrum.
#[allow(clippy::too_many_arguments)]
pub fn shot_noise_reference(
    rates: &InteractionRates,
    strobo: &StroboConfig,
    grid: &TimeGrid,
    freqs: &[f64],
    n_ensemble: usize,
    base_seed: u64,
    centers: &[f64],
    exclusion_halfwidth: f64,
) -> Result<(ShotNoiseReference, SpectrumResult)> {
    if n_ensemble < MIN_ENSEMBLE {
        return Err(Error::invalid(
            "n_ensemble",
            format!("at least {MIN_ENSEMBLE} trajectories are required, got {n_ensemble}"),
        ));
    }
    let sim = Simulator::new(&rates.without_atoms(), strobo, grid, SimulationOptions::default())?;
    let raw = simulate_spectrum(&sim, freqs, n_ensemble, base_seed)?;
    let width = if exclusion_halfwidth > 0.0 {
        exclusion_halfwidth
    } else {
        1.0 / grid.total_time
    };
    let reference = fit_reference_segments(freqs, &raw.s_est, centers, exclusion_halfwidth, width)?;
    Ok((reference, raw))
}

/// Divides a spectrum by a reference bin by bin.
pub fn squeezing_ratio(signal: &SpectrumResult, reference: &ShotNoiseReference) -> Result<SpectrumResult> {
    if signal.freqs.len() != reference.freqs.len() || signal.freqs.iter().zip(&reference.freqs).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch(
            "signal and reference use different frequency grids".into(),
        ));
    }
    if reference.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("reference", "shot-noise reference must be positive"));
    }
    let se = signal.s_est_stderr();
    Ok(SpectrumResult {
        freqs: signal.freqs.clone(),
        s_est: signal.s_est.clone(),
        s_shot: reference.values.clone(),
        xi_l2: signal.s_est.iter().zip(&reference.values).map(|(s, r)| s / r).collect(),
        stderr: se.iter().zip(&reference.values).map(|(e, r)| e / r).collect(),
        n_ensemble: signal.n_ensemble,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Headline {
    pub omega: f64,
    pub xi_l2: f64,
    pub stderr: f64,
}

/// Smallest `xi_l2` within `center +- halfwidth`.
pub fn headline_squeezing(result: &SpectrumResult, center: f64, halfwidth: f64) -> Option<Headline> {
    (0..result.freqs.len())
        .filter(|&i| (result.freqs[i] - center).abs() <= halfwidth)
        .min_by(|&a, &b| result.xi_l2[a].total_cmp(&result.xi_l2[b]))
        .map(|i| Headline {
            omega: result.freqs[i],
            xi_l2: result.xi_l2[i],
            stderr: result.stderr[i],
        })
}

/// Lorentzian fit to the normalized dip around `center`; the fitted
/// parameters are `[amplitude, half-width, center, offset]` in absolute
/// units. The amplitude is negative for a dip.
pub fn fit_dip(result: &SpectrumResult, center: f64, gamma: f64) -> Result<FitResult> {
    let xs: Vec<f64> = result.freqs.iter().map(|w| (w - center) / gamma).collect();
    let (imin, _) = result
        .xi_l2
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::invalid("result", "empty spectrum"))?;
    let depth = result.xi_l2[imin] - 1.0;
    let problem = FitProblem::new(
        FitModel::Lorentzian,
        xs,
        result.xi_l2.clone(),
        vec![depth, 1.0, 0.0, 1.0],
    );
    let mut res = fit(&problem, DEFAULT_TOL, SPECTRAL_FIT_MAX_ITER)?.ensure_converged()?;
    res.params[1] = res.params[1].abs() * gamma;
    res.params[2] = center + res.params[2] * gamma;
    Ok(res)
}
