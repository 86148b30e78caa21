//! Damped (Levenberg) least squares over the [`FitModel`] families.

use nalgebra::{DMatrix, DVector};

use crate::analytic::FitModel;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 500;

/// Relative finite-difference step. Relative to `max(|p|, |p_initial|)` so
/// that parameters converging to zero keep a usable step.
const FD_STEP: f64 = 1e-6;
/// Damping above `LAMBDA_CEILING * max diag(J^T W J)` means no downhill step
/// exists at working precision.
const LAMBDA_CEILING: f64 = 1e16;

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub model: FitModel,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Inverse-variance weights; `None` is unweighted.
    pub weights: Option<Vec<f64>>,
    pub initial: Vec<f64>,
    /// Optional `(lower, upper)` per parameter.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl FitProblem {
    pub fn new(model: FitModel, x: Vec<f64>, y: Vec<f64>, initial: Vec<f64>) -> Self {
        Self {
            model,
            x,
            y,
            weights: None,
            initial,
            bounds: None,
        }
    }

    pub fn with_weights(mut self, w: Vec<f64>) -> Self {
        self.weights = Some(w);
        self
    }

    pub fn with_bounds(mut self, b: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(b);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.model.param_count();
        let n = self.x.len();
        if self.y.len() != n {
            return Err(Error::invalid(
                "y",
                format!("length {} != abscissa length {n}", self.y.len()),
            ));
        }
        if n < p + 1 {
            return Err(Error::invalid(
                "x",
                format!("need at least {} points for {p} parameters, got {n}", p + 1),
            ));
        }
        if self.initial.len() != p {
            return Err(Error::invalid(
                "initial",
                format!("{} expects {p} parameters, got {}", self.model.id(), self.initial.len()),
            ));
        }
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial", "initial guess must be finite"));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data", "abscissa and ordinate must be finite"));
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(Error::invalid("weights", format!("length {} != {n}", w.len())));
            }
            if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::invalid("weights", "weights must be finite and >= 0"));
            }
        }
        if let Some(b) = &self.bounds {
            if b.len() != p {
                return Err(Error::invalid("bounds", format!("expected {p} pairs, got {}", b.len())));
            }
            if b.iter().any(|&(lo, hi)| !(lo <= hi) || lo.is_nan() || hi.is_nan()) {
                return Err(Error::invalid("bounds", "each pair must satisfy lower <= upper"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// `(J^T W J)^{-1} RSS / (n - p)`.
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// RSS after the start and after every accepted step.
    pub rss_history: Vec<f64>,
}

impl FitResult {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }

    /// Turns a non-converged result into an error.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Fit(format!(
                "no convergence after {} iterations (rss = {:e})",
                self.iterations, self.rss
            )))
        }
    }
}

struct Data {
    model: FitModel,
    x: Vec<f64>,
    y: Vec<f64>,
    sw: Vec<f64>,
    /// Per-parameter magnitude floor for the difference step.
    scale: Vec<f64>,
}

impl Data {
    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.x.len(),
            (0..self.x.len()).map(|i| self.sw[i] * (self.y[i] - self.model.eval(p, self.x[i]))),
        )
    }

    /// Jacobian of the weighted model values.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.x.len();
        let mut j = DMatrix::zeros(n, p.len());
        let mut q = p.to_vec();
        for k in 0..p.len() {
            let m = p[k].abs().max(self.scale[k]);
            let h = if m == 0.0 { FD_STEP } else { FD_STEP * m };
            q[k] = p[k] + h;
            let hi: Vec<f64> = self.x.iter().map(|&x| self.model.eval(&q, x)).collect();
            q[k] = p[k] - h;
            let lo: Vec<f64> = self.x.iter().map(|&x| self.model.eval(&q, x)).collect();
            q[k] = p[k];
            for i in 0..n {
                j[(i, k)] = self.sw[i] * (hi[i] - lo[i]) / (2.0 * h);
            }
        }
        j
    }
}

fn project(p: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in p.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

fn rss_of(r: &DVector<f64>) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes the weighted RSS starting from `problem.initial`.
///
/// Iteration stops when an accepted step lowers the RSS by less than `tol`
/// relative, when the RSS reaches zero, or when no step at any damping
/// lowers it. Running out of iterations is not an error: the best point so
/// far comes back with `converged = false`.
pub fn fit(problem: &FitProblem, tol: f64, max_iter: usize) -> Result<FitResult> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    // canonical order so the result does not depend on input order
    let n = problem.x.len();
    let w = |i: usize| problem.weights.as_ref().map_or(1.0, |w| w[i]);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        problem.x[a]
            .total_cmp(&problem.x[b])
            .then(problem.y[a].total_cmp(&problem.y[b]))
            .then(w(a).total_cmp(&w(b)))
    });
    let data = Data {
        model: problem.model,
        x: idx.iter().map(|&i| problem.x[i]).collect(),
        y: idx.iter().map(|&i| problem.y[i]).collect(),
        sw: idx.iter().map(|&i| w(i).sqrt()).collect(),
        scale: problem.initial.iter().map(|v| v.abs()).collect(),
    };
    let bounds = problem.bounds.as_deref();
    let np = problem.initial.len();

    let mut p = problem.initial.clone();
    project(&mut p, bounds);
    let mut r = data.residuals(&p);
    let mut rss = rss_of(&r);
    if !rss.is_finite() {
        return Err(Error::Fit("model is not finite at the initial guess".into()));
    }
    let mut history = vec![rss];
    let mut lambda = -1.0;
    let mut converged = rss == 0.0;
    let mut iterations = 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        let j = data.jacobian(&p);
        let mut a = j.transpose() * &j;
        let mut g = j.transpose() * &r;
        // parameters pinned at a bound and pushed outward stay put, so that
        // the projection does not eat the step of the free ones
        if let Some(b) = bounds {
            for k in 0..np {
                let (lo, hi) = b[k];
                if (p[k] <= lo && g[k] < 0.0) || (p[k] >= hi && g[k] > 0.0) {
                    g[k] = 0.0;
                    a.row_mut(k).fill(0.0);
                    a.column_mut(k).fill(0.0);
                }
            }
        }
        let max_diag = a.diagonal().iter().fold(0.0f64, |m, &v| m.max(v));
        if !(max_diag > 0.0) {
            return Err(Error::SingularJacobian);
        }
        if lambda < 0.0 {
            lambda = 1e-3 * max_diag;
        }
        loop {
            let mut damped = a.clone();
            for k in 0..np {
                damped[(k, k)] += lambda;
            }
            let step = damped.cholesky().map(|c| c.solve(&g));
            if let Some(delta) = step {
                let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                project(&mut trial, bounds);
                let r_new = data.residuals(&trial);
                let rss_new = rss_of(&r_new);
                if rss_new.is_finite() && rss_new < rss {
                    let rel = (rss - rss_new) / rss;
                    p = trial;
                    r = r_new;
                    rss = rss_new;
                    history.push(rss);
                    lambda = (lambda / 10.0).max(f64::MIN_POSITIVE);
                    converged = rel < tol || rss == 0.0;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > LAMBDA_CEILING * max_diag {
                converged = true;
                break;
            }
        }
    }

    let covariance = covariance(&data, &p, rss)?;
    Ok(FitResult {
        params: p,
        covariance,
        rss,
        converged,
        iterations,
        rss_history: history,
    })
}

/// Unidentifiable directions (for instance the width and center of a
/// zero-amplitude Lorentzian) get zero variance through the pseudo-inverse.
fn covariance(data: &Data, p: &[f64], rss: f64) -> Result<Vec<Vec<f64>>> {
    let j = data.jacobian(p);
    let a = j.transpose() * &j;
    let smax = a.clone().svd(false, false).singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::SingularJacobian);
    }
    let inv = a.pseudo_inverse(smax * 1e-13).map_err(|_| Error::SingularJacobian)?;
    let dof = (data.x.len() - p.len()) as f64;
    let s2 = rss / dof;
    Ok((0..p.len())
        .map(|i| (0..p.len()).map(|k| 0.5 * (inv[(i, k)] + inv[(k, i)]) * s2).collect())
        .collect())
}
