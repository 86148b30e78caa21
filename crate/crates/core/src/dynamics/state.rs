/// Mean and covariance of the collective-spin quadratures `(x_A, p_A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpinState {
    pub mean: [f64; 2],
    /// `[[Var x, Cov xp], [Cov xp, Var p]]`.
    pub cov: [[f64; 2]; 2],
}

impl Default for GaussianSpinState {
    fn default() -> Self {
        Self::coherent()
    }
}

impl GaussianSpinState {
    /// Coherent spin state: zero mean, covariance `I / 2`.
    pub fn coherent() -> Self {
        Self {
            mean: [0.0, 0.0],
            cov: [[0.5, 0.0], [0.0, 0.5]],
        }
    }

    /// Coherent state with its covariance multiplied by `scale` (e.g. 1.06
    /// for an imperfectly polarized ensemble).
    pub fn coherent_scaled(scale: f64) -> Self {
        Self {
            mean: [0.0, 0.0],
            cov: [[0.5 * scale, 0.0], [0.0, 0.5 * scale]],
        }
    }

    pub fn with_mean(mut self, x: f64, p: f64) -> Self {
        self.mean = [x, p];
        self
    }

    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// Variance of `q = p cos(theta/2) + x sin(theta/2)`.
    pub fn variance_along(&self, quad_angle: f64) -> f64 {
        let (s, c) = (0.5 * quad_angle).sin_cos();
        c * c * self.cov[1][1] + s * s * self.cov[0][0] + 2.0 * s * c * self.cov[0][1]
    }

    /// Symmetric, positive semidefinite and above the Heisenberg bound
    /// `det >= 1/4` (less `slack`).
    pub fn is_physical(&self, slack: f64) -> bool {
        let c = &self.cov;
        c[0][1] == c[1][0] && c[0][0] >= 0.0 && c[1][1] >= 0.0 && self.det() >= 0.25 - slack
    }

    /// Lower-triangular Cholesky factor of the covariance.
    pub(crate) fn cholesky(&self) -> [[f64; 2]; 2] {
        let c = &self.cov;
        let l00 = c[0][0].max(0.0).sqrt();
        let l10 = if l00 > 0.0 { c[1][0] / l00 } else { 0.0 };
        let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
        [[l00, 0.0], [l10, l11]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coherent_state_is_minimal() {
        let s = GaussianSpinState::coherent();
        assert_eq!(s.det(), 0.25);
        assert!(s.is_physical(0.0));
        assert_eq!(s.variance_along(0.7), 0.5);
    }

    #[test]
    fn rotated_quadrature() {
        let s = GaussianSpinState {
            mean: [0.0, 0.0],
            cov: [[2.0, 0.0], [0.0, 0.125]],
        };
        assert!((s.variance_along(0.0) - 0.125).abs() < 1e-15);
        assert!((s.variance_along(PI) - 2.0).abs() < 1e-15);
        let l = s.cholesky();
        assert!((l[0][0] * l[0][0] - 2.0).abs() < 1e-15);
    }
}
