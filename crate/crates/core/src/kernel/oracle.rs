//! Exact solutions of the linear problem (no coupling, `m = D = 1`) used to
//! check the finite-difference scheme.
//!
//! With the drift shift `Φ ≡ -Ω` the density moves like
//! `dω = -(ω - Ω) dt + √2 dW`, `dθ = ω dt`: a point mass at `y` becomes the
//! Gaussian with mean `(Ω + (y_ω - Ω)e^{-t}, y_θ + Ωt + (y_ω - Ω)(1 - e^{-t}))`
//! and covariance `2 C₀(t)`. This is `e^{t} Γ⁰` centred on the drifted pole,
//! the forward mass-conserving normalization.

use std::f64::consts::TAU;

use super::{covariance_unchecked, exp_flow, KernelParams, Matrix2};
use crate::config::{GridSpec, ModelParams};
use crate::error::{KkfError, Result};

/// A bivariate normal density in `(ω, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    pub cov: Matrix2,
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: Matrix2) -> Result<Self> {
        if cov.a12 != cov.a21 || cov.cholesky().is_none() {
            return Err(KkfError::InvalidParameter(
                "gaussian covariance must be symmetric positive definite".into(),
            ));
        }
        Ok(Gaussian2 { mean, cov })
    }

    pub fn density(&self, omega: f64, theta: f64) -> f64 {
        let inv = match self.cov.inverse() {
            Some(inv) => inv,
            None => return 0.0,
        };
        let d = [omega - self.mean[0], theta - self.mean[1]];
        (-0.5 * inv.quad_form(d)).exp() / (TAU * self.cov.det().sqrt())
    }

    /// Density of the θ-wrapped distribution on `ℝ × [0, 2π)`.
    pub fn density_periodic(&self, omega: f64, theta: f64) -> f64 {
        let images = (8.0 * self.cov.a22.sqrt() / TAU).ceil() as i64 + 1;
        let base = theta - self.mean[1];
        let shift = (base / TAU).round();
        (-images..=images)
            .map(|n| self.density(omega, self.mean[1] + base - (shift + n as f64) * TAU))
            .sum()
    }
}

/// Exact evolution for the uncoupled, normalized operator with constant
/// natural frequency `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOracle {
    drift: f64,
}

impl LinearOracle {
    pub fn new(params: &ModelParams, drift: f64) -> Result<Self> {
        if params.coupling != 0.0 || params.inertia != 1.0 || params.noise != 1.0 {
            return Err(KkfError::InvalidParameter(
                "the linear oracle is only defined for K = 0, m = D = 1".into(),
            ));
        }
        Ok(LinearOracle { drift })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Image of the point `y` under the noiseless flow after time `t`.
    pub fn mean_of(&self, y: [f64; 2], t: f64) -> [f64; 2] {
        let om = self.drift;
        let e = exp_flow(t).apply([y[0] - om, y[1]]);
        [om + e[0], e[1] + om * t]
    }

    /// Transition density from `y` at time 0 to `x` at time `t` on `ℝ²`.
    pub fn kernel(&self, x: [f64; 2], t: f64, y: [f64; 2]) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mean = self.mean_of(y, t);
        let cov = covariance_unchecked(KernelParams::UNREGULARIZED, t).scale(2.0);
        Gaussian2 { mean, cov }.density(x[0], x[1])
    }

    /// Exact solution for Gaussian initial data.
    pub fn transport(&self, initial: &Gaussian2, t: f64) -> Gaussian2 {
        let mean = self.mean_of(initial.mean, t);
        let cov = exp_flow(t).congruence(&initial.cov)
            + covariance_unchecked(KernelParams::UNREGULARIZED, t).scale(2.0);
        Gaussian2 { mean, cov }
    }

    /// Superposition of kernels over one Ω-slice of a field (rectangle rule,
    /// θ treated periodically). `values` is the `n_omega × n_theta` slice.
    pub fn convolve(&self, values: &[f64], grid: &GridSpec, x: [f64; 2], t: f64) -> Result<f64> {
        if values.len() != grid.cells_per_slice() {
            return Err(KkfError::DimensionMismatch(format!(
                "slice has {} values, grid expects {}",
                values.len(),
                grid.cells_per_slice()
            )));
        }
        if t <= 0.0 {
            return Err(KkfError::InvalidParameter("convolution needs t > 0".into()));
        }
        let cov = covariance_unchecked(KernelParams::UNREGULARIZED, t).scale(2.0);
        let mut acc = 0.0;
        for ii in 0..grid.n_omega {
            let w = grid.omega_at(ii);
            for j in 0..grid.n_theta {
                let v = values[ii * grid.n_theta + j];
                if v == 0.0 {
                    continue;
                }
                let mean = self.mean_of([w, grid.theta_at(j)], t);
                acc += v * Gaussian2 { mean, cov }.density_periodic(x[0], x[1]);
            }
        }
        Ok(acc * grid.cell_area())
    }
}

/// `|E(e^{iω})|` for a Gaussian ω-marginal.
pub fn frequency_coherence(g: &Gaussian2) -> f64 {
    (-0.5 * g.cov.a11).exp()
}
