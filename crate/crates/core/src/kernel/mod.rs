//! Closed-form machinery for the constant-coefficient Kolmogorov operator
//! `(1+ε)∂²_ωω + ω∂_ω - ω∂_θ - ∂_t`: the flow `E(t) = exp(-tB)`, the
//! covariance `C_ε(t)`, the Gaussian fundamental solution `Γ^ε`, its
//! θ-marginal, the underlying Lie group law and the anisotropic distance.
//!
//! `Γ^ε(x, t)` is `e^{-t}` times the density of `N(0, 2 C_ε(t))`, so it
//! integrates to one over the pole variables and to `e^{-t}` over the forward
//! variables. [`oracle`] builds the forward mass-conserving kernel on top of it.

mod group;
pub mod identities;
pub mod oracle;

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use crate::error::{KkfError, Result};

pub use group::{aniso_distance, aniso_norm, group_compose, group_inverse, GroupPoint};
pub use oracle::{frequency_coherence, Gaussian2, LinearOracle};

/// Below this time the kernel is treated as a Dirac mass at its pole.
const CONCENTRATED_T: f64 = 1e-12;

/// Real 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Matrix2 = Matrix2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Matrix2 { a11, a12, a21, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Matrix2::new(a, 0.0, 0.0, b)
    }

    pub fn transpose(&self) -> Self {
        Matrix2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    /// Inverse through the adjugate; `None` for a singular matrix.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Matrix2::new(self.a22, -self.a12, -self.a21, self.a11).scale(1.0 / det))
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * x[0] + self.a12 * x[1],
            self.a21 * x[0] + self.a22 * x[1],
        ]
    }

    /// `⟨M x, x⟩`.
    pub fn quad_form(&self, x: [f64; 2]) -> f64 {
        let y = self.apply(x);
        y[0] * x[0] + y[1] * x[1]
    }

    /// `M S Mᵀ`.
    pub fn congruence(&self, s: &Matrix2) -> Self {
        *self * *s * self.transpose()
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        if self.a11 <= 0.0 {
            return None;
        }
        let l11 = self.a11.sqrt();
        let l21 = self.a21 / l11;
        let rest = self.a22 - l21 * l21;
        if rest <= 0.0 {
            return None;
        }
        Some(Matrix2::new(l11, 0.0, l21, rest.sqrt()))
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        [
            self.a11 - other.a11,
            self.a12 - other.a12,
            self.a21 - other.a21,
            self.a22 - other.a22,
        ]
        .iter()
        .fold(0.0_f64, |acc, d| acc.max(d.abs()))
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;

    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;

    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

/// Regularization parameter `ε >= 0` of the diffusion coefficient `1 + ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    epsilon: f64,
}

impl KernelParams {
    pub const UNREGULARIZED: KernelParams = KernelParams { epsilon: 0.0 };

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(KkfError::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        Ok(KernelParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The diffusion matrix `A_ε = diag(1 + ε, 0)`.
    pub fn diffusion(&self) -> Matrix2 {
        Matrix2::diag(1.0 + self.epsilon, 0.0)
    }
}

/// `E(t) = exp(-tB)` with `B = [[1, 0], [-1, 0]]`.
pub fn exp_flow(t: f64) -> Matrix2 {
    let e = (-t).exp();
    Matrix2::new(e, 0.0, 1.0 - e, 1.0)
}

/// `C_ε(t) = ∫₀ᵗ E(s) A_ε Eᵀ(s) ds` in closed form.
pub fn covariance(eps: KernelParams, t: f64) -> Result<Matrix2> {
    if !(t >= 0.0) {
        return Err(KkfError::InvalidParameter(format!(
            "covariance needs t >= 0, got {t}"
        )));
    }
    Ok(covariance_unchecked(eps, t))
}

fn covariance_unchecked(eps: KernelParams, t: f64) -> Matrix2 {
    // expm1 keeps the small-t entries accurate: 1 - e^{-t} = -expm1(-t).
    let a = -(-t).exp_m1();
    let a2 = -(-2.0 * t).exp_m1();
    let off = a * a;
    // 2t - 3 + 4e^{-t} - e^{-2t} = 2t - 4a + a2, which cancels badly for small t
    let tt = if t < 0.1 {
        // Σ_{n>=3} (4(-1)^n - (-2)^n) tⁿ/n!
        let mut sum = 0.0;
        let mut pow_over_fact = t * t / 2.0;
        for n in 3..=20 {
            pow_over_fact *= t / n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += (4.0 * sign - sign * 2f64.powi(n)) * pow_over_fact;
        }
        sum
    } else {
        2.0 * t - 4.0 * a + a2
    };
    Matrix2::new(a2, off, off, tt).scale(0.5 * (1.0 + eps.epsilon))
}

/// `Γ^ε(x, t)` with the zero extension for `t <= 0`.
pub fn gamma_eps(omega: f64, theta: f64, t: f64, eps: KernelParams) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t < CONCENTRATED_T {
        return if omega == 0.0 && theta == 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let c = covariance_unchecked(eps, t);
    let det = c.det();
    let inv = match c.inverse() {
        Some(inv) if det > 0.0 => inv,
        _ => return 0.0,
    };
    (-0.25 * inv.quad_form([omega, theta]) - t).exp() / (4.0 * PI * det.sqrt())
}

/// `Γ^ε(x, t; x₀, t₀) = Γ^ε(x - E(t - t₀) x₀, t - t₀)`.
pub fn gamma_eps_at(x: [f64; 2], t: f64, x0: [f64; 2], t0: f64, eps: KernelParams) -> f64 {
    let dt = t - t0;
    if dt <= 0.0 {
        return 0.0;
    }
    let shifted = exp_flow(dt).apply(x0);
    gamma_eps(x[0] - shifted[0], x[1] - shifted[1], dt, eps)
}

/// `∫_ℝ Γ^ε(ω, θ, t; ξ, η, τ) dη`, the fundamental solution of
/// `(1+ε)∂²_ωω + ω∂_ω - ∂_t`:
/// `e^{-(t-τ)} / √(2π(1+ε)(1-e^{-2(t-τ)})) · exp(-|ω - e^{-(t-τ)}ξ|² / (2(1+ε)(1-e^{-2(t-τ)})))`.
pub fn gamma_tilde(omega: f64, t: f64, xi: f64, tau: f64, eps: KernelParams) -> Result<f64> {
    let dt = t - tau;
    if !(dt > 0.0) {
        return Err(KkfError::InvalidParameter(format!(
            "gamma_tilde needs t > tau, got t={t}, tau={tau}"
        )));
    }
    // variance of the ω-marginal of N(0, 2C_ε): 2·C_ε,11
    let var = (1.0 + eps.epsilon) * -(-2.0 * dt).exp_m1();
    let u = omega - (-dt).exp() * xi;
    Ok((-u * u / (2.0 * var) - dt).exp() / (2.0 * PI * var).sqrt())
}
