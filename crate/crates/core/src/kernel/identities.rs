//! Quadrature checks of the closed-form kernel identities.
//!
//! All 2-D integrals use a tensor midpoint rule on a ±8σ box in whitened
//! coordinates `z = μ + L u` (`L` the Cholesky factor of the covariance that
//! governs the integrand), so the box follows the kernel's anisotropy.

use std::fmt;

use super::{covariance_unchecked, exp_flow, gamma_eps_at, gamma_tilde, KernelParams, Matrix2};

const BOX_SIGMAS: f64 = 8.0;

/// Midpoint rule for `∫ f(z) dz` over the ±8σ box of `N(mean, cov)`.
pub fn whitened_box_2d(
    mean: [f64; 2],
    cov: &Matrix2,
    n: usize,
    mut f: impl FnMut([f64; 2]) -> f64,
) -> f64 {
    let l = cov
        .cholesky()
        .expect("quadrature covariance must be positive definite");
    let h = 2.0 * BOX_SIGMAS / n as f64;
    let mut sum = 0.0;
    for a in 0..n {
        let u0 = -BOX_SIGMAS + (a as f64 + 0.5) * h;
        for b in 0..n {
            let u1 = -BOX_SIGMAS + (b as f64 + 0.5) * h;
            let z = l.apply([u0, u1]);
            sum += f([mean[0] + z[0], mean[1] + z[1]]);
        }
    }
    sum * h * h * l.det()
}

/// `∬ Γ^ε(ω, θ, t; ξ, η, 0) dξ dη`, integrating over the pole.
pub fn backward_mass(x: [f64; 2], t: f64, eps: KernelParams, n: usize) -> f64 {
    // pole = E(t)⁻¹ (x - z), z ~ N(0, 2C)
    let e_inv = exp_flow(t).inverse().expect("E(t) is invertible");
    let mean = e_inv.apply(x);
    let cov = e_inv.congruence(&covariance_unchecked(eps, t).scale(2.0));
    whitened_box_2d(mean, &cov, n, |y| gamma_eps_at(x, t, y, 0.0, eps))
}

/// `∫ Γ^ε(ω, θ, t; ξ, η, τ) dη` by a 1-D midpoint rule centred on the
/// conditional mean of the η-profile.
pub fn theta_marginal(x: [f64; 2], t: f64, xi: f64, tau: f64, eps: KernelParams, n: usize) -> f64 {
    let dt = t - tau;
    let c = covariance_unchecked(eps, dt).scale(2.0);
    let decay = (-dt).exp();
    let u0 = x[0] - decay * xi;
    let cond_mean = c.a21 / c.a11 * u0;
    let cond_sd = (c.a22 - c.a21 * c.a21 / c.a11).sqrt();
    // second residual component is x₁ - (1 - e^{-dt})ξ - η
    let centre = x[1] - (1.0 - decay) * xi - cond_mean;
    let half = BOX_SIGMAS * cond_sd;
    let h = 2.0 * half / n as f64;
    let mut sum = 0.0;
    for a in 0..n {
        let eta = centre - half + (a as f64 + 0.5) * h;
        sum += gamma_eps_at(x, t, [xi, eta], tau, eps);
    }
    sum * h
}

/// `∫ Γ̃^ε(ω, t; ξ, τ) dξ` by a 1-D midpoint rule.
pub fn marginal_pole_mass(omega: f64, t: f64, tau: f64, eps: KernelParams, n: usize) -> f64 {
    let dt = t - tau;
    // as a function of ξ the integrand is centred on e^{dt}ω
    let var = (1.0 + eps.epsilon()) * -(-2.0 * dt).exp_m1();
    let centre = dt.exp() * omega;
    let half = BOX_SIGMAS * dt.exp() * var.sqrt();
    let h = 2.0 * half / n as f64;
    let mut sum = 0.0;
    for a in 0..n {
        let xi = centre - half + (a as f64 + 0.5) * h;
        sum += gamma_tilde(omega, t, xi, tau, eps).expect("t > tau");
    }
    sum * h
}

/// `C_ε(t)` by composite Simpson quadrature of `E(s) A_ε Eᵀ(s)`.
pub fn covariance_by_quadrature(eps: KernelParams, t: f64, intervals: usize) -> Matrix2 {
    let n = intervals + intervals % 2;
    let h = t / n as f64;
    let a = eps.diffusion();
    let mut acc = Matrix2::ZERO;
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc = acc + exp_flow(k as f64 * h).congruence(&a).scale(w);
    }
    acc.scale(h / 3.0)
}

/// Forward mass-conserving kernel `e^{t-τ} Γ^ε(x, t; y, τ)`.
pub fn forward_kernel(x: [f64; 2], t: f64, y: [f64; 2], tau: f64, eps: KernelParams) -> f64 {
    (t - tau).exp() * gamma_eps_at(x, t, y, tau, eps)
}

/// `(∫ G(x, t; z, s) G(z, s; y, 0) dz, G(x, t; y, 0))`.
pub fn chapman_kolmogorov(
    x: [f64; 2],
    t: f64,
    s: f64,
    y: [f64; 2],
    eps: KernelParams,
    n: usize,
) -> (f64, f64) {
    let mean = exp_flow(s).apply(y);
    let cov = covariance_unchecked(eps, s).scale(2.0);
    let lhs = whitened_box_2d(mean, &cov, n, |z| {
        forward_kernel(x, t, z, s, eps) * forward_kernel(z, s, y, 0.0, eps)
    });
    (lhs, forward_kernel(x, t, y, 0.0, eps))
}

/// One line of the identity suite.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<48} error {:.3e} (tol {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance
        )
    }
}

/// Pole-side normalization, θ-marginal, covariance quadrature and
/// reproducing property on a fixed set of spot points.
pub fn run_identity_suite() -> Vec<IdentityCheck> {
    let mut out = Vec::new();
    let eps = |e: f64| KernelParams::new(e).expect("fixed nonnegative epsilon");

    for &(t, e, x) in &[
        (0.7, 0.1, [0.3, -0.4]),
        (0.05, 0.0, [1.0, 0.2]),
        (2.5, 0.5, [-0.6, 1.5]),
    ] {
        let mass = backward_mass(x, t, eps(e), 400);
        out.push(IdentityCheck {
            name: format!("pole normalization t={t} eps={e}"),
            error: (mass - 1.0).abs(),
            tolerance: 1e-6,
        });
    }

    for &(x, t, xi, tau, e) in &[
        ([0.2, 0.5], 1.0, 0.4, 0.0, 0.0),
        ([-1.0, 2.0], 0.3, 0.5, 0.1, 0.2),
        ([0.7, -1.0], 3.0, -1.2, 1.0, 1.0),
    ] {
        let quad = theta_marginal(x, t, xi, tau, eps(e), 4000);
        let closed = gamma_tilde(x[0], t, xi, tau, eps(e)).expect("t > tau");
        out.push(IdentityCheck {
            name: format!("theta marginal t={t} tau={tau} eps={e}"),
            error: (quad - closed).abs(),
            tolerance: 1e-6,
        });
    }

    for &(omega, t, tau, e) in &[(0.4, 1.0, 0.0, 0.0), (-1.1, 0.6, 0.2, 0.7)] {
        let mass = marginal_pole_mass(omega, t, tau, eps(e), 2000);
        out.push(IdentityCheck {
            name: format!("marginal pole normalization t={t} tau={tau} eps={e}"),
            error: (mass - 1.0).abs(),
            tolerance: 1e-8,
        });
    }

    for &(t, e) in &[(1.0, 0.0), (0.25, 0.3), (3.0, 0.0)] {
        let quad = covariance_by_quadrature(eps(e), t, 2000);
        let closed = covariance_unchecked(eps(e), t);
        out.push(IdentityCheck {
            name: format!("covariance quadrature t={t} eps={e}"),
            error: quad.max_abs_diff(&closed),
            tolerance: 1e-8,
        });
    }

    for &(x, t, s, y, e) in &[
        ([0.3, 0.6], 1.0, 0.5, [0.0, 0.0], 0.0),
        ([-0.2, 0.1], 1.5, 0.4, [0.5, -0.3], 0.1),
    ] {
        let (lhs, rhs) = chapman_kolmogorov(x, t, s, y, eps(e), 400);
        out.push(IdentityCheck {
            name: format!("reproducing property t={t} s={s} eps={e}"),
            error: (lhs - rhs).abs(),
            tolerance: 1e-4,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_covariance_at_one() {
        let q = covariance_by_quadrature(KernelParams::UNREGULARIZED, 1.0, 2000);
        let c = covariance_unchecked(KernelParams::UNREGULARIZED, 1.0);
        assert!(q.max_abs_diff(&c) < 1e-8);
    }

    #[test]
    fn forward_kernel_integrates_to_one() {
        let eps = KernelParams::new(0.1).unwrap();
        let (t, y) = (0.7, [0.2, -0.1]);
        let mean = exp_flow(t).apply(y);
        let cov = covariance_unchecked(eps, t).scale(2.0);
        let mass = whitened_box_2d(mean, &cov, 300, |x| forward_kernel(x, t, y, 0.0, eps));
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn whole_suite_passes() {
        for check in run_identity_suite() {
            assert!(check.passed(), "{check}");
        }
    }
}
