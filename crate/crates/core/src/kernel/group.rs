//! The Lie group `(ℝ³, ∘)` under which the Kolmogorov operator is invariant,
//! and the anisotropic norm/quasi-distance adapted to its dilations.

/// A point `(ω, θ, t)` of the group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupPoint {
    pub omega: f64,
    pub theta: f64,
    pub t: f64,
}

impl GroupPoint {
    pub const IDENTITY: GroupPoint = GroupPoint {
        omega: 0.0,
        theta: 0.0,
        t: 0.0,
    };

    pub fn new(omega: f64, theta: f64, t: f64) -> Self {
        GroupPoint { omega, theta, t }
    }
}

/// `(ω, θ, t) ∘ (ξ, η, τ) = (ξ + ω e^{-τ}, η + θ + ω(1 - e^{-τ}), t + τ)`.
pub fn group_compose(z: GroupPoint, w: GroupPoint) -> GroupPoint {
    let decay = (-w.t).exp();
    GroupPoint {
        omega: w.omega + z.omega * decay,
        theta: w.theta + z.theta + z.omega * -(-w.t).exp_m1(),
        t: z.t + w.t,
    }
}

/// `(ω, θ, t)⁻¹ = (-ω e^{t}, -θ - ω(1 - e^{t}), -t)`.
pub fn group_inverse(z: GroupPoint) -> GroupPoint {
    GroupPoint {
        omega: -z.omega * z.t.exp(),
        theta: -z.theta + z.omega * z.t.exp_m1(),
        t: -z.t,
    }
}

/// `‖(ω, θ, t)‖ = |ω| + |θ|^{1/3} + |t|^{1/2}`.
pub fn aniso_norm(z: GroupPoint) -> f64 {
    z.omega.abs() + z.theta.abs().cbrt() + z.t.abs().sqrt()
}

/// `d(z, w) = ‖w⁻¹ ∘ z‖`, written out in closed form.
pub fn aniso_distance(z: GroupPoint, w: GroupPoint) -> f64 {
    let lag = (w.t - z.t).exp();
    (z.omega - w.omega * lag).abs()
        + (z.theta - w.theta + w.omega * (lag - 1.0)).abs().cbrt()
        + (z.t - w.t).abs().sqrt()
}
