//! Physical parameters, the coupled (ω, θ, Ω, t) lattice, the natural-frequency
//! distribution and the positivity gate of the explicit scheme.
//!
//! The θ-spacing is tied to the other two spacings, `dθ = dω·dt`, so that the
//! free-transport shift `θ - ω dt` of row `i` is exactly `i` θ-cells. The
//! requested time step is nudged so that an integer number of θ-cells closes
//! the period `2π`.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{KkfError, Result};

/// Relative slack used when comparing against the positivity bounds, so that
/// grids built exactly on a bound are not rejected because of rounding.
const BOUND_SLACK: f64 = 1e-12;

/// Constants of the inertial Kuramoto equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Inertia `m > 0`.
    #[serde(rename = "m")]
    pub inertia: f64,
    /// Noise intensity `D > 0`.
    #[serde(rename = "D")]
    pub noise: f64,
    /// Coupling strength `K >= 0`.
    #[serde(rename = "K")]
    pub coupling: f64,
    /// Half-width `Ω₁` of the support of the frequency distribution.
    #[serde(rename = "Omega1", default)]
    pub freq_half_width: f64,
}

impl ModelParams {
    pub fn new(inertia: f64, noise: f64, coupling: f64, freq_half_width: f64) -> Result<Self> {
        let params = ModelParams {
            inertia,
            noise,
            coupling,
            freq_half_width,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(KkfError::InvalidParameter(msg.to_string()));
        if !(self.inertia.is_finite() && self.inertia > 0.0) {
            return bad("inertia m must be positive");
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return bad("noise intensity D must be positive");
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return bad("coupling must be nonnegative");
        }
        if !(self.freq_half_width.is_finite() && self.freq_half_width >= 0.0) {
            return bad("frequency half-width Omega1 must be nonnegative");
        }
        Ok(())
    }
}

/// The lattice `G_r`: ω-nodes `i·dω` for `|i| <= M`, θ-nodes `j·dω·dt` for
/// `0 <= j < n_theta` (periodic), Ω-nodes `k·dΩ`, time levels `n·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d_omega: f64,
    pub d_t: f64,
    pub d_theta: f64,
    /// Ω-spacing; `None` for a degenerate lattice (a single Ω node).
    pub d_big_omega: Option<f64>,
    pub g_omega: f64,
    pub t_final: f64,
    pub omega1: f64,
    /// `M = G_ω / dω`; rows `i = ±M` form the boundary.
    pub omega_index_max: usize,
    pub n_omega: usize,
    pub n_theta: usize,
    pub n_t: usize,
    pub n_big_omega: usize,
}

impl GridSpec {
    /// ω-value of row `ii` in storage order (`ii = i + M`).
    #[inline]
    pub fn omega_at(&self, ii: usize) -> f64 {
        (ii as f64 - self.omega_index_max as f64) * self.d_omega
    }

    #[inline]
    pub fn theta_at(&self, j: usize) -> f64 {
        j as f64 * self.d_theta
    }

    /// Signed ω-index of storage row `ii`.
    #[inline]
    pub fn signed_row(&self, ii: usize) -> isize {
        ii as isize - self.omega_index_max as isize
    }

    /// Area of one (ω, θ) cell, `dω·dθ = dω²·dt`.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.d_omega * self.d_theta
    }

    pub fn cells_per_slice(&self) -> usize {
        self.n_omega * self.n_theta
    }

    /// Nodes of the Ω-lattice `k·dΩ`, `|k·dΩ| <= Ω₁`.
    pub fn big_omega_nodes(&self) -> Vec<f64> {
        match self.d_big_omega {
            None => vec![0.0],
            Some(h) => {
                let kmax = (self.n_big_omega / 2) as isize;
                (-kmax..=kmax).map(|k| k as f64 * h).collect()
            }
        }
    }
}

/// Outcome of checking a grid against the three positivity conditions
/// `dω <= √(2D)/m`, `dt <= m²dω²/(2D - m dω²)` and `G_ω <= 2D/(m dω) - Ω₁ - K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub d_omega_max: f64,
    pub d_omega_ok: bool,
    /// `None` when `2D <= m dω²`: the time step is then unconstrained.
    pub d_t_max: Option<f64>,
    pub d_t_ok: bool,
    pub g_omega_max: f64,
    pub g_omega_ok: bool,
    pub overall_ok: bool,
}

impl StabilityReport {
    pub fn evaluate(params: &ModelParams, d_omega: f64, d_t: f64, g_omega: f64) -> Result<Self> {
        params.validate()?;
        for (name, v) in [("d_omega", d_omega), ("d_t", d_t), ("G_omega", g_omega)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KkfError::MalformedGrid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let m = params.inertia;
        let d = params.noise;

        let d_omega_max = (2.0 * d).sqrt() / m;
        let d_omega_ok = within(d_omega, d_omega_max);

        let denom = 2.0 * d - m * d_omega * d_omega;
        let d_t_max = (denom > 0.0).then(|| m * m * d_omega * d_omega / denom);
        let d_t_ok = d_t_max.is_none_or(|bound| within(d_t, bound));

        let g_omega_max = 2.0 * d / (m * d_omega) - params.freq_half_width - params.coupling;
        let g_omega_ok = within(g_omega, g_omega_max);

        Ok(StabilityReport {
            d_omega_max,
            d_omega_ok,
            d_t_max,
            d_t_ok,
            g_omega_max,
            g_omega_ok,
            overall_ok: d_omega_ok && d_t_ok && g_omega_ok,
        })
    }
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound + BOUND_SLACK * bound.abs()
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |ok: bool| if ok { "ok" } else { "VIOLATED" };
        write!(
            f,
            "d_omega <= {:.6} [{}], ",
            self.d_omega_max,
            flag(self.d_omega_ok)
        )?;
        match self.d_t_max {
            Some(b) => write!(f, "d_t <= {:.6e} [{}], ", b, flag(self.d_t_ok))?,
            None => write!(f, "d_t unconstrained [ok], ")?,
        }
        write!(
            f,
            "G_omega <= {:.6} [{}]",
            self.g_omega_max,
            flag(self.g_omega_ok)
        )
    }
}

pub fn validate_stability(params: &ModelParams, grid: &GridSpec) -> Result<StabilityReport> {
    StabilityReport::evaluate(params, grid.d_omega, grid.d_t, grid.g_omega)
}

/// Requested spacings for [`build_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRequest {
    pub d_omega: f64,
    pub target_d_t: f64,
    #[serde(rename = "G_omega")]
    pub g_omega: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "d_Omega", default)]
    pub d_big_omega: Option<f64>,
}

/// Builds the lattice. `n_theta = round(2π / (dω·dt_target))` and the time
/// step is then recomputed as `2π / (n_theta·dω)`. Unless `allow_unsafe` is
/// set, the resulting grid must pass [`validate_stability`].
pub fn build_grid(params: &ModelParams, req: &GridRequest, allow_unsafe: bool) -> Result<GridSpec> {
    params.validate()?;
    for (name, v) in [
        ("d_omega", req.d_omega),
        ("target_d_t", req.target_d_t),
        ("G_omega", req.g_omega),
        ("T", req.t_final),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(KkfError::MalformedGrid(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }

    let ratio = req.g_omega / req.d_omega;
    let omega_index_max = ratio.round();
    if (ratio - omega_index_max).abs() > 1e-9 * ratio.max(1.0) || omega_index_max < 1.0 {
        return Err(KkfError::MalformedGrid(format!(
            "G_omega / d_omega = {ratio} is not a positive integer"
        )));
    }
    let omega_index_max = omega_index_max as usize;

    let n_theta = (TAU / (req.d_omega * req.target_d_t)).round();
    if n_theta < 1.0 || !n_theta.is_finite() {
        return Err(KkfError::MalformedGrid(
            "theta lattice would be empty".into(),
        ));
    }
    let n_theta = n_theta as usize;
    let d_t = TAU / (n_theta as f64 * req.d_omega);
    let d_theta = req.d_omega * d_t;
    let n_t = ((req.t_final / d_t) - 1e-9).ceil().max(1.0) as usize;

    let n_big_omega = match req.d_big_omega {
        None => 1,
        Some(h) if h.is_finite() && h > 0.0 => {
            2 * ((params.freq_half_width / h) + 1e-9).floor() as usize + 1
        }
        Some(h) => {
            return Err(KkfError::MalformedGrid(format!(
                "d_Omega must be positive, got {h}"
            )));
        }
    };

    let grid = GridSpec {
        d_omega: req.d_omega,
        d_t,
        d_theta,
        d_big_omega: req.d_big_omega,
        g_omega: req.g_omega,
        t_final: req.t_final,
        omega1: params.freq_half_width,
        omega_index_max,
        n_omega: 2 * omega_index_max + 1,
        n_theta,
        n_t,
        n_big_omega,
    };

    if !allow_unsafe {
        let report = validate_stability(params, &grid)?;
        if !report.overall_ok {
            return Err(KkfError::StabilityViolation(report));
        }
    }
    Ok(grid)
}

/// Description of the natural-frequency density `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Identical oscillators with natural frequency `at`.
    PointMass {
        #[serde(default)]
        at: f64,
    },
    /// Uniform density on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Gaussian truncated to `[mean - half_width, mean + half_width]`.
    Gaussian {
        #[serde(default)]
        mean: f64,
        sigma: f64,
        half_width: f64,
    },
    /// Raw density values on the Ω-lattice, in ascending Ω order.
    Tabulated { density: Vec<f64> },
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::PointMass { at: 0.0 }
    }
}

/// Natural-frequency density tabulated on Ω-nodes, normalized so that
/// `Σ g_k dΩ = 1`. A point mass is a single node with `g = 1`, `dΩ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDistribution {
    nodes: Vec<f64>,
    density: Vec<f64>,
    spacing: f64,
}

impl FrequencyDistribution {
    pub fn point_mass(at: f64) -> Self {
        FrequencyDistribution {
            nodes: vec![at],
            density: vec![1.0],
            spacing: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Probability weight `g_k·dΩ` of node `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.density[k] * self.spacing
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spacing
    }
}

/// Tabulates `g` on the grid's Ω-lattice with the rectangle rule (endpoint
/// nodes get full weight) and renormalizes to unit mass.
pub fn build_frequency_distribution(
    spec: &DistributionSpec,
    grid: &GridSpec,
) -> Result<FrequencyDistribution> {
    let omega1 = grid.omega1;
    let tol = 1e-12 * omega1.max(1.0);
    let bad = |msg: String| Err(KkfError::InvalidDistribution(msg));

    let (lo, hi) = match *spec {
        DistributionSpec::PointMass { at } => {
            if !at.is_finite() || at.abs() > omega1 + tol {
                return bad(format!(
                    "point mass at {at} lies outside [-{omega1}, {omega1}]"
                ));
            }
            return Ok(FrequencyDistribution::point_mass(at));
        }
        DistributionSpec::Uniform { half_width } => (-half_width, half_width),
        DistributionSpec::Gaussian {
            mean, half_width, ..
        } => (mean - half_width, mean + half_width),
        DistributionSpec::Tabulated { .. } => (-omega1, omega1),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return bad(format!("support [{lo}, {hi}] is empty"));
    }
    if lo < -omega1 - tol || hi > omega1 + tol {
        return bad(format!(
            "support [{lo}, {hi}] is not contained in [-{omega1}, {omega1}]"
        ));
    }
    let spacing = match grid.d_big_omega {
        Some(h) => h,
        None => return bad("a spread distribution needs a d_Omega lattice".into()),
    };
    let nodes = grid.big_omega_nodes();
    let inside = |w: f64| w >= lo - 1e-12 * spacing && w <= hi + 1e-12 * spacing;

    let raw: Vec<f64> = match spec {
        DistributionSpec::Uniform { half_width } => {
            if *half_width < 0.0 {
                return bad("uniform half_width must be nonnegative".into());
            }
            nodes
                .iter()
                .map(|&w| if inside(w) { 1.0 } else { 0.0 })
                .collect()
        }
        DistributionSpec::Gaussian { mean, sigma, .. } => {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return bad("gaussian sigma must be positive".into());
            }
            nodes
                .iter()
                .map(|&w| {
                    if inside(w) {
                        let z = (w - mean) / sigma;
                        (-0.5 * z * z).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        DistributionSpec::Tabulated { density } => {
            if density.len() != nodes.len() {
                return bad(format!(
                    "tabulated density has {} values but the lattice has {} nodes",
                    density.len(),
                    nodes.len()
                ));
            }
            density.clone()
        }
        DistributionSpec::PointMass { .. } => unreachable!(),
    };

    if let Some(k) = raw.iter().position(|&g| !(g.is_finite() && g >= 0.0)) {
        return bad(format!("weight at node {k} is negative or not finite"));
    }
    let mass: f64 = raw.iter().sum::<f64>() * spacing;
    if mass <= 0.0 {
        return bad("distribution has empty support on the lattice".into());
    }
    let density = raw.into_iter().map(|g| g / mass).collect();
    Ok(FrequencyDistribution {
        nodes,
        density,
        spacing,
    })
}
