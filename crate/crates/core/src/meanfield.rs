//! Mean-field coupling and coherence diagnostics.
//!
//! Both order parameters are rectangle-rule sums over the whole lattice,
//! `r = Σ_k w_k Σ_{i,j} e^{iθ_j} ρ_{ijk} dω dθ` (and `s` with `e^{iω_i}`),
//! with `w_k = g_k dΩ`. The reduction order is fixed: per slice, column sums
//! over ascending `i`, then ascending `j`, then ascending `k`.

use crate::config::{FrequencyDistribution, GridSpec, ModelParams};
use crate::error::{KkfError, Result};
use crate::field::DensityField;

/// Tolerance on the per-slice mass accepted by the diagnostics.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OrderParameter {
    pub re: f64,
    pub im: f64,
}

impl OrderParameter {
    pub const ZERO: OrderParameter = OrderParameter { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        OrderParameter { re, im }
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in `(-π, π]`; zero for the zero vector.
    pub fn phase(&self) -> f64 {
        self.im.atan2(self.re)
    }
}

fn check_slices(rho: &DensityField, g: &FrequencyDistribution) -> Result<()> {
    if g.len() != rho.n_slices() {
        return Err(KkfError::DimensionMismatch(format!(
            "field has {} slices, distribution has {} nodes",
            rho.n_slices(),
            g.len()
        )));
    }
    Ok(())
}

/// Phase and frequency order parameters `(r, s)` without the normalization
/// check.
pub fn order_parameters_unchecked(
    rho: &DensityField,
    g: &FrequencyDistribution,
) -> (OrderParameter, OrderParameter) {
    let grid = rho.grid();
    let (cos_t, sin_t) = theta_tables(grid);
    let mut r = OrderParameter::ZERO;
    let mut s = OrderParameter::ZERO;
    let mut columns = vec![0.0; grid.n_theta];
    for k in 0..rho.n_slices() {
        let w = g.weight(k) * grid.cell_area();
        columns.iter_mut().for_each(|c| *c = 0.0);
        let (mut sr, mut si) = (0.0, 0.0);
        for ii in 0..grid.n_omega {
            let row = rho.row(k, ii);
            let mut row_sum = 0.0;
            for (c, &v) in columns.iter_mut().zip(row) {
                *c += v;
                row_sum += v;
            }
            let om = grid.omega_at(ii);
            sr += om.cos() * row_sum;
            si += om.sin() * row_sum;
        }
        let (mut rr, mut ri) = (0.0, 0.0);
        for j in 0..grid.n_theta {
            rr += cos_t[j] * columns[j];
            ri += sin_t[j] * columns[j];
        }
        r.re += w * rr;
        r.im += w * ri;
        s.re += w * sr;
        s.im += w * si;
    }
    (r, s)
}

/// `(r, s)` for a field normalized per slice.
pub fn order_parameters(
    rho: &DensityField,
    g: &FrequencyDistribution,
) -> Result<(OrderParameter, OrderParameter)> {
    check_slices(rho, g)?;
    for (k, mass) in rho.slice_masses().into_iter().enumerate() {
        if !((mass - 1.0).abs() <= NORMALIZATION_TOL) {
            return Err(KkfError::Unnormalized { slice: k, mass });
        }
    }
    Ok(order_parameters_unchecked(rho, g))
}

/// `K_ρ(θ) = K |r| sin(ψ - θ)`.
pub fn kura_field(r: OrderParameter, coupling: f64, theta: f64) -> f64 {
    // |r| sin(ψ - θ) = Im(r) cos θ - Re(r) sin θ
    coupling * (r.im * theta.cos() - r.re * theta.sin())
}

/// The drift shift `Φ̃[k][j] = -Ω_k - K_ρ(θ_j)`, slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    n_theta: usize,
    values: Vec<f64>,
}

impl PhiTable {
    pub fn zeros(n_theta: usize, n_slices: usize) -> Self {
        PhiTable {
            n_theta,
            values: vec![0.0; n_theta * n_slices],
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_slices(&self) -> usize {
        self.values.len() / self.n_theta.max(1)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[k * self.n_theta + j]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_theta..(k + 1) * self.n_theta]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Fills the table from an already computed `r`.
    pub fn fill(
        &mut self,
        r: OrderParameter,
        g: &FrequencyDistribution,
        grid: &GridSpec,
        coupling: f64,
    ) {
        let (cos_t, sin_t) = theta_tables(grid);
        for (k, &big_omega) in g.nodes().iter().enumerate() {
            let row = &mut self.values[k * self.n_theta..(k + 1) * self.n_theta];
            for (j, p) in row.iter_mut().enumerate() {
                *p = -big_omega - coupling * (r.im * cos_t[j] - r.re * sin_t[j]);
            }
        }
    }
}

/// Discrete drift shift for the field `rho`.
pub fn phi_discrete(
    rho: &DensityField,
    g: &FrequencyDistribution,
    params: &ModelParams,
) -> Result<PhiTable> {
    let (r, _) = order_parameters(rho, g)?;
    let grid = rho.grid();
    let mut table = PhiTable::zeros(grid.n_theta, g.len());
    table.fill(r, g, grid, params.coupling);
    Ok(table)
}

fn theta_tables(grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    (0..grid.n_theta)
        .map(|j| grid.theta_at(j).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_frequency_distribution, build_grid, DistributionSpec, GridRequest};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small_grid(omega1: f64, d_big: Option<f64>) -> (ModelParams, GridSpec) {
        let params = ModelParams::new(1.0, 1.0, 2.0, omega1).unwrap();
        // 2π / (0.5 · π/8) = 32 θ-cells, 2·4+1 = 9 ω-rows
        let req = GridRequest {
            d_omega: 0.5,
            target_d_t: PI / 8.0,
            g_omega: 2.0,
            t_final: 1.0,
            d_big_omega: d_big,
        };
        (params, build_grid(&params, &req, true).unwrap())
    }

    fn random_field(grid: &GridSpec, n_slices: usize, seed: u64) -> DensityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = DensityField::zeros(*grid, n_slices);
        for k in 0..n_slices {
            for ii in 1..grid.n_omega - 1 {
                for v in f.row_mut(k, ii) {
                    *v = rng.random::<f64>();
                }
            }
        }
        f.renormalize().unwrap();
        f
    }

    /// `Φ̃` as the literal double sum over source cells.
    fn phi_double_sum(
        rho: &DensityField,
        g: &FrequencyDistribution,
        coupling: f64,
        j: usize,
        k: usize,
    ) -> f64 {
        let grid = rho.grid();
        let mut acc = 0.0;
        for kk in 0..rho.n_slices() {
            for ii in 0..grid.n_omega {
                for jj in 0..grid.n_theta {
                    acc += g.weight(kk)
                        * grid.cell_area()
                        * rho.get(ii, jj, kk)
                        * (grid.theta_at(jj) - grid.theta_at(j)).sin();
                }
            }
        }
        -g.nodes()[k] - coupling * acc
    }

    #[test]
    fn incoherent_field_has_zero_phase_order() {
        let (_, grid) = small_grid(0.0, None);
        let mut f = DensityField::zeros(grid, 1);
        for ii in 1..grid.n_omega - 1 {
            f.row_mut(0, ii).iter_mut().for_each(|v| *v = 1.0);
        }
        f.renormalize().unwrap();
        let (r, _) = order_parameters(&f, &FrequencyDistribution::point_mass(0.0)).unwrap();
        assert!(r.modulus() < 1e-12);
        assert!(kura_field(r, 3.0, 1.0).abs() < 1e-11);
    }

    #[test]
    fn single_column_gives_full_coherence() {
        let (_, grid) = small_grid(0.0, None);
        let j0 = 5;
        let mut f = DensityField::zeros(grid, 1);
        for ii in 1..grid.n_omega - 1 {
            f.row_mut(0, ii)[j0] = 1.0 + ii as f64;
        }
        f.renormalize().unwrap();
        let (r, _) = order_parameters(&f, &FrequencyDistribution::point_mass(0.0)).unwrap();
        assert!((r.modulus() - 1.0).abs() < 1e-12);
        assert!((r.phase() - grid.theta_at(j0)).abs() < 1e-12);
    }

    #[test]
    fn mass_at_zero_frequency_gives_unit_s() {
        let (_, grid) = small_grid(0.0, None);
        let mut f = DensityField::zeros(grid, 1);
        f.row_mut(0, grid.omega_index_max)
            .iter_mut()
            .for_each(|v| *v = 2.0);
        f.renormalize().unwrap();
        let (_, s) = order_parameters(&f, &FrequencyDistribution::point_mass(0.0)).unwrap();
        assert!((s.modulus() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_field() {
        let (_, grid) = small_grid(0.0, None);
        let mut f = random_field(&grid, 1, 1);
        f.values_mut().iter_mut().for_each(|v| *v *= 1.01);
        let err = order_parameters(&f, &FrequencyDistribution::point_mass(0.0)).unwrap_err();
        assert!(matches!(err, KkfError::Unnormalized { slice: 0, .. }));
    }

    #[test]
    fn zero_coupling_leaves_natural_frequency() {
        let (_, grid) = small_grid(1.0, Some(0.5));
        let g = build_frequency_distribution(&DistributionSpec::Uniform { half_width: 1.0 }, &grid)
            .unwrap();
        let f = random_field(&grid, g.len(), 3);
        let params = ModelParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let phi = phi_discrete(&f, &g, &params).unwrap();
        for k in 0..g.len() {
            for j in 0..grid.n_theta {
                assert_eq!(phi.get(j, k), -g.nodes()[k]);
            }
        }
    }

    #[test]
    fn double_sum_matches_order_parameter_form() {
        // 17 ω-rows, 32 θ-cells, 3 Ω-slices
        let params = ModelParams::new(1.0, 1.0, 4.0, 1.0).unwrap();
        let req = GridRequest {
            d_omega: 0.25,
            target_d_t: PI / 4.0,
            g_omega: 2.0,
            t_final: 1.0,
            d_big_omega: Some(1.0),
        };
        let grid = build_grid(&params, &req, true).unwrap();
        let g = build_frequency_distribution(
            &DistributionSpec::Tabulated {
                density: vec![1.0, 2.0, 1.0],
            },
            &grid,
        )
        .unwrap();
        let f = random_field(&grid, 3, 11);
        let phi = phi_discrete(&f, &g, &params).unwrap();
        for k in 0..3 {
            for j in 0..grid.n_theta {
                let direct = phi_double_sum(&f, &g, params.coupling, j, k);
                assert!((direct - phi.get(j, k)).abs() < 1e-12, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn kura_field_matches_double_sum_example() {
        let (params, grid) = small_grid(0.0, None);
        let g = FrequencyDistribution::point_mass(0.0);
        let f = random_field(&grid, 1, 5);
        let (r, _) = order_parameters(&f, &g).unwrap();
        for j in [0, 7, 19] {
            let theta = grid.theta_at(j);
            let direct = -phi_double_sum(&f, &g, params.coupling, j, 0);
            assert!((kura_field(r, params.coupling, theta) - direct).abs() < 1e-12);
        }
        assert_eq!(kura_field(r, 0.0, 1.3), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn coherence_and_drift_bounds(seed in any::<u64>(), coupling in 0.0f64..8.0) {
            let (_, grid) = small_grid(1.0, Some(0.5));
            let g = build_frequency_distribution(
                &DistributionSpec::Gaussian { mean: 0.0, sigma: 0.6, half_width: 1.0 },
                &grid,
            ).unwrap();
            let f = random_field(&grid, g.len(), seed);
            let (r, s) = order_parameters(&f, &g).unwrap();
            prop_assert!(r.modulus() <= 1.0 + 1e-12);
            prop_assert!(s.modulus() <= 1.0 + 1e-12);
            let params = ModelParams::new(1.0, 1.0, coupling, 1.0).unwrap();
            let phi = phi_discrete(&f, &g, &params).unwrap();
            prop_assert!(phi.max_abs() <= 1.0 + coupling + 1e-12);
        }

        #[test]
        fn drift_is_rotation_equivariant(seed in any::<u64>(), shift in 1usize..32) {
            let (params, grid) = small_grid(0.0, None);
            let g = FrequencyDistribution::point_mass(0.0);
            let f = random_field(&grid, 1, seed);
            let rotated = f.rotated_theta(shift);
            let a = phi_discrete(&f, &g, &params).unwrap();
            let b = phi_discrete(&rotated, &g, &params).unwrap();
            for j in 0..grid.n_theta {
                let jr = (j + shift) % grid.n_theta;
                prop_assert!((a.get(j, 0) - b.get(jr, 0)).abs() < 1e-12);
            }
        }
    }
}
