//! The density `ρ[i][j][k]` on the lattice and its initial data.
//!
//! Values are stored slice-major (`k`, then ω-row, then θ-column) so one
//! ω-row of one Ω-slice is contiguous. Snapshots use the `i, j, k` order;
//! see [`DensityField::to_ijk`].

use serde::{Deserialize, Serialize};

use crate::config::{FrequencyDistribution, GridSpec};
use crate::error::{KkfError, Result};
use crate::kernel::{Gaussian2, Matrix2};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    n_slices: usize,
    values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(grid: GridSpec, n_slices: usize) -> Self {
        DensityField {
            grid,
            n_slices,
            values: vec![0.0; n_slices * grid.cells_per_slice()],
        }
    }

    /// Wraps values given in slice-major order.
    pub fn from_values(grid: GridSpec, n_slices: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_slices * grid.cells_per_slice() {
            return Err(KkfError::DimensionMismatch(format!(
                "{} values for {} slices of {}×{}",
                values.len(),
                n_slices,
                grid.n_omega,
                grid.n_theta
            )));
        }
        Ok(DensityField {
            grid,
            n_slices,
            values,
        })
    }

    /// Builds a field from values in `i, j, k` order (k fastest).
    pub fn from_ijk(grid: GridSpec, n_slices: usize, ijk: &[f64]) -> Result<Self> {
        let mut f = DensityField::zeros(grid, n_slices);
        if ijk.len() != f.values.len() {
            return Err(KkfError::DimensionMismatch(format!(
                "{} values for {} cells",
                ijk.len(),
                f.values.len()
            )));
        }
        let mut it = ijk.iter();
        for ii in 0..grid.n_omega {
            for j in 0..grid.n_theta {
                for k in 0..n_slices {
                    let idx = f.index(ii, j, k);
                    f.values[idx] = *it.next().unwrap();
                }
            }
        }
        Ok(f)
    }

    /// Values in `i, j, k` order (k fastest).
    pub fn to_ijk(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for ii in 0..self.grid.n_omega {
            for j in 0..self.grid.n_theta {
                for k in 0..self.n_slices {
                    out.push(self.get(ii, j, k));
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    #[inline]
    fn index(&self, ii: usize, j: usize, k: usize) -> usize {
        (k * self.grid.n_omega + ii) * self.grid.n_theta + j
    }

    #[inline]
    pub fn get(&self, ii: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(ii, j, k)]
    }

    #[inline]
    pub fn set(&mut self, ii: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(ii, j, k);
        self.values[idx] = v;
    }

    pub fn row(&self, k: usize, ii: usize) -> &[f64] {
        let start = self.index(ii, 0, k);
        &self.values[start..start + self.grid.n_theta]
    }

    pub fn row_mut(&mut self, k: usize, ii: usize) -> &mut [f64] {
        let start = self.index(ii, 0, k);
        let n = self.grid.n_theta;
        &mut self.values[start..start + n]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.cells_per_slice();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.cells_per_slice();
        &mut self.values[k * n..(k + 1) * n]
    }

    /// All values, slice-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `dω dθ Σ_{i,j} ρ_{ijk}` for every slice.
    pub fn slice_masses(&self) -> Vec<f64> {
        let area = self.grid.cell_area();
        (0..self.n_slices)
            .map(|k| compensated_sum(self.slice(k)) * area)
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mass per slice in rows with `|ω| > cutoff`.
    pub fn tail_masses(&self, cutoff: f64) -> Vec<f64> {
        let area = self.grid.cell_area();
        (0..self.n_slices)
            .map(|k| {
                (0..self.grid.n_omega)
                    .filter(|&ii| self.grid.omega_at(ii).abs() > cutoff)
                    .map(|ii| self.row(k, ii).iter().sum::<f64>())
                    .sum::<f64>()
                    * area
            })
            .collect()
    }

    /// Scales every slice to unit mass.
    pub fn renormalize(&mut self) -> Result<()> {
        let masses = self.slice_masses();
        for (k, mass) in masses.into_iter().enumerate() {
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(KkfError::ZeroMassSlice { slice: k });
            }
            let inv = 1.0 / mass;
            self.slice_mut(k).iter_mut().for_each(|v| *v *= inv);
        }
        Ok(())
    }

    /// The field with every θ-column moved `shift` cells forward.
    pub fn rotated_theta(&self, shift: usize) -> DensityField {
        let n = self.grid.n_theta;
        let shift = shift % n;
        let mut out = DensityField::zeros(self.grid, self.n_slices);
        for k in 0..self.n_slices {
            for ii in 0..self.grid.n_omega {
                let src = self.row(k, ii);
                let dst = out.row_mut(k, ii);
                dst[shift..].copy_from_slice(&src[..n - shift]);
                dst[..shift].copy_from_slice(&src[n - shift..]);
            }
        }
        out
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// Neumaier summation, so slice masses are accurate to about one ulp.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Renormalized copy of `rho`.
pub fn renormalize(rho: &DensityField) -> Result<DensityField> {
    let mut out = rho.clone();
    out.renormalize()?;
    Ok(out)
}

/// Initial data, evaluated at the lattice nodes and normalized per slice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `e^{-ω²}(sin θ + 1)/(1 + ω²)`.
    #[default]
    Standard,
    /// `e^{-ω²}(sin(θ/2) + 1)/(1 + ω²)` on `[0, 2π)`.
    HalfSine,
    /// `e^{-ω²}(sin θ + 1)/(ω + 1)`, only for `G_ω < 1`.
    Unregularized,
    /// Bivariate normal, wrapped in θ.
    Gaussian {
        mean_omega: f64,
        mean_theta: f64,
        var_omega: f64,
        var_theta: f64,
        #[serde(default)]
        cov: f64,
    },
    /// Constant density.
    Uniform,
}

impl InitialSpec {
    pub fn gaussian2(&self) -> Option<Result<Gaussian2>> {
        match *self {
            InitialSpec::Gaussian {
                mean_omega,
                mean_theta,
                var_omega,
                var_theta,
                cov,
            } => Some(
                Gaussian2::new(
                    [mean_omega, mean_theta],
                    Matrix2::new(var_omega, cov, cov, var_theta),
                )
                .map_err(|e| KkfError::InvalidInitialData(e.to_string())),
            ),
            _ => None,
        }
    }

    /// Unnormalized density at `(ω, θ)`; `θ` in `[0, 2π)`.
    pub fn evaluator(&self, grid: &GridSpec) -> Result<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
        Ok(match self {
            InitialSpec::Standard => {
                Box::new(|w: f64, th: f64| (-w * w).exp() * (th.sin() + 1.0) / (1.0 + w * w))
            }
            InitialSpec::HalfSine => Box::new(|w: f64, th: f64| {
                (-w * w).exp() * ((0.5 * th).sin() + 1.0) / (1.0 + w * w)
            }),
            InitialSpec::Unregularized => {
                if grid.g_omega >= 1.0 {
                    return Err(KkfError::InvalidInitialData(format!(
                        "the (omega + 1) denominator is singular at omega = -1; needs G_omega < 1, got {}",
                        grid.g_omega
                    )));
                }
                Box::new(|w: f64, th: f64| (-w * w).exp() * (th.sin() + 1.0) / (w + 1.0))
            }
            InitialSpec::Gaussian { .. } => {
                let g = self.gaussian2().unwrap()?;
                Box::new(move |w: f64, th: f64| g.density_periodic(w, th))
            }
            InitialSpec::Uniform => Box::new(|_: f64, _: f64| 1.0),
        })
    }
}

/// Samples `spec` on the lattice, one copy per Ω-slice.
pub fn init_density(
    spec: &InitialSpec,
    grid: &GridSpec,
    g: &FrequencyDistribution,
) -> Result<DensityField> {
    let f = spec.evaluator(grid)?;
    init_density_with(grid, g, |w, th, _| f(w, th))
}

/// Samples `f(ω, θ, Ω)` at the interior nodes, clips negatives to zero and
/// normalizes every slice. Boundary rows stay zero.
pub fn init_density_with(
    grid: &GridSpec,
    g: &FrequencyDistribution,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<DensityField> {
    let mut field = DensityField::zeros(*grid, g.len());
    for (k, &big_omega) in g.nodes().iter().enumerate() {
        for ii in 1..grid.n_omega - 1 {
            let w = grid.omega_at(ii);
            for (j, v) in field.row_mut(k, ii).iter_mut().enumerate() {
                let x = f(w, grid.theta_at(j), big_omega);
                if x.is_nan() {
                    return Err(KkfError::InvalidInitialData(format!(
                        "initial density is NaN at omega = {w}, theta = {}",
                        grid.theta_at(j)
                    )));
                }
                *v = x.max(0.0);
            }
        }
        let total: f64 = field.slice(k).iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(KkfError::InvalidInitialData(format!(
                "initial density has no finite positive mass on slice {k}"
            )));
        }
    }
    field.renormalize()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_grid, GridRequest, ModelParams};
    use std::f64::consts::PI;

    fn grid(g_omega: f64) -> GridSpec {
        let params = ModelParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let req = GridRequest {
            d_omega: 0.2,
            target_d_t: PI / 10.0,
            g_omega,
            t_final: 1.0,
            d_big_omega: None,
        };
        build_grid(&params, &req, true).unwrap()
    }

    fn point() -> FrequencyDistribution {
        FrequencyDistribution::point_mass(0.0)
    }

    #[test]
    fn standard_is_normalized_and_nonnegative() {
        let gr = grid(4.0);
        let f = init_density(&InitialSpec::Standard, &gr, &point()).unwrap();
        assert!(f.min() >= 0.0);
        assert!((f.slice_masses()[0] - 1.0).abs() < 1e-12);
        assert!(f.row(0, 0).iter().all(|&v| v == 0.0));
        assert!(f.row(0, gr.n_omega - 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standard_vanishes_where_sine_is_minus_one() {
        // 100 θ-cells, so 3π/2 is node 75
        let gr = grid(4.0);
        assert_eq!(gr.n_theta, 100);
        let f = init_density(&InitialSpec::Standard, &gr, &point()).unwrap();
        for ii in 0..gr.n_omega {
            assert!(f.get(ii, 75, 0) < 1e-15);
        }
    }

    #[test]
    fn constant_data_fills_the_interior_evenly() {
        let gr = grid(2.0);
        let f = init_density(&InitialSpec::Uniform, &gr, &point()).unwrap();
        let expected = 1.0 / (2.0 * PI * (2.0 * gr.g_omega - gr.d_omega));
        assert!((f.get(5, 17, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn literal_data_needs_small_domain() {
        assert!(matches!(
            init_density(&InitialSpec::Unregularized, &grid(2.0), &point()),
            Err(KkfError::InvalidInitialData(_))
        ));
        let f = init_density(&InitialSpec::Unregularized, &grid(0.8), &point()).unwrap();
        assert!(f.min() >= 0.0);
    }

    #[test]
    fn rejects_nan_and_empty_data() {
        let gr = grid(2.0);
        assert!(init_density_with(&gr, &point(), |_, _, _| f64::NAN).is_err());
        assert!(init_density_with(&gr, &point(), |_, _, _| 0.0).is_err());
        assert!(init_density_with(&gr, &point(), |_, _, _| -1.0).is_err());
    }

    #[test]
    fn renormalize_cases() {
        let gr = grid(2.0);
        let f = init_density(&InitialSpec::HalfSine, &gr, &point()).unwrap();
        let again = renormalize(&f).unwrap();
        for (a, b) in f.values().iter().zip(again.values()) {
            assert!((a - b).abs() <= f64::EPSILON * a.abs());
        }
        let mut tripled = f.clone();
        tripled.values_mut().iter_mut().for_each(|v| *v *= 3.0);
        let back = renormalize(&tripled).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs());
        }
        assert!(matches!(
            renormalize(&DensityField::zeros(gr, 1)),
            Err(KkfError::ZeroMassSlice { slice: 0 })
        ));
    }

    #[test]
    fn ijk_round_trip() {
        let gr = grid(0.4);
        let mut f = DensityField::zeros(gr, 2);
        for (n, v) in f.values_mut().iter_mut().enumerate() {
            *v = n as f64;
        }
        let back = DensityField::from_ijk(gr, 2, &f.to_ijk()).unwrap();
        assert_eq!(back, f);
        assert_eq!(f.to_ijk()[1], f.get(0, 0, 1));
    }

    #[test]
    fn rotation_moves_columns() {
        let gr = grid(0.4);
        let mut f = DensityField::zeros(gr, 1);
        f.set(1, gr.n_theta - 1, 0, 1.0);
        let r = f.rotated_theta(2);
        assert_eq!(r.get(1, 1, 0), 1.0);
    }
}
