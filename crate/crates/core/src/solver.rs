//! The explicit scheme and its time loop.
//!
//! One step maps row `i` of the new field from rows `i-1, i, i+1` of the old
//! one, all read at the θ-index `s = (j - i) mod n_θ` (the shift by `ω_i dt`
//! lands on a node because `dθ = dω dt`):
//!
//! `ρ'_{i,j} = A₀ ρ_{i,s} + A₋ ρ_{i-1,s} + A₊ ρ_{i+1,s}`
//!
//! with `c = D dt/(m² dω²)`, `h = dt/(2 dω m)`, `A₀ = 1 - 2c + dt/m` and
//! `A∓ = c ∓ h (i dω + Φ̃_s)`. Because `Φ̃` is read at the source index, the
//! weights leaving one source cell sum to one and interior mass is conserved
//! up to what flows into the two boundary rows.

use rayon::prelude::*;

use crate::config::{FrequencyDistribution, GridSpec, ModelParams};
use crate::error::{KkfError, Result};
use crate::field::DensityField;
use crate::meanfield::{order_parameters_unchecked, OrderParameter, PhiTable};

/// Scheme coefficients that do not depend on the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub c: f64,
    pub h: f64,
    pub a0: f64,
}

impl Coefficients {
    pub fn new(params: &ModelParams, grid: &GridSpec) -> Self {
        let m = params.inertia;
        let c = params.noise * grid.d_t / (m * m * grid.d_omega * grid.d_omega);
        let h = grid.d_t / (2.0 * grid.d_omega * m);
        Coefficients {
            c,
            h,
            a0: 1.0 - 2.0 * c + grid.d_t / m,
        }
    }

    /// `(A₋, A₀, A₊)` for drift argument `v = i dω + Φ̃`.
    #[inline]
    pub fn weights(&self, v: f64) -> (f64, f64, f64) {
        (self.c - self.h * v, self.a0, self.c + self.h * v)
    }
}

/// Diagnostics of one step, taken before renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub pre_norm_mass: Vec<f64>,
    pub min_rho: f64,
    pub max_rho: f64,
    /// Mass that flowed into the boundary rows, per slice.
    pub boundary_leak: Vec<f64>,
    /// Mass in `|ω| > G_ω/2`, per slice.
    pub tail_mass: Vec<f64>,
}

fn step_row(
    out: &mut [f64],
    below: &[f64],
    mid: &[f64],
    above: &[f64],
    phi: &[f64],
    coef: Coefficients,
    omega_i: f64,
    shift: usize,
) {
    let n = out.len();
    let body = |o: &mut f64, s: usize| {
        let (am, a0, ap) = coef.weights(omega_i + phi[s]);
        *o = a0 * mid[s] + am * below[s] + ap * above[s];
    };
    // j >= shift reads s = j - shift, j < shift wraps to s = j + n - shift
    for (o, s) in out[shift..].iter_mut().zip(0..n - shift) {
        body(o, s);
    }
    for (o, s) in out[..shift].iter_mut().zip(n - shift..n) {
        body(o, s);
    }
}

/// Writes one step of the scheme into `out`; `out` must have the same shape.
pub fn la_step_into(
    rho: &DensityField,
    phi: &PhiTable,
    params: &ModelParams,
    out: &mut DensityField,
    parallel: bool,
) -> Result<()> {
    let grid = *rho.grid();
    if out.grid() != rho.grid() || out.n_slices() != rho.n_slices() {
        return Err(KkfError::DimensionMismatch(
            "output field has a different shape".into(),
        ));
    }
    if phi.n_theta() != grid.n_theta || phi.n_slices() != rho.n_slices() {
        return Err(KkfError::DimensionMismatch(format!(
            "drift table is {}×{}, field is {}×{}",
            phi.n_theta(),
            phi.n_slices(),
            grid.n_theta,
            rho.n_slices()
        )));
    }
    let coef = Coefficients::new(params, &grid);
    let n_theta = grid.n_theta;
    let n_omega = grid.n_omega;
    let last = n_omega - 1;

    for k in 0..rho.n_slices() {
        let src = rho.slice(k);
        let dst = out.slice_mut(k);
        let phi_k = phi.slice(k);
        let row = |ii: usize| &src[ii * n_theta..(ii + 1) * n_theta];
        let update = |(ii, o): (usize, &mut [f64])| {
            if ii == 0 || ii == last {
                o.iter_mut().for_each(|v| *v = 0.0);
                return;
            }
            let i = grid.signed_row(ii);
            let shift = i.rem_euclid(n_theta as isize) as usize;
            step_row(
                o,
                row(ii - 1),
                row(ii),
                row(ii + 1),
                phi_k,
                coef,
                grid.omega_at(ii),
                shift,
            );
        };
        if parallel {
            dst.par_chunks_mut(n_theta).enumerate().for_each(update);
        } else {
            dst.chunks_mut(n_theta).enumerate().for_each(update);
        }
    }
    Ok(())
}

/// Mass per slice that one step sends into the two boundary rows.
pub fn boundary_leak(rho: &DensityField, phi: &PhiTable, params: &ModelParams) -> Vec<f64> {
    let grid = rho.grid();
    let coef = Coefficients::new(params, grid);
    let top = grid.n_omega - 1;
    let w_top = grid.omega_at(top);
    let w_bottom = grid.omega_at(0);
    (0..rho.n_slices())
        .map(|k| {
            let phi_k = phi.slice(k);
            let below_top = rho.row(k, top - 1);
            let above_bottom = rho.row(k, 1);
            let mut leak = 0.0;
            for s in 0..grid.n_theta {
                leak += coef.weights(w_top + phi_k[s]).0 * below_top[s];
                leak += coef.weights(w_bottom + phi_k[s]).2 * above_bottom[s];
            }
            leak * grid.cell_area()
        })
        .collect()
}

/// One step of the scheme with its report. `step` is the index of the new
/// time level.
pub fn la_step(
    rho: &DensityField,
    phi: &PhiTable,
    params: &ModelParams,
    step: usize,
) -> Result<(DensityField, StepReport)> {
    let mut out = DensityField::zeros(*rho.grid(), rho.n_slices());
    la_step_into(rho, phi, params, &mut out, false)?;
    let report = make_report(rho, &out, phi, params, step)?;
    Ok((out, report))
}

fn make_report(
    old: &DensityField,
    new: &DensityField,
    phi: &PhiTable,
    params: &ModelParams,
    step: usize,
) -> Result<StepReport> {
    if new.first_non_finite().is_some() {
        return Err(KkfError::NonFinite {
            step,
            last_good: step.saturating_sub(1),
        });
    }
    Ok(StepReport {
        step,
        pre_norm_mass: new.slice_masses(),
        min_rho: new.min(),
        max_rho: new.max(),
        boundary_leak: boundary_leak(old, phi, params),
        tail_mass: new.tail_masses(0.5 * new.grid().g_omega),
    })
}

/// One line of the diagnostic time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub step: usize,
    pub t: f64,
    pub abs_r: f64,
    pub phase_r: f64,
    pub abs_s: f64,
    pub mass_min: f64,
    pub mass_max: f64,
    pub min_rho: f64,
    pub tail_mass: f64,
    pub boundary_leak: f64,
}

/// Solver state: the current field and the buffers reused between steps.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    dist: FrequencyDistribution,
    field: DensityField,
    scratch: DensityField,
    phi: PhiTable,
    step: usize,
    parallel: bool,
}

impl Simulation {
    pub fn new(
        params: ModelParams,
        dist: FrequencyDistribution,
        field: DensityField,
    ) -> Result<Self> {
        params.validate()?;
        if dist.len() != field.n_slices() {
            return Err(KkfError::DimensionMismatch(format!(
                "field has {} slices, distribution has {} nodes",
                field.n_slices(),
                dist.len()
            )));
        }
        let grid = *field.grid();
        Ok(Simulation {
            params,
            scratch: DensityField::zeros(grid, field.n_slices()),
            phi: PhiTable::zeros(grid.n_theta, field.n_slices()),
            dist,
            field,
            step: 0,
            parallel: false,
        })
    }

    /// Lets the row updates run on the rayon pool. Results are identical.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn distribution(&self) -> &FrequencyDistribution {
        &self.dist
    }

    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn field(&self) -> &DensityField {
        &self.field
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.grid().d_t
    }

    pub fn order_parameters(&self) -> (OrderParameter, OrderParameter) {
        order_parameters_unchecked(&self.field, &self.dist)
    }

    /// Advances one step: drift table, scheme, renormalization.
    pub fn advance(&mut self) -> Result<StepReport> {
        let (r, _) = self.order_parameters();
        let grid = *self.grid();
        self.phi.fill(r, &self.dist, &grid, self.params.coupling);
        la_step_into(
            &self.field,
            &self.phi,
            &self.params,
            &mut self.scratch,
            self.parallel,
        )?;
        let report = make_report(
            &self.field,
            &self.scratch,
            &self.phi,
            &self.params,
            self.step + 1,
        )?;
        self.scratch.renormalize()?;
        std::mem::swap(&mut self.field, &mut self.scratch);
        self.step += 1;
        Ok(report)
    }

    /// Diagnostics of the current state, with masses and leak from `report`.
    pub fn record(&self, report: Option<&StepReport>) -> SeriesRecord {
        let (r, s) = self.order_parameters();
        let weights = self.dist.weights();
        let weighted = |v: &[f64]| v.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
        let (mass_min, mass_max, min_rho, tail, leak) = match report {
            Some(rep) => (
                rep.pre_norm_mass
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min),
                rep.pre_norm_mass
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
                rep.min_rho,
                weighted(&rep.tail_mass),
                weighted(&rep.boundary_leak),
            ),
            None => {
                let masses = self.field.slice_masses();
                (
                    masses.iter().copied().fold(f64::INFINITY, f64::min),
                    masses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    self.field.min(),
                    weighted(&self.field.tail_masses(0.5 * self.grid().g_omega)),
                    0.0,
                )
            }
        };
        SeriesRecord {
            step: self.step,
            t: self.time(),
            abs_r: r.modulus(),
            phase_r: r.phase(),
            abs_s: s.modulus(),
            mass_min,
            mass_max,
            min_rho,
            tail_mass: tail,
            boundary_leak: leak,
        }
    }
}

/// Runs `n_steps` steps, recording the initial state and every step.
/// `on_snapshot` sees the field at step 0 and every `snapshot_every` steps.
pub fn run_simulation(
    sim: &mut Simulation,
    n_steps: usize,
    snapshot_every: Option<usize>,
    mut on_snapshot: impl FnMut(usize, &DensityField) -> Result<()>,
) -> Result<Vec<SeriesRecord>> {
    let mut records = Vec::with_capacity(n_steps + 1);
    records.push(sim.record(None));
    let cadence = snapshot_every.filter(|&c| c > 0);
    if cadence.is_some() {
        on_snapshot(sim.step_index(), sim.field())?;
    }
    for _ in 0..n_steps {
        let report = sim.advance()?;
        records.push(sim.record(Some(&report)));
        if let Some(c) = cadence {
            if sim.step_index() % c == 0 {
                on_snapshot(sim.step_index(), sim.field())?;
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_grid, GridRequest};
    use crate::field::{init_density, init_density_with, InitialSpec};
    use crate::kernel::{LinearOracle, Matrix2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup(coupling: f64, d_omega: f64, target_dt: f64, g_omega: f64) -> (ModelParams, GridSpec) {
        let params = ModelParams::new(1.0, 1.0, coupling, 0.0).unwrap();
        let req = GridRequest {
            d_omega,
            target_d_t: target_dt,
            g_omega,
            t_final: 1.0,
            d_big_omega: None,
        };
        (params, build_grid(&params, &req, false).unwrap())
    }

    fn point() -> FrequencyDistribution {
        FrequencyDistribution::point_mass(0.0)
    }

    fn random_field(grid: &GridSpec, seed: u64) -> DensityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = DensityField::zeros(*grid, 1);
        for ii in 1..grid.n_omega - 1 {
            for v in f.row_mut(0, ii) {
                *v = rng.random::<f64>();
            }
        }
        f.renormalize().unwrap();
        f
    }

    #[test]
    fn coefficient_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = rng.random_range(0.3..3.0);
            let d = rng.random_range(0.2..3.0);
            let params = ModelParams::new(m, d, 0.0, 0.0).unwrap();
            let dw = rng.random_range(0.05..0.3);
            let grid = GridSpec {
                d_omega: dw,
                d_t: rng.random_range(0.001..0.02),
                d_theta: 0.0,
                d_big_omega: None,
                g_omega: 1.0,
                t_final: 1.0,
                omega1: 0.0,
                omega_index_max: 1,
                n_omega: 3,
                n_theta: 1,
                n_t: 1,
                n_big_omega: 1,
            };
            let coef = Coefficients::new(&params, &grid);
            let v = rng.random_range(-5.0..5.0);
            let phi = rng.random_range(-2.0..2.0);
            let (am, a0, ap) = coef.weights(v);
            assert!((am + a0 + ap - 1.0 - grid.d_t / m).abs() < 1e-13);
            // weights leaving one source cell at row i
            let i = 3.0;
            let sum =
                coef.weights((i + 1.0) * dw + phi).0 + a0 + coef.weights((i - 1.0) * dw + phi).2;
            assert!((sum - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn impulse_spreads_to_three_cells() {
        let (params, grid) = setup(0.0, 0.2, 0.0194, 4.0);
        let (ii0, j0) = (grid.omega_index_max + 3, 10);
        let mut f = DensityField::zeros(grid, 1);
        f.set(ii0, j0, 0, 1.0);
        let phi = PhiTable::zeros(grid.n_theta, 1);
        let (out, _) = la_step(&f, &phi, &params, 1).unwrap();
        let coef = Coefficients::new(&params, &grid);
        let nz: Vec<(usize, usize, f64)> = (0..grid.n_omega)
            .flat_map(|ii| (0..grid.n_theta).map(move |j| (ii, j)))
            .filter_map(|(ii, j)| {
                let v = out.get(ii, j, 0);
                (v != 0.0).then_some((ii, j, v))
            })
            .collect();
        assert_eq!(nz.len(), 3);
        for (ii, j, v) in nz {
            let i = grid.signed_row(ii);
            assert_eq!(j as isize, j0 as isize + i);
            let expected = match ii as isize - ii0 as isize {
                1 => coef.weights(grid.omega_at(ii)).0,
                0 => coef.a0,
                -1 => coef.weights(grid.omega_at(ii)).2,
                _ => unreachable!(),
            };
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn conserves_interior_mass_up_to_leak() {
        let (params, grid) = setup(2.0, 0.2, 0.0194, 4.0);
        let f = init_density(&InitialSpec::Standard, &grid, &point()).unwrap();
        let mut sim = Simulation::new(params, point(), f).unwrap();
        for _ in 0..20 {
            let rep = sim.advance().unwrap();
            assert!((rep.pre_norm_mass[0] + rep.boundary_leak[0] - 1.0).abs() < 1e-13);
            assert!(rep.boundary_leak[0] >= 0.0);
        }
    }

    #[test]
    fn one_step_local_error_shrinks_with_the_grid() {
        let params = ModelParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let oracle = LinearOracle::new(&params, 0.0).unwrap();
        let g0 = crate::kernel::Gaussian2::new([0.3, PI], Matrix2::diag(0.3, 0.4)).unwrap();
        let mut errors = Vec::new();
        for &(n, dt) in &[(10usize, 0.02), (14, 0.01)] {
            let req = GridRequest {
                d_omega: 3.0 / n as f64,
                target_d_t: dt,
                g_omega: 3.0,
                t_final: 1.0,
                d_big_omega: None,
            };
            let grid = build_grid(&params, &req, false).unwrap();
            let f =
                init_density_with(&grid, &point(), |w, th, _| g0.density_periodic(w, th)).unwrap();
            let (out, _) = la_step(&f, &PhiTable::zeros(grid.n_theta, 1), &params, 1).unwrap();
            let exact = oracle.transport(&g0, grid.d_t);
            let mut l1 = 0.0;
            for ii in 1..grid.n_omega - 1 {
                for j in 0..grid.n_theta {
                    l1 += (out.get(ii, j, 0)
                        - exact.density_periodic(grid.omega_at(ii), grid.theta_at(j)))
                    .abs();
                }
            }
            errors.push(l1 * grid.cell_area());
        }
        // local error O(dt² + dt dω²) with dω² ∝ dt: halving dt should cut it by ~4
        assert!(errors[1] < errors[0] / 2.5, "{errors:?}");
    }

    #[test]
    fn incoherent_state_stays_incoherent() {
        let (params, grid) = setup(0.0, 0.2, 0.0194, 4.0);
        let f = init_density_with(&grid, &point(), |w, _, _| (-w * w).exp()).unwrap();
        let mut sim = Simulation::new(params, point(), f).unwrap();
        let recs = run_simulation(&mut sim, 30, None, |_, _| Ok(())).unwrap();
        assert!(recs.iter().all(|r| r.abs_r < 1e-12));
    }

    #[test]
    fn parallel_rows_match_serial_bitwise() {
        let (params, grid) = setup(4.0, 0.2, 0.0194, 4.0);
        let f = init_density(&InitialSpec::Standard, &grid, &point()).unwrap();
        let mut a = Simulation::new(params, point(), f.clone()).unwrap();
        let mut b = Simulation::new(params, point(), f)
            .unwrap()
            .with_parallel(true);
        for _ in 0..5 {
            a.advance().unwrap();
            b.advance().unwrap();
        }
        assert_eq!(a.field().values(), b.field().values());
    }

    #[test]
    fn snapshots_follow_cadence() {
        let (params, grid) = setup(1.0, 0.2, 0.0194, 4.0);
        let f = init_density(&InitialSpec::Standard, &grid, &point()).unwrap();
        let mut sim = Simulation::new(params, point(), f).unwrap();
        let mut seen = Vec::new();
        let recs = run_simulation(&mut sim, 7, Some(3), |n, _| {
            seen.push(n);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![0, 3, 6]);
        assert_eq!(recs.len(), 8);
        assert_eq!(recs[7].step, 7);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (params, grid) = setup(0.0, 0.2, 0.0194, 4.0);
        let f = DensityField::zeros(grid, 1);
        assert!(la_step(&f, &PhiTable::zeros(grid.n_theta, 2), &params, 1).is_err());
        assert!(Simulation::new(params, point(), DensityField::zeros(grid, 2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stays_nonnegative(seed in any::<u64>(), coupling in prop::sample::select(vec![0.0, 2.0, 6.0])) {
            let (params, grid) = setup(coupling, 0.2, 0.0194, 4.0);
            let mut sim = Simulation::new(params, point(), random_field(&grid, seed)).unwrap();
            for _ in 0..10 {
                let rep = sim.advance().unwrap();
                prop_assert!(rep.min_rho >= -1e-12 * rep.max_rho);
            }
        }

        #[test]
        fn commutes_with_theta_rotation(seed in any::<u64>()) {
            let (params, grid) = setup(3.0, 0.2, 0.0194, 4.0);
            let f = random_field(&grid, seed);
            let mut a = Simulation::new(params, point(), f.clone()).unwrap();
            let mut b = Simulation::new(params, point(), f.rotated_theta(1)).unwrap();
            for _ in 0..3 {
                a.advance().unwrap();
                b.advance().unwrap();
            }
            let ra = a.field().rotated_theta(1);
            for (x, y) in ra.values().iter().zip(b.field().values()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
