//! Finite-N inertial Kuramoto oscillators, integrated by Euler–Maruyama:
//!
//! `ω ← ω + (dt/m)(-ω + Ω_k + K r sin(ψ - θ)) + (√(2D)/m) √dt ξ`,
//! `θ ← θ + ω dt (mod 2π)`.
//!
//! Noise is counter based: the normal for oscillator `k` at step `n` comes
//! from a `ChaCha8Rng` seeded with the ensemble seed, stream `n`, word
//! position `4k` (two `u64` draws through Box–Muller). Runs are therefore
//! identical whatever the thread count.

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{FrequencyDistribution, ModelParams};
use crate::error::{KkfError, Result};
use crate::meanfield::OrderParameter;

/// Stream used for the initial sampling, disjoint from the step streams.
const SAMPLING_STREAM: u64 = u64::MAX;
const ENVELOPE_GRID: usize = 201;
const ENVELOPE_MARGIN: f64 = 1.2;
const MIN_ACCEPTANCE: f64 = 1e-4;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorEnsemble {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub natural: Vec<f64>,
    seed: u64,
    step: u64,
}

impl OscillatorEnsemble {
    pub fn new(theta: Vec<f64>, omega: Vec<f64>, natural: Vec<f64>, seed: u64) -> Result<Self> {
        if theta.is_empty() || theta.len() != omega.len() || theta.len() != natural.len() {
            return Err(KkfError::DimensionMismatch(format!(
                "ensemble arrays have lengths {}, {}, {}",
                theta.len(),
                omega.len(),
                natural.len()
            )));
        }
        let theta = theta.into_iter().map(|t| t.rem_euclid(TAU)).collect();
        Ok(OscillatorEnsemble {
            theta,
            omega,
            natural,
            seed,
            step: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }
}

fn unit_open(x: u64) -> f64 {
    // (0, 1]
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Draws `n` oscillators: `(ω, θ)` by rejection from `rho0` on
/// `[-omega_bound, omega_bound] × [0, 2π)`, `Ω` by inverse CDF of `g`.
pub fn sample_ensemble(
    rho0: impl Fn(f64, f64) -> f64,
    omega_bound: f64,
    g: &FrequencyDistribution,
    n: usize,
    seed: u64,
) -> Result<OscillatorEnsemble> {
    if n == 0 {
        return Err(KkfError::InvalidParameter(
            "ensemble needs at least one oscillator".into(),
        ));
    }
    if !(omega_bound.is_finite() && omega_bound > 0.0) {
        return Err(KkfError::InvalidParameter(format!(
            "omega bound must be positive, got {omega_bound}"
        )));
    }
    let mut peak: f64 = 0.0;
    for a in 0..ENVELOPE_GRID {
        let w = -omega_bound + 2.0 * omega_bound * a as f64 / (ENVELOPE_GRID - 1) as f64;
        for b in 0..ENVELOPE_GRID {
            let th = TAU * b as f64 / (ENVELOPE_GRID - 1) as f64;
            let v = rho0(w, th);
            if v.is_nan() || v < 0.0 {
                return Err(KkfError::InvalidInitialData(format!(
                    "density is {v} at ({w}, {th})"
                )));
            }
            peak = peak.max(v);
        }
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(KkfError::DegenerateSampler { rate: 0.0 });
    }
    let envelope = ENVELOPE_MARGIN * peak;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLING_STREAM);
    let mut theta = Vec::with_capacity(n);
    let mut omega = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while theta.len() < n {
        attempts += 1;
        let w = rng.random_range(-omega_bound..omega_bound);
        let th = rng.random_range(0.0..TAU);
        if rng.random::<f64>() * envelope < rho0(w, th) {
            omega.push(w);
            theta.push(th);
        }
        if attempts >= 100_000 && (theta.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(KkfError::DegenerateSampler {
                rate: theta.len() as f64 / attempts as f64,
            });
        }
    }

    let weights = g.weights();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let natural = (0..n)
        .map(|_| {
            if g.is_point_mass() {
                return g.nodes()[0];
            }
            let u: f64 = rng.random();
            let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            g.nodes()[k]
        })
        .collect();
    OscillatorEnsemble::new(theta, omega, natural, seed)
}

/// `r_N e^{iψ_N} = (1/N) Σ e^{iθ_j}`.
pub fn ensemble_order_parameter(ens: &OscillatorEnsemble) -> OrderParameter {
    phasor_mean(&ens.theta)
}

/// `(1/N) Σ e^{iω_j}`.
pub fn ensemble_frequency_order(ens: &OscillatorEnsemble) -> OrderParameter {
    phasor_mean(&ens.omega)
}

fn phasor_mean(angles: &[f64]) -> OrderParameter {
    let (mut re, mut im) = (0.0, 0.0);
    for &a in angles {
        let (s, c) = a.sin_cos();
        re += c;
        im += s;
    }
    let n = angles.len().max(1) as f64;
    OrderParameter::new(re / n, im / n)
}

/// One Euler–Maruyama step for the whole ensemble.
pub fn langevin_step(
    ens: &mut OscillatorEnsemble,
    params: &ModelParams,
    dt: f64,
    parallel: bool,
) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KkfError::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let r = ensemble_order_parameter(ens);
    let m = params.inertia;
    let k_cpl = params.coupling;
    let noise = (2.0 * params.noise).sqrt() / m * dt.sqrt();
    let (seed, stream) = (ens.seed, ens.step);

    let update = |(c, ((th, om), nat)): (usize, ((&mut [f64], &mut [f64]), &[f64]))| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(4 * (c * CHUNK) as u128);
        for ((t, w), &big) in th.iter_mut().zip(om.iter_mut()).zip(nat) {
            let xi = box_muller(&mut rng);
            let force = -*w + big + k_cpl * (r.im * t.cos() - r.re * t.sin());
            let w_old = *w;
            *w += dt / m * force + noise * xi;
            *t = (*t + w_old * dt).rem_euclid(TAU);
        }
    };
    if parallel {
        ens.theta
            .par_chunks_mut(CHUNK)
            .zip(ens.omega.par_chunks_mut(CHUNK))
            .zip(ens.natural.par_chunks(CHUNK))
            .enumerate()
            .for_each(update);
    } else {
        ens.theta
            .chunks_mut(CHUNK)
            .zip(ens.omega.chunks_mut(CHUNK))
            .zip(ens.natural.chunks(CHUNK))
            .enumerate()
            .for_each(update);
    }
    ens.step += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinRecord {
    pub step: u64,
    pub t: f64,
    pub abs_r: f64,
    pub phase_r: f64,
    pub abs_s: f64,
}

fn record(ens: &OscillatorEnsemble, dt: f64) -> LangevinRecord {
    let r = ensemble_order_parameter(ens);
    LangevinRecord {
        step: ens.step,
        t: ens.step as f64 * dt,
        abs_r: r.modulus(),
        phase_r: r.phase(),
        abs_s: ensemble_frequency_order(ens).modulus(),
    }
}

/// Runs `n_steps` steps and records the initial state and every step.
pub fn run_langevin(
    ens: &mut OscillatorEnsemble,
    params: &ModelParams,
    dt: f64,
    n_steps: usize,
    parallel: bool,
) -> Result<Vec<LangevinRecord>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(record(ens, dt));
    for _ in 0..n_steps {
        langevin_step(ens, params, dt, parallel)?;
        out.push(record(ens, dt));
    }
    Ok(out)
}
