//! Run configuration, presets, CSV series and binary snapshots.
//!
//! Snapshot layout (all little-endian): magic `KKF1`; `n_omega`, `n_theta`,
//! `n_Omega` as `u64`; `dω`, `dt`, `dΩ` (0 when degenerate), `G_ω`, `t` as
//! `f64`; then the values as `f64` in `i, j, k` order with `k` fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{
    build_frequency_distribution, build_grid, DistributionSpec, FrequencyDistribution, GridRequest,
    GridSpec, ModelParams, StabilityReport,
};
use crate::error::{KkfError, Result};
use crate::field::{init_density, DensityField, InitialSpec};
use crate::langevin::{run_langevin, sample_ensemble, LangevinRecord};
use crate::solver::{run_simulation, SeriesRecord, Simulation};

pub const SERIES_HEADER: [&str; 10] = [
    "step",
    "t",
    "abs_r",
    "phase_r",
    "abs_s",
    "mass_min",
    "mass_max",
    "min_rho",
    "tail_mass",
    "boundary_leak",
];

pub const LANGEVIN_HEADER: [&str; 5] = ["step", "t", "abs_r", "phase_r", "abs_s"];

const MAGIC: &[u8; 4] = b"KKF1";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub series: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub snapshot_prefix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinSpec {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Time step; defaults to the grid's `dt`.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Run the row updates on one thread.
    #[serde(default = "default_true")]
    pub deterministic: bool,
    /// Skip the positivity gate.
    #[serde(default)]
    pub unsafe_grid: bool,
    #[serde(default)]
    pub langevin: Option<LangevinSpec>,
}

fn default_true() -> bool {
    true
}

impl Default for ModeSpec {
    fn default() -> Self {
        ModeSpec {
            deterministic: true,
            unsafe_grid: false,
            langevin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridRequest,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub mode: ModeSpec,
}

/// Everything a run needs, checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub distribution: FrequencyDistribution,
}

impl RunConfig {
    /// Validates the model, builds the lattice (through the positivity gate
    /// unless `unsafe_grid`) and tabulates `g`.
    pub fn prepare(&self) -> Result<Prepared> {
        self.model.validate()?;
        let grid = build_grid(&self.model, &self.grid, self.mode.unsafe_grid)?;
        let distribution = build_frequency_distribution(&self.distribution, &grid)?;
        let _ = self.initial.evaluator(&grid)?;
        if let Some(l) = &self.mode.langevin {
            if l.n == 0 {
                return Err(KkfError::Config("langevin.n must be at least 1".into()));
            }
            if let Some(dt) = l.dt {
                if !(dt.is_finite() && dt > 0.0) {
                    return Err(KkfError::Config(format!(
                        "langevin.dt must be positive, got {dt}"
                    )));
                }
            }
        }
        Ok(Prepared {
            params: self.model,
            grid,
            distribution,
        })
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        self.model.validate()?;
        let grid = build_grid(&self.model, &self.grid, true)?;
        crate::config::validate_stability(&self.model, &grid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Unknown keys are errors.
    Strict,
    /// Unknown keys are returned as warnings.
    Lenient,
}

/// Parses a JSON document. Returns the config and the unknown keys that were
/// skipped in lenient mode. Does not build the grid; see [`RunConfig::prepare`].
pub fn parse_config_unchecked(
    text: &str,
    strictness: Strictness,
) -> Result<(RunConfig, Vec<String>)> {
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| KkfError::Config(e.to_string()))?;
    if strictness == Strictness::Strict && !unknown.is_empty() {
        return Err(KkfError::Config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }
    Ok((cfg, unknown))
}

/// Parses and validates a JSON document.
pub fn parse_config(text: &str, strictness: Strictness) -> Result<(RunConfig, Vec<String>)> {
    let (cfg, unknown) = parse_config_unchecked(text, strictness)?;
    cfg.prepare()?;
    Ok((cfg, unknown))
}

pub fn load_config(path: &Path, strictness: Strictness) -> Result<(RunConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| KkfError::io(path, e))?;
    parse_config(&text, strictness)
}

/// Sets `path` (dot separated, e.g. `model.K`) in a serialized config.
/// `value` is read as JSON, falling back to a plain string.
pub fn apply_override(cfg: &RunConfig, path: &str, value: &str) -> Result<RunConfig> {
    let mut doc = serde_json::to_value(cfg).expect("config serializes");
    let parsed = serde_json::from_str(value)
        .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut node = &mut doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (n, key) in keys.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            KkfError::Config(format!("`{path}`: `{key}` is not inside an object"))
        })?;
        if n + 1 == keys.len() {
            obj.insert((*key).to_string(), parsed);
            break;
        }
        node = obj
            .entry((*key).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let text = doc.to_string();
    Ok(parse_config_unchecked(&text, Strictness::Strict)?.0)
}

/// Lattice used by the presets:
/// `G_ω = 4`, the largest `dω = G_ω/n <= 0.2` that passes the `dω` and `G_ω`
/// conditions, and the nominal step capped at 95% of the admissible step.
pub fn reconstruct_grid(
    params: &ModelParams,
    nominal_dt: f64,
    t_final: f64,
) -> Result<GridRequest> {
    const G: f64 = 4.0;
    const MAX_D_OMEGA: f64 = 0.2;
    let first = (G / MAX_D_OMEGA).round() as usize;
    for n in first..first * 100 {
        let d_omega = G / n as f64;
        let report = StabilityReport::evaluate(params, d_omega, f64::MIN_POSITIVE, G)?;
        if !(report.d_omega_ok && report.g_omega_ok) {
            continue;
        }
        let target_d_t = match report.d_t_max {
            Some(max) => nominal_dt.min(0.95 * max),
            None => nominal_dt,
        };
        return Ok(GridRequest {
            d_omega,
            target_d_t,
            g_omega: G,
            t_final,
            d_big_omega: None,
        });
    }
    Err(KkfError::Config(format!(
        "no admissible lattice with G_omega = {G} for {params:?}"
    )))
}

pub const PRESETS: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig78"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sweep {
    Coupling,
    Inertia,
    Noise,
    Initial,
}

struct PresetDef {
    m: f64,
    d: f64,
    k: f64,
    dt: f64,
    sweep: Sweep,
    values: &'static [f64],
}

fn preset_def(name: &str) -> Option<PresetDef> {
    let t = |m, d, k, dt, sweep, values| PresetDef {
        m,
        d,
        k,
        dt,
        sweep,
        values,
    };
    Some(match name {
        "fig1" | "fig2" => t(
            1.0,
            1.0,
            0.0,
            0.0317,
            Sweep::Coupling,
            &[1.0, 2.0, 4.0, 6.0],
        ),
        "fig3" | "fig4" => t(0.0, 1.0, 6.0, 0.0079, Sweep::Inertia, &[0.5, 1.0, 2.0]),
        "fig5" | "fig6" => t(1.0, 0.0, 6.0, 0.0317, Sweep::Noise, &[0.5, 1.0, 2.0]),
        "fig78" => t(1.0, 1.0, 4.0, 0.053, Sweep::Initial, &[]),
        _ => return None,
    })
}

/// Expands a preset into labelled configs, one per sweep value.
/// `sweep` replaces the default sweep values (ignored by `fig78`).
pub fn run_preset(name: &str, sweep: Option<&[f64]>) -> Result<Vec<(String, RunConfig)>> {
    let def = preset_def(name).ok_or_else(|| KkfError::UnknownPreset {
        name: name.to_string(),
        available: PRESETS.join(", "),
    })?;
    let t_final = 10.0;
    let make = |m: f64, d: f64, k: f64, initial: InitialSpec| -> Result<RunConfig> {
        let model = ModelParams::new(m, d, k, 0.0)?;
        Ok(RunConfig {
            model,
            grid: reconstruct_grid(&model, def.dt, t_final)?,
            distribution: DistributionSpec::PointMass { at: 0.0 },
            initial,
            output: OutputSpec::default(),
            mode: ModeSpec::default(),
        })
    };
    if def.sweep == Sweep::Initial {
        return Ok(vec![
            (
                format!("{name}_default"),
                make(def.m, def.d, def.k, InitialSpec::Standard)?,
            ),
            (
                format!("{name}_half_sine"),
                make(def.m, def.d, def.k, InitialSpec::HalfSine)?,
            ),
        ]);
    }
    let values = sweep.unwrap_or(def.values);
    values
        .iter()
        .map(|&v| {
            let (label, cfg) = match def.sweep {
                Sweep::Coupling => ("K", make(def.m, def.d, v, InitialSpec::Standard)?),
                Sweep::Inertia => ("m", make(v, def.d, def.k, InitialSpec::Standard)?),
                Sweep::Noise => ("D", make(def.m, v, def.k, InitialSpec::Standard)?),
                Sweep::Initial => unreachable!(),
            };
            Ok((format!("{name}_{label}{v}"), cfg))
        })
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> KkfError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => KkfError::io(path, io),
        other => KkfError::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes the diagnostic series as CSV.
pub fn write_series(path: &Path, records: &[SeriesRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SERIES_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            num(r.t),
            num(r.abs_r),
            num(r.phase_r),
            num(r.abs_s),
            num(r.mass_min),
            num(r.mass_max),
            num(r.min_rho),
            num(r.tail_mass),
            num(r.boundary_leak),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| KkfError::io(path, e))
}

pub fn write_langevin_series(path: &Path, records: &[LangevinRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(LANGEVIN_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            num(r.t),
            num(r.abs_r),
            num(r.phase_r),
            num(r.abs_s),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| KkfError::io(path, e))
}

/// Reads a series written by [`write_series`].
pub fn read_series(path: &Path) -> Result<Vec<SeriesRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |message: String| KkfError::Format {
        path: path.to_path_buf(),
        message,
    };
    let header = rd.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(SERIES_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let f = |n: usize| -> Result<f64> {
            row[n].parse().map_err(|e| bad(format!("column {n}: {e}")))
        };
        out.push(SeriesRecord {
            step: row[0].parse().map_err(|e| bad(format!("step: {e}")))?,
            t: f(1)?,
            abs_r: f(2)?,
            phase_r: f(3)?,
            abs_s: f(4)?,
            mass_min: f(5)?,
            mass_max: f(6)?,
            min_rho: f(7)?,
            tail_mass: f(8)?,
            boundary_leak: f(9)?,
        });
    }
    Ok(out)
}

/// The contents of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_omega: usize,
    pub n_theta: usize,
    pub n_slices: usize,
    pub d_omega: f64,
    pub d_t: f64,
    /// 0 for a degenerate Ω-lattice.
    pub d_big_omega: f64,
    pub g_omega: f64,
    pub t: f64,
    /// `i, j, k` order.
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(field: &DensityField, t: f64) -> Self {
        let g = field.grid();
        Snapshot {
            n_omega: g.n_omega,
            n_theta: g.n_theta,
            n_slices: field.n_slices(),
            d_omega: g.d_omega,
            d_t: g.d_t,
            d_big_omega: g.d_big_omega.unwrap_or(0.0),
            g_omega: g.g_omega,
            t,
            values: field.to_ijk(),
        }
    }

    pub fn byte_len(&self) -> usize {
        4 + 3 * 8 + 5 * 8 + 8 * self.values.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(MAGIC);
        for d in [self.n_omega, self.n_theta, self.n_slices] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in [
            self.d_omega,
            self.d_t,
            self.d_big_omega,
            self.g_omega,
            self.t,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 68 || &bytes[..4] != MAGIC {
            return Err("not a KKF1 snapshot".into());
        }
        let word = |n: usize| -> [u8; 8] { bytes[4 + 8 * n..12 + 8 * n].try_into().unwrap() };
        let dim =
            |n: usize| usize::try_from(u64::from_le_bytes(word(n))).map_err(|e| e.to_string());
        let (n_omega, n_theta, n_slices) = (dim(0)?, dim(1)?, dim(2)?);
        let scalar = |n: usize| f64::from_le_bytes(word(3 + n));
        let count = n_omega
            .checked_mul(n_theta)
            .and_then(|c| c.checked_mul(n_slices))
            .ok_or("dimensions overflow")?;
        if bytes.len() != 68 + 8 * count {
            return Err(format!(
                "expected {} bytes, found {}",
                68 + 8 * count,
                bytes.len()
            ));
        }
        let values = bytes[68..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Snapshot {
            n_omega,
            n_theta,
            n_slices,
            d_omega: scalar(0),
            d_t: scalar(1),
            d_big_omega: scalar(2),
            g_omega: scalar(3),
            t: scalar(4),
            values,
        })
    }
}

pub fn write_snapshot(path: &Path, field: &DensityField, t: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| KkfError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&Snapshot::from_field(field, t).to_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| KkfError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| KkfError::io(path, e))?;
    Snapshot::from_bytes(&bytes).map_err(|message| KkfError::Format {
        path: path.to_path_buf(),
        message,
    })
}

/// Builds the solver state for a config.
pub fn build_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let p = cfg.prepare()?;
    let field = init_density(&cfg.initial, &p.grid, &p.distribution)?;
    Ok(Simulation::new(p.params, p.distribution, field)?.with_parallel(!cfg.mode.deterministic))
}

/// Runs the PDE for a config, writing the series and snapshots it asks for.
pub fn run_config(cfg: &RunConfig) -> Result<Vec<SeriesRecord>> {
    let mut sim = build_simulation(cfg)?;
    let n_steps = sim.grid().n_t;
    let d_t = sim.grid().d_t;
    let prefix = cfg
        .output
        .snapshot_prefix
        .clone()
        .unwrap_or_else(|| PathBuf::from("snapshot"));
    let records = run_simulation(
        &mut sim,
        n_steps,
        cfg.output.snapshot_every,
        |step, field| {
            let path = PathBuf::from(format!("{}_{step:06}.kkf", prefix.display()));
            write_snapshot(&path, field, step as f64 * d_t)
        },
    )?;
    if let Some(path) = &cfg.output.series {
        write_series(path, &records)?;
    }
    Ok(records)
}

/// Runs the Langevin ensemble for a config with the same initial data.
pub fn run_langevin_config(cfg: &RunConfig) -> Result<Vec<LangevinRecord>> {
    let p = cfg.prepare()?;
    let spec = cfg
        .mode
        .langevin
        .ok_or_else(|| KkfError::Config("mode.langevin is required for a Langevin run".into()))?;
    let eval = cfg.initial.evaluator(&p.grid)?;
    let mut ens = sample_ensemble(&eval, p.grid.g_omega, &p.distribution, spec.n, spec.seed)?;
    let dt = spec.dt.unwrap_or(p.grid.d_t);
    let n_steps = ((p.grid.t_final / dt) - 1e-9).ceil() as usize;
    let records = run_langevin(&mut ens, &p.params, dt, n_steps, !cfg.mode.deterministic)?;
    if let Some(path) = &cfg.output.series {
        write_langevin_series(path, &records)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const MINIMAL: &str = r#"{
        "model": {"m": 1.0, "D": 1.0, "K": 2.0},
        "grid": {"d_omega": 0.2, "target_d_t": 0.01, "G_omega": 4.0, "T": 1.0},
        "output": {"series": "out.csv"}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let (cfg, unknown) = parse_config(MINIMAL, Strictness::Strict).unwrap();
        assert!(unknown.is_empty());
        assert_eq!(cfg.distribution, DistributionSpec::PointMass { at: 0.0 });
        assert_eq!(cfg.initial, InitialSpec::Standard);
        assert!(cfg.mode.deterministic);
        assert!(!cfg.mode.unsafe_grid);
        assert_eq!(cfg.model.freq_half_width, 0.0);
        assert_eq!(cfg.output.series.as_deref(), Some(Path::new("out.csv")));
    }

    #[test]
    fn negative_coupling_is_a_validation_error() {
        let text = MINIMAL.replace("\"K\": 2.0", "\"K\": -1.0");
        let err = parse_config(&text, Strictness::Strict).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("coupling must be nonnegative"));
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = MINIMAL.replace("\"K\": 2.0", "\"K\": 2.0, \"Kappa\": 1");
        assert!(matches!(
            parse_config(&text, Strictness::Strict),
            Err(KkfError::Config(_))
        ));
        let (_, unknown) = parse_config(&text, Strictness::Lenient).unwrap();
        assert_eq!(unknown, vec!["model.Kappa".to_string()]);
    }

    #[test]
    fn missing_key_and_type_mismatch() {
        let text = MINIMAL.replace("\"T\": 1.0", "\"T\": \"long\"");
        assert!(matches!(
            parse_config(&text, Strictness::Strict),
            Err(KkfError::Config(_))
        ));
        assert!(
            parse_config(r#"{"model": {"m": 1, "D": 1, "K": 0}}"#, Strictness::Strict).is_err()
        );
    }

    #[test]
    fn unstable_grid_needs_the_unsafe_flag() {
        let text = MINIMAL.replace("0.01", "0.05");
        assert!(matches!(
            parse_config(&text, Strictness::Strict),
            Err(KkfError::StabilityViolation(_))
        ));
        let text = text.replace(
            "\"output\"",
            "\"mode\": {\"unsafe_grid\": true}, \"output\"",
        );
        assert!(parse_config(&text, Strictness::Strict).is_ok());
    }

    #[test]
    fn overrides_edit_nested_keys() {
        let (cfg, _) = parse_config(MINIMAL, Strictness::Strict).unwrap();
        let cfg = apply_override(&cfg, "model.K", "3.5").unwrap();
        assert_eq!(cfg.model.coupling, 3.5);
        let cfg = apply_override(&cfg, "output.series", "other.csv").unwrap();
        assert_eq!(cfg.output.series.as_deref(), Some(Path::new("other.csv")));
        assert!(apply_override(&cfg, "model.nope", "1").is_err());
    }

    #[test]
    fn fig4_preset_sweeps_inertia() {
        let runs = run_preset("fig4", None).unwrap();
        let ms: Vec<f64> = runs.iter().map(|(_, c)| c.model.inertia).collect();
        assert_eq!(ms, vec![0.5, 1.0, 2.0]);
        for (_, c) in &runs {
            assert_eq!(
                (c.model.noise, c.model.coupling, c.grid.t_final),
                (1.0, 6.0, 10.0)
            );
            assert!(c.grid.target_d_t <= 0.0079);
        }
        // the nominal step is admissible at m = 1, dω = 0.2
        assert_eq!(runs[1].1.grid.target_d_t, 0.0079);
        assert_eq!(runs[1].1.grid.d_omega, 0.2);
    }

    #[test]
    fn fig1_and_fig78_presets() {
        let runs = run_preset("fig1", None).unwrap();
        assert_eq!(runs.len(), 4);
        for (_, c) in &runs {
            assert_eq!(
                (c.model.inertia, c.model.noise, c.grid.t_final),
                (1.0, 1.0, 10.0)
            );
            assert!(c.grid.target_d_t <= 0.0317);
        }
        let runs = run_preset("fig78", None).unwrap();
        assert_eq!(runs.len(), 2);
        let (a, b) = (&runs[0].1, &runs[1].1);
        assert_eq!(a.initial, InitialSpec::Standard);
        assert_eq!(b.initial, InitialSpec::HalfSine);
        assert_eq!(
            RunConfig {
                initial: a.initial.clone(),
                ..b.clone()
            },
            *a
        );
    }

    #[test]
    fn every_preset_passes_the_gate() {
        for name in PRESETS {
            for (label, cfg) in run_preset(name, None).unwrap() {
                cfg.prepare().unwrap_or_else(|e| panic!("{label}: {e}"));
            }
        }
    }

    #[test]
    fn custom_sweep_and_unknown_preset() {
        let runs = run_preset("fig1", Some(&[0.5, 3.0])).unwrap();
        assert_eq!(runs[1].1.model.coupling, 3.0);
        let err = run_preset("fig9", None).unwrap_err();
        assert!(err.to_string().contains("fig78"));
    }

    fn tiny_field() -> DensityField {
        let grid = GridSpec {
            d_omega: 0.5,
            d_t: PI,
            d_theta: PI / 2.0,
            d_big_omega: None,
            g_omega: 0.5,
            t_final: 1.0,
            omega1: 0.0,
            omega_index_max: 1,
            n_omega: 3,
            n_theta: 4,
            n_t: 1,
            n_big_omega: 1,
        };
        let mut f = DensityField::zeros(grid, 1);
        for (n, v) in f.values_mut().iter_mut().enumerate() {
            *v = (n as f64).sqrt() / 7.0;
        }
        f
    }

    #[test]
    fn snapshot_size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.kkf");
        let f = tiny_field();
        write_snapshot(&path, &f, 0.25).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 164);
        let snap = read_snapshot(&path).unwrap();
        assert_eq!(snap, Snapshot::from_field(&f, 0.25));
        let back = DensityField::from_ijk(*f.grid(), 1, &snap.values).unwrap();
        assert!(back
            .values()
            .iter()
            .zip(f.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_snapshot_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.kkf");
        std::fs::write(&path, b"KKF2 nonsense").unwrap();
        assert!(matches!(read_snapshot(&path), Err(KkfError::Format { .. })));
        let missing = dir.path().join("missing.kkf");
        let err = read_snapshot(&missing).unwrap_err();
        assert!(err.to_string().contains("missing.kkf"));
    }

    #[test]
    fn empty_series_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_series(&path, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().trim_end(),
            SERIES_HEADER.join(",")
        );
    }

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rec = SeriesRecord {
            step: 3,
            t: 0.1 + 0.2,
            abs_r: 1.0 / 3.0,
            phase_r: -PI,
            abs_s: 0.5,
            mass_min: 1.0 - 1e-15,
            mass_max: 1.0,
            min_rho: 0.0,
            tail_mass: 1e-300,
            boundary_leak: 2.5e-17,
        };
        write_series(&path, &[rec]).unwrap();
        assert_eq!(read_series(&path).unwrap(), vec![rec]);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop::num::f64::NORMAL | prop::num::f64::ZERO
    }

    proptest! {
        #[test]
        fn config_round_trips(
            m in finite(), d in finite(), k in finite(), w1 in finite(),
            dw in finite(), dt in finite(), g in finite(), t in finite(),
            d_big in prop::option::of(finite()),
            every in prop::option::of(0usize..1000),
            det in any::<bool>(),
            lang in prop::option::of((1usize..10_000, any::<u64>(), prop::option::of(finite()))),
            initial in prop::sample::select(vec![
                InitialSpec::Standard,
                InitialSpec::HalfSine,
                InitialSpec::Uniform,
                InitialSpec::Gaussian { mean_omega: 0.1, mean_theta: 3.0, var_omega: 0.2, var_theta: 1e-3, cov: -0.01 },
            ]),
        ) {
            let cfg = RunConfig {
                model: ModelParams { inertia: m, noise: d, coupling: k, freq_half_width: w1 },
                grid: GridRequest { d_omega: dw, target_d_t: dt, g_omega: g, t_final: t, d_big_omega: d_big },
                distribution: DistributionSpec::Gaussian { mean: 0.0, sigma: dw, half_width: w1 },
                initial,
                output: OutputSpec { series: Some("a b.csv".into()), snapshot_every: every, snapshot_prefix: None },
                mode: ModeSpec {
                    deterministic: det,
                    unsafe_grid: !det,
                    langevin: lang.map(|(n, seed, dt)| LangevinSpec { n, seed, dt }),
                },
            };
            let (back, unknown) = parse_config_unchecked(&cfg.to_json(), Strictness::Strict).unwrap();
            prop_assert!(unknown.is_empty());
            prop_assert_eq!(back, cfg);
        }
    }
}
