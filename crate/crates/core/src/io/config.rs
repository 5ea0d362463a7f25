//! TOML run configuration. Every key has a default; unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorConfig, PulseSchedule, PulseSegment, RelaxMethod, SimSettings, DEFAULT_MP};
use crate::error::{Error, Result};
use crate::experiments::{log_grid, Experiment, StateId};
use crate::materials::{get_material, Material};
use crate::mesh::{build_mesh, CrossSpec, Geometry, NM};
use crate::vec3::Vec3;

/// A built-in material by name, or a full inline record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Name(String),
    Inline(Material),
}

impl MaterialSpec {
    pub fn resolve(&self) -> Result<Material> {
        match self {
            MaterialSpec::Name(n) => get_material(n),
            MaterialSpec::Inline(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossConfig {
    pub w_nm: f64,
    pub l1_nm: f64,
    pub l2_nm: f64,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            w_nm: 50.0,
            l1_nm: 100.0,
            l2_nm: 140.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[serde(rename = "J_Apm2")]
    pub j_apm2: f64,
    pub duration_ns: f64,
    #[serde(default = "default_mp")]
    pub mp: [f64; 3],
}

fn default_mp() -> [f64; 3] {
    [DEFAULT_MP.x, DEFAULT_MP.y, DEFAULT_MP.z]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_max_ps: f64,
    pub dt_init_ps: f64,
    pub stop_torque_deg_per_ns: f64,
    pub relax_method: RelaxMethod,
    pub max_relax_ns: f64,
    pub max_relax_iters: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSection {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            dt_max_ps: d.dt_max * 1e12,
            dt_init_ps: d.dt_init * 1e12,
            stop_torque_deg_per_ns: d.stop_torque_deg_per_ns,
            relax_method: d.relax_method,
            max_relax_ns: d.max_relax_time * 1e9,
            max_relax_iters: d.max_relax_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "lo_Apm2")]
    pub lo_apm2: f64,
    #[serde(rename = "hi_Apm2")]
    pub hi_apm2: f64,
    pub n: usize,
    /// Sign carried by every grid value.
    pub sign: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lo_apm2: 1e10,
            hi_apm2: 4e12,
            n: 30,
            sign: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Initial state for `run`, `sweep` and `twopulse`.
    pub start: String,
    /// Fail when the relaxed start state classifies differently.
    pub strict_start: bool,
    /// Pulse length for `sweep`, `phase` and `twopulse` (ns).
    pub pulse_ns: f64,
    /// Zero-current window after every pulse, before relaxing (ns).
    pub settle_ns: f64,
    #[serde(rename = "sweep_J_Apm2")]
    pub sweep_j_apm2: Vec<f64>,
    pub grid: GridConfig,
    /// Materials for `phase`.
    pub materials: Vec<String>,
    #[serde(rename = "J1_Apm2")]
    pub j1_apm2: f64,
    #[serde(rename = "J2_Apm2")]
    pub j2_apm2: f64,
    pub workers: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            start: "S1".into(),
            strict_start: true,
            pulse_ns: 6.0,
            settle_ns: 4.0,
            sweep_j_apm2: (0..10).map(|i| -(1e11 + 3.5e11 * i as f64 / 9.0)).collect(),
            grid: GridConfig::default(),
            materials: vec!["CFAS".into(), "CMS".into(), "Co".into()],
            j1_apm2: -1e12,
            j2_apm2: 3e11,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub box_nm: [f64; 3],
    pub cell_nm: f64,
    pub material: MaterialSpec,
    #[serde(rename = "H_applied_Apm")]
    pub h_applied_apm: [f64; 3],
    pub lambda: f64,
    pub eps_prime: f64,
    pub sample_ps: f64,
    pub cross: CrossConfig,
    pub pulse: Vec<PulseConfig>,
    pub integrator: IntegratorSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            box_nm: [100.0, 140.0, 2.0],
            cell_nm: 2.0,
            material: MaterialSpec::Name("CFAS".into()),
            h_applied_apm: [0.0; 3],
            lambda: 1.0,
            eps_prime: 0.06,
            sample_ps: 1.0,
            cross: CrossConfig::default(),
            pulse: vec![PulseConfig {
                j_apm2: -3e11,
                duration_ns: 6.0,
                mp: default_mp(),
            }],
            integrator: IntegratorSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Validation {
        key: key.into(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be a positive number, got {v}")))
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let head = &text[..offset.min(text.len())];
    let line = head.matches('\n').count() + 1;
    let col = head.len() - head.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses, defaults and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                Error::Parse(format!("line {line}, column {col}: {msg}"))
            }
            None => Error::Parse(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.box_nm.iter().enumerate() {
            positive(&format!("box_nm[{i}]"), *v)?;
        }
        positive("cell_nm", self.cell_nm)?;
        positive("cross.w_nm", self.cross.w_nm)?;
        positive("cross.l1_nm", self.cross.l1_nm)?;
        positive("cross.l2_nm", self.cross.l2_nm)?;
        self.geometry().map_err(|e| invalid("cross", e.to_string()))?;

        match &self.material {
            MaterialSpec::Name(_) => {
                self.material.resolve()?;
            }
            MaterialSpec::Inline(m) => m.validate().map_err(|e| invalid("material", e.to_string()))?,
        }
        if self.h_applied_apm.iter().any(|v| !v.is_finite()) {
            return Err(invalid("H_applied_Apm", "components must be finite"));
        }
        if !(self.lambda >= 1.0) {
            return Err(invalid("lambda", format!("must be >= 1, got {}", self.lambda)));
        }
        if !self.eps_prime.is_finite() {
            return Err(invalid("eps_prime", "must be finite"));
        }
        positive("sample_ps", self.sample_ps)?;

        if self.pulse.is_empty() {
            return Err(invalid("pulse", "at least one segment is required"));
        }
        for (i, p) in self.pulse.iter().enumerate() {
            positive(&format!("pulse[{i}].duration_ns"), p.duration_ns)?;
            if !p.j_apm2.is_finite() {
                return Err(invalid(format!("pulse[{i}].J_Apm2"), "must be finite"));
            }
            let mp = Vec3::from(p.mp);
            if !(mp.norm() > 0.0) || !mp.is_finite() {
                return Err(invalid(format!("pulse[{i}].mp"), "must be a finite non-zero vector"));
            }
        }

        let it = &self.integrator;
        positive("integrator.rel_tol", it.rel_tol)?;
        positive("integrator.abs_tol", it.abs_tol)?;
        positive("integrator.dt_max_ps", it.dt_max_ps)?;
        positive("integrator.dt_init_ps", it.dt_init_ps)?;
        positive("integrator.stop_torque_deg_per_ns", it.stop_torque_deg_per_ns)?;
        positive("integrator.max_relax_ns", it.max_relax_ns)?;
        if it.dt_init_ps > it.dt_max_ps {
            return Err(invalid("integrator.dt_init_ps", "must not exceed dt_max_ps"));
        }
        if it.max_relax_iters == 0 {
            return Err(invalid("integrator.max_relax_iters", "must be >= 1"));
        }

        let ex = &self.experiment;
        match StateId::parse(&ex.start) {
            Some(s) if s != StateId::Unknown => {}
            _ => return Err(invalid("experiment.start", format!("expected one of S1..S4, got `{}`", ex.start))),
        }
        positive("experiment.pulse_ns", ex.pulse_ns)?;
        if !(ex.settle_ns >= 0.0) {
            return Err(invalid("experiment.settle_ns", "must be >= 0"));
        }
        if ex.sweep_j_apm2.iter().any(|j| !j.is_finite()) {
            return Err(invalid("experiment.sweep_J_Apm2", "values must be finite"));
        }
        positive("experiment.grid.lo_Apm2", ex.grid.lo_apm2)?;
        positive("experiment.grid.hi_Apm2", ex.grid.hi_apm2)?;
        if ex.grid.hi_apm2 < ex.grid.lo_apm2 {
            return Err(invalid("experiment.grid.hi_Apm2", "must be >= lo_Apm2"));
        }
        if ex.grid.sign != 1.0 && ex.grid.sign != -1.0 {
            return Err(invalid("experiment.grid.sign", "must be 1 or -1"));
        }
        for (i, name) in ex.materials.iter().enumerate() {
            get_material(name).map_err(|e| invalid(format!("experiment.materials[{i}]"), e.to_string()))?;
        }
        if ex.workers == 0 {
            return Err(invalid("experiment.workers", "must be >= 1"));
        }
        if let Some(s) = self.output.snapshot_every_ns {
            positive("output.snapshot_every_ns", s)?;
        }
        Ok(())
    }

    pub fn resolved_material(&self) -> Result<Material> {
        self.material.resolve()
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let [x, y, z] = self.box_nm;
        let mesh = build_mesh(x * NM, y * NM, z * NM, self.cell_nm * NM)?;
        let cross = CrossSpec {
            w: self.cross.w_nm * NM,
            l1: self.cross.l1_nm * NM,
            l2: self.cross.l2_nm * NM,
        };
        Geometry::new(mesh, cross)
    }

    pub fn settings(&self) -> SimSettings {
        let it = &self.integrator;
        SimSettings {
            integrator: IntegratorConfig {
                abs_tol: it.abs_tol,
                rel_tol: it.rel_tol,
                dt_init: it.dt_init_ps * 1e-12,
                dt_max: it.dt_max_ps * 1e-12,
                stop_torque_deg_per_ns: it.stop_torque_deg_per_ns,
                relax_method: it.relax_method,
                max_relax_time: it.max_relax_ns * 1e-9,
                max_relax_iters: it.max_relax_iters,
                ..IntegratorConfig::default()
            },
            applied: Vec3::from(self.h_applied_apm),
            lambda: self.lambda,
            eps_prime: self.eps_prime,
            sample_interval: self.sample_ps * 1e-12,
            snapshot_every: self.output.snapshot_every_ns.map(|s| s * 1e-9),
            ..SimSettings::default()
        }
    }

    /// The configured pulse train followed by the settle window.
    pub fn schedule(&self) -> PulseSchedule {
        PulseSchedule {
            segments: self
                .pulse
                .iter()
                .map(|p| PulseSegment {
                    duration: p.duration_ns * 1e-9,
                    j: p.j_apm2,
                    mp: Vec3::from(p.mp).normalized(),
                })
                .collect(),
            settle: self.experiment.settle_ns * 1e-9,
        }
    }

    pub fn start_state(&self) -> StateId {
        StateId::parse(&self.experiment.start).unwrap_or(StateId::S1)
    }

    pub fn phase_grid(&self) -> Vec<f64> {
        let g = &self.experiment.grid;
        log_grid(g.lo_apm2, g.hi_apm2, g.n, g.sign)
    }

    pub fn phase_materials(&self) -> Result<Vec<Material>> {
        self.experiment.materials.iter().map(|n| get_material(n)).collect()
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let mut ex = Experiment::new(self.geometry()?, self.settings())?;
        ex.pulse = self.experiment.pulse_ns * 1e-9;
        ex.settle = self.experiment.settle_ns * 1e-9;
        ex.workers = self.experiment.workers;
        Ok(ex)
    }

    /// The fully defaulted configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("cannot serialize configuration: {e}")))
    }
}
