//! Switching experiments on the cross: state preparation and
//! classification, switching-time detection, current sweeps, threshold
//! extraction and the two-pulse long-arm protocol.

use std::fmt;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;

use crate::dynamics::{PulseSchedule, SimSettings, Simulation, Trajectory};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::fields::DemagKernel;
use crate::materials::Material;
use crate::mesh::{Geometry, Region, RegionLabels};
use crate::vec3::Vec3;

/// Arm averages below this magnitude do not count as a sign.
pub const CLASSIFY_THRESHOLD: f64 = 0.5;
/// A crossing counts as a switch only if the new sign holds this long (s).
pub const SIGN_HOLD: f64 = 0.5e-9;

/// Remanent states by the signs of (short-arm <m_x>, long-arm <m_y>).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateId {
    S1,
    S2,
    S3,
    S4,
    Unknown,
}

impl StateId {
    pub const ALL: [StateId; 4] = [StateId::S1, StateId::S2, StateId::S3, StateId::S4];

    /// `(sign of short-arm m_x, sign of long-arm m_y)`.
    pub fn signs(self) -> Option<(f64, f64)> {
        match self {
            StateId::S1 => Some((1.0, 1.0)),
            StateId::S2 => Some((-1.0, 1.0)),
            StateId::S3 => Some((-1.0, -1.0)),
            StateId::S4 => Some((1.0, -1.0)),
            StateId::Unknown => None,
        }
    }

    pub fn from_averages(short_mx: f64, long_my: f64) -> StateId {
        if short_mx.abs() < CLASSIFY_THRESHOLD || long_my.abs() < CLASSIFY_THRESHOLD || !short_mx.is_finite() || !long_my.is_finite() {
            return StateId::Unknown;
        }
        match (short_mx > 0.0, long_my > 0.0) {
            (true, true) => StateId::S1,
            (false, true) => StateId::S2,
            (false, false) => StateId::S3,
            (true, false) => StateId::S4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StateId::S1 => "S1",
            StateId::S2 => "S2",
            StateId::S3 => "S3",
            StateId::S4 => "S4",
            StateId::Unknown => "UNKNOWN",
        }
    }

    pub fn parse(s: &str) -> Option<StateId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" | "STATE1" | "1" => Some(StateId::S1),
            "S2" | "STATE2" | "2" => Some(StateId::S2),
            "S3" | "STATE3" | "3" => Some(StateId::S3),
            "S4" | "STATE4" | "4" => Some(StateId::S4),
            "UNKNOWN" => Some(StateId::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn arm_averages(m: &VectorField, regions: &RegionLabels) -> (f64, f64) {
    (
        m.mean_in(regions, Region::in_short_arm).x,
        m.mean_in(regions, Region::in_long_arm).y,
    )
}

pub fn classify_state(m: &VectorField, regions: &RegionLabels) -> StateId {
    let (sx, ly) = arm_averages(m, regions);
    StateId::from_averages(sx, ly)
}

/// Short-arm cells along +-x, long-arm and overlap cells along +-y.
pub fn seed_state(geometry: &Geometry, target: StateId) -> Result<VectorField> {
    let (sx, sy) = target
        .signs()
        .ok_or_else(|| Error::invalid("cannot seed the UNKNOWN state"))?;
    Ok(VectorField::from_fn(geometry.mesh, &geometry.mask, |i| match geometry.regions.labels[i] {
        Region::ShortArm => Vec3::X * sx,
        _ => Vec3::Y * sy,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Watched {
    ShortX,
    LongY,
}

/// First zero crossing of the watched arm average after `t_start`, away
/// from its sign at `t_start`, that holds the new sign for `SIGN_HOLD`.
/// Times come from linear interpolation between samples.
pub fn switching_time(traj: &Trajectory, watched: Watched, t_start: f64) -> Result<Option<f64>> {
    switching_time_with_hold(traj, watched, t_start, SIGN_HOLD)
}

pub fn switching_time_with_hold(traj: &Trajectory, watched: Watched, t_start: f64, hold: f64) -> Result<Option<f64>> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= t_start)
        .map(|s| {
            let v = match watched {
                Watched::ShortX => s.short_avg.x,
                Watched::LongY => s.long_avg.y,
            };
            (s.t, v)
        })
        .collect();
    let Some(initial) = pts.iter().map(|p| p.1).find(|v| *v != 0.0) else {
        return Ok(None);
    };
    let old = initial.signum();
    let t_end = pts.last().map_or(t_start, |p| p.0);
    let slack = 1e-9 * hold;

    let mut i = 1;
    while i < pts.len() {
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        let entered = v1 * old < 0.0 && v0 * old >= 0.0;
        if !entered {
            i += 1;
            continue;
        }
        let crossing = if v0 == 0.0 { t0 } else { t0 + (t1 - t0) * v0 / (v0 - v1) };
        let mut held = true;
        let mut j = i;
        while j < pts.len() && pts[j].0 <= crossing + hold + slack {
            if pts[j].1 * old >= 0.0 {
                held = false;
                break;
            }
            j += 1;
        }
        if held {
            if t_end + slack < crossing + hold {
                return Err(Error::Indeterminate {
                    crossing,
                    remaining: t_end - crossing,
                });
            }
            return Ok(Some(crossing));
        }
        i = j.max(i + 1);
    }
    Ok(None)
}

/// Shared, read-only inputs for a family of runs on one geometry.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub geometry: Arc<Geometry>,
    pub kernel: Arc<DemagKernel>,
    pub settings: SimSettings,
    /// Pulse length (s).
    pub pulse: f64,
    /// Free precession after the pulse, before relaxing (s).
    pub settle: f64,
    /// Worker threads for sweeps; results do not depend on it.
    pub workers: usize,
}

impl Experiment {
    pub fn new(geometry: Geometry, settings: SimSettings) -> Result<Self> {
        let kernel = Arc::new(DemagKernel::new(&geometry.mesh)?);
        Ok(Experiment {
            geometry: Arc::new(geometry),
            kernel,
            settings,
            pulse: 6e-9,
            settle: 4e-9,
            workers: 1,
        })
    }

    /// Default cross, default physics.
    pub fn default_cross() -> Result<Self> {
        Self::new(Geometry::default_cross(), SimSettings::default())
    }

    pub fn session(&self, material: &Material, m0: VectorField) -> Result<Simulation> {
        Simulation::with_kernel(
            Arc::clone(&self.geometry),
            Arc::clone(&self.kernel),
            material.clone(),
            m0,
            self.settings,
        )
    }

    pub fn classify(&self, m: &VectorField) -> StateId {
        classify_state(m, &self.geometry.regions)
    }

    /// Seeds `target` and relaxes it; fails if it relaxes elsewhere.
    pub fn prepare_state(&self, target: StateId, material: &Material) -> Result<VectorField> {
        let seed = seed_state(&self.geometry, target)?;
        let mut sim = self.session(material, seed)?;
        sim.relax()?;
        let achieved = self.classify(sim.state());
        if achieved != target {
            return Err(Error::Preparation {
                target: target.to_string(),
                achieved: achieved.to_string(),
            });
        }
        Ok(sim.state().clone())
    }

    pub fn schedule(&self, j: f64) -> PulseSchedule {
        PulseSchedule::single(j, self.pulse, self.settle)
    }

    /// One pulse from `start`, returning the record and the trajectory.
    pub fn run_one(&self, material: &Material, start: &VectorField, j: f64) -> (PhaseRecord, Option<Trajectory>) {
        let mut rec = PhaseRecord {
            material: material.name.clone(),
            j,
            pulse: self.pulse,
            final_state: StateId::Unknown,
            t_switch: None,
            t_switch_long: None,
            note: None,
        };
        let outcome = self
            .session(material, start.clone())
            .and_then(|mut sim| sim.run_pulse(&self.schedule(j)));
        let out = match outcome {
            Ok(o) => o,
            Err(e) => {
                warn!("{} J={j:e}: {e}", material.name);
                rec.note = Some(e.to_string());
                return (rec, None);
            }
        };
        rec.final_state = self.classify(&out.relaxed);
        let mut notes = Vec::new();
        for (watch, slot) in [(Watched::ShortX, &mut rec.t_switch), (Watched::LongY, &mut rec.t_switch_long)] {
            match switching_time(&out.trajectory, watch, out.pulse_start) {
                Ok(t) => *slot = t.map(|t| t - out.pulse_start),
                Err(e) => notes.push(e.to_string()),
            }
        }
        if !notes.is_empty() {
            rec.note = Some(notes.join("; "));
        }
        info!(
            "{} J={j:e}: {} t_s={:?}",
            material.name, rec.final_state, rec.t_switch
        );
        (rec, Some(out.trajectory))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))
    }

    /// One record per current density, in input order. Each run starts from
    /// its own copy of `start`; failures are recorded, not propagated.
    pub fn sweep_current(&self, material: &Material, j_values: &[f64], start: &VectorField) -> Result<Vec<PhaseRecord>> {
        let pool = self.pool()?;
        Ok(pool.install(|| {
            j_values
                .par_iter()
                .map(|&j| self.run_one(material, start, j).0)
                .collect()
        }))
    }

    /// Sweeps every material from its prepared S1 and extracts thresholds.
    /// `j_grid` must be sorted by ascending |J|.
    pub fn phase_diagram(&self, materials: &[Material], j_grid: &[f64]) -> Result<PhaseDiagram> {
        if j_grid.windows(2).any(|w| w[0].abs() > w[1].abs()) {
            return Err(Error::invalid("current grid must be sorted by ascending |J|"));
        }
        let mut diagram = PhaseDiagram::default();
        if j_grid.is_empty() {
            return Ok(diagram);
        }
        // A material whose S1 cannot be prepared gets one failed record per J.
        let starts: Vec<std::result::Result<VectorField, String>> = materials
            .iter()
            .map(|m| self.prepare_state(StateId::S1, m).map_err(|e| e.to_string()))
            .collect();
        let jobs: Vec<(usize, f64)> = (0..materials.len())
            .flat_map(|mi| j_grid.iter().map(move |&j| (mi, j)))
            .collect();
        let pool = self.pool()?;
        let records: Vec<PhaseRecord> = pool.install(|| {
            jobs.par_iter()
                .map(|&(mi, j)| match &starts[mi] {
                    Ok(start) => self.run_one(&materials[mi], start, j).0,
                    Err(e) => PhaseRecord {
                        material: materials[mi].name.clone(),
                        j,
                        pulse: self.pulse,
                        final_state: StateId::Unknown,
                        t_switch: None,
                        t_switch_long: None,
                        note: Some(format!("start state: {e}")),
                    },
                })
                .collect()
        });
        for mat in materials {
            let rows: Vec<PhaseRecord> = records.iter().filter(|r| r.material == mat.name).cloned().collect();
            diagram.thresholds.push(Thresholds::from_records(&mat.name, &rows));
        }
        diagram.records = records;
        Ok(diagram)
    }

    /// Pulse `j1`, relax, pulse `j2`, relax; reports both classifications.
    pub fn two_pulse_protocol(&self, material: &Material, start: &VectorField, j1: f64, j2: f64) -> Result<(StateId, StateId)> {
        if j1 * j2 > 0.0 {
            return Err(Error::invalid(format!("pulses must have opposite signs (J1={j1:e}, J2={j2:e})")));
        }
        let mut sim = self.session(material, start.clone())?;
        let first = sim.run_pulse(&self.schedule(j1))?;
        let mid = self.classify(&first.relaxed);
        let second = sim.run_pulse(&self.schedule(j2))?;
        Ok((mid, self.classify(&second.relaxed)))
    }

    /// Bisects on |J| between `lo` (predicate false) and `hi` (predicate
    /// true) until the bracket is within `rel_tol`, returning the bracket.
    pub fn bisect_current(
        &self,
        mut lo: f64,
        mut hi: f64,
        rel_tol: f64,
        mut pred: impl FnMut(f64) -> Result<bool>,
    ) -> Result<(f64, f64)> {
        if pred(lo)? || !pred(hi)? {
            return Err(Error::invalid("bisection bracket does not straddle the transition"));
        }
        while (hi - lo).abs() > rel_tol * hi.abs() {
            let mid = 0.5 * (lo + hi);
            if pred(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, hi))
    }
}

/// One (material, J) run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub material: String,
    /// Current density (A/m^2).
    pub j: f64,
    /// Pulse length (s).
    pub pulse: f64,
    pub final_state: StateId,
    /// Short-arm switching time after pulse onset (s).
    pub t_switch: Option<f64>,
    /// Long-arm switching time after pulse onset (s).
    pub t_switch_long: Option<f64>,
    /// Failure or detector diagnostics, if any.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub material: String,
    /// Smallest |J| leaving S1 with the short arm reversed (S2 or S3).
    pub jc1: Option<f64>,
    /// Smallest |J| reaching S3.
    pub jc2: Option<f64>,
    /// The final state did not progress monotonically S1 -> S2 -> S3 with |J|.
    pub anomaly: bool,
}

impl Thresholds {
    pub fn from_records(material: &str, rows: &[PhaseRecord]) -> Self {
        let rank = |s: StateId| match s {
            StateId::S1 => Some(0),
            StateId::S2 => Some(1),
            StateId::S3 => Some(2),
            _ => None,
        };
        let jc1 = rows
            .iter()
            .find(|r| matches!(r.final_state, StateId::S2 | StateId::S3))
            .map(|r| r.j.abs());
        let jc2 = rows.iter().find(|r| r.final_state == StateId::S3).map(|r| r.j.abs());
        let first_s2 = rows.iter().position(|r| r.final_state == StateId::S2);
        let first_s3 = rows.iter().position(|r| r.final_state == StateId::S3);
        let mut anomaly = matches!((first_s2, first_s3), (Some(a), Some(b)) if b < a)
            || (first_s3.is_some() && first_s2.is_none());
        let mut best = 0;
        for r in rows {
            match rank(r.final_state) {
                Some(k) if k < best => anomaly = true,
                Some(k) => best = k,
                None => anomaly = true,
            }
        }
        Thresholds {
            material: material.to_string(),
            jc1,
            jc2,
            anomaly,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PhaseDiagram {
    pub records: Vec<PhaseRecord>,
    pub thresholds: Vec<Thresholds>,
}

/// `n` log-spaced magnitudes from `lo` to `hi`, carrying `sign`.
pub fn log_grid(lo: f64, hi: f64, n: usize, sign: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![sign * lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| sign * (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Sample;
    use crate::fields::Energies;

    fn trace(points: &[(f64, f64)]) -> Trajectory {
        let mut t = Trajectory::new();
        for &(time, v) in points {
            t.push(Sample {
                t: time,
                m_avg: Vec3::ZERO,
                short_avg: Vec3::new(v, 0.0, 0.0),
                long_avg: Vec3::new(0.0, v, 0.0),
                energy: Energies::default(),
            });
        }
        t
    }

    fn sampled(f: impl Fn(f64) -> f64, end_ns: f64) -> Trajectory {
        let n = (end_ns * 1000.0).round() as usize;
        trace(&(0..=n).map(|i| (i as f64 * 1e-12, f(i as f64 * 1e-3))).collect::<Vec<_>>())
    }

    #[test]
    fn classification_table() {
        assert_eq!(StateId::from_averages(0.9, 0.9), StateId::S1);
        assert_eq!(StateId::from_averages(-0.9, 0.9), StateId::S2);
        assert_eq!(StateId::from_averages(-0.9, -0.9), StateId::S3);
        assert_eq!(StateId::from_averages(0.9, -0.9), StateId::S4);
        assert_eq!(StateId::from_averages(0.3, 0.9), StateId::Unknown);
        assert_eq!(StateId::from_averages(0.9, -0.49), StateId::Unknown);
    }

    #[test]
    fn seeded_states_classify_as_themselves() {
        let g = Geometry::default_cross();
        for s in StateId::ALL {
            let m = seed_state(&g, s).unwrap();
            assert_eq!(classify_state(&m, &g.regions), s);
        }
        assert!(seed_state(&g, StateId::Unknown).is_err());
    }

    #[test]
    fn synthetic_short_arm_state() {
        let g = Geometry::default_cross();
        let m = VectorField::from_fn(g.mesh, &g.mask, |i| match g.regions.labels[i] {
            Region::ShortArm => Vec3::X,
            Region::LongArm => Vec3::Y,
            _ => Vec3::new(1.0, 1.0, 0.0).normalized(),
        });
        assert_eq!(classify_state(&m, &g.regions), StateId::S1);
    }

    #[test]
    fn constant_sign_never_switches() {
        let t = sampled(|_| 0.9, 5.0);
        assert_eq!(switching_time(&t, Watched::ShortX, 0.0).unwrap(), None);
    }

    #[test]
    fn clean_flip_at_two_ns() {
        let t = sampled(|ns| (2.0 - ns).clamp(-1.0, 1.0) * 0.9, 5.0);
        let ts = switching_time(&t, Watched::ShortX, 0.0).unwrap().unwrap();
        assert!((ts - 2.0e-9).abs() < 1e-15, "{ts}");
    }

    #[test]
    fn transient_flip_is_rejected() {
        let t = sampled(
            |ns| {
                if (1.0..1.2).contains(&ns) || ns >= 3.0 {
                    -0.8
                } else {
                    0.8
                }
            },
            5.0,
        );
        let ts = switching_time(&t, Watched::LongY, 0.0).unwrap().unwrap();
        assert!((ts - 3.0e-9).abs() < 1e-12, "{ts}");
    }

    #[test]
    fn late_crossing_is_indeterminate() {
        let t = sampled(|ns| if ns >= 4.8 { -0.8 } else { 0.8 }, 5.0);
        assert!(matches!(
            switching_time(&t, Watched::ShortX, 0.0),
            Err(Error::Indeterminate { .. })
        ));
    }

    #[test]
    fn crossings_before_start_are_ignored() {
        let t = sampled(|ns| if ns >= 1.0 { -0.8 } else { 0.8 }, 5.0);
        assert_eq!(switching_time(&t, Watched::ShortX, 2e-9).unwrap(), None);
    }

    fn rec(j: f64, s: StateId) -> PhaseRecord {
        PhaseRecord {
            material: "X".into(),
            j,
            pulse: 6e-9,
            final_state: s,
            t_switch: None,
            t_switch_long: None,
            note: None,
        }
    }

    #[test]
    fn thresholds_from_monotone_rows() {
        use StateId::*;
        let rows = vec![rec(-1e10, S1), rec(-1e11, S2), rec(-5e11, S2), rec(-1e12, S3), rec(-2e12, S3)];
        let th = Thresholds::from_records("X", &rows);
        assert_eq!(th.jc1, Some(1e11));
        assert_eq!(th.jc2, Some(1e12));
        assert!(!th.anomaly);
    }

    #[test]
    fn s3_before_s2_is_flagged() {
        use StateId::*;
        let rows = vec![rec(-1e10, S1), rec(-1e11, S3), rec(-5e11, S2)];
        let th = Thresholds::from_records("X", &rows);
        assert!(th.anomaly);
        assert!(th.jc1.unwrap() <= th.jc2.unwrap());
    }

    #[test]
    fn empty_grid_gives_empty_diagram() {
        let exp = Experiment::new(Geometry::full(crate::mesh::build_mesh(2e-9, 2e-9, 2e-9, 2e-9).unwrap()), SimSettings::default()).unwrap();
        let d = exp.phase_diagram(&crate::materials::builtin(), &[]).unwrap();
        assert!(d.records.is_empty() && d.thresholds.is_empty());
        assert!(exp.phase_diagram(&crate::materials::builtin(), &[-1e12, -1e11]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e10, 4e12, 30, -1.0);
        assert_eq!(g.len(), 30);
        assert!((g[0] + 1e10).abs() < 1.0);
        assert!((g[29] + 4e12).abs() < 1e-3 * 4e12);
        assert!(g.windows(2).all(|w| w[0].abs() < w[1].abs()));
    }
}
