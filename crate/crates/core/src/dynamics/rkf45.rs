//! Adaptive Runge-Kutta-Fehlberg 4(5) stepping for fields of unit vectors.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::mesh::Mask;
use crate::vec3::Vec3;

/// Smallest step the controller will attempt before giving up (s).
pub const DT_MIN: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// First trial step (s).
    pub dt_init: f64,
    /// Upper bound on any step (s).
    pub dt_max: f64,
    pub renormalize: bool,
    /// Relaxation stops once every cell turns slower than this (deg/ns).
    pub stop_torque_deg_per_ns: f64,
    /// Damping used by the precession-free relaxation flow.
    pub relax_alpha: f64,
    pub relax_method: RelaxMethod,
    /// Relaxation gives up after this much damped-flow time (s). The
    /// minimizer counts each step as the flow time covering the same move.
    pub max_relax_time: f64,
    /// The minimizer also gives up after this many field evaluations.
    pub max_relax_iters: usize,
}

/// How `relax` reaches equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxMethod {
    /// Projected steepest descent with Barzilai-Borwein steps and an
    /// energy-decrease safeguard.
    #[default]
    Minimize,
    /// Damping-only LLG flow integrated with the adaptive stepper.
    Flow,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-7,
            rel_tol: 1e-6,
            dt_init: 1e-14,
            dt_max: 1e-12,
            renormalize: true,
            stop_torque_deg_per_ns: 0.01,
            relax_alpha: 1.0,
            relax_method: RelaxMethod::Minimize,
            max_relax_time: 50e-9,
            max_relax_iters: 200_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        if !(self.dt_init > 0.0 && self.dt_init <= self.dt_max) {
            return Err(Error::invalid(format!(
                "need 0 < dt_init <= dt_max (dt_init={}, dt_max={})",
                self.dt_init, self.dt_max
            )));
        }
        if !(self.stop_torque_deg_per_ns > 0.0 && self.relax_alpha > 0.0 && self.max_relax_time > 0.0 && self.max_relax_iters > 0) {
            return Err(Error::invalid("relaxation settings must be positive"));
        }
        Ok(())
    }

    /// Equilibrium threshold converted to rad/s.
    pub fn stop_rate(&self) -> f64 {
        self.stop_torque_deg_per_ns.to_radians() * 1e9
    }
}

/// Something that can evaluate dm/dt for a whole field.
pub trait Rhs {
    fn eval(&mut self, t: f64, m: &VectorField, dmdt: &mut VectorField) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &VectorField, &mut VectorField) -> Result<()>,
{
    fn eval(&mut self, t: f64, m: &VectorField, dmdt: &mut VectorField) -> Result<()> {
        self(t, m, dmdt)
    }
}

const C: [f64; 6] = [0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
/// Fifth-order weights (the solution we advance with).
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
/// Fourth-order weights, used only for the error estimate.
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Step actually taken (s).
    pub dt: f64,
    /// Suggested next step (s).
    pub dt_next: f64,
    /// max_cell |dm/dt| at the start of the step (rad/s).
    pub max_rate: f64,
    pub rejected: usize,
}

/// Stage buffers for one mesh.
#[derive(Debug, Clone)]
pub struct Rkf45 {
    pub config: IntegratorConfig,
    k: [VectorField; 6],
    trial: VectorField,
    /// k1 at the current state is still valid (no change since last eval).
    k1_valid: bool,
}

impl Rkf45 {
    pub fn new(config: IntegratorConfig, proto: &VectorField) -> Self {
        let z = VectorField::zeros(proto.mesh);
        Rkf45 {
            config,
            k: std::array::from_fn(|_| z.clone()),
            trial: z,
            k1_valid: false,
        }
    }

    /// Forget cached stage data, e.g. after the RHS parameters change.
    pub fn invalidate(&mut self) {
        self.k1_valid = false;
    }

    /// Evaluates the RHS at the current state (cached until the next step).
    pub fn rate(&mut self, rhs: &mut impl Rhs, t: f64, m: &VectorField) -> Result<&VectorField> {
        if !self.k1_valid {
            rhs.eval(t, m, &mut self.k[0])?;
            self.k1_valid = true;
        }
        Ok(&self.k[0])
    }

    /// Takes one accepted step of at most `dt`, shrinking and retrying on
    /// rejection. `m` and `t` are updated in place.
    pub fn step(&mut self, rhs: &mut impl Rhs, m: &mut VectorField, t: &mut f64, dt: f64, mask: &Mask) -> Result<StepInfo> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("step size must be positive, got {dt}")));
        }
        let cfg = self.config;
        let mut dt = dt.min(cfg.dt_max);
        self.rate(rhs, *t, m)?;
        let max_rate = max_norm(&self.k[0], mask);
        let mut rejected = 0;
        loop {
            if dt < DT_MIN {
                return Err(Error::Stiffness { t: *t, dt });
            }
            for s in 1..6 {
                combine(&mut self.trial, m, &self.k, &A[s][..s], dt, mask);
                rhs.eval(*t + C[s] * dt, &self.trial, &mut self.k[s])?;
            }
            // Error estimate and the fifth-order increment.
            let mut err: f64 = 0.0;
            let mut inc: f64 = 0.0;
            for i in 0..m.data.len() {
                if !mask.get(i) {
                    continue;
                }
                let mut e = Vec3::ZERO;
                let mut d = Vec3::ZERO;
                for s in 0..6 {
                    e += self.k[s].data[i] * (B5[s] - B4[s]);
                    d += self.k[s].data[i] * B5[s];
                }
                let en = (e * dt).norm();
                // f64::max would silently drop NaN.
                err = if en.is_nan() { f64::INFINITY } else { err.max(en) };
                inc = inc.max((d * dt).norm());
            }
            if !err.is_finite() {
                dt *= 0.25;
                rejected += 1;
                continue;
            }
            let tol = cfg.abs_tol + cfg.rel_tol * inc;
            let ratio = err / tol;
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if ratio <= 1.0 {
                combine(&mut self.trial, m, &self.k, &B5, dt, mask);
                std::mem::swap(m, &mut self.trial);
                if cfg.renormalize {
                    m.normalize(mask);
                }
                *t += dt;
                self.k1_valid = false;
                return Ok(StepInfo {
                    dt,
                    dt_next: (dt * factor).min(cfg.dt_max),
                    max_rate,
                    rejected,
                });
            }
            dt *= factor.min(0.9);
            rejected += 1;
        }
    }
}

/// `out = m + dt * sum_s w[s] k[s]` on occupied cells.
fn combine(out: &mut VectorField, m: &VectorField, k: &[VectorField; 6], w: &[f64], dt: f64, mask: &Mask) {
    for i in 0..m.data.len() {
        if !mask.get(i) {
            out.data[i] = Vec3::ZERO;
            continue;
        }
        let mut acc = Vec3::ZERO;
        for (s, ws) in w.iter().enumerate() {
            if *ws != 0.0 {
                acc += k[s].data[i] * *ws;
            }
        }
        out.data[i] = m.data[i] + acc * dt;
    }
}

pub fn max_norm(f: &VectorField, mask: &Mask) -> f64 {
    f.data
        .iter()
        .zip(&mask.cells)
        .filter(|(_, &c)| c)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn precession(omega: f64) -> impl FnMut(f64, &VectorField, &mut VectorField) -> Result<()> {
        move |_, m, d| {
            for (o, v) in d.data.iter_mut().zip(&m.data) {
                *o = v.cross(Vec3::Z) * -omega;
            }
            Ok(())
        }
    }

    fn single() -> (VectorField, Mask) {
        let mesh = Mesh::new([1, 1, 1], [1e-9; 3]).unwrap();
        let mask = Mask::full(&mesh);
        (VectorField::uniform(mesh, &mask, Vec3::X), mask)
    }

    #[test]
    fn fehlberg_weights_are_consistent() {
        assert!((B5.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((B4.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for s in 1..6 {
            assert!((A[s].iter().sum::<f64>() - C[s]).abs() < 1e-14);
        }
    }

    #[test]
    fn circular_precession_period() {
        let omega = 2.0 * std::f64::consts::PI / 1e-10;
        let (mut m, mask) = single();
        let mut rk = Rkf45::new(IntegratorConfig::default(), &m);
        let mut rhs = precession(omega);
        let mut t = 0.0;
        let mut dt: f64 = 1e-14;
        let end = 1e-10;
        while t < end {
            let h = dt.min(end - t);
            let info = rk.step(&mut rhs, &mut m, &mut t, h, &mask).unwrap();
            dt = info.dt_next;
        }
        assert!((m.data[0] - Vec3::X).norm() < 1e-4, "{:?}", m.data[0]);
    }

    #[test]
    fn underflow_is_a_stiffness_error() {
        let (mut m, mask) = single();
        let mut rk = Rkf45::new(IntegratorConfig::default(), &m);
        let mut blowup = |_: f64, _: &VectorField, d: &mut VectorField| {
            d.data[0] = Vec3::new(f64::INFINITY, 0.0, 0.0);
            Ok(())
        };
        let mut t = 0.0;
        let err = rk.step(&mut blowup, &mut m, &mut t, 1e-12, &mask).unwrap_err();
        assert!(matches!(err, Error::Stiffness { .. }));
    }

    #[test]
    fn config_validation() {
        let mut c = IntegratorConfig::default();
        c.validate().unwrap();
        c.dt_init = 2e-12;
        assert!(c.validate().is_err());
        let c = IntegratorConfig { abs_tol: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        assert!((IntegratorConfig::default().stop_rate() - 1.7453292519943295e5).abs() < 1e-6);
    }
}
