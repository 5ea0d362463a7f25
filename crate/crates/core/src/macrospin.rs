//! Single-domain model: the analytic zero-temperature switching threshold and
//! a one-spin integrator kept separate from the grid solver.

use serde::{Deserialize, Serialize};

use crate::dynamics::TorqueParams;
use crate::error::{Error, Result};
use crate::materials::{Material, GAMMA_LL, MU0};
use crate::vec3::Vec3;

/// Elementary charge, CODATA (C).
const E_SI: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, CODATA (J s).
const HBAR_SI: f64 = 1.054_571_817e-34;
/// Speed of light (cm/s).
const C_CGS: f64 = 2.997_924_58e10;
/// Elementary charge (statC).
const E_ESU: f64 = E_SI * C_CGS / 10.0;
/// Reduced Planck constant (erg s).
const HBAR_CGS: f64 = HBAR_SI * 1e7;

/// Fixed step of the one-spin integrator (s).
pub const MACROSPIN_DT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemagFactors {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

impl DemagFactors {
    /// Infinite thin film.
    pub const THIN_FILM: DemagFactors = DemagFactors { nx: 0.0, ny: 0.0, nz: 1.0 };
    pub const SPHERE: DemagFactors = DemagFactors {
        nx: 1.0 / 3.0,
        ny: 1.0 / 3.0,
        nz: 1.0 / 3.0,
    };
}

impl Default for DemagFactors {
    fn default() -> Self {
        DemagFactors::THIN_FILM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacrospinParams {
    pub material: Material,
    /// Free-layer thickness (m).
    pub t_free: f64,
    /// External field along +x (A/m).
    pub h: f64,
    /// Uniaxial anisotropy field along x (A/m).
    pub hk: f64,
    pub torque: TorqueParams,
    pub demag: DemagFactors,
    pub gamma: f64,
}

impl MacrospinParams {
    /// Zero field, zero current, thin-film demag.
    pub fn new(material: Material, t_free: f64) -> Self {
        let torque = TorqueParams::new(material.p, t_free);
        MacrospinParams {
            material,
            t_free,
            h: 0.0,
            hk: 0.0,
            torque,
            demag: DemagFactors::default(),
            gamma: GAMMA_LL,
        }
    }

    pub fn with_current(mut self, j: f64) -> Self {
        self.torque.j = j;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.t_free > 0.0) {
            return Err(Error::invalid(format!("free-layer thickness must be positive, got {}", self.t_free)));
        }
        if !(self.h >= 0.0 && self.hk >= 0.0) || !self.h.is_finite() || !self.hk.is_finite() {
            return Err(Error::invalid(format!("H and Hk must be finite and >= 0 (H={}, Hk={})", self.h, self.hk)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        Ok(())
    }
}

fn check_threshold_inputs(p: &MacrospinParams) -> Result<()> {
    if p.material.p == 0.0 {
        return Err(Error::invalid("spin polarization P = 0 gives no spin-transfer torque"));
    }
    p.validate()
}

/// Zero-temperature critical current density (A/m^2),
/// `J = 2 e alpha Ms t (H + Hk + 2 pi Ms) / (hbar P)` evaluated in Gaussian
/// units and converted to SI.
pub fn critical_current_density(p: &MacrospinParams) -> Result<f64> {
    check_threshold_inputs(p)?;
    let mat = &p.material;
    // A/m -> emu/cm^3 and A/m -> Oe.
    let ms_emu = mat.ms * 1e-3;
    let to_oe = 4.0 * std::f64::consts::PI * 1e-3;
    let h_oe = p.h * to_oe;
    let hk_oe = p.hk * to_oe;
    let t_cm = p.t_free * 100.0;
    let fields = h_oe + hk_oe + 2.0 * std::f64::consts::PI * ms_emu;
    let j_statamp_cm2 = 2.0 * E_ESU * mat.alpha * ms_emu * t_cm * fields / (HBAR_CGS * mat.p);
    // statA -> A is 10 / c; cm^-2 -> m^-2 is 1e4.
    Ok(j_statamp_cm2 * (10.0 / C_CGS) * 1e4)
}

/// The same threshold written directly in SI: `2 e alpha mu0 Ms t (H + Hk + Ms/2) / (hbar P)`.
pub fn critical_current_density_si(p: &MacrospinParams) -> Result<f64> {
    check_threshold_inputs(p)?;
    let mat = &p.material;
    Ok(2.0 * E_SI * mat.alpha * MU0 * mat.ms * p.t_free * (p.h + p.hk + 0.5 * mat.ms) / (HBAR_SI * mat.p))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MacrospinTrajectory {
    pub times: Vec<f64>,
    pub m: Vec<Vec3>,
}

impl MacrospinTrajectory {
    pub fn last(&self) -> Option<(f64, Vec3)> {
        Some((*self.times.last()?, *self.m.last()?))
    }

    /// Linear interpolation at `t`, clamped to the recorded span.
    pub fn at(&self, t: f64) -> Option<Vec3> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return Some(self.m[0]);
        }
        if k >= n {
            return Some(self.m[n - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let f = (t - t0) / (t1 - t0);
        Some(self.m[k - 1] * (1.0 - f) + self.m[k] * f)
    }
}

/// One spin, its fields and its torque, as plain component arithmetic.
struct Spin<'a> {
    p: &'a MacrospinParams,
    beta: f64,
}

impl Spin<'_> {
    fn field(&self, m: Vec3) -> Vec3 {
        let ms = self.p.material.ms;
        let n = self.p.demag;
        Vec3::new(
            self.p.h + self.p.hk * m.x - ms * n.nx * m.x,
            -ms * n.ny * m.y,
            -ms * n.nz * m.z,
        )
    }

    fn rate(&self, m: Vec3) -> Vec3 {
        let alpha = self.p.material.alpha;
        let tq = &self.p.torque;
        let mut h = self.field(m);
        if self.beta != 0.0 {
            let l2 = tq.lambda * tq.lambda;
            let eps = tq.p * l2 / ((l2 + 1.0) + (l2 - 1.0) * m.dot(tq.mp));
            let mxp = Vec3::new(
                m.y * tq.mp.z - m.z * tq.mp.y,
                m.z * tq.mp.x - m.x * tq.mp.z,
                m.x * tq.mp.y - m.y * tq.mp.x,
            );
            h = h + mxp * (self.beta * eps) + tq.mp * (self.beta * tq.eps_prime);
        }
        // m x (m x h) = (m.h) m - h for |m| = 1.
        let mxh = Vec3::new(m.y * h.z - m.z * h.y, m.z * h.x - m.x * h.z, m.x * h.y - m.y * h.x);
        let along = m * m.dot(h) - h;
        (mxh + along * alpha) * (-self.p.gamma / (1.0 + alpha * alpha))
    }
}

/// Integrates the one-spin equation with classical fourth-order Runge-Kutta
/// at a fixed 10 fs step, renormalizing after each step. Samples every
/// `sample` seconds (and at the end).
pub fn macrospin_trajectory(p: &MacrospinParams, m0: Vec3, duration: f64, sample: f64) -> Result<MacrospinTrajectory> {
    p.validate()?;
    p.torque.validate()?;
    if ((m0.norm() - 1.0).abs()) > 1e-9 {
        return Err(Error::invalid(format!("initial direction must be a unit vector, |m0| = {}", m0.norm())));
    }
    if !(duration >= 0.0) || !(sample > 0.0) {
        return Err(Error::invalid("duration must be >= 0 and sample stride positive"));
    }
    let beta = crate::materials::HBAR / (MU0 * crate::materials::E_CHARGE) * p.torque.j / (p.t_free * p.material.ms);
    let spin = Spin { p, beta };

    let steps = (duration / MACROSPIN_DT).round() as u64;
    let per_sample = ((sample / MACROSPIN_DT).round() as u64).max(1);
    let mut out = MacrospinTrajectory::default();
    let mut m = m0;
    out.times.push(0.0);
    out.m.push(m);
    let h = MACROSPIN_DT;
    for n in 1..=steps {
        let k1 = spin.rate(m);
        let k2 = spin.rate(m + k1 * (0.5 * h));
        let k3 = spin.rate(m + k2 * (0.5 * h));
        let k4 = spin.rate(m + k3 * h);
        let dm = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !dm.is_finite() {
            return Err(Error::NonFinite { cell: 0 });
        }
        // A step that turns the spin by more than a tenth of a radian is
        // outside the fixed-step accuracy regime.
        if dm.norm() > 0.1 {
            return Err(Error::Stiffness { t: (n - 1) as f64 * h, dt: h });
        }
        m = (m + dm).normalized();
        if n % per_sample == 0 || n == steps {
            out.times.push(n as f64 * h);
            out.m.push(m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{cfas, cms, cobalt};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn co_params() -> MacrospinParams {
        MacrospinParams::new(cobalt(), 2e-9)
    }

    #[test]
    fn cobalt_threshold_matches_hand_value() {
        // Hand evaluation in CGS: 2 (4.8032e-10)(0.01)(1400)(2e-7)(2 pi 1400)
        // / (1.05457e-27 * 0.4) = 5.6102e16 statA/cm^2 = 1.8714e11 A/m^2.
        let j = critical_current_density(&co_params()).unwrap();
        assert_relative_eq!(j, 1.8714e11, max_relative = 1e-3);
    }

    #[test]
    fn cgs_and_si_routes_agree() {
        for mat in [cobalt(), cms(), cfas()] {
            let mut p = MacrospinParams::new(mat, 2e-9);
            p.h = 1.2e4;
            p.hk = 3.4e4;
            let a = critical_current_density(&p).unwrap();
            let b = critical_current_density_si(&p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn heusler_thresholds() {
        let co = critical_current_density(&co_params()).unwrap();
        let cms_j = critical_current_density(&MacrospinParams::new(cms(), 2e-9)).unwrap();
        let cfas_j = critical_current_density(&MacrospinParams::new(cfas(), 2e-9)).unwrap();
        // alpha Ms^2 / P relative to cobalt.
        assert_relative_eq!(cms_j / co, (0.008 * 800.0 * 800.0 / 0.56) / (0.01 * 1400.0 * 1400.0 / 0.4), max_relative = 1e-12);
        assert_relative_eq!(cfas_j / co, (0.01 * 900.0 * 900.0 / 0.76) / (0.01 * 1400.0 * 1400.0 / 0.4), max_relative = 1e-12);
    }

    #[test]
    fn zero_polarization_is_rejected() {
        let mut p = co_params();
        p.material.p = 0.0;
        assert!(matches!(critical_current_density(&p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn doubling_alpha_doubles_and_doubling_p_halves() {
        let base = critical_current_density(&co_params()).unwrap();
        let mut p = co_params();
        p.material.alpha *= 2.0;
        assert_eq!(critical_current_density(&p).unwrap(), 2.0 * base);
        let mut p = co_params();
        p.material.p *= 2.0;
        assert_relative_eq!(critical_current_density(&p).unwrap(), base / 2.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn threshold_is_monotone(
            alpha in 1e-3f64..0.1, ms in 1e5f64..2e6, p in 0.1f64..1.0,
            t in 1e-9f64..1e-8, h in 0.0f64..1e5, hk in 0.0f64..1e5, bump in 1.01f64..2.0,
        ) {
            let mut mat = cobalt();
            mat.alpha = alpha;
            mat.ms = ms;
            mat.p = p;
            let mut base = MacrospinParams::new(mat, t);
            base.h = h;
            base.hk = hk;
            let j0 = critical_current_density(&base).unwrap();
            prop_assert!(j0 > 0.0);

            let mut q = base.clone();
            q.material.ms *= bump;
            prop_assert!(critical_current_density(&q).unwrap() > j0);
            let mut q = base.clone();
            q.t_free *= bump;
            prop_assert!(critical_current_density(&q).unwrap() > j0);
            let mut q = base.clone();
            q.h = h * bump + 1.0;
            prop_assert!(critical_current_density(&q).unwrap() > j0);
            let mut q = base.clone();
            q.hk = hk * bump + 1.0;
            prop_assert!(critical_current_density(&q).unwrap() > j0);
            let mut q = base.clone();
            q.material.p = (p * bump).min(1.0);
            prop_assert!(critical_current_density(&q).unwrap() <= j0);
        }
    }

    #[test]
    fn damped_spin_settles_on_easy_axis() {
        let mut p = MacrospinParams::new(cfas(), 2e-9);
        p.material.alpha = 0.1;
        p.hk = 5e4;
        let m0 = Vec3::new(0.9, 0.3, 0.1).normalized();
        let tr = macrospin_trajectory(&p, m0, 5e-9, 1e-11).unwrap();
        let (_, m) = tr.last().unwrap();
        assert!(m.x.abs() > 0.999, "{m:?}");
    }

    #[test]
    fn strong_current_reverses_mx() {
        // In-plane easy axis along x and thin-film demag; the polarizer
        // sits 22.5 degrees from +x, so negative current pushes m away.
        let mut p = MacrospinParams::new(cfas(), 2e-9).with_current(-3e12);
        p.hk = 2e4;
        let m0 = Vec3::new(1.0, 0.01, 0.0).normalized();
        let tr = macrospin_trajectory(&p, m0, 5e-9, 1e-12).unwrap();
        assert!(tr.m.iter().any(|m| m.x < 0.0));
    }

    #[test]
    fn rejects_non_unit_start() {
        let p = co_params();
        assert!(macrospin_trajectory(&p, Vec3::new(2.0, 0.0, 0.0), 1e-12, 1e-12).is_err());
    }

    #[test]
    fn interpolation_hits_samples() {
        let p = co_params();
        let tr = macrospin_trajectory(&p, Vec3::X, 1e-12, 1e-13).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert_eq!(tr.at(tr.times[3]).unwrap(), tr.m[3]);
    }
}
