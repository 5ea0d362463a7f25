//! Right-hand side of the LLG equation with the Slonczewski spin-transfer
//! terms, solved for dm/dt in Landau-Lifshitz form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::materials::{Material, E_CHARGE, HBAR, MU0};
use crate::vec3::Vec3;

/// Default pinned-layer polarization direction, 22.5 degrees off the short arm.
pub const DEFAULT_MP: Vec3 = Vec3::new(0.92, 0.382, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueParams {
    /// Charge current density (A/m^2); negative values destabilize the
    /// state aligned with `mp`.
    pub j: f64,
    /// Unit polarization direction.
    pub mp: Vec3,
    /// Spin polarization.
    pub p: f64,
    /// Slonczewski asymmetry parameter.
    pub lambda: f64,
    /// Secondary (field-like) spin-transfer coefficient.
    pub eps_prime: f64,
    /// Free-layer thickness (m).
    pub t_free: f64,
}

impl TorqueParams {
    /// Zero current with the default polarizer; `mp` is normalized here so
    /// that the printed (0.92, 0.382, 0) direction is a unit vector.
    pub fn new(p: f64, t_free: f64) -> Self {
        TorqueParams {
            j: 0.0,
            mp: DEFAULT_MP.normalized(),
            p,
            lambda: 1.0,
            eps_prime: 0.06,
            t_free,
        }
    }

    pub fn with_current(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if ((self.mp.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::invalid(format!("polarization direction {:?} is not a unit vector", self.mp)));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::invalid(format!("Lambda must be >= 1, got {}", self.lambda)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("P must lie in (0, 1], got {}", self.p)));
        }
        if !(self.t_free > 0.0) || !self.j.is_finite() || !self.eps_prime.is_finite() {
            return Err(Error::invalid("torque parameters must be finite with positive thickness"));
        }
        Ok(())
    }
}

/// Angular efficiency `P L^2 / ((L^2 + 1) + (L^2 - 1) m.mp)`.
pub fn stt_epsilon(m_dot_mp: f64, p: f64, lambda: f64) -> Result<f64> {
    if !(m_dot_mp.abs() <= 1.0 + 1e-9) {
        return Err(Error::invalid(format!("m.mp = {m_dot_mp} outside [-1, 1]")));
    }
    if !(lambda >= 1.0) {
        return Err(Error::invalid(format!("Lambda must be >= 1, got {lambda}")));
    }
    Ok(epsilon_unchecked(m_dot_mp.clamp(-1.0, 1.0), p, lambda))
}

#[inline]
fn epsilon_unchecked(m_dot_mp: f64, p: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    p * l2 / ((l2 + 1.0) + (l2 - 1.0) * m_dot_mp)
}

/// `(hbar / (mu0 e)) J / (t Ms)`, in field units (A/m). Multiplied by the
/// gyromagnetic ratio it becomes the torque rate.
pub fn stt_beta(j: f64, t_free: f64, ms: f64) -> Result<f64> {
    if !(t_free > 0.0) || !(ms > 0.0) {
        return Err(Error::invalid(format!(
            "thickness and Ms must be positive (t={t_free}, Ms={ms})"
        )));
    }
    Ok(HBAR / (MU0 * E_CHARGE) * j / (t_free * ms))
}

/// Per-evaluation constants of the LLG right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct LlgTerms {
    /// `gamma / (1 + alpha^2)`.
    prefactor: f64,
    alpha: f64,
    precession: bool,
    /// `beta`, zero when no current flows.
    beta: f64,
    mp: Vec3,
    p: f64,
    lambda: f64,
    eps_prime: f64,
}

impl LlgTerms {
    pub fn new(gamma: f64, alpha: f64, ms: f64, torque: &TorqueParams) -> Result<Self> {
        Ok(LlgTerms {
            prefactor: gamma / (1.0 + alpha * alpha),
            alpha,
            precession: true,
            beta: stt_beta(torque.j, torque.t_free, ms)?,
            mp: torque.mp,
            p: torque.p,
            lambda: torque.lambda,
            eps_prime: torque.eps_prime,
        })
    }

    /// Pure damping at rate `gamma alpha / (1 + alpha^2)`, no precession, no current.
    pub fn damping_only(gamma: f64, alpha: f64) -> Self {
        LlgTerms {
            prefactor: gamma / (1.0 + alpha * alpha),
            alpha,
            precession: false,
            beta: 0.0,
            mp: Vec3::X,
            p: 1.0,
            lambda: 1.0,
            eps_prime: 0.0,
        }
    }

    /// dm/dt for one cell. The spin-transfer terms enter as an extra field
    /// `beta eps (m x mp) + beta eps' mp` ahead of the Gilbert inversion.
    #[inline]
    pub fn cell(&self, m: Vec3, h: Vec3) -> Vec3 {
        let mut heff = h;
        if self.beta != 0.0 {
            let eps = if self.lambda == 1.0 {
                0.5 * self.p
            } else {
                epsilon_unchecked(m.dot(self.mp).clamp(-1.0, 1.0), self.p, self.lambda)
            };
            heff += m.cross(self.mp) * (self.beta * eps) + self.mp * (self.beta * self.eps_prime);
        }
        let mxh = m.cross(heff);
        let damp = m.cross(mxh) * self.alpha;
        if self.precession {
            (mxh + damp) * -self.prefactor
        } else {
            damp * -self.prefactor
        }
    }

    /// Fills `out` with dm/dt over occupied cells; vacuum stays zero.
    pub fn eval_into(&self, m: &VectorField, h: &VectorField, mask: &[bool], out: &mut VectorField) {
        for (((o, mi), hi), &c) in out.data.iter_mut().zip(&m.data).zip(&h.data).zip(mask) {
            *o = if c { self.cell(*mi, *hi) } else { Vec3::ZERO };
        }
    }
}

/// dm/dt (1/s) for every cell of `m` given the effective field.
pub fn llg_rhs(m: &VectorField, h_eff: &VectorField, mat: &Material, torque: &TorqueParams, gamma: f64) -> Result<VectorField> {
    h_eff.check_shape(&m.mesh)?;
    if let Some(cell) = m.first_non_finite().or_else(|| h_eff.first_non_finite()) {
        return Err(Error::NonFinite { cell });
    }
    let terms = LlgTerms::new(gamma, mat.alpha, mat.ms, torque)?;
    let mut out = VectorField::zeros(m.mesh);
    for ((o, mi), hi) in out.data.iter_mut().zip(&m.data).zip(&h_eff.data) {
        if *mi != Vec3::ZERO {
            *o = terms.cell(*mi, *hi);
        }
    }
    Ok(out)
}
