//! Effective field `H_eff = H_ex + H_d + H_applied` and the matching energies.

pub mod demag;
pub mod exchange;
pub mod newell;

use std::sync::Arc;

pub use demag::{demag_field_direct, DemagKernel, DemagScratch};
pub use exchange::{exchange_energy, exchange_field};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::materials::{Material, MU0};
use crate::mesh::{Mask, Mesh};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energies {
    pub exchange: f64,
    pub demag: f64,
    pub zeeman: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.exchange + self.demag + self.zeeman
    }
}

/// Evaluates the effective field for one mesh/material pair. Holds the demag
/// kernel (shareable between sessions) and private scratch buffers.
#[derive(Debug, Clone)]
pub struct FieldSolver {
    mesh: Mesh,
    mask: Mask,
    material: Material,
    kernel: Arc<DemagKernel>,
    applied: Vec3,
    scratch: DemagScratch,
    demag_buf: VectorField,
}

impl FieldSolver {
    pub fn new(mesh: Mesh, mask: Mask, material: Material, applied: Vec3) -> Result<Self> {
        let kernel = Arc::new(DemagKernel::new(&mesh)?);
        Self::with_kernel(kernel, mask, material, applied)
    }

    pub fn with_kernel(kernel: Arc<DemagKernel>, mask: Mask, material: Material, applied: Vec3) -> Result<Self> {
        let mesh = *kernel.mesh();
        if mask.cells.len() != mesh.len() {
            return Err(Error::invalid("mask does not match mesh"));
        }
        material.validate()?;
        Ok(FieldSolver {
            mesh,
            mask,
            material,
            kernel,
            applied,
            scratch: DemagScratch::default(),
            demag_buf: VectorField::zeros(mesh),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn kernel(&self) -> &Arc<DemagKernel> {
        &self.kernel
    }

    pub fn applied(&self) -> Vec3 {
        self.applied
    }

    pub fn set_applied(&mut self, h: Vec3) {
        self.applied = h;
    }

    /// Writes `H_eff` into `out`; vacuum cells are zero.
    pub fn effective_field_into(&mut self, m: &VectorField, out: &mut VectorField) -> Result<()> {
        m.check_shape(&self.mesh)?;
        self.kernel
            .field_into(m, self.material.ms, &self.mask, out, &mut self.scratch)?;
        exchange::add_exchange_field(&self.mesh, &self.mask, &self.material, m, out);
        if self.applied != Vec3::ZERO {
            for (h, &c) in out.data.iter_mut().zip(&self.mask.cells) {
                if c {
                    *h += self.applied;
                }
            }
        }
        Ok(())
    }

    pub fn effective_field(&mut self, m: &VectorField) -> Result<VectorField> {
        let mut out = VectorField::zeros(self.mesh);
        self.effective_field_into(m, &mut out)?;
        Ok(out)
    }

    pub fn demag_field(&mut self, m: &VectorField) -> Result<VectorField> {
        let mut out = VectorField::zeros(self.mesh);
        self.kernel
            .field_into(m, self.material.ms, &self.mask, &mut out, &mut self.scratch)?;
        Ok(out)
    }

    /// Total energy (J) from a state and its effective field, without a new
    /// field evaluation.
    pub fn total_energy_from_field(&self, m: &VectorField, h_eff: &VectorField) -> f64 {
        let mut sum = 0.0;
        for ((mi, h), &c) in m.data.iter().zip(&h_eff.data).zip(&self.mask.cells) {
            if c {
                sum += 0.5 * mi.dot(*h) + 0.5 * mi.dot(self.applied);
            }
        }
        -MU0 * self.material.ms * self.mesh.cell_volume() * sum
    }

    pub fn energies(&mut self, m: &VectorField) -> Result<Energies> {
        m.check_shape(&self.mesh)?;
        let mut hd = std::mem::replace(&mut self.demag_buf, VectorField::zeros(self.mesh));
        self.kernel
            .field_into(m, self.material.ms, &self.mask, &mut hd, &mut self.scratch)?;
        let v = self.mesh.cell_volume();
        let ms = self.material.ms;
        let mut demag = 0.0;
        let mut zeeman = 0.0;
        for ((mi, h), &c) in m.data.iter().zip(&hd.data).zip(&self.mask.cells) {
            if c {
                demag += mi.dot(*h);
                zeeman += mi.dot(self.applied);
            }
        }
        self.demag_buf = hd;
        Ok(Energies {
            exchange: exchange_energy(&self.mesh, &self.mask, &self.material, m),
            demag: -0.5 * MU0 * ms * v * demag,
            zeeman: -MU0 * ms * v * zeeman,
        })
    }
}

/// One-shot effective field; builds a fresh demag kernel.
pub fn effective_field(mesh: &Mesh, mask: &Mask, mat: &Material, m: &VectorField, applied: Vec3) -> Result<VectorField> {
    FieldSolver::new(*mesh, mask.clone(), mat.clone(), applied)?.effective_field(m)
}

/// One-shot `(E_exchange, E_demag, E_zeeman)` in joules.
pub fn energy_terms(mesh: &Mesh, mask: &Mask, mat: &Material, m: &VectorField, applied: Vec3) -> Result<Energies> {
    FieldSolver::new(*mesh, mask.clone(), mat.clone(), applied)?.energies(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{cfas, cms};
    use crate::mesh::build_mesh;
    use rand::{Rng, SeedableRng};

    fn cube() -> (Mesh, Mask) {
        let mesh = build_mesh(2e-9, 2e-9, 2e-9, 2e-9).unwrap();
        let mask = Mask::full(&mesh);
        (mesh, mask)
    }

    #[test]
    fn single_cell_self_demag_only() {
        let (mesh, mask) = cube();
        let mat = cfas();
        let m = VectorField::uniform(mesh, &mask, Vec3::Z);
        let h = effective_field(&mesh, &mask, &mat, &m, Vec3::ZERO).unwrap();
        assert!((h.data[0] - Vec3::new(0.0, 0.0, -mat.ms / 3.0)).norm() < 1e-9 * mat.ms);
    }

    #[test]
    fn applied_plus_self_demag() {
        let (mesh, mask) = cube();
        let mat = cfas();
        let dir = Vec3::new(0.6, 0.0, 0.8);
        let happ = Vec3::new(1e4, -2e4, 5e3);
        let m = VectorField::uniform(mesh, &mask, dir);
        let h = effective_field(&mesh, &mask, &mat, &m, happ).unwrap();
        let expected = happ - dir * (mat.ms / 3.0);
        assert!((h.data[0] - expected).norm() < 1e-9 * mat.ms);
    }

    #[test]
    fn linear_in_applied_field() {
        let mesh = build_mesh(10e-9, 6e-9, 2e-9, 2e-9).unwrap();
        let mask = Mask::full(&mesh);
        let mat = cms();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = VectorField::from_fn(mesh, &mask, |_| {
            Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalized()
        });
        let (h1, h2) = (Vec3::new(1e3, 0.0, 2e3), Vec3::new(-5e2, 7e2, 0.0));
        let mut solver = FieldSolver::new(mesh, mask, mat, h1 + h2).unwrap();
        let both = solver.effective_field(&m).unwrap();
        solver.set_applied(h1);
        let one = solver.effective_field(&m).unwrap();
        for (a, b) in both.data.iter().zip(&one.data) {
            assert!((*a - (*b + h2)).norm() < 1e-6);
        }
    }

    #[test]
    fn single_cell_energies() {
        let (mesh, mask) = cube();
        let mat = cfas();
        let v = mesh.cell_volume();
        let m = VectorField::uniform(mesh, &mask, Vec3::X);
        let e = energy_terms(&mesh, &mask, &mat, &m, Vec3::ZERO).unwrap();
        assert_eq!(e.exchange, 0.0);
        let expected = MU0 / 6.0 * mat.ms * mat.ms * v;
        assert!(((e.demag - expected) / expected).abs() < 1e-12);
        assert_eq!(e.zeeman, 0.0);

        let e = energy_terms(&mesh, &mask, &mat, &m, Vec3::X * 5e4).unwrap();
        let expected = -MU0 * mat.ms * 5e4 * v;
        assert!(((e.zeeman - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn exchange_field_is_energy_gradient() {
        let mesh = build_mesh(8e-9, 8e-9, 2e-9, 2e-9).unwrap();
        let mask = Mask::full(&mesh);
        let mat = cfas();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = VectorField::from_fn(mesh, &mask, |_| {
            Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalized()
        });
        let h = exchange_field(&mesh, &mask, &mat, &m).unwrap();
        let v = mesh.cell_volume();
        for cell in 0..mesh.len() {
            for c in 0..3 {
                let eps = 1e-6;
                let mut plus = m.clone();
                let mut minus = m.clone();
                let bump = match c {
                    0 => Vec3::X,
                    1 => Vec3::Y,
                    _ => Vec3::Z,
                } * eps;
                plus.data[cell] += bump;
                minus.data[cell] -= bump;
                let grad = (exchange_energy(&mesh, &mask, &mat, &plus) - exchange_energy(&mesh, &mask, &mat, &minus)) / (2.0 * eps);
                let expected = -MU0 * mat.ms * v * h.data[cell][c];
                let scale = expected.abs().max(1e-3 * MU0 * mat.ms * v * h.data[cell].norm());
                assert!((grad - expected).abs() <= 1e-6 * scale, "cell {cell} comp {c}: {grad} vs {expected}");
            }
        }
    }
}
