use crate::error::{Error, Result};
use crate::mesh::{Mask, Mesh, Region, RegionLabels};
use crate::vec3::Vec3;

/// Per-cell 3-vectors on a mesh: magnetization (unit vectors) or a field (A/m).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub mesh: Mesh,
    pub data: Vec<Vec3>,
}

impl VectorField {
    pub fn zeros(mesh: Mesh) -> Self {
        VectorField {
            data: vec![Vec3::ZERO; mesh.len()],
            mesh,
        }
    }

    /// Uniform value on occupied cells, zero in vacuum.
    pub fn uniform(mesh: Mesh, mask: &Mask, v: Vec3) -> Self {
        let data = mask.cells.iter().map(|&c| if c { v } else { Vec3::ZERO }).collect();
        VectorField { mesh, data }
    }

    pub fn from_fn(mesh: Mesh, mask: &Mask, mut f: impl FnMut(usize) -> Vec3) -> Self {
        let data = (0..mesh.len())
            .map(|i| if mask.get(i) { f(i) } else { Vec3::ZERO })
            .collect();
        VectorField { mesh, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn check_shape(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh.nx != mesh.nx || self.mesh.ny != mesh.ny || self.mesh.nz != mesh.nz || self.data.len() != mesh.len() {
            return Err(Error::invalid(format!(
                "field shape {}x{}x{} does not match mesh {}x{}x{}",
                self.mesh.nx, self.mesh.ny, self.mesh.nz, mesh.nx, mesh.ny, mesh.nz
            )));
        }
        Ok(())
    }

    /// Renormalizes occupied cells to unit length and zeroes vacuum.
    pub fn normalize(&mut self, mask: &Mask) {
        for (v, &c) in self.data.iter_mut().zip(&mask.cells) {
            *v = if c { v.normalized() } else { Vec3::ZERO };
        }
    }

    pub fn max_norm_deviation(&self, mask: &Mask) -> f64 {
        self.data
            .iter()
            .zip(&mask.cells)
            .filter(|(_, &c)| c)
            .map(|(v, _)| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self, mask: &Mask) -> Vec3 {
        self.mean_where(|i| mask.get(i))
    }

    pub fn mean_in(&self, regions: &RegionLabels, pred: impl Fn(Region) -> bool) -> Vec3 {
        self.mean_where(|i| pred(regions.labels[i]))
    }

    fn mean_where(&self, pred: impl Fn(usize) -> bool) -> Vec3 {
        let mut sum = Vec3::ZERO;
        let mut n = 0usize;
        for (i, v) in self.data.iter().enumerate() {
            if pred(i) {
                sum += *v;
                n += 1;
            }
        }
        if n == 0 {
            Vec3::ZERO
        } else {
            sum / n as f64
        }
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

impl std::ops::Index<usize> for VectorField {
    type Output = Vec3;
    fn index(&self, i: usize) -> &Vec3 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for VectorField {
    fn index_mut(&mut self, i: usize) -> &mut Vec3 {
        &mut self.data[i]
    }
}
