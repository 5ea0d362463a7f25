//! Regular finite-difference grid and the cross-shaped free-layer geometry.
//!
//! Cells are indexed x-fastest: `idx = i + nx * (j + ny * k)`. The cross is
//! the union of two rectangles centered in the mesh bounding box: the short
//! arm runs along x, the long arm along y, and both share a `w x w` block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nanometre in metres.
pub const NM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub origin: [f64; 3],
}

impl Mesh {
    pub fn new(n: [usize; 3], d: [f64; 3]) -> Result<Self> {
        if n.contains(&0) {
            return Err(Error::invalid(format!("cell counts must be >= 1, got {n:?}")));
        }
        if d.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("cell sizes must be positive, got {d:?}")));
        }
        Ok(Mesh {
            nx: n[0],
            ny: n[1],
            nz: n[2],
            dx: d[0],
            dy: d[1],
            dz: d[2],
            origin: [0.0; 3],
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.nx as f64 * self.dx,
            self.ny as f64 * self.dy,
            self.nz as f64 * self.dz,
        ]
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dy,
            self.origin[2] + (k as f64 + 0.5) * self.dz,
        ]
    }
}

/// Builds a mesh covering `box_x x box_y x box_z` with cubic-ish cells of
/// edge `cell`. Counts are rounded to the nearest integer; a film no thicker
/// than one cell becomes a single layer with `dz = box_z`.
pub fn build_mesh(box_x: f64, box_y: f64, box_z: f64, cell: f64) -> Result<Mesh> {
    for (name, v) in [("box_x", box_x), ("box_y", box_y), ("box_z", box_z), ("cell", cell)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let count = |len: f64| ((len / cell).round() as usize).max(1);
    let (nz, dz) = if box_z <= cell {
        (1, box_z)
    } else {
        (count(box_z), cell)
    };
    Mesh::new([count(box_x), count(box_y), nz], [cell, cell, dz])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSpec {
    /// Arm width (m).
    pub w: f64,
    /// Short-arm length along x (m).
    pub l1: f64,
    /// Long-arm length along y (m).
    pub l2: f64,
}

impl Default for CrossSpec {
    fn default() -> Self {
        CrossSpec {
            w: 50.0 * NM,
            l1: 100.0 * NM,
            l2: 140.0 * NM,
        }
    }
}

impl CrossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) {
            return Err(Error::invalid(format!("arm width must be positive, got {}", self.w)));
        }
        if self.l1 < self.w || self.l2 < self.w {
            return Err(Error::invalid(format!(
                "arm lengths must be >= width (w={}, l1={}, l2={})",
                self.w, self.l1, self.l2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    ShortArm,
    LongArm,
    Overlap,
    Vacuum,
}

impl Region {
    pub fn in_short_arm(self) -> bool {
        matches!(self, Region::ShortArm | Region::Overlap)
    }

    pub fn in_long_arm(self) -> bool {
        matches!(self, Region::LongArm | Region::Overlap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn full(mesh: &Mesh) -> Self {
        Mask {
            cells: vec![true; mesh.len()],
        }
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.cells[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabels {
    pub labels: Vec<Region>,
}

impl RegionLabels {
    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&r| r == region).count()
    }

    pub fn to_mask(&self) -> Mask {
        Mask {
            cells: self.labels.iter().map(|&r| r != Region::Vacuum).collect(),
        }
    }
}

/// Half-open interval test `[lo, hi)` with a small tolerance so that arm
/// edges falling exactly on cell centers resolve the same way on every
/// platform.
fn inside(c: f64, lo: f64, hi: f64, tol: f64) -> bool {
    c >= lo - tol && c < hi - tol
}

fn check_fit(mesh: &Mesh, spec: &CrossSpec) -> Result<()> {
    spec.validate()?;
    let [ex, ey, _] = mesh.extent();
    let slack = 1e-6 * mesh.dx.min(mesh.dy);
    if spec.l1 > ex + slack || spec.w > ey + slack {
        return Err(Error::invalid(format!(
            "short arm {:.3e} x {:.3e} m does not fit in mesh {:.3e} x {:.3e} m",
            spec.l1, spec.w, ex, ey
        )));
    }
    if spec.w > ex + slack || spec.l2 > ey + slack {
        return Err(Error::invalid(format!(
            "long arm {:.3e} x {:.3e} m does not fit in mesh {:.3e} x {:.3e} m",
            spec.w, spec.l2, ex, ey
        )));
    }
    Ok(())
}

/// Labels every cell by which arm rectangle(s) contain its center.
pub fn arm_regions(mesh: &Mesh, spec: &CrossSpec) -> Result<RegionLabels> {
    check_fit(mesh, spec)?;
    let [ex, ey, _] = mesh.extent();
    let cx = mesh.origin[0] + 0.5 * ex;
    let cy = mesh.origin[1] + 0.5 * ey;
    let tol = 1e-6 * mesh.dx.min(mesh.dy);
    let labels = (0..mesh.len())
        .map(|idx| {
            let [x, y, _] = mesh.cell_center(idx);
            let short = inside(x, cx - 0.5 * spec.l1, cx + 0.5 * spec.l1, tol)
                && inside(y, cy - 0.5 * spec.w, cy + 0.5 * spec.w, tol);
            let long = inside(x, cx - 0.5 * spec.w, cx + 0.5 * spec.w, tol)
                && inside(y, cy - 0.5 * spec.l2, cy + 0.5 * spec.l2, tol);
            match (short, long) {
                (true, true) => Region::Overlap,
                (true, false) => Region::ShortArm,
                (false, true) => Region::LongArm,
                (false, false) => Region::Vacuum,
            }
        })
        .collect();
    Ok(RegionLabels { labels })
}

pub fn cross_mask(mesh: &Mesh, spec: &CrossSpec) -> Result<Mask> {
    Ok(arm_regions(mesh, spec)?.to_mask())
}

/// Mesh plus cross geometry, computed once and shared read-only.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub mesh: Mesh,
    pub cross: CrossSpec,
    pub mask: Mask,
    pub regions: RegionLabels,
}

impl Geometry {
    pub fn new(mesh: Mesh, cross: CrossSpec) -> Result<Self> {
        let regions = arm_regions(&mesh, &cross)?;
        let mask = regions.to_mask();
        Ok(Geometry {
            mesh,
            cross,
            mask,
            regions,
        })
    }

    /// 100 x 140 x 2 nm box, 2 nm cells, default cross.
    pub fn default_cross() -> Self {
        let mesh = build_mesh(100.0 * NM, 140.0 * NM, 2.0 * NM, 2.0 * NM).expect("static geometry");
        Geometry::new(mesh, CrossSpec::default()).expect("static geometry")
    }

    /// Every cell occupied, every cell in the overlap. Useful for single
    /// cells and test films.
    pub fn full(mesh: Mesh) -> Self {
        let n = mesh.len();
        let [ex, ey, _] = mesh.extent();
        Geometry {
            mesh,
            cross: CrossSpec {
                w: ex.min(ey),
                l1: ex,
                l2: ey,
            },
            mask: Mask::full(&mesh),
            regions: RegionLabels {
                labels: vec![Region::Overlap; n],
            },
        }
    }
}
