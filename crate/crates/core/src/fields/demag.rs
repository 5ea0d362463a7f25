//! Demagnetizing field by zero-padded spectral convolution of the Newell
//! tensor, plus a direct pairwise summation used as an independent check.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::newell::{cell_tensor, Tensor6};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::mesh::{Mask, Mesh};
use crate::vec3::Vec3;

/// Largest padded grid we are willing to allocate (cells).
const MAX_PADDED_CELLS: usize = 1 << 26;

fn padded(n: usize) -> usize {
    if n > 1 {
        2 * n
    } else {
        1
    }
}

/// Signed cell offset represented by padded index `i`; `None` for the
/// wrap-around slot that no pair of real cells can reach.
fn offset_of(i: usize, n: usize, p: usize) -> Option<i64> {
    if i < n {
        Some(i as i64)
    } else if i > p - n {
        Some(i as i64 - p as i64)
    } else {
        None
    }
}

/// Precomputed spectral demagnetization kernel for one mesh.
///
/// Spectral arrays use the layout `[kz][kx][ky]` (ky fastest) so that the
/// y transforms run as one batched call per z plane.
pub struct DemagKernel {
    mesh: Mesh,
    /// Padded sizes.
    px: usize,
    py: usize,
    pz: usize,
    /// Spectral length along x after the real transform.
    hx: usize,
    /// Self-interaction tensor `N(0)`.
    self_tensor: Tensor6,
    /// Spectra of `[xx, yy, zz, xy, xz, yz]`, scaled by 1/(px py pz). The
    /// padded kernel has definite parity in every axis, so these are real.
    spectra: [Vec<f64>; 6],
    /// Whether the xz/yz couplings vanish (single layer).
    planar: bool,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    fft_z: Arc<dyn Fft<f64>>,
    ifft_z: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DemagKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagKernel")
            .field("mesh", &self.mesh)
            .field("padded", &(self.px, self.py, self.pz))
            .field("self_tensor", &self.self_tensor)
            .finish()
    }
}

/// Scratch buffers for one convolution; reused across evaluations.
#[derive(Debug, Default, Clone)]
pub struct DemagScratch {
    spec: [Vec<Complex64>; 3],
    line_re: Vec<f64>,
    line_c: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl DemagKernel {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let (px, py, pz) = (padded(mesh.nx), padded(mesh.ny), padded(mesh.nz));
        let total = px.checked_mul(py).and_then(|v| v.checked_mul(pz));
        match total {
            Some(t) if t <= MAX_PADDED_CELLS => {}
            _ => {
                return Err(Error::Resource(format!(
                    "padded demag grid {px}x{py}x{pz} exceeds {MAX_PADDED_CELLS} cells"
                )))
            }
        }
        let hx = px / 2 + 1;
        let d = [mesh.dx, mesh.dy, mesh.dz];

        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let mut kernel = DemagKernel {
            mesh: *mesh,
            px,
            py,
            pz,
            hx,
            self_tensor: cell_tensor([0, 0, 0], d),
            spectra: Default::default(),
            planar: mesh.nz == 1,
            r2c: real.plan_fft_forward(px),
            c2r: real.plan_fft_inverse(px),
            fft_y: cplx.plan_fft_forward(py),
            ifft_y: cplx.plan_fft_inverse(py),
            fft_z: cplx.plan_fft_forward(pz),
            ifft_z: cplx.plan_fft_inverse(pz),
        };

        let mut real_space = vec![[0.0f64; 6]; px * py * pz];
        for k in 0..pz {
            let Some(oz) = offset_of(k, mesh.nz, pz) else { continue };
            for j in 0..py {
                let Some(oy) = offset_of(j, mesh.ny, py) else { continue };
                for i in 0..px {
                    let Some(ox) = offset_of(i, mesh.nx, px) else { continue };
                    real_space[i + px * (j + py * k)] = cell_tensor([ox, oy, oz], d);
                }
            }
        }

        let scale = 1.0 / (px * py * pz) as f64;
        let mut scratch = DemagScratch::default();
        let mut spec = vec![Complex64::default(); hx * py * pz];
        let mut largest = 0.0f64;
        for c in 0..6 {
            spec.iter_mut().for_each(|v| *v = Complex64::default());
            kernel.forward(|i, j, k| real_space[i + px * (j + py * k)][c], py, pz, &mut spec, &mut scratch);
            largest = spec.iter().map(|v| v.norm()).fold(largest, f64::max);
            debug_assert!(
                spec.iter().all(|v| v.im.abs() <= 1e-9 * largest.max(1.0)),
                "kernel spectrum of component {c} is not real"
            );
            kernel.spectra[c] = spec.iter().map(|v| v.re * scale).collect();
        }
        Ok(kernel)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn self_tensor(&self) -> Tensor6 {
        self.self_tensor
    }

    fn scratch_len(&self) -> usize {
        self.r2c
            .get_scratch_len()
            .max(self.c2r.get_scratch_len())
            .max(self.fft_y.get_inplace_scratch_len())
            .max(self.fft_z.get_inplace_scratch_len())
    }

    #[inline]
    fn at(&self, kx: usize, ky: usize, kz: usize) -> usize {
        ky + self.py * (kx + self.hx * kz)
    }

    /// Forward 3-D transform of `value(i, j, k)`, which is nonzero only for
    /// `j < ny_src`, `k < nz_src`. `spec` must be zero on entry.
    fn forward(&self, value: impl Fn(usize, usize, usize) -> f64, ny_src: usize, nz_src: usize, spec: &mut [Complex64], s: &mut DemagScratch) {
        let (px, py, hx) = (self.px, self.py, self.hx);
        s.line_re.resize(px, 0.0);
        s.line_c.resize(hx, Complex64::default());
        s.fft_scratch.resize(self.scratch_len(), Complex64::default());
        for k in 0..nz_src {
            for j in 0..ny_src {
                for i in 0..px {
                    s.line_re[i] = value(i, j, k);
                }
                self.r2c
                    .process_with_scratch(&mut s.line_re, &mut s.line_c, &mut s.fft_scratch)
                    .expect("buffer sizes fixed at construction");
                for kx in 0..hx {
                    spec[self.at(kx, j, k)] = s.line_c[kx];
                }
            }
        }
        if py > 1 {
            let plane = hx * py;
            self.fft_y
                .process_with_scratch(&mut spec[..plane * nz_src], &mut s.fft_scratch);
        }
        self.transform_z(spec, false, s);
    }

    fn transform_z(&self, spec: &mut [Complex64], inverse: bool, s: &mut DemagScratch) {
        let (py, pz, hx) = (self.py, self.pz, self.hx);
        if pz == 1 {
            return;
        }
        let fft = if inverse { &self.ifft_z } else { &self.fft_z };
        let plane = hx * py;
        s.line_c.resize(pz.max(hx), Complex64::default());
        for idx in 0..plane {
            for k in 0..pz {
                s.line_c[k] = spec[idx + plane * k];
            }
            fft.process_with_scratch(&mut s.line_c[..pz], &mut s.fft_scratch);
            for k in 0..pz {
                spec[idx + plane * k] = s.line_c[k];
            }
        }
    }

    /// `H_d = -N * (Ms m)`, written into `out` and zeroed outside `mask`.
    pub fn field_into(&self, m: &VectorField, ms: f64, mask: &Mask, out: &mut VectorField, s: &mut DemagScratch) -> Result<()> {
        m.check_shape(&self.mesh)?;
        out.check_shape(&self.mesh)?;
        if mask.cells.len() != self.mesh.len() {
            return Err(Error::invalid("mask does not match demag kernel mesh"));
        }
        let (nx, ny, nz) = (self.mesh.nx, self.mesh.ny, self.mesh.nz);
        let (px, py, hx) = (self.px, self.py, self.hx);
        let len = hx * py * self.pz;
        s.fft_scratch.resize(self.scratch_len(), Complex64::default());

        let mut spec = std::mem::take(&mut s.spec);
        for (c, buf) in spec.iter_mut().enumerate() {
            buf.clear();
            buf.resize(len, Complex64::default());
            let data = &m.data;
            self.forward(
                |i, j, k| if i < nx { ms * data[i + nx * (j + ny * k)][c] } else { 0.0 },
                ny,
                nz,
                buf,
                s,
            );
        }

        let [nxx, nyy, nzz, nxy, nxz, nyz] = &self.spectra;
        {
            let [sx, sy, sz] = &mut spec;
            if self.planar {
                for q in 0..len {
                    let (mx, my) = (sx[q], sy[q]);
                    sx[q] = mx * nxx[q] + my * nxy[q];
                    sy[q] = mx * nxy[q] + my * nyy[q];
                    sz[q] *= nzz[q];
                }
            } else {
                for q in 0..len {
                    let (mx, my, mz) = (sx[q], sy[q], sz[q]);
                    sx[q] = mx * nxx[q] + my * nxy[q] + mz * nxz[q];
                    sy[q] = mx * nxy[q] + my * nyy[q] + mz * nyz[q];
                    sz[q] = mx * nxz[q] + my * nyz[q] + mz * nzz[q];
                }
            }
        }

        s.line_re.resize(px, 0.0);
        s.line_c.resize(hx.max(self.pz), Complex64::default());
        for (c, buf) in spec.iter_mut().enumerate() {
            self.transform_z(buf, true, s);
            if py > 1 {
                self.ifft_y
                    .process_with_scratch(&mut buf[..hx * py * nz], &mut s.fft_scratch);
            }
            for k in 0..nz {
                for j in 0..ny {
                    for kx in 0..hx {
                        s.line_c[kx] = buf[self.at(kx, j, k)];
                    }
                    // The x-line is the transform of real data: DC and Nyquist are real.
                    s.line_c[0].im = 0.0;
                    if px % 2 == 0 {
                        s.line_c[hx - 1].im = 0.0;
                    }
                    self.c2r
                        .process_with_scratch(&mut s.line_c[..hx], &mut s.line_re, &mut s.fft_scratch)
                        .expect("buffer sizes fixed at construction");
                    let row = nx * (j + ny * k);
                    for i in 0..nx {
                        let v = &mut out.data[row + i];
                        let h = if mask.get(row + i) { -s.line_re[i] } else { 0.0 };
                        match c {
                            0 => v.x = h,
                            1 => v.y = h,
                            _ => v.z = h,
                        }
                    }
                }
            }
        }
        s.spec = spec;
        Ok(())
    }

    pub fn field(&self, m: &VectorField, ms: f64, mask: &Mask) -> Result<VectorField> {
        let mut out = VectorField::zeros(self.mesh);
        self.field_into(m, ms, mask, &mut out, &mut DemagScratch::default())?;
        Ok(out)
    }
}

/// `-N * v` for a symmetric tensor.
pub fn apply_tensor(n: &Tensor6, v: Vec3) -> Vec3 {
    Vec3::new(
        n[0] * v.x + n[3] * v.y + n[4] * v.z,
        n[3] * v.x + n[1] * v.y + n[5] * v.z,
        n[4] * v.x + n[5] * v.y + n[2] * v.z,
    )
}

/// O(n^2) pairwise Newell summation. Shares only the tensor formula with the
/// spectral path.
pub fn demag_field_direct(m: &VectorField, ms: f64, mask: &Mask) -> VectorField {
    let mesh = m.mesh;
    let d = [mesh.dx, mesh.dy, mesh.dz];
    let mut out = VectorField::zeros(mesh);
    for t in 0..mesh.len() {
        if !mask.get(t) {
            continue;
        }
        let (ti, tj, tk) = mesh.coords(t);
        let mut h = Vec3::ZERO;
        for s in 0..mesh.len() {
            if m.data[s] == Vec3::ZERO {
                continue;
            }
            let (si, sj, sk) = mesh.coords(s);
            let n = cell_tensor(
                [ti as i64 - si as i64, tj as i64 - sj as i64, tk as i64 - sk as i64],
                d,
            );
            h -= apply_tensor(&n, m.data[s] * ms);
        }
        out.data[t] = h;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Mesh};

    fn rand_state(mesh: Mesh, mask: &Mask, seed: u64) -> VectorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        VectorField::from_fn(mesh, mask, |_| {
            Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalized()
        })
    }

    fn max_rel_diff(a: &VectorField, b: &VectorField) -> f64 {
        let scale = b.data.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (*x - *y).max_abs())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn single_cube_cell() {
        let mesh = build_mesh(2e-9, 2e-9, 2e-9, 2e-9).unwrap();
        let k = DemagKernel::new(&mesh).unwrap();
        let n = k.self_tensor();
        assert!((n[0] - 1.0 / 3.0).abs() < 1e-12);
        let mask = Mask::full(&mesh);
        let m = VectorField::uniform(mesh, &mask, Vec3::Z);
        let h = k.field(&m, 3.0, &mask).unwrap();
        assert!((h.data[0].z + 1.0).abs() < 1e-12, "{:?}", h.data[0]);
    }

    #[test]
    fn spectral_matches_direct_sum_2d() {
        let mesh = Mesh::new([5, 4, 1], [2e-9, 3e-9, 1e-9]).unwrap();
        let mut mask = Mask::full(&mesh);
        mask.cells[3] = false;
        mask.cells[11] = false;
        let k = DemagKernel::new(&mesh).unwrap();
        let m = rand_state(mesh, &mask, 7);
        let fast = k.field(&m, 8e5, &mask).unwrap();
        let slow = demag_field_direct(&m, 8e5, &mask);
        assert!(max_rel_diff(&fast, &slow) < 1e-10);
    }

    #[test]
    fn spectral_matches_direct_sum_3d() {
        let mesh = Mesh::new([3, 4, 3], [1e-9, 1e-9, 2e-9]).unwrap();
        let mask = Mask::full(&mesh);
        let k = DemagKernel::new(&mesh).unwrap();
        let m = rand_state(mesh, &mask, 9);
        let fast = k.field(&m, 1.0, &mask).unwrap();
        let slow = demag_field_direct(&m, 1.0, &mask);
        assert!(max_rel_diff(&fast, &slow) < 1e-10);
    }

    #[test]
    fn odd_single_axis_grids() {
        for n in [[1, 5, 1], [7, 1, 1], [1, 1, 4]] {
            let mesh = Mesh::new(n, [1e-9; 3]).unwrap();
            let mask = Mask::full(&mesh);
            let k = DemagKernel::new(&mesh).unwrap();
            let m = rand_state(mesh, &mask, 3);
            let fast = k.field(&m, 1.0, &mask).unwrap();
            let slow = demag_field_direct(&m, 1.0, &mask);
            assert!(max_rel_diff(&fast, &slow) < 1e-10, "{n:?}");
        }
    }

    #[test]
    fn thin_film_limits() {
        let mesh = Mesh::new([64, 64, 1], [2e-9, 2e-9, 2e-9]).unwrap();
        let mask = Mask::full(&mesh);
        let k = DemagKernel::new(&mesh).unwrap();
        let ms = 8e5;
        let centre = mesh.index(32, 32, 0);

        let h = k.field(&VectorField::uniform(mesh, &mask, Vec3::Z), ms, &mask).unwrap();
        assert!(((h.data[centre].z + ms) / ms).abs() < 0.02, "{:?}", h.data[centre]);

        let h = k.field(&VectorField::uniform(mesh, &mask, Vec3::X), ms, &mask).unwrap();
        assert!(h.data[centre].norm() <= 0.05 * ms, "{:?}", h.data[centre]);
    }

    #[test]
    fn zero_magnetization_gives_zero_field() {
        let mesh = Mesh::new([4, 3, 1], [1e-9; 3]).unwrap();
        let mask = Mask::full(&mesh);
        let k = DemagKernel::new(&mesh).unwrap();
        let h = k.field(&VectorField::zeros(mesh), 1e6, &mask).unwrap();
        assert!(h.data.iter().all(|v| *v == Vec3::ZERO));
    }

    #[test]
    fn vacuum_cells_are_exactly_zero() {
        let mesh = Mesh::new([6, 6, 1], [2e-9; 3]).unwrap();
        let mut mask = Mask::full(&mesh);
        for i in [0, 5, 17, 30] {
            mask.cells[i] = false;
        }
        let k = DemagKernel::new(&mesh).unwrap();
        let m = rand_state(mesh, &mask, 1);
        let h = k.field(&m, 1e6, &mask).unwrap();
        for i in [0, 5, 17, 30] {
            assert_eq!(h.data[i], Vec3::ZERO);
        }
    }

    #[test]
    fn reciprocity() {
        let mesh = Mesh::new([7, 5, 2], [2e-9, 2e-9, 1e-9]).unwrap();
        let mask = Mask::full(&mesh);
        let k = DemagKernel::new(&mesh).unwrap();
        let a = rand_state(mesh, &mask, 11);
        let b = rand_state(mesh, &mask, 12);
        let ha = k.field(&a, 1.0, &mask).unwrap();
        let hb = k.field(&b, 1.0, &mask).unwrap();
        let ab: f64 = a.data.iter().zip(&hb.data).map(|(m, h)| m.dot(*h)).sum();
        let ba: f64 = b.data.iter().zip(&ha.data).map(|(m, h)| m.dot(*h)).sum();
        assert!(((ab - ba) / ab.abs().max(ba.abs())).abs() < 1e-8, "{ab} {ba}");
    }

    #[test]
    fn demag_energy_is_positive_semidefinite() {
        // -sum m . H_d >= 0 for any m: the magnetostatic self energy cannot be negative.
        let mesh = Mesh::new([5, 5, 1], [2e-9; 3]).unwrap();
        let mask = Mask::full(&mesh);
        for seed in 0..20 {
            let m = rand_state(mesh, &mask, seed);
            let h = demag_field_direct(&m, 1.0, &mask);
            let e: f64 = -m.data.iter().zip(&h.data).map(|(m, h)| m.dot(*h)).sum::<f64>();
            assert!(e >= 0.0, "seed {seed}: {e}");
        }
    }

    #[test]
    fn absurd_grid_is_a_resource_error() {
        let mesh = Mesh::new([100_000, 100_000, 10], [1e-9; 3]).unwrap();
        assert!(matches!(DemagKernel::new(&mesh), Err(Error::Resource(_))));
    }
}
