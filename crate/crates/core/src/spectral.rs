//! Real-to-complex d-dimensional transforms on a [`Lattice`].
//!
//! The last axis is transformed real-to-complex, leaving `n/2 + 1` complex
//! coefficients per row ("half spectrum"); the remaining axes are transformed
//! complex-to-complex. [`SpectralPlan::forward`] is the plain DFT
//! `F[f](k) = sum_x f(x) e^{-i k.x}` with no spacing weight; the inverse
//! includes the `1/N` factor. Continuum-normalised transforms (`f_hat(0) = int f`)
//! are obtained by multiplying the forward result by `h^d`.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::lattice::Lattice;

const BATCH: usize = 16;

pub struct SpectralPlan {
    lattice: Lattice,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("lattice", &self.lattice)
            .finish_non_exhaustive()
    }
}

/// Scratch buffers for one thread of spectral work.
pub struct SpectralWorkspace {
    pub spectrum: Vec<Complex64>,
    lines: Vec<Complex64>,
    scratch: Vec<Complex64>,
    row: Vec<f64>,
}

impl SpectralPlan {
    pub fn new(lattice: &Lattice) -> Self {
        let n = lattice.side();
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let half = n / 2 + 1;
        let mut plan = Self {
            lattice: lattice.clone(),
            half,
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            fwd: cplx.plan_fft_forward(n),
            inv: cplx.plan_fft_inverse(n),
            k2: Vec::new(),
        };
        plan.k2 = plan.symbol_table(|k: f64| k * k);
        plan
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Number of stored half-spectrum coefficients.
    pub fn spectrum_len(&self) -> usize {
        self.lattice.cell_count() / self.lattice.side() * self.half
    }

    pub fn half_side(&self) -> usize {
        self.half
    }

    pub fn workspace(&self) -> SpectralWorkspace {
        let n = self.lattice.side();
        let scratch_len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
            .max(self.r2c.get_scratch_len())
            .max(self.c2r.get_scratch_len());
        SpectralWorkspace {
            spectrum: vec![Complex64::default(); self.spectrum_len()],
            lines: vec![Complex64::default(); BATCH * n],
            scratch: vec![Complex64::default(); scratch_len],
            row: vec![0.0; n],
        }
    }

    /// Angular wavenumber of storage index `j` on a full axis.
    #[inline]
    fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.lattice.signed(j) as f64 / self.lattice.period()
    }

    /// Builds a half-spectrum table of `sum_i f(k_i)`.
    pub fn symbol_table(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.lattice.side();
        let d = self.lattice.dim();
        let full: Vec<f64> = (0..n).map(|j| f(self.wavenumber(j))).collect();
        let last: Vec<f64> = (0..self.half)
            .map(|j| f(2.0 * PI * j as f64 / self.lattice.period()))
            .collect();
        let rows = self.spectrum_len() / self.half;
        let mut out = Vec::with_capacity(self.spectrum_len());
        for r in 0..rows {
            let mut rest = r;
            let mut acc = 0.0;
            for _ in 0..d - 1 {
                acc += full[rest % n];
                rest /= n;
            }
            out.extend(last.iter().map(|v| acc + v));
        }
        out
    }

    /// |xi|^2 on the half spectrum.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Symbol of the (2d+1)-point Laplacian, `(2/h^2) sum_i (1 - cos h xi_i)`.
    pub fn discrete_symbol(&self) -> Vec<f64> {
        let h = self.lattice.spacing();
        self.symbol_table(|k| 2.0 * (1.0 - (h * k).cos()) / (h * h))
    }

    /// Wave vector of a half-spectrum index.
    pub fn wavevector(&self, idx: usize) -> Vec<f64> {
        let n = self.lattice.side();
        let d = self.lattice.dim();
        let mut out = vec![0.0; d];
        out[d - 1] = 2.0 * PI * (idx % self.half) as f64 / self.lattice.period();
        let mut rest = idx / self.half;
        for axis in (0..d - 1).rev() {
            out[axis] = self.wavenumber(rest % n);
            rest /= n;
        }
        out
    }

    /// Multiplicity of a half-spectrum index in the full spectrum.
    #[inline]
    pub fn multiplicity(&self, idx: usize) -> f64 {
        let j = idx % self.half;
        if j == 0 || 2 * j == self.lattice.side() {
            1.0
        } else {
            2.0
        }
    }

    /// `sum_k f(k)` over the full spectrum for a Hermitian-even table on the half spectrum.
    pub fn full_sum(&self, table: &[f64]) -> f64 {
        let mut acc = crate::stats::summation::NeumaierSum::default();
        for (i, v) in table.iter().enumerate() {
            acc.add(self.multiplicity(i) * v);
        }
        acc.value()
    }

    /// Plain forward DFT of a real field into `ws.spectrum`.
    pub fn forward(&self, input: &[f64], ws: &mut SpectralWorkspace) -> Result<()> {
        self.lattice.check_field(input)?;
        let n = self.lattice.side();
        let m = self.half;
        for (r, chunk) in input.chunks_exact(n).enumerate() {
            ws.row.copy_from_slice(chunk);
            let out = &mut ws.spectrum[r * m..(r + 1) * m];
            self.r2c
                .process_with_scratch(&mut ws.row, out, &mut ws.scratch)
                .expect("r2c lengths are fixed by the plan");
        }
        for axis in (0..self.lattice.dim() - 1).rev() {
            self.transform_axis(axis, true, ws);
        }
        Ok(())
    }

    /// Inverse DFT of `ws.spectrum` (destroyed) into a real field, including `1/N`.
    pub fn inverse(&self, ws: &mut SpectralWorkspace, out: &mut [f64]) -> Result<()> {
        self.lattice.check_field(out)?;
        let n = self.lattice.side();
        let m = self.half;
        for axis in 0..self.lattice.dim() - 1 {
            self.transform_axis(axis, false, ws);
        }
        let scale = 1.0 / self.lattice.cell_count() as f64;
        for (r, chunk) in out.chunks_exact_mut(n).enumerate() {
            let spec = &mut ws.spectrum[r * m..(r + 1) * m];
            spec[0].im = 0.0;
            spec[m - 1].im = 0.0;
            self.c2r
                .process_with_scratch(spec, chunk, &mut ws.scratch)
                .expect("c2r lengths are fixed by the plan");
            for v in chunk.iter_mut() {
                *v *= scale;
            }
        }
        Ok(())
    }

    /// `out = F^{-1}[multiplier * F[input]]` for a real half-spectrum multiplier.
    pub fn filter(
        &self,
        input: &[f64],
        multiplier: &[f64],
        out: &mut [f64],
        ws: &mut SpectralWorkspace,
    ) -> Result<()> {
        if multiplier.len() != self.spectrum_len() {
            return Err(crate::error::Error::ShapeMismatch {
                expected: self.spectrum_len(),
                got: multiplier.len(),
            });
        }
        self.forward(input, ws)?;
        for (c, m) in ws.spectrum.iter_mut().zip(multiplier) {
            *c *= *m;
        }
        self.inverse(ws, out)
    }

    fn transform_axis(&self, axis: usize, forward: bool, ws: &mut SpectralWorkspace) {
        let n = self.lattice.side();
        let d = self.lattice.dim();
        let stride = self.half * n.pow((d - 2 - axis) as u32);
        let outer = n.pow(axis as u32);
        let fft = if forward { &self.fwd } else { &self.inv };
        let SpectralWorkspace {
            spectrum,
            lines,
            scratch,
            ..
        } = ws;
        for o in 0..outer {
            let base = o * n * stride;
            let mut i = 0;
            while i < stride {
                let b = BATCH.min(stride - i);
                for j in 0..n {
                    let src = &spectrum[base + j * stride + i..base + j * stride + i + b];
                    for (l, v) in src.iter().enumerate() {
                        lines[l * n + j] = *v;
                    }
                }
                fft.process_with_scratch(&mut lines[..b * n], scratch);
                for j in 0..n {
                    let dst = &mut spectrum[base + j * stride + i..base + j * stride + i + b];
                    for (l, v) in dst.iter_mut().enumerate() {
                        *v = lines[l * n + j];
                    }
                }
                i += b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(lat: &Lattice, f: &[f64], k: &[f64]) -> Complex64 {
        let mut acc = Complex64::default();
        for (idx, v) in f.iter().enumerate() {
            let x = lat.position(idx);
            let phase: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
            acc += Complex64::from_polar(*v, -phase);
        }
        acc
    }

    fn test_field(lat: &Lattice) -> Vec<f64> {
        (0..lat.cell_count())
            .map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.3)
            .collect()
    }

    #[test]
    fn forward_matches_naive_dft() {
        let lat = Lattice::new(3, 8, 0.5).unwrap();
        let plan = SpectralPlan::new(&lat);
        let f = test_field(&lat);
        let mut ws = plan.workspace();
        plan.forward(&f, &mut ws).unwrap();
        for idx in [0, 1, 4, 5, 17, 33, plan.spectrum_len() - 1] {
            let k = plan.wavevector(idx);
            let want = naive_dft(&lat, &f, &k);
            assert!((ws.spectrum[idx] - want).norm() < 1e-10, "idx {idx}");
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let lat = Lattice::new(4, 8, 1.0).unwrap();
        let plan = SpectralPlan::new(&lat);
        let f = test_field(&lat);
        let mut ws = plan.workspace();
        let mut back = vec![0.0; f.len()];
        plan.forward(&f, &mut ws).unwrap();
        plan.inverse(&mut ws, &mut back).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn constants_pass_through_exactly() {
        let lat = Lattice::new(3, 16, 0.25).unwrap();
        let plan = SpectralPlan::new(&lat);
        let mut ws = plan.workspace();
        let f = vec![1.3; lat.cell_count()];
        let ones = vec![1.0; plan.spectrum_len()];
        let mut out = vec![0.0; f.len()];
        plan.filter(&f, &ones, &mut out, &mut ws).unwrap();
        assert!(out.iter().all(|&v| v == 1.3));
    }

    #[test]
    fn full_sum_counts_conjugate_pairs() {
        let lat = Lattice::new(3, 8, 1.0).unwrap();
        let plan = SpectralPlan::new(&lat);
        let ones = vec![1.0; plan.spectrum_len()];
        assert_eq!(plan.full_sum(&ones), lat.cell_count() as f64);
        let k2 = plan.full_sum(plan.k2());
        let axis: f64 = (0..8).map(|j| plan.wavenumber(j).powi(2)).sum();
        assert!((k2 - 3.0 * 64.0 * axis).abs() < 1e-9 * k2);
    }
}
