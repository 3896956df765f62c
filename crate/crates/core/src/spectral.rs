//! FFT-based operators on periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Symbol used for the heat semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatSymbol {
    /// `exp(-|k|² t/2)`: exact for band-limited data.
    #[default]
    Continuum,
    /// `exp(-t Σ_a (1 - cos(k_a Δx))/Δx²)`: the lattice heat semigroup,
    /// which maps nonnegative samples to nonnegative samples.
    Lattice,
}

/// Precomputed FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    lattice: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Scratch buffers reused across transforms.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let dk = PI / grid.half_width();
        let wavenumbers: Vec<f64> =
            (0..n).map(|j| if j < n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk }).collect();
        let k2 = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                (0..grid.dim()).map(|a| wavenumbers[idx[a]].powi(2)).sum()
            })
            .collect();
        let dx = grid.spacing();
        let lattice = (0..grid.len())
            .map(|flat| {
                let idx = grid.unravel(flat);
                (0..grid.dim()).map(|a| 2.0 * (1.0 - (wavenumbers[idx[a]] * dx).cos()) / (dx * dx)).sum()
            })
            .collect();
        Self { grid: *grid, fft, ifft, wavenumbers, k2, lattice }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Squared wavenumber magnitude per flat spectral index.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    fn prepare(&self, ws: &mut Workspace) {
        let len = self.grid.len();
        let n = self.grid.points_per_axis();
        let scratch = self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len());
        ws.buf.resize(len, Complex64::default());
        ws.scratch.resize(scratch, Complex64::default());
        ws.line.resize(n, Complex64::default());
    }

    fn transform(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], ws: &mut Workspace) {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        plan.process_with_scratch(data, &mut ws.scratch);
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, c) in ws.line.iter_mut().enumerate() {
                        *c = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut ws.line, &mut ws.scratch);
                    for (j, c) in ws.line.iter().enumerate() {
                        data[base + j * stride] = *c;
                    }
                }
            }
        }
    }

    fn forward_buf(&self, ws: &mut Workspace) {
        let mut buf = std::mem::take(&mut ws.buf);
        self.transform(&self.fft, &mut buf, ws);
        ws.buf = buf;
    }

    fn inverse_buf(&self, ws: &mut Workspace) {
        let mut buf = std::mem::take(&mut ws.buf);
        self.transform(&self.ifft, &mut buf, ws);
        let scale = 1.0 / self.grid.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        ws.buf = buf;
    }

    /// Forward transform of real samples.
    pub fn forward_real(&self, values: &[f64], ws: &mut Workspace) -> Vec<Complex64> {
        self.prepare(ws);
        for (c, &v) in ws.buf.iter_mut().zip(values) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward_buf(ws);
        ws.buf.clone()
    }

    /// Multiplies the spectrum of `values` by a real multiplier, in place.
    pub fn apply_real(&self, values: &mut [f64], multiplier: &[f64], ws: &mut Workspace) {
        self.prepare(ws);
        for (c, &v) in ws.buf.iter_mut().zip(values.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward_buf(ws);
        for (c, &m) in ws.buf.iter_mut().zip(multiplier) {
            *c *= m;
        }
        self.inverse_buf(ws);
        for (v, c) in values.iter_mut().zip(ws.buf.iter()) {
            *v = c.re;
        }
    }

    /// Multiplies the spectrum of `values` by a complex multiplier, in place.
    pub fn apply_complex(&self, values: &mut [f64], multiplier: &[Complex64], ws: &mut Workspace) {
        self.prepare(ws);
        for (c, &v) in ws.buf.iter_mut().zip(values.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward_buf(ws);
        for (c, &m) in ws.buf.iter_mut().zip(multiplier) {
            *c *= m;
        }
        self.inverse_buf(ws);
        for (v, c) in values.iter_mut().zip(ws.buf.iter()) {
            *v = c.re;
        }
    }

    /// Filters two real arrays with the same real multiplier using one
    /// complex transform pair.
    pub fn apply_real_pair(&self, a: &mut [f64], b: &mut [f64], multiplier: &[f64], ws: &mut Workspace) {
        self.prepare(ws);
        for ((c, &x), &y) in ws.buf.iter_mut().zip(a.iter()).zip(b.iter()) {
            *c = Complex64::new(x, y);
        }
        self.forward_buf(ws);
        for (c, &m) in ws.buf.iter_mut().zip(multiplier) {
            *c *= m;
        }
        self.inverse_buf(ws);
        for ((x, y), c) in a.iter_mut().zip(b.iter_mut()).zip(ws.buf.iter()) {
            *x = c.re;
            *y = c.im;
        }
    }

    /// Multiplier `exp(-|k|² t / 2)` of the heat semigroup.
    pub fn heat_multiplier(&self, t: f64) -> Vec<f64> {
        self.heat_multiplier_with(HeatSymbol::Continuum, t)
    }

    pub fn heat_multiplier_with(&self, symbol: HeatSymbol, t: f64) -> Vec<f64> {
        let sym = match symbol {
            HeatSymbol::Continuum => &self.k2,
            HeatSymbol::Lattice => &self.lattice,
        };
        sym.iter().map(|&s| (-0.5 * s * t).exp()).collect()
    }

    /// Spectral partial derivative along `axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, values: &[f64], axis: usize, ws: &mut Workspace) -> Vec<f64> {
        assert!(axis < self.grid.dim(), "axis out of range");
        let n = self.grid.points_per_axis();
        self.prepare(ws);
        for (c, &v) in ws.buf.iter_mut().zip(values.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward_buf(ws);
        for (flat, c) in ws.buf.iter_mut().enumerate() {
            let j = self.grid.unravel(flat)[axis];
            let k = if j == n / 2 { 0.0 } else { self.wavenumbers[j] };
            *c *= Complex64::new(0.0, k);
        }
        self.inverse_buf(ws);
        ws.buf.iter().map(|c| c.re).collect()
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, values: &[f64], ws: &mut Workspace) -> Vec<f64> {
        let mult: Vec<f64> = self.k2.iter().map(|&k2| -k2).collect();
        let mut out = values.to_vec();
        self.apply_real(&mut out, &mult, ws);
        out
    }

    /// Transform of a kernel sampled in centered layout (origin at index
    /// `N/2` per axis), scaled by the cell volume so that multiplying a
    /// field's spectrum by it realizes the box-rule convolution.
    pub fn kernel_spectrum(&self, centered: &[f64], ws: &mut Workspace) -> Vec<Complex64> {
        let wrapped = self.wrap(centered);
        let mut spec = self.forward_real(&wrapped, ws);
        let vol = self.grid.cell_volume();
        for c in spec.iter_mut() {
            *c *= vol;
        }
        spec
    }

    /// Reorders centered samples so that the origin sits at flat index 0.
    pub fn wrap(&self, centered: &[f64]) -> Vec<f64> {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        let mut out = vec![0.0; centered.len()];
        for (flat, &v) in centered.iter().enumerate() {
            let idx = self.grid.unravel(flat);
            let mut shifted = [0usize; 3];
            for a in 0..d {
                shifted[a] = (idx[a] + n / 2) % n;
            }
            out[self.grid.ravel(&shifted)] = v;
        }
        out
    }

    /// Periodic convolution with a precomputed kernel spectrum.
    pub fn convolve(&self, values: &[f64], spectrum: &[Complex64], ws: &mut Workspace) -> Vec<f64> {
        let mut out = values.to_vec();
        self.apply_complex(&mut out, spectrum, ws);
        out
    }

    /// Box-rule periodic autocorrelation `∫ f(x + y) f(y) dy` in centered layout.
    pub fn autocorrelation(&self, centered: &[f64], ws: &mut Workspace) -> Vec<f64> {
        let wrapped = self.wrap(centered);
        self.prepare(ws);
        for (c, &v) in ws.buf.iter_mut().zip(wrapped.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.forward_buf(ws);
        let vol = self.grid.cell_volume();
        for c in ws.buf.iter_mut() {
            *c = Complex64::new(c.norm_sqr() * vol, 0.0);
        }
        self.inverse_buf(ws);
        let acf: Vec<f64> = ws.buf.iter().map(|c| c.re).collect();
        // wrap is an involution for even N
        self.wrap(&acf)
    }
}
