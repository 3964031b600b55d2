//! FFT-backed derivatives on periodic grid data.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::grid::GridSpec;

#[derive(Clone)]
pub(crate) struct PlanPair {
    pub fwd: Arc<dyn Fft<f64>>,
    pub inv: Arc<dyn Fft<f64>>,
}

static PLANS: LazyLock<Mutex<HashMap<usize, PlanPair>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Forward/inverse plans for size `n`, cached process-wide. The returned
/// handles are cheap to clone and safe to share across threads.
pub(crate) fn plans(n: usize) -> PlanPair {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            PlanPair {
                fwd: planner.plan_fft(n, FftDirection::Forward),
                inv: planner.plan_fft(n, FftDirection::Inverse),
            }
        })
        .clone()
}

/// Reusable buffers for spectral work on one grid size.
pub struct Spectral {
    grid: GridSpec,
    plans: PlanPair,
    k: Vec<f64>,
    buf: Vec<C64>,
    scratch: Vec<C64>,
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let plans = plans(grid.n());
        let scratch_len = plans
            .fwd
            .get_inplace_scratch_len()
            .max(plans.inv.get_inplace_scratch_len());
        Self {
            grid,
            k: grid.wavenumbers(),
            buf: vec![C64::ZERO; grid.n()],
            scratch: vec![C64::ZERO; scratch_len],
            plans,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// First derivative of a periodic sample vector, computed in k-space.
    ///
    /// The Nyquist mode is dropped: for a real-valued profile this keeps the
    /// derivative real, and any state resolved well enough to evolve has no
    /// power there anyway.
    pub fn derivative(&mut self, f: &[C64], out: &mut [C64]) {
        let n = self.grid.n();
        assert_eq!(f.len(), n);
        assert_eq!(out.len(), n);
        self.buf.copy_from_slice(f);
        self.plans.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / n as f64;
        for (j, b) in self.buf.iter_mut().enumerate() {
            let k = if j == n / 2 { 0.0 } else { self.k[j] };
            *b *= C64::new(0.0, k * scale);
        }
        self.plans.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        out.copy_from_slice(&self.buf);
    }

    /// Derivative of a real profile; returns the real part.
    pub fn derivative_real(&mut self, f: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        assert_eq!(f.len(), n);
        assert_eq!(out.len(), n);
        let cplx: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut dcplx = vec![C64::ZERO; n];
        self.derivative(&cplx, &mut dcplx);
        for (o, d) in out.iter_mut().zip(&dcplx) {
            *o = d.re;
        }
    }
}

/// One-shot spectral derivative; allocates, intended for cold paths.
pub fn derivative(grid: GridSpec, f: &[C64]) -> Vec<C64> {
    let mut sp = Spectral::new(grid);
    let mut out = vec![C64::ZERO; grid.n()];
    sp.derivative(f, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn differentiates_plane_wave() {
        let grid = GridSpec::new(0.0, TAU, 64).unwrap();
        let f: Vec<C64> = grid
            .xs()
            .iter()
            .map(|&x| C64::new(0.0, 3.0 * x).exp())
            .collect();
        let df = derivative(grid, &f);
        for (d, f) in df.iter().zip(&f) {
            let expect = C64::new(0.0, 3.0) * f;
            assert!((d - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn differentiates_gaussian_profile() {
        let grid = GridSpec::new(-20.0, 20.0, 512).unwrap();
        let f: Vec<C64> = grid
            .xs()
            .iter()
            .map(|&x| C64::new((-0.5 * x * x).exp(), 0.0))
            .collect();
        let df = derivative(grid, &f);
        for (j, &x) in grid.xs().iter().enumerate() {
            let expect = -x * (-0.5 * x * x).exp();
            assert!((df[j].re - expect).abs() < 1e-12, "at x = {x}");
            assert!(df[j].im.abs() < 1e-12);
        }
    }
}
