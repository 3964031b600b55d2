//! Uniform periodic spatial grid.

use crate::error::{Error, Result};

/// Uniform grid of `n` points on the periodic domain `[x_min, x_max)`.
///
/// `x_max` is identified with `x_min`; grid points sit at
/// `x_j = x_min + j * dx` for `j = 0..n`. `n` must be a power of two (the
/// propagator and all derivatives go through an FFT) and at least
/// [`GridSpec::MIN_POINTS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::EmptyDomain { x_min, x_max });
        }
        if n < Self::MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::BadGridSize { n, min: Self::MIN_POINTS });
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        self.x_min + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Whether `x` lies in the primary domain `[x_min, x_max)`.
    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x >= self.x_min && x < self.x_max
    }

    /// Cell index and fractional offset for interpolation: returns `(j, t)`
    /// with `x = x_j + t * dx`, `0 <= t < 1`. `None` outside the domain.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let u = (x - self.x_min) / self.dx();
        let j = (u.floor() as usize).min(self.n - 1);
        Some((j, u - j as f64))
    }

    /// Wrap an index onto the periodic grid.
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n as isize) as usize
    }

    /// FFT-ordered angular wavenumbers `2 pi m / L`, with `m = j` for
    /// `j < n/2` and `m = j - n` otherwise.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = std::f64::consts::TAU / self.length();
        (0..self.n)
            .map(|j| {
                let m = if j < self.n / 2 { j as isize } else { j as isize - self.n as isize };
                m as f64 * dk
            })
            .collect()
    }
}
