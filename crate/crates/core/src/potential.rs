//! External potentials with closed-form gradients.
//!
//! The gradient is needed analytically: the propagation step that also
//! returns the spatial derivative of the state differentiates the potential
//! phase factor by hand rather than spending another transform on it.

use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Free,
    Harmonic { omega: f64 },
    GaussianBarrier { height: f64, width: f64, center: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Potential::GaussianBarrier { height, width, center } => {
                let u = (x - center) / width;
                height * (-0.5 * u * u).exp()
            }
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => omega * omega * x,
            Potential::GaussianBarrier { height, width, center } => {
                let u = (x - center) / width;
                -height * u / width * (-0.5 * u * u).exp()
            }
        }
    }

    pub fn values_on(&self, grid: GridSpec) -> Vec<f64> {
        (0..grid.n()).map(|j| self.value(grid.x(j))).collect()
    }

    pub fn gradients_on(&self, grid: GridSpec) -> Vec<f64> {
        (0..grid.n()).map(|j| self.gradient(grid.x(j))).collect()
    }
}
