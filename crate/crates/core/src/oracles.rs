//! Closed-form reference solutions.
//!
//! Everything here is derived by hand and kept independent of the spectral
//! machinery, so the test suites can check the solvers against formulas
//! rather than against themselves.

use crate::Units;

/// A normal density, used for pointer and packet bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1d {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian1d {
    pub fn density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Normalized pointwise product of two normal densities.
///
/// This is the shape of a state conditioned on a noisy position record:
/// precisions add, the mean is the precision-weighted average.
pub fn density_product(a: Gaussian1d, b: Gaussian1d) -> Gaussian1d {
    let (pa, pb) = (1.0 / (a.sd * a.sd), 1.0 / (b.sd * b.sd));
    let var = 1.0 / (pa + pb);
    Gaussian1d { mean: var * (pa * a.mean + pb * b.mean), sd: var.sqrt() }
}

/// Density of the sum of independent draws: means add, variances add.
pub fn independent_sum(a: Gaussian1d, b: Gaussian1d) -> Gaussian1d {
    Gaussian1d { mean: a.mean + b.mean, sd: (a.sd * a.sd + b.sd * b.sd).sqrt() }
}

/// Free Gaussian packet: spreading width, drifting center, and the flow that
/// carries density samples along exact characteristics.
///
/// The packet `exp(-(x - x0)^2 / 4 s0^2 + i k0 x)` has position sd `s0`.
#[derive(Debug, Clone, Copy)]
pub struct FreeGaussian {
    pub x0: f64,
    pub s0: f64,
    pub k0: f64,
    pub units: Units,
}

impl FreeGaussian {
    /// `hbar / (2 m s0^2)`, the inverse time scale of the spreading.
    pub fn spread_rate(&self) -> f64 {
        self.units.hbar_over_m() / (2.0 * self.s0 * self.s0)
    }

    pub fn width(&self, t: f64) -> f64 {
        let bt = self.spread_rate() * t;
        self.s0 * (1.0 + bt * bt).sqrt()
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.units.hbar_over_m() * self.k0 * t
    }

    pub fn density(&self, t: f64) -> Gaussian1d {
        Gaussian1d { mean: self.center(t), sd: self.width(t) }
    }

    /// Flow velocity `v0 + (x - center) * beta^2 t / (1 + beta^2 t^2)`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let b = self.spread_rate();
        let bt = b * t;
        self.units.hbar_over_m() * self.k0 + (x - self.center(t)) * b * bt / (1.0 + bt * bt)
    }

    /// The path through `x_start` at `t = 0`: comoving offsets scale with the
    /// width, so the flow never crosses itself.
    pub fn characteristic(&self, x_start: f64, t: f64) -> f64 {
        self.center(t) + (x_start - self.x0) * self.width(t) / self.s0
    }
}

/// Coherent state in a harmonic trap: a rigidly oscillating Gaussian.
#[derive(Debug, Clone, Copy)]
pub struct TrappedCoherent {
    pub omega: f64,
    pub x0: f64,
    pub k0: f64,
    pub units: Units,
}

impl TrappedCoherent {
    /// Ground-state position sd `sqrt(hbar / 2 m omega)`; constant in time.
    pub fn width(&self) -> f64 {
        (self.units.hbar / (2.0 * self.units.mass * self.omega)).sqrt()
    }

    pub fn center(&self, t: f64) -> f64 {
        let v0 = self.units.hbar_over_m() * self.k0;
        self.x0 * (self.omega * t).cos() + v0 / self.omega * (self.omega * t).sin()
    }

    /// The flow is a uniform translation: every point moves at the center's
    /// speed, independent of `x`.
    pub fn velocity(&self, t: f64) -> f64 {
        let v0 = self.units.hbar_over_m() * self.k0;
        -self.x0 * self.omega * (self.omega * t).sin() + v0 * (self.omega * t).cos()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_gaussian_frozen_values() {
        let f = FreeGaussian { x0: 0.0, s0: 1.0, k0: 0.0, units: Units::default() };
        assert!((f.spread_rate() - 0.5).abs() < 1e-15);
        assert!((f.width(2.0) - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((f.velocity(1.0, 2.0) - 0.25).abs() < 1e-15);
        assert!((f.characteristic(1.0, 2.0) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    // d/dt of a characteristic must equal the flow velocity along it; this
    // ties the two formulas together without either depending on a solver.
    #[test]
    fn characteristics_integrate_the_velocity_field() {
        let f = FreeGaussian { x0: -1.0, s0: 0.8, k0: 1.5, units: Units::default() };
        let h = 1e-6;
        for x_start in [-3.0, -1.0, 0.0, 0.7, 2.0] {
            for t in [0.1, 0.5, 1.3, 2.9] {
                let xdot =
                    (f.characteristic(x_start, t + h) - f.characteristic(x_start, t - h)) / (2.0 * h);
                let v = f.velocity(f.characteristic(x_start, t), t);
                assert!((xdot - v).abs() < 1e-8, "x_start = {x_start}, t = {t}");
            }
        }
    }

    #[test]
    fn product_matches_lattice_computation() {
        let a = Gaussian1d { mean: 0.4, sd: 1.1 };
        let b = Gaussian1d { mean: -0.9, sd: 0.6 };
        let p = density_product(a, b);
        // moments of the pointwise product, integrated on a fine lattice
        let dx = 1e-3;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        let mut x = -10.0;
        while x < 10.0 {
            let w = a.density(x) * b.density(x);
            z += w;
            m1 += w * x;
            m2 += w * x * x;
            x += dx;
        }
        let mean = m1 / z;
        let sd = (m2 / z - mean * mean).sqrt();
        assert!((mean - p.mean).abs() < 1e-9);
        assert!((sd - p.sd).abs() < 1e-9);
    }

    #[test]
    fn sum_adds_variances() {
        let a = Gaussian1d { mean: 1.0, sd: 3.0 };
        let b = Gaussian1d { mean: -2.0, sd: 4.0 };
        let s = independent_sum(a, b);
        assert!((s.mean - -1.0).abs() < 1e-15);
        assert!((s.sd - 5.0).abs() < 1e-15);
    }

    #[test]
    fn coherent_frozen_values() {
        let c = TrappedCoherent { omega: 2.0, x0: 1.0, k0: 0.0, units: Units::default() };
        assert!((c.width() - 0.5) < 1e-15);
        assert!((c.period() - std::f64::consts::PI).abs() < 1e-15);
        // quarter period: all displacement traded for speed
        let tq = c.period() / 4.0;
        assert!(c.center(tq).abs() < 1e-12);
        assert!((c.velocity(tq) - -2.0).abs() < 1e-12);
    }
}
