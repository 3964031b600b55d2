//! Guidance laws and the interpolated velocity fields they induce.

use num_complex::Complex64 as C64;

use crate::grid::GridSpec;
use crate::wavefunction::{flux_from_derivative, quantum_flux, FluxField, WaveFunction};
use crate::Units;

/// Nodes where `rho` falls below this fraction of its peak carry no usable
/// velocity; trajectories that wander there are censored rather than guessed.
pub const DENSITY_FLOOR_REL: f64 = 1e-12;

/// How a velocity field is read off the state.
///
/// Every law here reproduces the Born statistics of the state it guides:
/// `Bohmian` transports `rho` by construction, and `ConstantOffset` adds a
/// divergence-free current, which in one dimension means a constant.
/// `LinearOffset` deliberately breaks that property and exists so the
/// continuity diagnostic has something to reject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityLaw {
    /// `v = j / rho`.
    Bohmian,
    /// `v = (j + epsilon) / rho`.
    ConstantOffset { epsilon: f64 },
    /// `v = (j + slope * x) / rho`; its current offset has divergence `slope`.
    LinearOffset { slope: f64 },
}

impl VelocityLaw {
    pub fn offset_current(&self, x: f64) -> f64 {
        match *self {
            VelocityLaw::Bohmian => 0.0,
            VelocityLaw::ConstantOffset { epsilon } => epsilon,
            VelocityLaw::LinearOffset { slope } => slope * x,
        }
    }

    /// Divergence of the current offset, known in closed form so diagnostics
    /// never differentiate the offset numerically.
    pub fn offset_divergence(&self) -> f64 {
        match *self {
            VelocityLaw::Bohmian | VelocityLaw::ConstantOffset { .. } => 0.0,
            VelocityLaw::LinearOffset { slope } => slope,
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        self.offset_divergence() == 0.0
    }

    pub fn label(&self) -> &'static str {
        match self {
            VelocityLaw::Bohmian => "bohmian",
            VelocityLaw::ConstantOffset { .. } => "constant_offset",
            VelocityLaw::LinearOffset { .. } => "linear_offset",
        }
    }
}

/// A law velocity sampled on the grid, with a validity mask where the
/// density is thick enough to divide by.
#[derive(Debug, Clone)]
pub struct VelocityField {
    grid: GridSpec,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl VelocityField {
    /// Wraps precomputed node values; lengths must match the grid.
    pub fn from_nodes(grid: GridSpec, v: Vec<f64>, valid: Vec<bool>) -> Self {
        assert_eq!(v.len(), grid.n());
        assert_eq!(valid.len(), grid.n());
        Self { grid, v, valid }
    }

    pub fn from_flux(flux: &FluxField, law: VelocityLaw) -> Self {
        Self::from_flux_with_floor(flux, law, DENSITY_FLOOR_REL)
    }

    pub fn from_flux_with_floor(flux: &FluxField, law: VelocityLaw, rel_floor: f64) -> Self {
        let grid = flux.grid();
        let floor = rel_floor * flux.rho.iter().cloned().fold(0.0f64, f64::max);
        let n = grid.n();
        let mut v = vec![f64::NAN; n];
        let mut valid = vec![false; n];
        for j in 0..n {
            if flux.rho[j] > floor {
                v[j] = (flux.j[j] + law.offset_current(grid.x(j))) / flux.rho[j];
                valid[j] = true;
            }
        }
        Self { grid, v, valid }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Node value, NaN where invalid.
    pub fn node(&self, j: usize) -> f64 {
        self.v[j]
    }

    pub fn valid_at(&self, j: usize) -> bool {
        self.valid[j]
    }

    /// Cubic interpolation on the four nodes around `x`; `None` outside the
    /// domain or where any stencil node is masked.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (j, t) = self.grid.locate(x)?;
        let j = j as isize;
        let idx = [
            self.grid.wrap(j - 1),
            self.grid.wrap(j),
            self.grid.wrap(j + 1),
            self.grid.wrap(j + 2),
        ];
        if idx.iter().any(|&i| !self.valid[i]) {
            return None;
        }
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -t * (t + 1.0) * (t - 2.0) / 2.0,
            t * (t + 1.0) * (t - 1.0) / 6.0,
        ];
        Some(idx.iter().zip(w).map(|(&i, w)| w * self.v[i]).sum())
    }
}

pub fn velocity_field(psi: &WaveFunction, units: Units, law: VelocityLaw) -> VelocityField {
    VelocityField::from_flux(&quantum_flux(psi, units), law)
}

/// Same field under a caller-chosen support cut instead of the default
/// floor.
pub fn velocity_field_with_floor(
    psi: &WaveFunction,
    units: Units,
    law: VelocityLaw,
    rho_floor_rel: f64,
) -> VelocityField {
    VelocityField::from_flux_with_floor(&quantum_flux(psi, units), law, rho_floor_rel)
}

pub fn velocity_field_from_derivative(
    psi: &WaveFunction,
    dpsi: &[C64],
    units: Units,
    law: VelocityLaw,
) -> VelocityField {
    VelocityField::from_flux(&flux_from_derivative(psi, dpsi, units), law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::FreeGaussian;

    fn grid() -> GridSpec {
        GridSpec::new(-20.0, 20.0, 1024).unwrap()
    }

    // At t = 0 a real-enveloped packet with momentum k0 has v = hbar k0 / m
    // everywhere the density is defined; offsets shift it by eps / rho.
    #[test]
    fn laws_agree_with_closed_forms_on_a_packet() {
        let grid = grid();
        let units = Units::default();
        let psi = WaveFunction::gaussian(grid, 0.0, 1.0, 2.0).unwrap();
        let rho0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();

        let vb = velocity_field(&psi, units, VelocityLaw::Bohmian);
        assert!((vb.eval(0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!((vb.eval(1.3).unwrap() - 2.0).abs() < 1e-9);

        let eps = 0.2;
        let vc = velocity_field(&psi, units, VelocityLaw::ConstantOffset { epsilon: eps });
        assert!((vc.eval(0.0).unwrap() - (2.0 + eps / rho0)).abs() < 1e-9);

        let vl = velocity_field(&psi, units, VelocityLaw::LinearOffset { slope: 0.5 });
        assert!((vl.eval(0.0).unwrap() - 2.0).abs() < 1e-9);
        // check at an exact node: off-node eval would fold in interpolation
        // error of the convex 1/rho factor
        let x1 = grid.x(538);
        let rho1 = rho0 * (-0.5 * x1 * x1).exp();
        assert!((vl.eval(x1).unwrap() - (2.0 + 0.5 * x1 / rho1)).abs() < 1e-9);
    }

    #[test]
    fn spreading_packet_velocity_matches_oracle() {
        let grid = grid();
        let units = Units::default();
        let f = FreeGaussian { x0: 0.0, s0: 1.0, k0: 0.0, units };
        let t = 2.0;
        let mut psi = WaveFunction::gaussian(grid, f.x0, f.s0, f.k0).unwrap();
        let mut op = crate::dynamics::SplitOperator::new(
            grid,
            &crate::potential::Potential::Free,
            units,
            t / 16.0,
        )
        .unwrap();
        op.evolve(&mut psi, 16);
        let field = velocity_field(&psi, units, VelocityLaw::Bohmian);
        for x in [-3.0, -1.1, 0.0, 0.7, 2.4] {
            let got = field.eval(x).unwrap();
            let want = f.velocity(x, t);
            assert!((got - want).abs() < 1e-8, "x = {x}: got {got}, want {want}");
        }
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let grid = GridSpec::new(0.0, 16.0, 16).unwrap();
        let cubic = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 5.0;
        let field = VelocityField::from_nodes(
            grid,
            (0..16).map(|j| cubic(grid.x(j))).collect(),
            vec![true; 16],
        );
        // interior points whose full stencil stays off the wrap-around seam
        for x in [1.5, 2.25, 7.9, 13.01] {
            assert!((field.eval(x).unwrap() - cubic(x)).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn masked_tails_return_none() {
        let grid = grid();
        let psi = WaveFunction::gaussian(grid, 0.0, 0.5, 0.0).unwrap();
        let field = velocity_field(&psi, Units::default(), VelocityLaw::Bohmian);
        assert!(field.eval(0.0).is_some());
        assert!(field.eval(-19.0).is_none());
        assert!(field.eval(25.0).is_none());
    }
}
