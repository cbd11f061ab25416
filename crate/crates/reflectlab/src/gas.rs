//! Polytropic equation of state and the enthalpy-like function linking
//! density to the pseudo-potential.
//!
//! With `p = c0^2 rho0 / gamma * (rho/rho0)^gamma` the sound speed is
//! `c^2 = c0^2 (rho/rho0)^(gamma-1)` and the function `pi` with
//! `dpi/drho = c^2 / rho` is `pi(rho) = c0^2/(gamma-1) * (rho/rho0)^(gamma-1)`,
//! normalized so `pi -> 0` as `rho -> 0`.

use crate::error::{Error, Result};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;

/// Gas constants: adiabatic exponent and reference state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GasConstants {
    pub gamma: f64,
    pub rho0: f64,
    pub c0: f64,
}

impl GasConstants {
    pub fn new(gamma: f64, rho0: f64, c0: f64) -> Result<Self> {
        if gamma <= 1.0 {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        if rho0 <= 0.0 || c0 <= 0.0 {
            return Err(Error::Domain(
                "reference density and sound speed must be positive".into(),
            ));
        }
        Ok(Self { gamma, rho0, c0 })
    }

    /// Nondimensional constants `rho0 = c0 = 1`.
    pub fn nondim(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0, 1.0)
    }
}

/// Per-region thermodynamic state: density, derived sound speed, velocity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThermoState {
    pub rho: f64,
    pub c: f64,
    pub velocity: Vec2,
}

impl ThermoState {
    pub fn new(rho: f64, velocity: Vec2, consts: &GasConstants) -> Result<Self> {
        Ok(Self {
            rho,
            c: sound_speed(rho, consts)?,
            velocity,
        })
    }

    pub fn mach(&self) -> f64 {
        self.velocity.norm() / self.c
    }
}

/// `c = c0 (rho/rho0)^((gamma-1)/2)`.
pub fn sound_speed(rho: f64, consts: &GasConstants) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::NonpositiveDensity(rho));
    }
    Ok(consts.c0 * (rho / consts.rho0).powf(0.5 * (consts.gamma - 1.0)))
}

/// `pi(rho) = c0^2/(gamma-1) * (rho/rho0)^(gamma-1) = c^2/(gamma-1)`.
pub fn pi_fn(rho: f64, consts: &GasConstants) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::NonpositiveDensity(rho));
    }
    Ok(consts.c0 * consts.c0 / (consts.gamma - 1.0) * (rho / consts.rho0).powf(consts.gamma - 1.0))
}

/// Exact inverse of [`pi_fn`] on `(0, inf)`.
pub fn pi_inv(w: f64, consts: &GasConstants) -> Result<f64> {
    if w <= 0.0 {
        return Err(Error::Vacuum(w));
    }
    let g1 = consts.gamma - 1.0;
    Ok(consts.rho0 * (g1 * w / (consts.c0 * consts.c0)).powf(1.0 / g1))
}

/// Density from the pseudo-potential value and gradient, `rho = pi^{-1}(-chi - |grad chi|^2 / 2)`.
pub fn density_from_chi(chi: f64, grad_chi: Vec2, consts: &GasConstants) -> Result<f64> {
    pi_inv(-chi - 0.5 * grad_chi.norm_squared(), consts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g14() -> GasConstants {
        GasConstants::nondim(1.4).unwrap()
    }

    #[test]
    fn sound_speed_reference_state() {
        let c = g14();
        assert_relative_eq!(sound_speed(1.0, &c).unwrap(), 1.0);
        let c2 = GasConstants::nondim(2.0).unwrap();
        assert_relative_eq!(sound_speed(4.0, &c2).unwrap(), 2.0);
    }

    #[test]
    fn sound_speed_closed_form() {
        // gamma = 1.4, rho = 2 rho0: c = c0 * 2^0.2
        let c = g14();
        assert_relative_eq!(
            sound_speed(2.0, &c).unwrap(),
            2f64.powf(0.2),
            max_relative = 1e-15
        );
    }

    #[test]
    fn sound_speed_rejects_nonpositive_density() {
        assert!(sound_speed(0.0, &g14()).is_err());
        assert!(sound_speed(-1.0, &g14()).is_err());
    }

    #[test]
    fn pi_reference_and_closed_form() {
        let c = g14();
        assert_relative_eq!(pi_fn(1.0, &c).unwrap(), 1.0 / 0.4);
        assert_relative_eq!(
            pi_fn(2.0, &c).unwrap(),
            2.5 * 2f64.powf(0.4),
            max_relative = 1e-15
        );
    }

    #[test]
    fn pi_round_trip() {
        let c = g14();
        for rho in [0.1, 1.0, 10.0] {
            let w = pi_fn(rho, &c).unwrap();
            assert_relative_eq!(pi_inv(w, &c).unwrap(), rho, max_relative = 1e-14);
        }
        for w in [0.3, 2.5, 40.0] {
            let rho = pi_inv(w, &c).unwrap();
            assert_relative_eq!(pi_fn(rho, &c).unwrap(), w, max_relative = 1e-13);
        }
    }

    #[test]
    fn pi_inv_rejects_vacuum() {
        assert!(pi_inv(0.0, &g14()).is_err());
        assert!(pi_inv(-1.0, &g14()).is_err());
    }

    #[test]
    fn pi_derivative_is_c2_over_rho() {
        let c = g14();
        let h = 1e-6;
        for rho in [0.2, 0.7, 1.0, 3.0, 8.0] {
            let fd = (pi_fn(rho + h, &c).unwrap() - pi_fn(rho - h, &c).unwrap()) / (2.0 * h);
            let cs = sound_speed(rho, &c).unwrap();
            assert_relative_eq!(fd, cs * cs / rho, max_relative = 1e-8);
        }
    }

    #[test]
    fn density_from_chi_cases() {
        let c = g14();
        let pi0 = pi_fn(1.0, &c).unwrap();
        assert_relative_eq!(
            density_from_chi(-pi0, Vec2::zeros(), &c).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        // kinetic term cancels the shifted chi
        assert_relative_eq!(
            density_from_chi(-pi0 - 0.5, Vec2::new(1.0, 0.0), &c).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            density_from_chi(-2.0 * pi0, Vec2::zeros(), &c).unwrap(),
            2f64.powf(2.5),
            max_relative = 1e-13
        );
    }

    #[test]
    fn sound_speed_strictly_increasing() {
        let c = g14();
        let mut prev = 0.0;
        for k in 1..100 {
            let rho = 0.05 * k as f64;
            let cs = sound_speed(rho, &c).unwrap();
            assert!(cs > prev);
            prev = cs;
        }
    }
}
