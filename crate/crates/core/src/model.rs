//! Coupled Hamiltonian: harmonic oscillator `z` + Nelson system `(x, y)` +
//! bilinear coupling `γ x z`.
//!
//! All quantities are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Coefficient of the quadratic confinement term `0.1 x² / 2` of the Nelson potential.
pub const NELSON_CONFINEMENT: f64 = 0.1;

/// Full six-dimensional phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub z: f64,
    pub p_z: f64,
    pub x: f64,
    pub y: f64,
    pub p_x: f64,
    pub p_y: f64,
}

impl PhasePoint {
    pub fn new(z: f64, p_z: f64, x: f64, y: f64, p_x: f64, p_y: f64) -> Self {
        Self {
            z,
            p_z,
            x,
            y,
            p_x,
            p_y,
        }
    }

    /// Order: `(z, p_z, x, y, p_x, p_y)`.
    pub fn to_array(self) -> [f64; 6] {
        [self.z, self.p_z, self.x, self.y, self.p_x, self.p_y]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Physical constants of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// Oscillator mass.
    pub m: f64,
    /// Oscillator angular frequency.
    pub omega0: f64,
    /// Coupling constant of `γ x z`.
    pub gamma: f64,
    pub hbar: f64,
    /// Initial energy of the chaotic subsystem.
    pub e_c0: f64,
    /// Initial energy of the oscillator.
    pub e_o0: f64,
}

/// Position decay rate of the reference correlation fit at `E_c = 0.38`.
pub const REFERENCE_ALPHA: f64 = 0.0418;

impl Default for ModelParams {
    /// Reference experiment at `E_c(0) = 0.38`.
    ///
    /// The oscillator frequency sits at `α/8`, the coupling is such that the
    /// dimensionless drive `γ²Aω/(mα⁴)` of the characteristic quartic is close
    /// to `3e-2` (see [`crate::laplace::coupling_for_drive`]), and `ħ = 1e-4`
    /// keeps the Ehrenfest horizon beyond `1/ω0`. Neither `m` nor `γ` is
    /// measured anywhere; both are reconstructions.
    fn default() -> Self {
        Self {
            m: 1.0,
            omega0: REFERENCE_ALPHA / 8.0,
            gamma: 4.7e-4,
            hbar: 1e-4,
            e_c0: 0.38,
            e_o0: 0.38,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("m", self.m)?;
        positive("omega0", self.omega0)?;
        positive("hbar", self.hbar)?;
        positive("e_c0", self.e_c0)?;
        if !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be finite"));
        }
        if !(self.e_o0.is_finite() && self.e_o0 >= 0.0) {
            return Err(invalid("e_o0", format!("must be >= 0, got {}", self.e_o0)));
        }
        Ok(())
    }

    /// Copy with `E_o(0) = ratio · E_c(0)`.
    pub fn with_energy_ratio(mut self, ratio: f64) -> Self {
        self.e_o0 = ratio * self.e_c0;
        self
    }

    /// Squared renormalized frequency `ω0² − γ²F(0)/m`; must be positive for a
    /// stable oscillator.
    pub fn renormalized_omega_sq(&self, f0: f64) -> f64 {
        self.omega0 * self.omega0 - self.gamma * self.gamma * f0 / self.m
    }

    /// Oscillator initial condition `z(0) = 0`, `p_z(0) = √(2 m E_o(0))`.
    pub fn oscillator_initial(&self) -> (f64, f64) {
        (0.0, (2.0 * self.m * self.e_o0).sqrt())
    }
}

/// Nelson potential `(y − x²/2)² + 0.1 x²/2`.
#[inline]
pub fn nelson_potential(x: f64, y: f64) -> f64 {
    let u = y - 0.5 * x * x;
    u * u + 0.5 * NELSON_CONFINEMENT * x * x
}

/// Energy of the isolated Nelson system.
#[inline]
pub fn nelson_energy(q: [f64; 2], p: [f64; 2]) -> f64 {
    0.5 * (p[0] * p[0] + p[1] * p[1]) + nelson_potential(q[0], q[1])
}

#[inline]
pub fn oscillator_energy(z: f64, p_z: f64, params: &ModelParams) -> f64 {
    p_z * p_z / (2.0 * params.m) + 0.5 * params.m * params.omega0 * params.omega0 * z * z
}

/// Oscillator energy with the static shift `−(γ²/2) F(0) z²` removed.
#[inline]
pub fn renormalized_energy(z: f64, p_z: f64, params: &ModelParams, f0: f64) -> f64 {
    oscillator_energy(z, p_z, params) - 0.5 * params.gamma * params.gamma * f0 * z * z
}

#[inline]
pub fn total_energy(s: &PhasePoint, params: &ModelParams) -> f64 {
    oscillator_energy(s.z, s.p_z, params)
        + nelson_energy([s.x, s.y], [s.p_x, s.p_y])
        + params.gamma * s.x * s.z
}

/// Force part of the separable Hamiltonian: `(∂V/∂z, ∂V/∂x, ∂V/∂y)`.
#[inline]
pub(crate) fn potential_gradient(z: f64, x: f64, y: f64, params: &ModelParams) -> [f64; 3] {
    let u = y - 0.5 * x * x;
    [
        params.m * params.omega0 * params.omega0 * z + params.gamma * x,
        -2.0 * u * x + NELSON_CONFINEMENT * x + params.gamma * z,
        2.0 * u,
    ]
}

/// `∂H` in the order `(∂/∂z, ∂/∂p_z, ∂/∂x, ∂/∂y, ∂/∂p_x, ∂/∂p_y)`.
pub fn gradient(s: &PhasePoint, params: &ModelParams) -> [f64; 6] {
    let [dz, dx, dy] = potential_gradient(s.z, s.x, s.y, params);
    [dz, s.p_z / params.m, dx, dy, s.p_x, s.p_y]
}
