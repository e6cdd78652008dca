//! Closed-form superpropagator of the damped oscillator and its two
//! applications: a single Gaussian packet and a superposition of two.
//!
//! `r = (z + z′)/2` and `y = z − z′` are the centre and relative
//! coordinates of the reduced density matrix. The coefficient
//! representation is singular where `sin ω0T = 0`; every observable below
//! is rewritten so that it stays regular there.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::response::EffectiveKernel;

/// Coefficient functions switch to their `Λ = 0` forms below this `Λ/ω0`.
pub const SMALL_EPS: f64 = 1e-10;

/// Smallest `|sin ω0T|` at which coefficients are evaluated.
pub const SINGULAR_GUARD: f64 = 1e-9;

/// Typical action of the chaotic system used by the Ehrenfest check.
pub const DEFAULT_ACTION: f64 = 10.0;

/// `(eˣ − 1)/x`.
fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// `(eˣ − 1 − x)/x`.
fn phi2(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        (x.exp_m1() - x) / x
    }
}

/// `sinh(x)/x`.
fn shc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sinh() / x
    }
}

/// `x − sin x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x - x.sin()
    }
}

/// Initial packet `exp[−(z − q0)²/4σ² + ipz/ħ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub sigma: f64,
    pub p: f64,
    #[serde(default)]
    pub q0: f64,
}

impl GaussianPacket {
    pub fn new(sigma: f64, p: f64, q0: f64) -> Self {
        Self { sigma, p, q0 }
    }

    /// Minimum-uncertainty width `σ² = ħ/(2mω0)`.
    pub fn ground_state(params: &ModelParams, p: f64, q0: f64) -> Self {
        Self::new((params.hbar / (2.0 * params.m * params.omega0)).sqrt(), p, q0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if !self.p.is_finite() || !self.q0.is_finite() {
            return Err(invalid("packet", "p and q0 must be finite"));
        }
        Ok(())
    }

    /// `n = q0²/8σ²`.
    pub fn quanta(&self) -> f64 {
        self.q0 * self.q0 / (8.0 * self.sigma * self.sigma)
    }
}

/// The seven coefficients of the superpropagator at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperpropCoeffs {
    pub t: f64,
    pub k1_t: f64,
    pub k2_t: f64,
    pub l_t: f64,
    pub n_t: f64,
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
}

/// `A(T)`, `B(T)`, `C(T)` of `∫₀ᵀ y_e² dt = A y_T² + B y_T y_0 + C y_0²`.
pub fn noise_functions(t: f64, lambda: f64, omega0: f64) -> (f64, f64, f64) {
    let w = omega0;
    let (s, c) = (w * t).sin_cos();
    let s2 = s * s;
    let sin2 = (2.0 * w * t).sin();
    if lambda < SMALL_EPS * w {
        let a = x_minus_sin(2.0 * w * t) / (4.0 * w * s2);
        let b = (s / w - t * c) / s2;
        return (a, b, a);
    }
    let l = lambda;
    let d = w * w + l * l;
    let a = (2.0 * t * w * w * phi1(-2.0 * l * t) + 2.0 * l * s2 - w * sin2) / (4.0 * d * s2);
    let b = (-w * w * t * shc(l * t) * c + w * (l * t).cosh() * s) / (d * s2);
    let cc = (2.0 * t * w * w * phi1(2.0 * l * t) - 2.0 * l * s2 - w * sin2) / (4.0 * d * s2);
    (a, b, cc)
}

/// `b(T) = e^{2ΛT} − 1 − 2ε sin ω0T cos ω0T − 2ε² sin² ω0T`, evaluated
/// without cancellation at small `T` and small `Λ`.
pub fn b_function(t: f64, lambda: f64, omega0: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let w = omega0;
    let s = (w * t).sin();
    lambda * (2.0 * t * phi2(2.0 * lambda * t) + x_minus_sin(2.0 * w * t) / w - 2.0 * lambda * s * s / (w * w))
}

/// `C(T) sin² ω0T = ω0² b(T) / (4Λ(ω0² + Λ²))`, regular everywhere.
fn c_times_sin2(t: f64, lambda: f64, omega0: f64) -> f64 {
    let w = omega0;
    let d = w * w + lambda * lambda;
    if lambda < SMALL_EPS * w {
        return w * w * x_minus_sin(2.0 * w * t) / (4.0 * w * d);
    }
    w * w * b_function(t, lambda, w) / (4.0 * lambda * d)
}

pub fn coefficients(t: f64, kernel: &EffectiveKernel, params: &ModelParams) -> Result<SuperpropCoeffs> {
    let (m, w) = (params.m, params.omega0);
    let l = kernel.lambda_;
    let (s, c) = (w * t).sin_cos();
    if s.abs() <= SINGULAR_GUARD {
        return Err(Error::SingularTime { t, sin: s.abs() });
    }
    let k = c / (w * s);
    let (a, b, cc) = noise_functions(t, l, w);
    let noise = kernel.noise / params.hbar;
    Ok(SuperpropCoeffs {
        t,
        k1_t: m * w * w * k + m * l,
        k2_t: m * w * w * k - m * l,
        l_t: m * w * (-l * t).exp() / s,
        n_t: m * w * (l * t).exp() / s,
        a_t: noise * a,
        b_t: noise * b,
        c_t: noise * cc,
    })
}

/// `J(r_T, y_T, r_0, y_0)` without the normalization `G(T, 0)`.
pub fn superpropagator_value(
    r_t: f64,
    y_t: f64,
    r_0: f64,
    y_0: f64,
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
) -> Result<Complex64> {
    let co = coefficients(t, kernel, params)?;
    let hbar = params.hbar;
    let phase = (co.k2_t * r_t * y_t + co.k1_t * r_0 * y_0 - co.l_t * r_0 * y_t - co.n_t * r_t * y_0) / hbar;
    let damping = -(co.a_t * y_t * y_t + co.b_t * y_t * y_0 + co.c_t * y_0 * y_0) / hbar;
    Ok(Complex64::from_polar(damping.exp(), phase))
}

/// Centre of the evolved packet: `(p/mω0) e^{−ΛT} sin ω0T` plus the damped
/// free motion of an initial offset `q0`.
pub fn gaussian_center(t: f64, kernel: &EffectiveKernel, params: &ModelParams, packet: &GaussianPacket) -> f64 {
    let w = params.omega0;
    let (s, c) = (w * t).sin_cos();
    let decay = (-kernel.lambda_ * t).exp();
    packet.p / (params.m * w) * decay * s + packet.q0 * decay * (c + kernel.eps * s)
}

/// Squared width `σ²(T)` in the closed form parameterized by `ε` and `Γ`.
pub fn packet_width(t: f64, kernel: &EffectiveKernel, packet: &GaussianPacket) -> f64 {
    let (eps, gam) = (kernel.eps, kernel.gamma_big);
    let w = kernel.lambda_ / eps;
    let two_lt = 2.0 * kernel.lambda_ * t;
    let e = (-two_lt).exp();
    let (s, c) = if eps > 0.0 { (w * t).sin_cos() } else { (0.0, 1.0) };
    let growth = -(-two_lt).exp_m1() - e * (2.0 * eps * s * c + 2.0 * eps * eps * s * s);
    let sig2 = packet.sigma * packet.sigma;
    sig2 * ((1.0 + eps * eps) * e / (1.0 + eps * eps) + gam * growth / (1.0 + eps * eps))
}

/// `σ²[e^{−2ΛT} + Γ(1 − e^{−2ΛT})]`.
pub fn packet_width_simplified(t: f64, kernel: &EffectiveKernel, packet: &GaussianPacket) -> f64 {
    let x = -2.0 * kernel.lambda_ * t;
    packet.sigma * packet.sigma * (x.exp() - kernel.gamma_big * x.exp_m1())
}

/// `(σ²K̃₁² + 2ħC̃₁)/Ñ²` built directly from the coefficients; agrees with
/// [`packet_width`] for a minimum-uncertainty packet up to `O(ε)`.
pub fn packet_width_from_coefficients(
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> f64 {
    let (m, w, hbar) = (params.m, params.omega0, params.hbar);
    let l = kernel.lambda_;
    let (s, c) = (w * t).sin_cos();
    let sig2 = packet.sigma * packet.sigma;
    let mw = m * w;
    let k1s = c + kernel.eps * s;
    let inner = sig2 * k1s * k1s
        + hbar * hbar * s * s / (4.0 * sig2 * mw * mw)
        + 2.0 * kernel.noise * c_times_sin2(t, l, w) / (mw * mw);
    (-2.0 * l * t).exp() * inner
}

/// Short-time width law and its diffusion constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedWidth {
    /// `σ²[1 + (Γ − 1)2ΛT]`.
    pub sigma2: f64,
    /// `σ²(Γ − 1)Λ`.
    pub diffusion: f64,
    /// `E_cΛ/(2mω0²)`.
    pub classical_diffusion: f64,
}

pub fn width_linearized(
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> LinearizedWidth {
    let sig2 = packet.sigma * packet.sigma;
    let (gam, l) = (kernel.gamma_big, kernel.lambda_);
    let e_c = gam * params.hbar * params.omega0;
    LinearizedWidth {
        sigma2: sig2 * (1.0 + (gam - 1.0) * 2.0 * l * t),
        diffusion: sig2 * (gam - 1.0) * l,
        classical_diffusion: e_c * l / (2.0 * params.m * params.omega0 * params.omega0),
    }
}

fn normal_density(r: f64, center: f64, var: f64) -> f64 {
    let d = r - center;
    (-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Probability density of the evolved packet on `r_grid`: a normalized
/// Gaussian with centre [`gaussian_center`] and variance [`packet_width`].
pub fn gaussian_density(
    r_grid: &[f64],
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> Result<Vec<f64>> {
    packet.validate()?;
    check_grid(r_grid)?;
    let center = gaussian_center(t, kernel, params, packet);
    let var = packet_width(t, kernel, packet);
    Ok(r_grid.iter().map(|&r| normal_density(r, center, var)).collect())
}

/// As [`gaussian_density`], with the variance taken from the coefficients.
pub fn gaussian_density_from_coefficients(
    r_grid: &[f64],
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> Result<Vec<f64>> {
    packet.validate()?;
    check_grid(r_grid)?;
    let center = gaussian_center(t, kernel, params, packet);
    let var = packet_width_from_coefficients(t, kernel, params, packet);
    Ok(r_grid.iter().map(|&r| normal_density(r, center, var)).collect())
}

fn check_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.iter().any(|r| !r.is_finite()) {
        return Err(invalid("r_grid", "must be finite"));
    }
    Ok(())
}

/// Scalar ingredients of the two-packet density at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatHelpers {
    /// `f̃ = 2[2ħC̃₁ + σ²K̃₁²]`; infinite where `sin ω0T = 0`.
    pub f_tilde: f64,
    /// Overlap weight `e^{−q0²/8σ²}` of the normalization `1/(2(1 + h))`.
    pub h: f64,
    /// Centre of the second packet relative to the first.
    pub q: f64,
    /// Decoherence exponent scale `2ħC̃/(2ħC̃₁ + σ²K̃₁²)`.
    pub g: f64,
    /// `exp[−(q0²/8σ²) g]`.
    pub attenuation: f64,
    /// Common variance of both packets.
    pub variance: f64,
    /// Rate `a` in the interference phase `a[(r − Q)² − r²]`, multiplied by `Q`.
    pub phase_rate_times_q: f64,
}

pub fn cat_state_helpers(
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> Result<CatHelpers> {
    packet.validate()?;
    if !(packet.q0 > 0.0) {
        return Err(invalid("q0", format!("must be > 0, got {}", packet.q0)));
    }
    let (m, w, hbar) = (params.m, params.omega0, params.hbar);
    let l = kernel.lambda_;
    let (s, c) = (w * t).sin_cos();
    let sig2 = packet.sigma * packet.sigma;
    let decay = (-l * t).exp();
    let var = packet_width_from_coefficients(t, kernel, params, packet);
    let n_over_s = m * w * (l * t).exp();
    let f_tilde = 2.0 * n_over_s * n_over_s * var / (s * s);
    let noise_part = 2.0 * kernel.noise * c_times_sin2(t, l, w);
    let g = noise_part / (n_over_s * n_over_s * var);
    let n = packet.quanta();
    Ok(CatHelpers {
        f_tilde,
        h: (-n).exp(),
        q: packet.q0 * decay * (c + kernel.eps * s),
        g,
        attenuation: (-n * g).exp(),
        variance: var,
        phase_rate_times_q: hbar * packet.q0 * s * decay / (8.0 * sig2 * m * w * var),
    })
}

/// Diagonal of the evolved two-packet density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatStateDensity {
    pub rho11: Vec<f64>,
    pub rho22: Vec<f64>,
    pub interference: Vec<f64>,
    pub total: Vec<f64>,
    pub helpers: CatHelpers,
}

/// Density of the superposition of packets at `0` and `q0`, each already
/// weighted by `1/(2(1 + h))`; the interference term is
/// `2 cos(phase) √(ρ₁₁ρ₂₂) exp[−(q0²/8σ²) g]`.
pub fn cat_state_density(
    r_grid: &[f64],
    t: f64,
    kernel: &EffectiveKernel,
    params: &ModelParams,
    packet: &GaussianPacket,
) -> Result<CatStateDensity> {
    check_grid(r_grid)?;
    let hp = cat_state_helpers(t, kernel, params, packet)?;
    let shift = gaussian_center(t, kernel, params, &GaussianPacket { q0: 0.0, ..*packet });
    let weight = 1.0 / (2.0 * (1.0 + hp.h));
    let mut out = CatStateDensity {
        rho11: Vec::with_capacity(r_grid.len()),
        rho22: Vec::with_capacity(r_grid.len()),
        interference: Vec::with_capacity(r_grid.len()),
        total: Vec::with_capacity(r_grid.len()),
        helpers: hp,
    };
    for &r in r_grid {
        let x = r - shift;
        let r11 = weight * normal_density(x, 0.0, hp.variance);
        let r22 = weight * normal_density(x, hp.q, hp.variance);
        let phase = hp.phase_rate_times_q * (hp.q - 2.0 * x);
        let inter = 2.0 * phase.cos() * (r11 * r22).sqrt() * hp.attenuation;
        out.rho11.push(r11);
        out.rho22.push(r22);
        out.interference.push(inter);
        out.total.push(r11 + r22 + inter);
    }
    Ok(out)
}

/// `g(T) = Γb/((1 + ε²) + Γb)`.
pub fn decoherence_factor(t: f64, kernel: &EffectiveKernel) -> f64 {
    let (eps, gam) = (kernel.eps, kernel.gamma_big);
    if kernel.lambda_ == 0.0 {
        return 0.0;
    }
    let gb = gam * b_function(t, kernel.lambda_, kernel.lambda_ / eps);
    gb / ((1.0 + eps * eps) + gb)
}

/// `2ΓΛT/(1 + 2ΓΛT)`.
pub fn decoherence_factor_approx(t: f64, kernel: &EffectiveKernel) -> f64 {
    let x = 2.0 * kernel.gamma_big * kernel.lambda_ * t;
    x / (1.0 + x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceTime {
    /// `ñ = (n − ln 10)/(3 ln 10)`.
    pub n_tilde: f64,
    /// `T′ = 1/(2ñΓΛ)`.
    pub t_prime: f64,
    /// `T′Λ`, small when decoherence outpaces dissipation.
    pub t_prime_lambda: f64,
}

/// Time at which the interference of an `n`-quanta superposition drops to
/// about `1e-3` under the approximate decoherence factor.
pub fn decoherence_time(n: f64, kernel: &EffectiveKernel) -> Result<DecoherenceTime> {
    let ln10 = std::f64::consts::LN_10;
    if !(n > ln10) {
        return Err(Error::QuantaTooSmall(n));
    }
    let n_tilde = (n - ln10) / (3.0 * ln10);
    let t_prime = 1.0 / (2.0 * n_tilde * kernel.gamma_big * kernel.lambda_);
    Ok(DecoherenceTime {
        n_tilde,
        t_prime,
        t_prime_lambda: t_prime * kernel.lambda_,
    })
}

/// Whether `ħ` is small enough for the zero-order semiclassical kernels
/// to hold over `t ~ 1/ω0`: `S_c/ħ ≥ e^{α/ω0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestCheck {
    pub action_over_hbar: f64,
    pub required: f64,
    pub valid: bool,
}

pub fn ehrenfest_check(params: &ModelParams, alpha: f64, action: f64) -> EhrenfestCheck {
    let action_over_hbar = action / params.hbar;
    let required = (alpha / params.omega0).exp();
    EhrenfestCheck {
        action_over_hbar,
        required,
        valid: action_over_hbar >= required,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> ModelParams {
        ModelParams {
            m: 1.0,
            omega0: 1.0,
            gamma: 0.1,
            hbar: 1.0,
            e_c0: 1.0,
            e_o0: 1.0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// Printed forms, used only away from `Λ = 0`.
    fn noise_functions_direct(t: f64, l: f64, w: f64) -> (f64, f64, f64) {
        let s2 = (w * t).sin().powi(2);
        let d = 4.0 * l * (w * w + l * l) * s2;
        let a = (-w * w * (-2.0 * l * t).exp() + (l * l + w * w) - l * l * (2.0 * w * t).cos()
            - l * w * (2.0 * w * t).sin())
            / d;
        let b = (-w * w * (l * t).sinh() * (w * t).cos() + l * w * (l * t).cosh() * (w * t).sin())
            / (l * (w * w + l * l) * s2);
        let c = (w * w * (2.0 * l * t).exp() - (l * l + w * w) + l * l * (2.0 * w * t).cos()
            - l * w * (2.0 * w * t).sin())
            / d;
        (a, b, c)
    }

    /// `∫₀ᵀ y_e(t)² dt` by Simpson's rule on the extremal path.
    fn integral_of_ye2(t: f64, l: f64, w: f64, y0: f64, yt: f64) -> f64 {
        let ye = |u: f64| {
            (l * u).exp()
                * (((w * (t - u)).sin() / (w * t).sin()) * y0 + (-l * t).exp() * (w * u).sin() / (w * t).sin() * yt)
        };
        let n = 20_000;
        let h = t / n as f64;
        let mut sum = ye(0.0).powi(2) + ye(t).powi(2);
        for i in 1..n {
            let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += wgt * ye(i as f64 * h).powi(2);
        }
        sum * h / 3.0
    }

    #[test]
    fn noise_functions_match_path_integral() {
        let (l, w) = (0.07, 1.3);
        for t in [0.4, 1.1, 2.9, 4.0] {
            let (a, b, c) = noise_functions(t, l, w);
            for (y0, yt) in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.4)] {
                let quad = integral_of_ye2(t, l, w, y0, yt);
                let closed = a * yt * yt + b * yt * y0 + c * y0 * y0;
                assert!(rel(closed, quad) < 1e-9, "t={t}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn stable_forms_match_printed_forms() {
        let w = 0.8;
        for l in [1e-3, 0.05, 0.3] {
            for t in [0.3, 1.7, 5.0] {
                let (a, b, c) = noise_functions(t, l, w);
                let (da, db, dc) = noise_functions_direct(t, l, w);
                assert!(rel(a, da) < 1e-8 && rel(b, db) < 1e-8 && rel(c, dc) < 1e-8);
            }
        }
    }

    #[test]
    fn small_lambda_limit_is_finite() {
        let w = 0.8;
        for t in [0.3, 1.7, 5.0] {
            let zero = noise_functions(t, 0.0, w);
            let tiny = noise_functions(t, 1e-12, w);
            let (a, b, c) = tiny;
            assert!((a + b + c).is_finite());
            assert!(rel(tiny.0, zero.0) < 1e-9 && rel(tiny.1, zero.1) < 1e-9 && rel(tiny.2, zero.2) < 1e-9);
            let just_above = noise_functions(t, 2e-10 * w, w);
            assert!(rel(just_above.0, zero.0) < 1e-8);
            let quad = integral_of_ye2(t, 0.0, w, 0.7, -0.4);
            assert!(rel(zero.0 * 0.16 - zero.1 * 0.28 + zero.2 * 0.49, quad) < 1e-9);
        }
    }

    #[test]
    fn coefficient_identities() {
        let params = unit_params();
        let k = EffectiveKernel::synthetic(&params, 0.05, 3.0).unwrap();
        for t in [0.2, 1.0, 2.5, 4.0, 7.3] {
            let co = coefficients(t, &k, &params).unwrap();
            let s = (params.omega0 * t).sin();
            let l = co.l_t / (params.m * params.omega0.powi(2));
            let n = co.n_t / (params.m * params.omega0.powi(2));
            assert!((l * n * (params.omega0 * s).powi(2) - 1.0).abs() < 1e-12);
            assert!((co.k1_t - co.k2_t - 2.0 * params.m * k.lambda_).abs() < 1e-12 * co.k1_t.abs().max(1.0));
            assert!(co.a_t >= 0.0 && co.c_t >= 0.0);
        }
    }

    #[test]
    fn singular_time_is_rejected() {
        let params = unit_params();
        let k = EffectiveKernel::synthetic(&params, 0.05, 3.0).unwrap();
        let err = coefficients(std::f64::consts::PI, &k, &params).unwrap_err();
        assert!(matches!(err, Error::SingularTime { .. }));
        assert!(err.to_string().contains("closed forms"));
        assert!(superpropagator_value(0.0, 0.0, 0.0, 0.0, 0.0, &k, &params).is_err());
    }

    #[test]
    fn superpropagator_basics() {
        let params = unit_params();
        let k = EffectiveKernel::synthetic(&params, 0.05, 3.0).unwrap();
        let v = superpropagator_value(0.3, 0.0, -0.8, 0.0, 0.9, &k, &params).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        for (r, y, r0, y0) in [(0.3, 0.5, -0.2, 1.1), (-1.0, 0.2, 0.4, -0.3)] {
            let a = superpropagator_value(r, y, r0, y0, 1.3, &k, &params).unwrap();
            let b = superpropagator_value(r, -y, r0, -y0, 1.3, &k, &params).unwrap();
            assert_eq!(a.conj(), b);
        }
    }

    #[test]
    fn center_values() {
        let params = ModelParams::default();
        let k = EffectiveKernel::synthetic(&params, 1e-6, 100.0).unwrap();
        let pk = GaussianPacket::new(0.1, 0.5, 0.0);
        assert_eq!(gaussian_center(0.0, &k, &params, &pk), 0.0);
        let free = EffectiveKernel::synthetic(&params, 0.0, 100.0).unwrap();
        let t = 123.0;
        let zd = 0.5 / (params.m * params.omega0) * (params.omega0 * t).sin();
        assert!((gaussian_center(t, &free, &params, &pk) - zd).abs() < 1e-12);
    }

    /// Classical RK4 on `r'' + 2Λr' + ω0²r = 0`.
    fn rk4_damped(t_end: f64, l: f64, w: f64, r0: f64, v0: f64) -> f64 {
        let n = 200_000;
        let h = t_end / n as f64;
        let f = |r: f64, v: f64| (v, -2.0 * l * v - w * w * r);
        let (mut r, mut v) = (r0, v0);
        for _ in 0..n {
            let (k1r, k1v) = f(r, v);
            let (k2r, k2v) = f(r + 0.5 * h * k1r, v + 0.5 * h * k1v);
            let (k3r, k3v) = f(r + 0.5 * h * k2r, v + 0.5 * h * k2v);
            let (k4r, k4v) = f(r + h * k3r, v + h * k3v);
            r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        r
    }

    #[test]
    fn center_follows_damped_oscillator() {
        let params = unit_params();
        for eps in [1e-3, 1e-4] {
            let k = EffectiveKernel::synthetic(&params, eps, 3.0).unwrap();
            let pk = GaussianPacket::new(1.0, 0.8, 0.0);
            for t in [0.5, 1.0, 2.0] {
                let ode = rk4_damped(t, k.lambda_, 1.0, 0.0, 0.8);
                let closed = gaussian_center(t, &k, &params, &pk);
                assert!(rel(closed, ode) < 1e-6, "eps={eps} t={t}: {closed} vs {ode}");
            }
        }
    }

    #[test]
    fn width_closed_forms() {
        let params = ModelParams::default();
        let pk = GaussianPacket::new(0.2, 0.0, 0.0);
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 1.0).unwrap();
        assert_eq!(packet_width(0.0, &k, &pk), pk.sigma * pk.sigma);
        let t_max = 1.5 / k.lambda_;
        for i in 0..=300 {
            let t = t_max * i as f64 / 300.0;
            assert!(rel(packet_width(t, &k, &pk), 0.04) < 0.05);
        }
        let k2 = EffectiveKernel::synthetic(&params, 2.4e-6, 2.0).unwrap();
        let t = 0.5 / k2.lambda_;
        let simple = packet_width_simplified(t, &k2, &pk);
        assert!(rel(simple, 0.04 * ((-1.0f64).exp() + 2.0 * (1.0 - (-1.0f64).exp()))) < 1e-12);
        assert!(rel(simple / 0.04, 1.632) < 1e-3);
        assert!(rel(packet_width(t, &k2, &pk), simple) < 0.1);
    }

    #[test]
    fn linearized_width() {
        let params = ModelParams::default();
        let pk = GaussianPacket::ground_state(&params, 0.0, 0.0);
        let k1 = EffectiveKernel::synthetic(&params, 2.4e-6, 1.0).unwrap();
        assert_eq!(width_linearized(1e4, &k1, &params, &pk).sigma2, pk.sigma * pk.sigma);
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 7.0).unwrap();
        let t = 0.005 / k.lambda_;
        let lin = width_linearized(t, &k, &params, &pk);
        let simple = packet_width_simplified(t, &k, &pk);
        assert!(rel(lin.sigma2, simple) < 0.01);
        let big = EffectiveKernel::synthetic(&params, 2.4e-6, 1e6).unwrap();
        let w = width_linearized(t, &big, &params, &pk);
        assert!(rel(pk.sigma * pk.sigma * big.gamma_big * big.lambda_, w.classical_diffusion) < 1e-12);
        assert!(rel(w.diffusion, w.classical_diffusion) < 1e-5);
    }

    #[test]
    fn coefficient_width_agrees_for_ground_state() {
        let params = ModelParams::default();
        let pk = GaussianPacket::ground_state(&params, 0.0, 0.0);
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 10.0).unwrap();
        for t in [10.0, 300.0, 1234.0, 5e4] {
            let a = packet_width(t, &k, &pk);
            let b = packet_width_from_coefficients(t, &k, &params, &pk);
            assert!(rel(a, b) < 5.0 * k.eps, "t={t}: {a} vs {b}");
        }
    }

    fn trapezoid(y: &[f64], h: f64) -> f64 {
        h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
    }

    #[test]
    fn gaussian_density_moments() {
        let params = ModelParams::default();
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 10.0).unwrap();
        let pk = GaussianPacket::ground_state(&params, 0.01, 0.0);
        let t = 400.0;
        let var = packet_width(t, &k, &pk);
        let c = gaussian_center(t, &k, &params, &pk);
        let sd = var.sqrt();
        let n = 4001;
        let h = 16.0 * sd / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| c - 8.0 * sd + i as f64 * h).collect();
        let rho = gaussian_density(&grid, t, &k, &params, &pk).unwrap();
        assert!((trapezoid(&rho, h) - 1.0).abs() < 1e-9);
        let peak = grid[rho.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert!((peak - c).abs() <= h);
        let co = coefficients(t, &k, &params).unwrap();
        assert!(rel(c, pk.p / co.n_t) < 1e-12);
        let m2: Vec<f64> = grid.iter().zip(&rho).map(|(r, p)| (r - c).powi(2) * p).collect();
        assert!(rel(trapezoid(&m2, h), var) < 1e-8);
    }

    #[test]
    fn decoherence_factor_limits() {
        let params = ModelParams::default();
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 10.0).unwrap();
        assert_eq!(decoherence_factor(0.0, &k), 0.0);
        assert!(decoherence_factor(1e8, &k) > 1.0 - 1e-9);
        let free = EffectiveKernel::synthetic(&params, 0.0, 10.0).unwrap();
        assert_eq!(decoherence_factor(500.0, &free), 0.0);
        let t_max = 0.3 / k.lambda_;
        for i in 1..=300 {
            let t = t_max * i as f64 / 300.0;
            let (g, ga) = (decoherence_factor(t, &k), decoherence_factor_approx(t, &k));
            assert!((g - ga).abs() < 0.05, "t={t}: {g} vs {ga}");
        }
    }

    #[test]
    fn b_function_matches_direct_form() {
        let (l, w) = (0.02f64, 0.9f64);
        for t in [0.5, 3.0, 11.0] {
            let eps = l / w;
            let (s, c) = (w * t).sin_cos();
            let direct = (2.0 * l * t).exp() - 1.0 - 2.0 * eps * s * c - 2.0 * eps * eps * s * s;
            assert!(rel(b_function(t, l, w), direct) < 1e-10);
        }
        assert!(b_function(1e-3, 1e-6, 0.005) >= 0.0);
    }

    #[test]
    fn decoherence_time_values() {
        let params = ModelParams::default();
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 100.0).unwrap();
        let d = decoherence_time(10.0 * std::f64::consts::LN_10, &k).unwrap();
        assert!((d.n_tilde - 3.0).abs() < 1e-12);
        assert!(rel(d.t_prime, 1.0 / (6.0 * 100.0 * k.lambda_)) < 1e-12);
        let d = decoherence_time(50.0, &k).unwrap();
        assert!((d.t_prime_lambda - 7.24e-4).abs() < 1e-6, "{}", d.t_prime_lambda);
        // 2ΓΛT′ = 1/ñ, so n·g(T′) = n/(ñ + 1) under the approximate factor.
        let ng = 50.0 * decoherence_factor_approx(d.t_prime, &k);
        assert!(rel(ng, 50.0 / (d.n_tilde + 1.0)) < 1e-12);
        assert!(matches!(decoherence_time(2.0, &k), Err(Error::QuantaTooSmall(_))));
    }

    #[test]
    fn ehrenfest_reference() {
        let params = ModelParams::default();
        let c = ehrenfest_check(&params, 0.0418, DEFAULT_ACTION);
        assert!(c.valid);
        assert!(rel(c.required, 8.0f64.exp()) < 1e-12);
        let coarse = ModelParams { hbar: 0.01, ..params };
        assert!(!ehrenfest_check(&coarse, 0.0418, DEFAULT_ACTION).valid);
    }

    #[test]
    fn cat_state_normalization() {
        let params = unit_params();
        let k = EffectiveKernel::synthetic(&params, 0.01, 10.0).unwrap();
        let pk = GaussianPacket::new((0.5f64).sqrt(), 0.0, 4.0);
        for t in [0.5, 1.0, 2.0, std::f64::consts::PI] {
            let n = 20001;
            let (lo, hi) = (-15.0, 19.0);
            let h = (hi - lo) / (n - 1) as f64;
            let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
            let d = cat_state_density(&grid, t, &k, &params, &pk).unwrap();
            assert!((trapezoid(&d.total, h) - 1.0).abs() < 1e-8, "t={t}: {}", trapezoid(&d.total, h));
            for i in (0..n).step_by(997) {
                let ratio = d.interference[i] / (2.0 * (d.rho11[i] * d.rho22[i]).sqrt());
                let phase = d.helpers.phase_rate_times_q * (d.helpers.q - 2.0 * grid[i]);
                if phase.cos().abs() > 1e-3 {
                    let att = ratio / phase.cos();
                    assert!((att - (-pk.quanta() * d.helpers.g).exp()).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cat_state_starts_as_two_packets() {
        let params = ModelParams {
            gamma: 0.0,
            ..unit_params()
        };
        let k = EffectiveKernel::synthetic(&params, 0.0, 10.0).unwrap();
        let pk = GaussianPacket::new(0.7, 0.0, 3.0);
        let t = 1e-9;
        let grid: Vec<f64> = (0..50).map(|i| -2.0 + 0.14 * i as f64).collect();
        let d = cat_state_density(&grid, t, &k, &params, &pk).unwrap();
        let norm = 1.0 / (2.0 * (2.0 * std::f64::consts::PI * 0.49f64).sqrt() * (1.0 + (-pk.quanta()).exp()));
        for (r, v) in grid.iter().zip(&d.total) {
            let psi = (-r * r / (4.0 * 0.49)).exp() + (-(r - 3.0).powi(2) / (4.0 * 0.49)).exp();
            assert!((v - norm * psi * psi).abs() < 1e-8, "{r}");
        }
        assert_eq!(d.helpers.g, 0.0);
    }

    #[test]
    fn purity_decays_monotonically() {
        let params = ModelParams::default();
        let k = EffectiveKernel::synthetic(&params, 2.4e-6, 10.0).unwrap();
        let t_max = 0.5 / k.lambda_;
        let mut prev = 1.0;
        for i in 0..=5000 {
            let t = t_max * i as f64 / 5000.0;
            let att = (-20.0 * decoherence_factor(t, &k)).exp();
            assert!(att <= prev);
            prev = att;
        }
    }
}
