//! Poles of the Laplace-transformed extremal-path equations.
//!
//! In the dimensionless variable `x = s/α` the poles are the roots of
//! `[x² + (ω0/α)²][(x + 1)² + (ω/α)²] + sign · drive`, with `sign = −1`
//! for the centre coordinate `r_e` and `+1` for the relative coordinate
//! `y_e`. One conjugate pair sits near `−1 ± iω/α` and decays on the
//! correlation time; the other sits near `∓Λ/α ± iω0/α` and carries the
//! slow dynamics of the damped oscillator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::response::CorrelationFit;

const MAX_ITER: usize = 500;
const RESIDUAL_TOL: f64 = 1e-12;
const SEPARATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Centre coordinate `r_e`: the drive enters with sign `−1`.
    Centre,
    /// Relative coordinate `y_e`: the drive enters with sign `+1`.
    Relative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Centre => -1.0,
            Branch::Relative => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicProblem {
    /// `(ω0/α)²`
    pub ratio_w0: f64,
    /// `(ω/α)²`
    pub ratio_w: f64,
    /// `γ²Aω/(mα⁴)` with `A = 2μ/E_c`.
    pub drive: f64,
    pub branch: Branch,
    /// Rate that converts dimensionless roots back to `s`.
    pub alpha: f64,
}

impl CharacteristicProblem {
    pub fn new(ratio_w0: f64, ratio_w: f64, drive: f64, branch: Branch, alpha: f64) -> Self {
        Self {
            ratio_w0,
            ratio_w,
            drive,
            branch,
            alpha,
        }
    }

    /// Ratios quoted for the reference experiment: `(1.6e-2, 25, 3e-2)`.
    pub fn reference(branch: Branch) -> Self {
        Self::new(1.6e-2, 25.0, 3e-2, branch, crate::model::REFERENCE_ALPHA)
    }

    pub fn from_fit(fit: &CorrelationFit, params: &ModelParams, branch: Branch) -> Self {
        let a = fit.alpha;
        Self::new(
            (params.omega0 / a).powi(2),
            (fit.omega / a).powi(2),
            drive(fit, params),
            branch,
            a,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ratio_w0", self.ratio_w0), ("ratio_w", self.ratio_w), ("alpha", self.alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.drive.is_finite() && self.drive >= 0.0) {
            return Err(invalid("drive", format!("must be finite and >= 0, got {}", self.drive)));
        }
        Ok(())
    }

    /// Monic coefficients `[c0, c1, c2, c3]` of `x⁴ + c3x³ + c2x² + c1x + c0`.
    pub fn coefficients(&self) -> [f64; 4] {
        let (a, b) = (self.ratio_w0, self.ratio_w);
        [a * (1.0 + b) + self.branch.sign() * self.drive, 2.0 * a, 1.0 + a + b, 2.0]
    }

    /// `|p(x)| / Σ|cᵢ||x|ⁱ`, the backward error of a computed root.
    pub fn residual(&self, x: Complex64) -> f64 {
        let c = self.coefficients();
        let mut p = Complex64::new(1.0, 0.0);
        let mut scale = 1.0;
        let ax = x.norm();
        for k in (0..4).rev() {
            p = p * x + c[k];
            scale = scale * ax + c[k].abs();
        }
        p.norm() / scale
    }
}

/// Dimensionless drive `γ²Aω/(mα⁴)`, `A = 2μ/E_c`.
pub fn drive(fit: &CorrelationFit, params: &ModelParams) -> f64 {
    let amp = 2.0 * fit.mu / params.e_c0;
    params.gamma * params.gamma * amp * fit.omega / (params.m * fit.alpha.powi(4))
}

/// Coupling `γ` that yields a given dimensionless drive.
pub fn coupling_for_drive(target: f64, fit: &CorrelationFit, params: &ModelParams) -> f64 {
    let amp = 2.0 * fit.mu / params.e_c0;
    (target * params.m * fit.alpha.powi(4) / (amp * fit.omega)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootKind {
    Transient,
    Secular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    /// Ordered as transient pair then secular pair, negative imaginary
    /// part first within each pair.
    pub roots: [Complex64; 4],
    pub kinds: [RootKind; 4],
    pub residuals: [f64; 4],
    pub iterations: usize,
}

impl RootSet {
    pub fn secular(&self) -> Complex64 {
        self.roots[3]
    }

    pub fn transient(&self) -> Complex64 {
        self.roots[1]
    }
}

fn eval(c: &[f64; 4], x: Complex64) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for k in (0..4).rev() {
        p = p * x + c[k];
    }
    p
}

/// Imaginary part, relative to the modulus, below which a root counts as real.
const REAL_ROOT_TOL: f64 = 1e-8;

fn durand_kerner(c: &[f64; 4]) -> Result<([Complex64; 4], usize)> {
    let seed = Complex64::new(0.4, 0.9);
    let mut z = [Complex64::new(1.0, 0.0), seed, seed * seed, seed * seed * seed];
    for iter in 1..=MAX_ITER {
        let mut shift = 0.0f64;
        for i in 0..4 {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let delta = eval(c, z[i]) / denom;
            z[i] -= delta;
            shift = shift.max(delta.norm() / z[i].norm().max(1.0));
        }
        if shift < 1e-15 {
            return Ok((z, iter));
        }
    }
    Ok((z, MAX_ITER))
}

/// Replace each root by the member of a conjugate pair with exact mirror
/// symmetry; returns the pairs as `(re, |im|)`.
fn conjugate_pairs(z: [Complex64; 4]) -> Result<[(f64, f64); 2]> {
    let mut upper: Vec<Complex64> = z.iter().copied().filter(|r| r.im > 0.0).collect();
    let mut lower: Vec<Complex64> = z.iter().copied().filter(|r| r.im <= 0.0).collect();
    let real = z.iter().any(|r| r.im.abs() <= REAL_ROOT_TOL * r.norm().max(1.0));
    if real || upper.len() != 2 || lower.len() != 2 {
        return Err(invalid(
            "drive",
            "roots are not two complex-conjugate pairs; the slow pair is real (overdamped or unstable oscillator)",
        ));
    }
    upper.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut pairs = [(0.0, 0.0); 2];
    for (k, u) in upper.iter().enumerate() {
        let (idx, _) = lower
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l.conj() - u).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("two lower roots");
        let l = lower.remove(idx);
        pairs[k] = (0.5 * (u.re + l.re), 0.5 * (u.im - l.im));
    }
    Ok(pairs)
}

/// All four roots, classified into the transient and secular pairs.
pub fn solve_characteristic(problem: &CharacteristicProblem) -> Result<RootSet> {
    problem.validate()?;
    let (pairs, iterations) = if problem.drive == 0.0 {
        ([(-1.0, problem.ratio_w.sqrt()), (0.0, problem.ratio_w0.sqrt())], 0)
    } else {
        let c = problem.coefficients();
        let (z, iterations) = durand_kerner(&c)?;
        (conjugate_pairs(z)?, iterations)
    };
    let (fast, slow) = if pairs[0].0.abs() >= pairs[1].0.abs() {
        (pairs[0], pairs[1])
    } else {
        (pairs[1], pairs[0])
    };
    let roots = [
        Complex64::new(fast.0, -fast.1),
        Complex64::new(fast.0, fast.1),
        Complex64::new(slow.0, -slow.1),
        Complex64::new(slow.0, slow.1),
    ];
    let residuals = roots.map(|r| problem.residual(r));
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if !(worst < RESIDUAL_TOL) {
        return Err(Error::RootConvergence {
            iterations,
            residual: worst,
        });
    }
    Ok(RootSet {
        roots,
        kinds: [RootKind::Transient, RootKind::Transient, RootKind::Secular, RootKind::Secular],
        residuals,
        iterations,
    })
}

/// Physical rates recovered from the two root pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timescales {
    #[serde(rename = "lambda")]
    pub lambda_: f64,
    pub omega0: f64,
    pub alpha: f64,
    pub omega: f64,
}

pub fn classify(roots: &RootSet, problem: &CharacteristicProblem) -> Result<Timescales> {
    let (fast, slow) = (roots.transient(), roots.secular());
    let separation = if slow.re == 0.0 {
        f64::INFINITY
    } else {
        fast.re.abs() / slow.re.abs()
    };
    if !(separation >= SEPARATION) {
        return Err(Error::AmbiguousRoots { separation });
    }
    let a = problem.alpha;
    Ok(Timescales {
        lambda_: slow.re.abs() * a,
        omega0: slow.im.abs() * a,
        alpha: fast.re.abs() * a,
        omega: fast.im.abs() * a,
    })
}

/// Comparison of the secular roots with those of
/// `r̈ + 2Λṙ + Ω0²r = 0` and `ÿ − 2Λẏ + χ0²y = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModelReport {
    /// `Λ/α = drive/(1 + (ω/α))²`.
    pub lambda_over_alpha: f64,
    /// `(Ω0/α)² = (ω0/α)² − drive/(1 + (ω/α)²)`.
    pub omega0_sq_centre: f64,
    /// `(χ0/α)² = (ω0/α)² + drive/(1 + (ω/α)²)`.
    pub omega0_sq_relative: f64,
    pub reduced_centre: Complex64,
    pub reduced_relative: Complex64,
    pub secular_centre: Complex64,
    pub secular_relative: Complex64,
    pub gap_centre: f64,
    pub gap_relative: f64,
    /// Largest `|Ω0² − ω0²|/ω0²` over both branches.
    pub frequency_shift: f64,
}

impl ReducedModelReport {
    pub fn max_gap(&self) -> f64 {
        self.gap_centre.max(self.gap_relative)
    }
}

pub fn reduced_model_check(problem: &CharacteristicProblem) -> Result<ReducedModelReport> {
    problem.validate()?;
    let (a, b, d) = (problem.ratio_w0, problem.ratio_w, problem.drive);
    let lam = d / ((1.0 + b) * (1.0 + b));
    let shift = d / (1.0 + b);
    let (wr, wy) = (a - shift, a + shift);
    let reduced_centre = Complex64::new(-lam, (wr - lam * lam).sqrt());
    let reduced_relative = Complex64::new(lam, (wy - lam * lam).sqrt());
    let centre = CharacteristicProblem {
        branch: Branch::Centre,
        ..*problem
    };
    let relative = CharacteristicProblem {
        branch: Branch::Relative,
        ..*problem
    };
    let secular_centre = solve_characteristic(&centre)?.secular();
    let secular_relative = solve_characteristic(&relative)?.secular();
    Ok(ReducedModelReport {
        lambda_over_alpha: lam,
        omega0_sq_centre: wr,
        omega0_sq_relative: wy,
        reduced_centre,
        reduced_relative,
        secular_centre,
        secular_relative,
        gap_centre: (reduced_centre - secular_centre).norm() / secular_centre.norm(),
        gap_relative: (reduced_relative - secular_relative).norm() / secular_relative.norm(),
        frequency_shift: shift / a,
    })
}

/// Serialized root analysis for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub problem: CharacteristicProblem,
    pub roots: RootSet,
    pub timescales: Timescales,
    pub reduced: ReducedModelReport,
}

pub fn root_report(problem: &CharacteristicProblem) -> Result<RootReport> {
    let roots = solve_characteristic(problem)?;
    let timescales = classify(&roots, problem)?;
    Ok(RootReport {
        problem: *problem,
        roots,
        timescales,
        reduced: reduced_model_check(problem)?,
    })
}
