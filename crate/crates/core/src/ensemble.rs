//! Microcanonical sampling of the Nelson energy surface and deterministic
//! ensemble averages over trajectories.
//!
//! Every trajectory draws from its own ChaCha stream keyed by
//! `(seed, trajectory index)`. Trajectories are grouped into fixed blocks of
//! [`BLOCK_SIZE`] consecutive indices, each block is accumulated in index
//! order, and block results are merged by a pairwise tree whose shape depends
//! only on the block count. Results are therefore bitwise identical for any
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{
    nelson_energy, nelson_potential, oscillator_energy, renormalized_energy, total_energy,
    ModelParams, PhasePoint,
};
use crate::series::TimeSeries;
use crate::symplectic::{integrate, IntegratorConfig};

/// Trajectories per leaf of the reduction tree.
pub const BLOCK_SIZE: usize = 64;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_traj: usize,
    pub seed: u64,
    pub e_c0: f64,
    /// `false` propagates the isolated chaotic system (`γ = 0`).
    pub coupled: bool,
    /// Worker threads; `None` uses the ambient rayon pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(n_traj: usize, seed: u64, e_c0: f64, coupled: bool) -> Self {
        Self {
            n_traj,
            seed,
            e_c0,
            coupled,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(invalid("n_traj", "must be >= 1"));
        }
        if !(self.e_c0.is_finite() && self.e_c0 > 0.0) {
            return Err(invalid("e_c0", format!("must be > 0, got {}", self.e_c0)));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// Quantity averaged over the ensemble at each sample time. Some variants
/// also read the trajectory's initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    OscillatorEnergy,
    /// Oscillator energy minus `(γ²/2) F(0) z²`.
    RenormalizedEnergy { f0: f64 },
    ChaoticEnergy,
    TotalEnergy,
    X,
    Z,
    /// `x(0) x(t)`.
    XX,
    /// `p_x(0) x(t)`.
    PxX,
}

impl Observable {
    #[inline]
    fn eval(&self, initial: &PhasePoint, s: &PhasePoint, params: &ModelParams) -> f64 {
        match *self {
            Observable::OscillatorEnergy => oscillator_energy(s.z, s.p_z, params),
            Observable::RenormalizedEnergy { f0 } => renormalized_energy(s.z, s.p_z, params, f0),
            Observable::ChaoticEnergy => nelson_energy([s.x, s.y], [s.p_x, s.p_y]),
            Observable::TotalEnergy => total_energy(s, params),
            Observable::X => s.x,
            Observable::Z => s.z,
            Observable::XX => initial.x * s.x,
            Observable::PxX => initial.p_x * s.x,
        }
    }
}

/// Per-trajectory random stream.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One point `(x, y, p_x, p_y)` on `H_c = e`.
///
/// `(x, y)` is uniform on the accessible region `V(x, y) ≤ e`; with two
/// momentum degrees of freedom the momentum-shell measure is independent of
/// `V`, so a uniform configuration plus a uniform momentum direction at
/// `|p| = √(2(e − V))` is exactly microcanonical. The substitution
/// `u = y − x²/2` has unit Jacobian and maps the region onto the ellipse
/// `u² + 0.05 x² ≤ e`.
pub fn sample_surface_point<R: Rng>(e: f64, rng: &mut R) -> Result<[f64; 4]> {
    if !(e.is_finite() && e > 0.0) {
        return Err(invalid("e_c0", format!("must be > 0, got {e}")));
    }
    let x_max = (20.0 * e).sqrt();
    let u_max = e.sqrt();
    for _ in 0..MAX_REJECTIONS {
        let x = rng.gen_range(-x_max..=x_max);
        let u = rng.gen_range(-u_max..=u_max);
        let y = 0.5 * x * x + u;
        let v = nelson_potential(x, y);
        if v > e {
            continue;
        }
        let p = (2.0 * (e - v)).sqrt();
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let (px, py) = (p * angle.cos(), p * angle.sin());
        return Ok([x, y, px, py]);
    }
    Err(Error::RejectionFailure {
        attempts: MAX_REJECTIONS,
    })
}

/// `n_traj` chaotic initial conditions; sample `i` uses stream `i`.
pub fn sample_microcanonical(e_c0: f64, n_traj: usize, seed: u64) -> Result<Vec<[f64; 4]>> {
    (0..n_traj as u64)
        .map(|i| sample_surface_point(e_c0, &mut trajectory_rng(seed, i)))
        .collect()
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + d * (b.n / n),
            m2: a.m2 + b.m2 + d * d * (a.n * b.n / n),
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            f64::INFINITY
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

fn merge_all(a: Vec<Moments>, b: Vec<Moments>) -> Vec<Moments> {
    a.into_iter().zip(b).map(|(x, y)| Moments::merge(x, y)).collect()
}

/// Pairwise tree over `blocks[lo..hi]`, split at the midpoint.
fn tree_reduce(blocks: &mut [Option<Vec<Moments>>]) -> Vec<Moments> {
    match blocks.len() {
        1 => blocks[0].take().expect("each block is reduced once"),
        n => {
            let (left, right) = blocks.split_at_mut(n / 2);
            merge_all(tree_reduce(left), tree_reduce(right))
        }
    }
}

/// Averages of `observables` over the ensemble, in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverages {
    pub observables: Vec<Observable>,
    pub series: Vec<TimeSeries>,
}

impl EnsembleAverages {
    pub fn get(&self, obs: &Observable) -> Option<&TimeSeries> {
        self.observables
            .iter()
            .position(|o| o == obs)
            .map(|i| &self.series[i])
    }
}

fn initial_state(chaotic: [f64; 4], params: &ModelParams) -> PhasePoint {
    let (z0, pz0) = params.oscillator_initial();
    PhasePoint::new(z0, pz0, chaotic[0], chaotic[1], chaotic[2], chaotic[3])
}

fn run_block(
    block: usize,
    spec: &EnsembleSpec,
    params: &ModelParams,
    config: &IntegratorConfig,
    observables: &[Observable],
) -> Result<Vec<Moments>> {
    let n_samples = config.n_samples();
    let n_obs = observables.len();
    let mut acc = vec![Moments::default(); n_obs * n_samples];
    let mut buf = vec![0.0; n_obs * n_samples];
    let lo = block * BLOCK_SIZE;
    let hi = ((block + 1) * BLOCK_SIZE).min(spec.n_traj);
    for index in lo..hi {
        let chaotic = sample_surface_point(spec.e_c0, &mut trajectory_rng(spec.seed, index as u64))?;
        let start = initial_state(chaotic, params);
        let mut k = 0;
        integrate(&start, params, config, |_, s| {
            for (j, obs) in observables.iter().enumerate() {
                buf[j * n_samples + k] = obs.eval(&start, s, params);
            }
            k += 1;
        })?;
        for (a, v) in acc.iter_mut().zip(&buf) {
            a.push(*v);
        }
    }
    Ok(acc)
}

/// Propagate the ensemble described by `spec` and average `observables`
/// at every sample time of `config`.
///
/// The oscillator always starts at `z = 0`, `p_z = √(2 m E_o(0))`; chaotic
/// initial conditions are microcanonical at `spec.e_c0`. With
/// `spec.coupled == false` the coupling is switched off.
pub fn propagate_ensemble(
    spec: &EnsembleSpec,
    params: &ModelParams,
    config: &IntegratorConfig,
    observables: &[Observable],
) -> Result<EnsembleAverages> {
    spec.validate()?;
    config.validate()?;
    if observables.is_empty() {
        return Err(Error::EmptyObservables);
    }
    let mut params = *params;
    params.e_c0 = spec.e_c0;
    if !spec.coupled {
        params.gamma = 0.0;
    }
    params.validate()?;

    let n_blocks = spec.n_traj.div_ceil(BLOCK_SIZE);
    let compute = || -> Result<Vec<Vec<Moments>>> {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| run_block(b, spec, &params, config, observables))
            .collect()
    };
    let blocks = match spec.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| invalid("workers", e.to_string()))?
            .install(compute)?,
        None => compute()?,
    };
    let mut slots: Vec<Option<Vec<Moments>>> = blocks.into_iter().map(Some).collect();
    let total = tree_reduce(&mut slots);

    let n_samples = config.n_samples();
    let times = config.sample_times();
    let series = (0..observables.len())
        .map(|j| {
            let m = &total[j * n_samples..(j + 1) * n_samples];
            TimeSeries::new(
                times.clone(),
                m.iter().map(|x| x.mean).collect(),
                m.iter().map(|x| x.stderr()).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleAverages {
        observables: observables.to_vec(),
        series,
    })
}

/// `⟨x(0)x(t)⟩_e` and `⟨p_x(0)x(t)⟩_e` of the isolated chaotic system.
pub fn correlation_pair(
    spec: &EnsembleSpec,
    params: &ModelParams,
    config: &IntegratorConfig,
) -> Result<(TimeSeries, TimeSeries)> {
    if spec.coupled {
        return Err(invalid(
            "coupled",
            "correlation functions are defined for the isolated chaotic system",
        ));
    }
    let mut out = propagate_ensemble(spec, params, config, &[Observable::XX, Observable::PxX])?;
    let px = out.series.pop().expect("two series");
    let xx = out.series.pop().expect("two series");
    Ok((xx, px))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_lie_on_the_surface() {
        for e in [0.05, 0.38, 1.7] {
            for s in sample_microcanonical(e, 2000, 11).unwrap() {
                let h = nelson_energy([s[0], s[1]], [s[2], s[3]]);
                assert!((h - e).abs() <= 1e-12 * e, "{h} vs {e}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_energy() {
        assert!(sample_microcanonical(0.0, 3, 1).is_err());
        assert!(sample_microcanonical(-1.0, 3, 1).is_err());
        let spec = EnsembleSpec::new(0, 1, 0.38, false);
        let cfg = IntegratorConfig::new(0.01, 10, 1);
        assert!(propagate_ensemble(&spec, &ModelParams::default(), &cfg, &[Observable::X]).is_err());
    }

    #[test]
    fn empty_observable_list_is_an_error() {
        let spec = EnsembleSpec::new(4, 1, 0.38, false);
        let cfg = IntegratorConfig::new(0.01, 10, 1);
        assert!(matches!(
            propagate_ensemble(&spec, &ModelParams::default(), &cfg, &[]),
            Err(Error::EmptyObservables)
        ));
    }

    #[test]
    fn streams_are_keyed_by_index() {
        let a = sample_microcanonical(0.38, 10, 5).unwrap();
        let b = sample_microcanonical(0.38, 20, 5).unwrap();
        assert_eq!(a[..], b[..10]);
        let c = sample_microcanonical(0.38, 10, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn moments_merge_matches_direct() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 0.01).collect();
        let mut whole = Moments::default();
        data.iter().for_each(|v| whole.push(*v));
        let mut a = Moments::default();
        let mut b = Moments::default();
        data[..337].iter().for_each(|v| a.push(*v));
        data[337..].iter().for_each(|v| b.push(*v));
        let m = Moments::merge(a, b);
        assert!((m.mean - whole.mean).abs() < 1e-12);
        assert!((m.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn decoupled_oscillator_energy_is_constant() {
        let params = ModelParams {
            gamma: 0.0,
            ..ModelParams::default()
        };
        let spec = EnsembleSpec::new(16, 3, 0.38, true);
        let cfg = IntegratorConfig::new(0.01, 5000, 100);
        let out = propagate_ensemble(&spec, &params, &cfg, &[Observable::OscillatorEnergy]).unwrap();
        for v in &out.series[0].values {
            assert!((v - params.e_o0).abs() < 1e-12 * params.e_o0, "{v}");
        }
    }

    #[test]
    fn single_trajectory_has_infinite_error() {
        let spec = EnsembleSpec::new(1, 3, 0.38, false);
        let cfg = IntegratorConfig::new(0.01, 100, 10);
        let out = propagate_ensemble(&spec, &ModelParams::default(), &cfg, &[Observable::X]).unwrap();
        assert!(out.series[0].stderr.iter().all(|e| e.is_infinite()));
    }

    #[test]
    fn total_energy_is_conserved_per_ensemble() {
        let params = ModelParams::default();
        let spec = EnsembleSpec::new(40, 9, 0.38, true);
        let cfg = IntegratorConfig::new(0.01, 20_000, 1000);
        let out = propagate_ensemble(&spec, &params, &cfg, &[Observable::TotalEnergy]).unwrap();
        let e = &out.series[0].values;
        for v in e {
            assert!((v - e[0]).abs() < 1e-9 * e[0]);
        }
    }

    #[test]
    fn correlation_pair_requires_isolated_system() {
        let spec = EnsembleSpec::new(4, 1, 0.38, true);
        let cfg = IntegratorConfig::new(0.01, 10, 1);
        assert!(correlation_pair(&spec, &ModelParams::default(), &cfg).is_err());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = EnsembleSpec::new(3 * BLOCK_SIZE + 17, 2024, 0.38, true);
        let cfg = IntegratorConfig::new(0.01, 3000, 50);
        let obs = [Observable::OscillatorEnergy, Observable::XX];
        let params = ModelParams::default();
        let one = propagate_ensemble(&spec.with_workers(1), &params, &cfg, &obs).unwrap();
        for w in [2, 3, 5] {
            let other = propagate_ensemble(&spec.with_workers(w), &params, &cfg, &obs).unwrap();
            for (a, b) in one.series.iter().zip(&other.series) {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&a.values), bits(&b.values));
                assert_eq!(bits(&a.stderr), bits(&b.stderr));
            }
        }
    }
}
