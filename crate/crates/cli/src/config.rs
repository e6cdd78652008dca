use std::path::{Path, PathBuf};

use chaosbath_core::model::ModelParams;
use chaosbath_core::symplectic::{IntegratorConfig, Scheme};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub ensemble: EnsembleSettings,
    pub integrator: IntegratorSettings,
    pub energy_flow: EnergyFlowSettings,
    pub quantum: QuantumSettings,
    pub output: OutputSettings,
    /// Previously written `fit.json`; when absent the fit is computed inline
    /// (energy flow) or taken from the published constants (quantum commands).
    pub fit_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub n_traj: usize,
    pub seed: u64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self { n_traj: 4000, seed: 2024 }
    }
}

/// `t_max` and `sample_interval` default per command when unset: 200 and 0.5
/// for correlations, `6/ω0` and 1 for energy flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub t_max: Option<f64>,
    pub sample_interval: Option<f64>,
    pub scheme: Scheme,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: None,
            sample_interval: None,
            scheme: Scheme::default(),
        }
    }
}

impl IntegratorSettings {
    pub fn build(&self, t_max: f64, sample_interval: f64) -> Result<IntegratorConfig, CliError> {
        let t_max = self.t_max.unwrap_or(t_max);
        let interval = self.sample_interval.unwrap_or(sample_interval);
        let mut cfg = IntegratorConfig::from_duration(self.dt, t_max, interval)?;
        cfg.scheme = self.scheme;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyFlowSettings {
    /// Initial `E_o/E_c` of each run.
    pub ratios: Vec<f64>,
}

impl Default for EnergyFlowSettings {
    fn default() -> Self {
        Self {
            ratios: vec![1.0, 0.25, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumSettings {
    pub width_gammas: Vec<f64>,
    pub width_lambda_t_max: f64,
    pub decoherence_gamma: f64,
    pub decoherence_lambda_t_max: f64,
    pub points: usize,
    /// Quanta `n` and bath ratio `Γ` of the decoherence-time estimate.
    pub quanta: f64,
    pub quanta_gamma: f64,
    /// Chaotic action `S_c` of the Ehrenfest check.
    pub action: f64,
}

impl Default for QuantumSettings {
    fn default() -> Self {
        Self {
            width_gammas: vec![0.5, 1.0, 2.0],
            width_lambda_t_max: 1.5,
            decoherence_gamma: 10.0,
            decoherence_lambda_t_max: 1.0,
            points: 301,
            quanta: 50.0,
            quanta_gamma: 100.0,
            action: chaosbath_core::superprop::DEFAULT_ACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: true,
        }
    }
}

impl RunConfig {
    /// Defaults, then the file at `path`, then each `--a.b=value` override.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(Self::default()).expect("config serializes");
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let file: Self = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            value = serde_json::to_value(file).expect("config serializes");
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        if self.ensemble.n_traj == 0 {
            return Err(CliError::Config("ensemble.n_traj must be >= 1".into()));
        }
        if self.energy_flow.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(CliError::Config("energy_flow.ratios must be finite and >= 0".into()));
        }
        let q = &self.quantum;
        if q.points < 2 {
            return Err(CliError::Config("quantum.points must be >= 2".into()));
        }
        for (name, v) in [
            ("quantum.width_lambda_t_max", q.width_lambda_t_max),
            ("quantum.decoherence_lambda_t_max", q.decoherence_lambda_t_max),
            ("quantum.decoherence_gamma", q.decoherence_gamma),
            ("quantum.quanta_gamma", q.quanta_gamma),
            ("quantum.action", q.action),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{name} must be finite and > 0")));
            }
        }
        if q.width_gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(CliError::Config("quantum.width_gammas must be > 0".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the output directory left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_override(root: &mut Value, arg: &str) -> Result<(), CliError> {
    let body = arg
        .strip_prefix("--")
        .ok_or_else(|| CliError::Config(format!("unexpected argument `{arg}`")))?;
    let (key, raw) = body
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{arg}` needs the form --key=value")))?;
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|m| m.get_mut(part))
            .ok_or_else(|| CliError::Config(format!("unknown config key `{key}`")))?;
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(
            None,
            &["--model.gamma=5e-4".into(), "--output.dir=/tmp/x".into(), "--integrator.t_max=12".into()],
        )
        .unwrap();
        assert_eq!(cfg.model.gamma, 5e-4);
        assert_eq!(cfg.output.dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.integrator.t_max, Some(12.0));
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = RunConfig::load(None, &["--model.nope=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::load(None, &["--model.gamma".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"model": {"gamma": 0.0}, "ensemble": {"n_traj": 7}}"#).unwrap();
        let cfg = RunConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(cfg.model.gamma, 0.0);
        assert_eq!(cfg.model.e_c0, 0.38);
        assert_eq!(cfg.ensemble.n_traj, 7);
        assert_eq!(cfg.ensemble.seed, EnsembleSettings::default().seed);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.ensemble.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let mut c = a.clone();
        c.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_model_is_rejected() {
        let err = RunConfig::load(None, &["--model.omega0=-1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
