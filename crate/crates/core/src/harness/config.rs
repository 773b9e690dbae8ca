//! JSON experiment configuration. Every section rejects unknown keys.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::experiments::Method;
use crate::harness::wave::WaveConfig;
use crate::optim::{OptimConfig, StepRule};
use crate::transforms::TransformSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Tsvdm(TsvdmConfig),
    Optimize(OptimizeConfig),
    Angle(AngleConfig),
    Synthetic(SyntheticConfig),
    Rom(RomConfig),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Tsvdm(c) => c.validate(),
            ExperimentConfig::Optimize(c) => c.validate(),
            ExperimentConfig::Angle(c) => c.validate(),
            ExperimentConfig::Synthetic(c) => c.validate(),
            ExperimentConfig::Rom(c) => c.validate(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Tsvdm(_) => "tsvdm",
            ExperimentConfig::Optimize(_) => "optimize",
            ExperimentConfig::Angle(_) => "angle",
            ExperimentConfig::Synthetic(_) => "synthetic",
            ExperimentConfig::Rom(_) => "rom",
        }
    }
}

/// Resolves a transform recipe; a bare `random` takes the run seed.
pub fn parse_transform(spec: &str, seed: u64) -> Result<TransformSpec> {
    if spec == "random" {
        Ok(TransformSpec::RandomOrthogonal(seed))
    } else {
        spec.parse()
    }
}

fn check_transform(spec: &str) -> Result<()> {
    parse_transform(spec, 0).map(|_| ()).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsvdmConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub transform: String,
    /// Truncation; `None` keeps all `min(n1, n2)` singular tubes.
    pub k: Option<usize>,
    pub seed: u64,
}

impl Default for TsvdmConfig {
    fn default() -> Self {
        TsvdmConfig { input: PathBuf::new(), output: PathBuf::from("out"), transform: "dct".into(), k: None, seed: 0 }
    }
}

impl TsvdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("an input tensor file is required".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be positive".into()));
        }
        check_transform(&self.transform)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Data tensor `A`.
    pub input: PathBuf,
    /// Observations `B`. When present the regression objective is used,
    /// otherwise the low-t-rank objective with truncation `k`.
    pub observations: Option<PathBuf>,
    pub output: PathBuf,
    pub transform: String,
    pub k: Option<usize>,
    pub lambda: f64,
    pub seed: u64,
    pub optim: OptimConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            input: PathBuf::new(),
            observations: None,
            output: PathBuf::from("out"),
            transform: "identity".into(),
            k: None,
            lambda: 0.0,
            seed: 0,
            optim: OptimConfig::default(),
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("an input tensor file is required".into()));
        }
        if self.observations.is_none() && self.k.is_none() {
            return Err(Error::Config("the low-rank objective needs k (or give observations for regression)".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        check_transform(&self.transform)?;
        self.optim.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleConfig {
    pub theta0: Vec<f64>,
    pub alpha: f64,
    pub iters: usize,
    pub tol: f64,
    pub output: PathBuf,
}

impl Default for AngleConfig {
    fn default() -> Self {
        AngleConfig {
            theta0: vec![PI / 8.0, 3.0 * PI / 8.0, 5.0 * PI / 8.0],
            alpha: 0.1,
            iters: 500,
            tol: 1e-10,
            output: PathBuf::from("out"),
        }
    }
}

impl AngleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta0.is_empty() {
            return Err(Error::Config("at least one starting angle is required".into()));
        }
        StepRule::Fixed { alpha: self.alpha }.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `n3 = 2^d`.
    pub d: u32,
    /// Sample points per slice.
    pub n1: usize,
    pub noise: f64,
    pub method: Method,
    pub seed: u64,
    pub transform: String,
    pub optim: OptimConfig,
    pub output: PathBuf,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            d: 2,
            n1: 100,
            noise: 0.0,
            method: Method::Varpro,
            seed: 0,
            transform: "random".into(),
            optim: OptimConfig { max_iters: 5000, ..OptimConfig::default() },
            output: PathBuf::from("out"),
        }
    }
}

impl SyntheticConfig {
    pub fn n3(&self) -> usize {
        1usize << self.d
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.d) {
            return Err(Error::Config(format!("d must lie in 1..=6, got {}", self.d)));
        }
        if self.n1 < 2 {
            return Err(Error::Config("n1 must be at least 2".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be nonnegative, got {}", self.noise)));
        }
        check_transform(&self.transform)?;
        self.optim.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RomConfig {
    pub wave: WaveConfig,
    pub k: usize,
    /// Starting transforms for the learned bases.
    pub inits: Vec<String>,
    pub seed: u64,
    pub optim: OptimConfig,
    pub output: PathBuf,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            wave: WaveConfig::default(),
            k: 2,
            inits: vec!["identity".into(), "dct".into(), "data".into()],
            seed: 0,
            optim: OptimConfig { max_iters: 300, step: StepRule::warm_backtracking(), ..OptimConfig::default() },
            output: PathBuf::from("out"),
        }
    }
}

impl RomConfig {
    pub fn validate(&self) -> Result<()> {
        self.wave.validate()?;
        if self.k == 0 || self.k > self.wave.n_space.min(self.wave.n_time) {
            return Err(Error::Config(format!("k = {} is out of range for the snapshot grid", self.k)));
        }
        for s in &self.inits {
            check_transform(s)?;
        }
        self.optim.validate()
    }
}

/// Recursively overlays `patch` onto `base` (objects merge, everything
/// else is replaced).
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Applies the config file at `path` on top of `base` (built from command
/// line flags). The file may omit the `experiment` tag; if present it must
/// agree with `base`.
pub fn overlay_config(base: &ExperimentConfig, path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if !patch.is_object() {
        return Err(Error::Config("config file must hold a JSON object".into()));
    }
    if let Some(tag) = patch.get("experiment") {
        if tag.as_str() != Some(base.kind()) {
            return Err(Error::Config(format!("config is for experiment {tag}, command is '{}'", base.kind())));
        }
    }
    let mut value = serde_json::to_value(base)?;
    merge_json(&mut value, &patch);
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for cfg in [
            ExperimentConfig::Angle(AngleConfig::default()),
            ExperimentConfig::Synthetic(SyntheticConfig::default()),
            ExperimentConfig::Rom(RomConfig::default()),
        ] {
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config(r#"{"experiment": "angle", "alpha": 0.1, "bogus": 1}"#).is_err());
        assert!(parse_config(r#"{"experiment": "synthetic", "optim": {"max_iter": 3}}"#).is_err());
        assert!(parse_config(r#"{"experiment": "nope"}"#).is_err());
        let ok =
            parse_config(r#"{"experiment": "synthetic", "d": 1, "optim": {"max_iters": 3, "step": {"fixed": {"alpha": 0.5}}}}"#)
                .unwrap();
        match ok {
            ExperimentConfig::Synthetic(s) => {
                assert_eq!(s.n3(), 2);
                assert_eq!(s.optim.max_iters, 3);
                assert_eq!(s.optim.step, StepRule::Fixed { alpha: 0.5 });
                assert_eq!(s.optim.grad_tol, 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_failures() {
        assert!(parse_config(r#"{"experiment": "synthetic", "d": 0}"#).is_err());
        assert!(parse_config(r#"{"experiment": "angle", "alpha": -1}"#).is_err());
        assert!(parse_config(r#"{"experiment": "optimize", "input": "a.stm"}"#).is_err());
        assert!(parse_config(r#"{"experiment": "optimize", "input": "a.stm", "k": 1, "transform": "fourier"}"#).is_err());
        assert!(parse_config(r#"{"experiment": "rom", "k": 0}"#).is_err());
        assert!(parse_config(r#"{"experiment": "synthetic", "optim": {"step": {"backtracking": {"alpha0": 1, "rho": 2, "c": 0.1, "max_backtracks": 3}}}}"#).is_err());
    }

    #[test]
    fn overlay_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"optim": {"max_iters": 7}, "noise": 0.01}"#).unwrap();
        let base = ExperimentConfig::Synthetic(SyntheticConfig { d: 1, ..SyntheticConfig::default() });
        match overlay_config(&base, &path).unwrap() {
            ExperimentConfig::Synthetic(s) => {
                assert_eq!(s.d, 1);
                assert_eq!(s.optim.max_iters, 7);
                assert_eq!(s.noise, 0.01);
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(&path, r#"{"experiment": "rom"}"#).unwrap();
        assert!(overlay_config(&base, &path).is_err());
    }
}
