use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::limits::Weight;
use crate::lti::RationalTF;
use crate::stochsim::NoiseSpec;
use crate::verify::{bundled_systems, SimPlan, SystemSpec, VerifyOptions, DEFAULT_SAMPLES, DT_FACTOR};

/// A root given as a real number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RootSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl RootSpec {
    fn value(self) -> Complex64 {
        match self {
            RootSpec::Real(x) => Complex64::new(x, 0.0),
            RootSpec::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Either `{zeros, poles, gain}` or `{num_coeffs, den_coeffs}`, never both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeros: Option<Vec<RootSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<RootSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub den_coeffs: Option<Vec<f64>>,
}

impl RationalSpec {
    pub fn build(&self, what: &str) -> Result<RationalTF, CliError> {
        let zpk = self.zeros.is_some() || self.poles.is_some() || self.gain.is_some();
        let coeffs = self.num_coeffs.is_some() || self.den_coeffs.is_some();
        let bad = |msg: String| CliError::Config(format!("{what}: {msg}"));
        match (zpk, coeffs) {
            (true, true) => Err(bad("give either zeros/poles/gain or num_coeffs/den_coeffs, not both".into())),
            (false, false) => Err(bad("missing transfer function".into())),
            (true, false) => {
                let gain = self.gain.ok_or_else(|| bad("gain is required with zeros/poles".into()))?;
                let roots = |r: &Option<Vec<RootSpec>>| -> Vec<Complex64> {
                    r.iter().flatten().map(|x| x.value()).collect()
                };
                RationalTF::zpk(roots(&self.zeros), roots(&self.poles), gain).map_err(|e| bad(e.to_string()))
            }
            (false, true) => match (&self.num_coeffs, &self.den_coeffs) {
                (Some(n), Some(d)) => RationalTF::from_coeffs(n, d).map_err(|e| bad(e.to_string())),
                _ => Err(bad("num_coeffs and den_coeffs go together".into())),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Shaping filter driven by unit white noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<RationalSpec>,
    /// Shorthand for the shape `1/(s + ou_rate)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ou_rate: Option<f64>,
    #[serde(default = "one")]
    pub intensity: f64,
}

fn one() -> f64 {
    1.0
}

impl NoiseConfig {
    pub fn build(&self) -> Result<NoiseSpec, CliError> {
        let err = |e: crate::stochsim::SimError| CliError::Config(format!("noise: {e}"));
        match (&self.shape, self.ou_rate) {
            (Some(_), Some(_)) => Err(CliError::Config("noise: give either shape or ou_rate, not both".into())),
            (None, None) => Err(CliError::Config("noise: shape or ou_rate is required".into())),
            (Some(s), None) => NoiseSpec::new(s.build("noise.shape")?, self.intensity).map_err(err),
            (None, Some(a)) => NoiseSpec::ou(a, self.intensity).map_err(err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub id: String,
    pub plant: RationalSpec,
    pub controller: RationalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default = "one_trial")]
    pub trials: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    #[serde(default)]
    pub nperseg: Option<usize>,
}

fn one_trial() -> usize {
    1
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_dt_factor() -> f64 {
    DT_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    Unweighted,
    InvOmegaSq,
}

impl WeightName {
    pub fn weight(self) -> Weight {
        match self {
            WeightName::Unweighted => Weight::Unweighted,
            WeightName::InvOmegaSq => Weight::InvOmegaSq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "all_weights")]
    pub weights: Vec<WeightName>,
    #[serde(default)]
    pub tolerances: VerifyOptions,
}

fn all_weights() -> Vec<WeightName> {
    vec![WeightName::Unweighted, WeightName::InvOmegaSq]
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            weights: all_weights(),
            tolerances: VerifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("bode-limits-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Text, Format::Csv, Format::Binary]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Top-level configuration. A single system may be given inline through
/// `plant`/`controller`/`noise`; `systems` and `bundled` add more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<RationalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<RationalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub systems: Vec<SystemConfig>,
    /// Include the four reference loops.
    #[serde(default)]
    pub bundled: bool,
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sim.trials == 0 {
            return Err(CliError::Config("sim.trials must be at least 1".into()));
        }
        if self.sim.samples < 1024 {
            return Err(CliError::Config("sim.samples must be at least 1024".into()));
        }
        for (name, v) in [("sim.dt", self.sim.dt), ("sim.duration", self.sim.duration)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {x}")));
                }
            }
        }
        if !(self.sim.dt_factor > 0.0 && self.sim.dt_factor.is_finite()) {
            return Err(CliError::Config("sim.dt_factor must be positive".into()));
        }
        if self.analysis.weights.is_empty() {
            return Err(CliError::Config("analysis.weights must not be empty".into()));
        }
        if self.plant.is_some() != self.controller.is_some() {
            return Err(CliError::Config("plant and controller must be given together".into()));
        }
        if self.plant.is_none() && (self.id.is_some() || self.noise.is_some()) {
            return Err(CliError::Config("id and noise need an inline plant and controller".into()));
        }
        // surface transfer-function errors at parse time
        self.systems()?;
        Ok(())
    }

    /// Systems in order: bundled, inline, then listed.
    pub fn systems(&self) -> Result<Vec<SystemSpec>, CliError> {
        let mut out = if self.bundled { bundled_systems() } else { Vec::new() };
        if let (Some(p), Some(c)) = (&self.plant, &self.controller) {
            out.push(SystemSpec {
                id: self.id.clone().unwrap_or_else(|| "system".into()),
                plant: p.build("plant")?,
                controller: c.build("controller")?,
                noise: self.noise.as_ref().map(NoiseConfig::build).transpose()?,
            });
        }
        for s in &self.systems {
            out.push(SystemSpec {
                id: s.id.clone(),
                plant: s.plant.build(&format!("{}.plant", s.id))?,
                controller: s.controller.build(&format!("{}.controller", s.id))?,
                noise: s.noise.as_ref().map(NoiseConfig::build).transpose()?,
            });
        }
        if out.is_empty() {
            return Err(CliError::Config(
                "no systems: give plant/controller, systems, or bundled".into(),
            ));
        }
        let mut ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("duplicate system id {:?}", w[0])));
        }
        Ok(out)
    }

    pub fn plan(&self) -> SimPlan {
        SimPlan {
            dt: self.sim.dt,
            dt_factor: self.sim.dt_factor,
            duration: self.sim.duration,
            n_samples: self.sim.samples,
            trials: self.sim.trials,
            seed: self.sim.seed,
            nperseg: self.sim.nperseg,
        }
    }

    pub fn weights(&self) -> Vec<Weight> {
        self.analysis.weights.iter().map(|w| w.weight()).collect()
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": {"zeros": [2.0], "poles": [1.0, -3.0], "gain": 1.0},
        "controller": {"num_coeffs": [3.0], "den_coeffs": [1.0]},
        "sim": {"seed": 1}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.sim.trials, 1);
        assert_eq!(cfg.sim.samples, DEFAULT_SAMPLES);
        assert_eq!(cfg.analysis.tolerances, VerifyOptions::default());
        assert_eq!(cfg.analysis.weights.len(), 2);
        let sys = cfg.systems().unwrap();
        assert_eq!(sys.len(), 1);
        assert_eq!(sys[0].plant.poles().len(), 2);
    }

    #[test]
    fn both_forms_rejected() {
        let text = MINIMAL.replace(r#""gain": 1.0}"#, r#""gain": 1.0, "num_coeffs": [1.0], "den_coeffs": [1.0, 1.0]}"#);
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
    }

    #[test]
    fn missing_seed_rejected() {
        let text = MINIMAL.replace(r#""seed": 1"#, r#""trials": 2"#);
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_position() {
        let text = MINIMAL.replace(r#""sim""#, r#""extra": 1, "sim""#);
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("line") && err.contains("extra"), "{err}");
    }

    #[test]
    fn complex_roots_and_ou_noise() {
        let text = r#"{
            "id": "pair",
            "plant": {"poles": [[1.0, 2.0], [1.0, -2.0]], "gain": 1.0},
            "controller": {"num_coeffs": [1.0], "den_coeffs": [1.0]},
            "noise": {"ou_rate": 2.0},
            "sim": {"seed": 9}
        }"#;
        let sys = RunConfig::from_json(text).unwrap().systems().unwrap();
        assert_eq!(sys[0].id, "pair");
        assert!(sys[0].noise.is_some());
    }

    #[test]
    fn zero_trials_rejected() {
        let text = MINIMAL.replace(r#""seed": 1"#, r#""seed": 1, "trials": 0"#);
        assert!(RunConfig::from_json(&text).is_err());
    }
}
