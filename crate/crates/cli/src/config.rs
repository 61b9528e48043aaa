//! Experiment configuration, read from TOML or assembled from flags.

use std::path::{Path, PathBuf};

use kernelflows::skewbm::Construction;
use kernelflows::Measure;
use serde::{Deserialize, Serialize};

/// A configuration problem: unreadable file, bad syntax or invalid values.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// A measure written as a tagged table, for example
/// `measure = { kind = "atomic", atoms = [[0.5, 0.0], [0.5, 1.0]] }`.
/// Atoms are `[weight, location]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform,
    DiracHalf,
    FairBernoulli,
    #[serde(alias = "beta-symmetric")]
    Beta {
        shape: f64,
    },
    Atomic {
        atoms: Vec<[f64; 2]>,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure, ConfigError> {
        let built = match self {
            MeasureSpec::Uniform => Ok(Measure::Uniform),
            MeasureSpec::DiracHalf => Ok(Measure::DiracHalf),
            MeasureSpec::FairBernoulli => Ok(Measure::FairBernoulli),
            MeasureSpec::Beta { shape } => Measure::beta_symmetric(*shape),
            MeasureSpec::Atomic { atoms } => {
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a[0], a[1])).collect();
                Measure::atomic(&pairs)
            }
        };
        built.map_err(|e| ConfigError(e.to_string()))
    }

    /// Parses the short form accepted by `--measure`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let m = Measure::parse(text).map_err(|e| ConfigError(e.to_string()))?;
        Ok(Self::from_measure(&m))
    }

    pub fn from_measure(m: &Measure) -> Self {
        match m {
            Measure::Uniform => MeasureSpec::Uniform,
            Measure::DiracHalf => MeasureSpec::DiracHalf,
            Measure::FairBernoulli => MeasureSpec::FairBernoulli,
            Measure::BetaSymmetric(a) => MeasureSpec::Beta { shape: a.get() },
            Measure::Atomic(a) => MeasureSpec::Atomic { atoms: a.atoms().map(|(w, x)| [w, x]).collect() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OnePoint,
    NPoint,
    Skew,
    Generator,
    Chaos,
    Classify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::OnePoint => "one-point",
            ExperimentKind::NPoint => "n-point",
            ExperimentKind::Skew => "skew",
            ExperimentKind::Generator => "generator",
            ExperimentKind::Chaos => "chaos",
            ExperimentKind::Classify => "classify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionName {
    Flips,
    Walk,
    SignProduct,
}

impl From<ConstructionName> for Construction {
    fn from(c: ConstructionName) -> Self {
        match c {
            ConstructionName::Flips => Construction::FlippedExcursions,
            ConstructionName::Walk => Construction::RescaledWalk,
            ConstructionName::SignProduct => Construction::SignProduct,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dt: default_dt(), horizon: default_horizon() }
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

fn default_replicas() -> usize {
    10_000
}

fn default_seed() -> u64 {
    42
}

fn default_out() -> PathBuf {
    PathBuf::from("kernelflows-out")
}

fn default_dump() -> usize {
    10
}

/// Everything one experiment run needs.
///
/// Fields after `out` only apply to some experiments: `x0` (one-point,
/// n-point), `points` (classify), `alpha`, `constructions`, `walk_scale`
/// (skew), `x` and `t` (generator, chaos) and `dump` (one-point, n-point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub constructions: Option<Vec<ConstructionName>>,
    #[serde(default)]
    pub walk_scale: Option<u32>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_dump")]
    pub dump: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            measure: None,
            grid: GridSpec::default(),
            replicas: default_replicas(),
            seed: default_seed(),
            out: default_out(),
            x0: None,
            points: None,
            alpha: None,
            constructions: None,
            walk_scale: None,
            x: None,
            t: None,
            dump: default_dump(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The configured measure, or the uniform measure when none is given.
    pub fn measure(&self) -> Result<Measure, ConfigError> {
        self.measure.as_ref().map_or(Ok(Measure::Uniform), MeasureSpec::build)
    }

    pub fn starts(&self) -> Vec<f64> {
        match (&self.x0, self.experiment) {
            (Some(x), _) => x.clone(),
            (None, ExperimentKind::OnePoint) => vec![0.0],
            (None, _) => vec![0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = self.grid;
        if !(g.dt > 0.0 && g.dt.is_finite()) {
            return invalid(format!("grid.dt must be positive, got {}", g.dt));
        }
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return invalid(format!("grid.horizon must be positive, got {}", g.horizon));
        }
        if g.horizon / g.dt > 1e8 {
            return invalid("grid has more than 1e8 steps");
        }
        if self.replicas == 0 {
            return invalid("replicas must be at least 1");
        }
        self.measure()?;
        let finite = |v: &[f64], what: &str| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                invalid(format!("{what} must be finite"))
            }
        };
        match self.experiment {
            ExperimentKind::OnePoint => {
                let x0 = self.starts();
                if x0.len() != 1 {
                    return invalid(format!("one-point takes a single start, got {}", x0.len()));
                }
                finite(&x0, "x0")?;
            }
            ExperimentKind::NPoint => {
                let x0 = self.starts();
                if x0.is_empty() || x0.len() > 16 {
                    return invalid("n-point takes between 1 and 16 starts");
                }
                finite(&x0, "x0")?;
            }
            ExperimentKind::Classify => {
                if !(1..=16).contains(&self.points.unwrap_or(4)) {
                    return invalid("points must be between 1 and 16");
                }
            }
            ExperimentKind::Skew => {
                let Some(alpha) = self.alpha else {
                    return invalid("skew needs alpha");
                };
                if !(0.0..=1.0).contains(&alpha) {
                    return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
                }
                if matches!(&self.constructions, Some(c) if c.is_empty()) {
                    return invalid("constructions must not be empty");
                }
                if !(1..=15).contains(&self.walk_scale.unwrap_or(8)) {
                    return invalid("walk_scale must be between 1 and 15");
                }
            }
            ExperimentKind::Generator => {
                let Some(x) = &self.x else {
                    return invalid("generator needs x");
                };
                if !(1..=2).contains(&x.len()) {
                    return invalid("generator supports x of dimension 1 or 2");
                }
                finite(x, "x")?;
                self.time_parameter(1e-3)?;
                if self.replicas < kernelflows::generator::MIN_REPLICAS {
                    return invalid(format!("generator needs at least {} replicas", kernelflows::generator::MIN_REPLICAS));
                }
            }
            ExperimentKind::Chaos => {
                let x = self.x.clone().unwrap_or_else(|| vec![0.0]);
                if x.len() != 1 {
                    return invalid("chaos takes a scalar x");
                }
                finite(&x, "x")?;
                self.time_parameter(0.1)?;
                if self.replicas < 2 {
                    return invalid("chaos needs at least 2 replicas");
                }
            }
        }
        Ok(())
    }

    /// `t`, or `default` when unset; must be positive.
    pub fn time_parameter(&self, default: f64) -> Result<f64, ConfigError> {
        let t = self.t.unwrap_or(default);
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            invalid(format!("t must be positive, got {t}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_round_trips() {
        let text = r#"
            experiment = "classify"
            measure = { kind = "atomic", atoms = [[0.5, 0.0], [0.5, 1.0]] }
            grid = { dt = 0.002, horizon = 2.0 }
            replicas = 500
            seed = 7
            out = "runs/classify"
            points = 3
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Classify);
        assert_eq!(cfg.measure().unwrap(), Measure::atomic(&[(0.5, 0.0), (0.5, 1.0)]).unwrap());
        assert_eq!(cfg.grid, GridSpec { dt: 0.002, horizon: 2.0 });
        assert_eq!((cfg.replicas, cfg.seed, cfg.points), (500, 7, Some(3)));
        let again = ExperimentConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = ExperimentConfig::from_toml("experiment = \"one-point\"").unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.replicas, 10_000);
        assert_eq!(cfg.starts(), vec![0.0]);
        assert_eq!(cfg.measure().unwrap(), Measure::Uniform);
    }

    #[test]
    fn every_measure_kind_parses() {
        for (text, want) in [
            ("{ kind = \"uniform\" }", Measure::Uniform),
            ("{ kind = \"dirac-half\" }", Measure::DiracHalf),
            ("{ kind = \"fair-bernoulli\" }", Measure::FairBernoulli),
            ("{ kind = \"beta\", shape = 2.0 }", Measure::beta_symmetric(2.0).unwrap()),
            ("{ kind = \"beta-symmetric\", shape = 0.5 }", Measure::beta_symmetric(0.5).unwrap()),
        ] {
            let cfg = ExperimentConfig::from_toml(&format!("experiment = \"n-point\"\nmeasure = {text}")).unwrap();
            assert_eq!(cfg.measure().unwrap(), want);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "experiment = \"teleport\"",
            "experiment = \"classify\"\nreplicas = 0",
            "experiment = \"classify\"\ngrid = { dt = -1.0 }",
            "experiment = \"classify\"\ngrid = { dt = 0.0 }",
            "experiment = \"classify\"\nsurprise = 1",
            "experiment = \"classify\"\nmeasure = { kind = \"atomic\", atoms = [[0.5, 0.0], [0.5, 0.9]] }",
            "experiment = \"classify\"\nmeasure = { kind = \"beta\", shape = -2.0 }",
            "experiment = \"skew\"",
            "experiment = \"skew\"\nalpha = 1.5",
            "experiment = \"generator\"",
            "experiment = \"generator\"\nx = [0.1, 0.2, 0.3]",
            "experiment = \"generator\"\nx = [0.1]\nt = 0.0",
            "experiment = \"one-point\"\nx0 = [0.0, 1.0]",
            "experiment = \"chaos\"\nx = [0.0, 1.0]",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn short_measure_names_map_to_specs() {
        assert_eq!(MeasureSpec::parse("beta:2").unwrap(), MeasureSpec::Beta { shape: 2.0 });
        assert_eq!(MeasureSpec::parse("atomic:0.5@0.2,0.5@0.8").unwrap(), MeasureSpec::Atomic { atoms: vec![[0.5, 0.2], [0.5, 0.8]] });
        assert!(MeasureSpec::parse("nonsense").is_err());
    }
}
