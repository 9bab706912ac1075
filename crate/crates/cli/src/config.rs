//! Experiment configuration: a TOML document, overridable from the command line.
//!
//! Every field except `experiment` is optional; unset fields fall back to the
//! defaults of the chosen experiment, which reproduce the reference examples.
//! Baselines are written as `uniform(k)`, `bernoulli(q)` or a weight list
//! `w1, w2, ...`; mixing laws as `point(v)`, `atoms(v1:w1, v2:w2, ...)` or
//! `inverse-gamma(a, b)`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tiltlab::gibbs::SamplingMethod;
use tiltlab::gsm::MixingLaw;
use tiltlab::simplex::{Alphabet, Distribution};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dice,
    DiceConcentration,
    Bernoulli,
    Theorem1,
    Windows,
    Gsm,
    CfCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Dice,
        Experiment::DiceConcentration,
        Experiment::Bernoulli,
        Experiment::Theorem1,
        Experiment::Windows,
        Experiment::Gsm,
        Experiment::CfCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dice => "dice",
            Experiment::DiceConcentration => "dice-concentration",
            Experiment::Bernoulli => "bernoulli",
            Experiment::Theorem1 => "theorem1",
            Experiment::Windows => "windows",
            Experiment::Gsm => "gsm",
            Experiment::CfCheck => "cf-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| CliError::UnknownExperiment(s.to_string()))
    }
}

/// How the moment statistic is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    Equality,
    AtLeast,
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rejection,
    Importance,
}

impl From<Method> for SamplingMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Rejection => SamplingMethod::Rejection,
            Method::Importance => SamplingMethod::TiltImportance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintKind>,
    /// Moment target(s): the mean for finite alphabets, `(m, v)` for mixtures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    /// Window half-width ε (fixed window) or, for `windows`, the schedule
    /// amplitude `c` in `ε_n = c n^{-γ}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Schedule exponent `γ` for `windows`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    /// Block length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            baseline: None,
            constraint: None,
            target: None,
            half_width: None,
            exponent: None,
            n_grid: None,
            m: None,
            t_grid: None,
            samples: None,
            method: None,
            seed: 0,
            format: Format::Json,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Rejects empty grids and non-finite numbers.
    pub fn validate(&self) -> CliResult<()> {
        if self.n_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(CliError::Config("n_grid must not be empty".into()));
        }
        if self.t_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(CliError::Config("t_grid must not be empty".into()));
        }
        if self.target.as_ref().is_some_and(|t| t.is_empty()) {
            return Err(CliError::Config("target must not be empty".into()));
        }
        let numbers = self.target.iter().flatten().chain(self.t_grid.iter().flatten()).chain(&self.half_width);
        if let Some(x) = numbers.chain(&self.exponent).find(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("{x} is not a finite number")));
        }
        if self.m == Some(0) {
            return Err(CliError::Config("m must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_grid_or(&self, default: &[u64]) -> Vec<u64> {
        self.n_grid.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// Parses a comma-separated list, e.g. `20,40,60`.
pub fn parse_list<T: FromStr>(s: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Config(format!("cannot parse {x:?} in {s:?}"))))
        .collect()
}

fn call_args<'a>(spec: &'a str, name: &str) -> Option<&'a str> {
    spec.trim().strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')
}

/// `uniform(k)`, `bernoulli(q)` or a comma-separated weight list.
pub fn parse_baseline(spec: &str) -> CliResult<Distribution> {
    let bad = |e: tiltlab::Error| CliError::Config(format!("baseline {spec:?}: {e}"));
    if let Some(k) = call_args(spec, "uniform") {
        let k: usize = k.trim().parse().map_err(|_| CliError::Config(format!("baseline {spec:?}: bad size")))?;
        return Ok(Distribution::uniform(Alphabet::numbered(k).map_err(bad)?));
    }
    if let Some(q) = call_args(spec, "bernoulli") {
        let q: f64 = q.trim().parse().map_err(|_| CliError::Config(format!("baseline {spec:?}: bad mass")))?;
        return Distribution::bernoulli(q).map_err(bad);
    }
    let weights: Vec<f64> = parse_list(spec)?;
    let alphabet = Alphabet::numbered(weights.len()).map_err(bad)?;
    Distribution::from_weights(alphabet, weights).map_err(bad)
}

/// `point(v)`, `atoms(v1:w1, v2:w2, ...)` or `inverse-gamma(a, b)`; all centered.
pub fn parse_mixing(spec: &str) -> CliResult<MixingLaw> {
    let bad = |e: tiltlab::Error| CliError::Config(format!("mixing law {spec:?}: {e}"));
    if let Some(v) = call_args(spec, "point") {
        let v: f64 = v.trim().parse().map_err(|_| CliError::Config(format!("mixing law {spec:?}: bad variance")))?;
        return MixingLaw::point(0.0, v).map_err(bad);
    }
    if let Some(args) = call_args(spec, "atoms") {
        let atoms = args
            .split(',')
            .map(|pair| {
                let (v, w) = pair
                    .split_once(':')
                    .ok_or_else(|| CliError::Config(format!("atom {pair:?} is not variance:weight")))?;
                let num = |x: &str| {
                    x.trim().parse::<f64>().map_err(|_| CliError::Config(format!("cannot parse {x:?} in {spec:?}")))
                };
                Ok((num(v)?, num(w)?))
            })
            .collect::<CliResult<Vec<_>>>()?;
        return MixingLaw::scale_atoms(&atoms).map_err(bad);
    }
    if let Some(args) = call_args(spec, "inverse-gamma") {
        let ab: Vec<f64> = parse_list(args)?;
        if ab.len() != 2 {
            return Err(CliError::Config(format!("mixing law {spec:?}: expected shape and scale")));
        }
        return MixingLaw::inverse_gamma(ab[0], ab[1], 0.0).map_err(bad);
    }
    Err(CliError::Config(format!("unrecognized mixing law {spec:?}")))
}
