//! Experiment configuration in flat `key = value` form.
//!
//! Lines may hold several `key=value` tokens; `#` starts a comment. Lists are
//! comma separated (`T = 1, 2, 3`). Later assignments override earlier ones,
//! which is how command-line overrides are applied.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `method` | `oracle`, `tree-lp`, `adapted-sinkhorn` or `fvi` | required |
//! | `T` | horizon or list of horizons | required |
//! | `d` | state dimension | 1 |
//! | `sigma_x`, `sigma_y` | scalar (times identity), diagonal list, or full `d×d` row-major | 1, 0.25 |
//! | `x0`, `y0` | scalar (broadcast) or list of `d` values | 1, 2 |
//! | `S` | samples per tree node | 1000 |
//! | `epsilon` | Sinkhorn regularization for `adapted-sinkhorn` | 0.1 |
//! | `conditioning` | tree conditioning rule, `members` or `node` | members |
//! | `N`, `B` | FVI paths and empirical OT size | 2000, 50 |
//! | `G` | gradient steps per time step; one value or one per horizon | 50 |
//! | `batch`, `lr`, `tau` | FVI minibatch, Adam rate, smooth-L1 threshold | 128, 0.01, 1.0 |
//! | `clip` | `on` (`[−1, 1]`), `off`, or `auto` (on only for `d = 1`) | auto |
//! | `target` | `exact` or `entropic` | exact |
//! | `fvi_epsilon` | regularization of entropic FVI targets | none |
//! | `R` | repetitions | 10 |
//! | `seed` | master seed | 0 |
//! | `out` | CSV output path | stdout |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fviot_core::fvi::TargetMode;
use fviot_core::tree::Conditioning;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("{key}: cannot parse {value:?}: {reason}")]
    Invalid { key: &'static str, value: String, reason: String },
    #[error("{key}: {reason}")]
    Range { key: &'static str, reason: String },
    #[error("malformed token {0:?} (expected key=value)")]
    Syntax(String),
    #[error("{0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oracle,
    TreeLp,
    AdaptedSinkhorn,
    Fvi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::TreeLp => "tree-lp",
            Self::AdaptedSinkhorn => "adapted-sinkhorn",
            Self::Fvi => "fvi",
        }
    }

    pub fn uses_trees(self) -> bool {
        matches!(self, Self::TreeLp | Self::AdaptedSinkhorn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "tree-lp" => Ok(Self::TreeLp),
            "adapted-sinkhorn" => Ok(Self::AdaptedSinkhorn),
            "fvi" => Ok(Self::Fvi),
            _ => Err("expected oracle, tree-lp, adapted-sinkhorn or fvi".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clip {
    On,
    Off,
    Auto,
}

impl Clip {
    pub fn range(self, dim: usize) -> Option<(f64, f64)> {
        match self {
            Self::On => Some((-1.0, 1.0)),
            Self::Off => None,
            Self::Auto => (dim == 1).then_some((-1.0, 1.0)),
        }
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dim: usize,
    pub horizons: Vec<usize>,
    /// Row-major `d×d` covariances.
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub samples_per_node: usize,
    pub epsilon: f64,
    pub conditioning: Conditioning,
    pub paths: usize,
    pub ot_samples: usize,
    /// One entry per horizon.
    pub grad_steps: Vec<usize>,
    pub batch: usize,
    pub lr: f64,
    pub tau: f64,
    pub clip: Clip,
    pub target: TargetMode,
    pub reps: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Splits config text into `(key, value)` pairs in order of appearance.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        // Glue `key = value` into `key=value` so tokens split on whitespace.
        let mut glued = String::with_capacity(line.len());
        let mut chars = line.trim().chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_whitespace() {
                while chars.peek().is_some_and(|n| n.is_whitespace()) {
                    chars.next();
                }
                if chars.peek() == Some(&'=') || glued.ends_with('=') {
                    continue;
                }
            }
            glued.push(c);
        }
        for token in glued.split_whitespace() {
            match token.split_once('=') {
                Some((k, v)) if !k.is_empty() => pairs.push((k.to_string(), v.to_string())),
                Some(_) => return Err(ConfigError::Syntax(token.to_string())),
                // A bare token continues the list value of the previous key.
                None => match pairs.last_mut() {
                    Some((_, v)) if v.ends_with(',') || token.starts_with(',') => v.push_str(token),
                    _ => return Err(ConfigError::Syntax(token.to_string())),
                },
            }
        }
    }
    Ok(pairs)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_pairs(&parse_pairs(text)?)
}

const KEYS: &[(&str, &str)] = &[
    ("method", "method"),
    ("T", "T"),
    ("horizon", "T"),
    ("d", "d"),
    ("dim", "d"),
    ("sigma_x", "sigma_x"),
    ("sigma_y", "sigma_y"),
    ("x0", "x0"),
    ("y0", "y0"),
    ("S", "S"),
    ("samples_per_node", "S"),
    ("epsilon", "epsilon"),
    ("eps", "epsilon"),
    ("conditioning", "conditioning"),
    ("N", "N"),
    ("paths", "N"),
    ("B", "B"),
    ("ot_samples", "B"),
    ("G", "G"),
    ("grad_steps", "G"),
    ("batch", "batch"),
    ("lr", "lr"),
    ("tau", "tau"),
    ("clip", "clip"),
    ("target", "target"),
    ("fvi_epsilon", "fvi_epsilon"),
    ("R", "R"),
    ("reps", "R"),
    ("seed", "seed"),
    ("out", "out"),
];

fn canonical(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, c)| *c)
}

struct Lookup<'a> {
    values: Vec<(&'static str, &'a str)>,
}

impl<'a> Lookup<'a> {
    fn get(&self, key: &'static str) -> Option<&'a str> {
        self.values.iter().rev().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn scalar<T: FromStr>(&self, key: &'static str, default: Option<T>) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            Some(v) => parse_one(key, v),
            None => default.ok_or(ConfigError::Missing(key)),
        }
    }

    fn list<T: FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        let items: Vec<T> = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_one(key, s))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(ConfigError::Invalid { key, value: v.to_string(), reason: "empty list".into() });
        }
        Ok(Some(items))
    }
}

fn parse_one<T: FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn range(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range { key, reason: reason.into() }
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(range(key, format!("{v} is not a positive finite number")))
    }
}

fn at_least_one(key: &'static str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(range(key, "must be at least 1"))
    }
}

fn covariance(key: &'static str, values: Vec<f64>, d: usize) -> Result<Vec<f64>, ConfigError> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(range(key, format!("{v} is not finite")));
    }
    let mut full = vec![0.0; d * d];
    match values.len() {
        1 => (0..d).for_each(|i| full[i * d + i] = values[0]),
        n if n == d => (0..d).for_each(|i| full[i * d + i] = values[i]),
        n if n == d * d => full = values,
        n => return Err(range(key, format!("{n} values; expected 1, {d} or {}", d * d))),
    }
    Ok(full)
}

fn point(key: &'static str, values: Vec<f64>, d: usize) -> Result<Vec<f64>, ConfigError> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(range(key, format!("{v} is not finite")));
    }
    match values.len() {
        1 => Ok(vec![values[0]; d]),
        n if n == d => Ok(values),
        n => Err(range(key, format!("{n} values; expected 1 or {d}"))),
    }
}

impl ExperimentConfig {
    /// Builds a config from ordered pairs; later pairs win.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut values = Vec::with_capacity(pairs.len());
        for (k, v) in pairs {
            let key = canonical(k.trim()).ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
            values.push((key, v.as_str()));
        }
        let l = Lookup { values };

        let method: Method = l.scalar("method", None)?;
        let dim = at_least_one("d", l.scalar("d", Some(1))?)?;
        let horizons: Vec<usize> = l.list("T")?.ok_or(ConfigError::Missing("T"))?;
        if horizons.contains(&0) {
            return Err(range("T", "horizons must be at least 1"));
        }
        if method.uses_trees() && dim != 1 {
            return Err(ConfigError::Incompatible(format!("tree methods require d=1 (got d={dim})")));
        }

        let sigma_x = covariance("sigma_x", l.list("sigma_x")?.unwrap_or(vec![1.0]), dim)?;
        let sigma_y = covariance("sigma_y", l.list("sigma_y")?.unwrap_or(vec![0.25]), dim)?;
        let x0 = point("x0", l.list("x0")?.unwrap_or(vec![1.0]), dim)?;
        let y0 = point("y0", l.list("y0")?.unwrap_or(vec![2.0]), dim)?;

        let samples_per_node = at_least_one("S", l.scalar("S", Some(1000))?)?;
        let epsilon = positive("epsilon", l.scalar("epsilon", Some(0.1))?)?;
        let conditioning: Conditioning = l.scalar("conditioning", Some(Conditioning::SetMembers))?;

        let paths = at_least_one("N", l.scalar("N", Some(2000))?)?;
        let ot_samples = at_least_one("B", l.scalar("B", Some(50))?)?;
        let batch = at_least_one("batch", l.scalar("batch", Some(128))?)?;
        if method == Method::Fvi && paths < batch {
            return Err(range("N", format!("{paths} is smaller than batch={batch}")));
        }
        let grad_steps: Vec<usize> = l.list("G")?.unwrap_or(vec![50]);
        if grad_steps.contains(&0) {
            return Err(range("G", "must be at least 1"));
        }
        let grad_steps = match grad_steps.len() {
            1 => vec![grad_steps[0]; horizons.len()],
            n if n == horizons.len() => grad_steps,
            n => return Err(range("G", format!("{n} values for {} horizons", horizons.len()))),
        };
        let lr = positive("lr", l.scalar("lr", Some(0.01))?)?;
        let tau = positive("tau", l.scalar("tau", Some(1.0))?)?;
        let clip = match l.get("clip").unwrap_or("auto") {
            "on" | "true" => Clip::On,
            "off" | "false" => Clip::Off,
            "auto" => Clip::Auto,
            other => {
                return Err(ConfigError::Invalid {
                    key: "clip",
                    value: other.into(),
                    reason: "expected on, off or auto".into(),
                })
            }
        };
        let fvi_epsilon: Option<f64> = l.get("fvi_epsilon").map(|v| parse_one("fvi_epsilon", v)).transpose()?;
        let target = match l.get("target").unwrap_or("exact") {
            "exact" => TargetMode::Exact,
            "entropic" => {
                let eps = fvi_epsilon.ok_or(ConfigError::Missing("fvi_epsilon"))?;
                TargetMode::Entropic { epsilon: positive("fvi_epsilon", eps)? }
            }
            other => {
                return Err(ConfigError::Invalid {
                    key: "target",
                    value: other.into(),
                    reason: "expected exact or entropic".into(),
                })
            }
        };

        let reps = at_least_one("R", l.scalar("R", Some(10))?)?;
        let seed = l.scalar("seed", Some(0u64))?;
        let out = l.get("out").map(PathBuf::from);

        Ok(Self {
            method,
            dim,
            horizons,
            sigma_x,
            sigma_y,
            x0,
            y0,
            samples_per_node,
            epsilon,
            conditioning,
            paths,
            ot_samples,
            grad_steps,
            batch,
            lr,
            tau,
            clip,
            target,
            reps,
            seed,
            out,
        })
    }

    /// Method parameters echoed into the report, `;`-separated.
    pub fn method_params(&self, horizon_index: usize) -> String {
        match self.method {
            Method::Oracle => String::new(),
            Method::TreeLp => format!("S={};conditioning={}", self.samples_per_node, conditioning_name(self.conditioning)),
            Method::AdaptedSinkhorn => format!(
                "S={};conditioning={};epsilon={}",
                self.samples_per_node,
                conditioning_name(self.conditioning),
                self.epsilon
            ),
            Method::Fvi => {
                let clip = match self.clip.range(self.dim) {
                    Some(_) => "on",
                    None => "off",
                };
                let target = match self.target {
                    TargetMode::Exact => "exact".to_string(),
                    TargetMode::Entropic { epsilon } => format!("entropic({epsilon})"),
                };
                format!(
                    "N={};B={};G={};batch={};lr={};tau={};clip={clip};target={target};clamp=0",
                    self.paths, self.ot_samples, self.grad_steps[horizon_index], self.batch, self.lr, self.tau
                )
            }
        }
    }
}

fn conditioning_name(c: Conditioning) -> &'static str {
    match c {
        Conditioning::SetMembers => "members",
        Conditioning::NodeState => "node",
    }
}
