//! Run configuration: built-in defaults, then a `key = value` file, then command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assembly::MassTreatment;
use crate::linalg::c;
use crate::matfun::QuadratureSpec;
use crate::mesh::{BoundaryCondition, BoundaryPair, CoefficientFamily, IntervalSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.into() }
}

pub const KEYS: &[&str] = &[
    "problem",
    "interval",
    "a",
    "b",
    "truncation",
    "bc_left",
    "bc_right",
    "thetas",
    "n",
    "n_list",
    "e",
    "e_grid",
    "alpha",
    "quad_nodes",
    "quad_panels",
    "seed",
    "samples",
    "mass",
    "out",
    "amplitude",
    "period",
    "center",
    "lions_length",
    "coef_p",
    "coef_q",
    "coef_r",
    "coef_s",
];

const DEFAULTS: &[(&str, &str)] = &[
    ("problem", "complex"),
    ("interval", "finite"),
    ("a", "0"),
    ("b", "1"),
    ("truncation", "20"),
    ("bc_left", "dirichlet"),
    ("bc_right", "dirichlet"),
    ("thetas", "neumann,0.7853981633974483,1+0.5i"),
    ("n", "64"),
    ("n_list", "32,64,128,256,512"),
    ("e", "1"),
    ("e_grid", "100,10,5"),
    ("alpha", "0.5"),
    ("quad_nodes", "400"),
    ("quad_panels", "8"),
    ("seed", "1"),
    ("samples", "256"),
    ("mass", "lumped"),
    ("out", "out"),
    ("amplitude", "1"),
    ("period", "0.25"),
    ("center", "0.5"),
    ("lions_length", "10"),
    ("coef_p", ""),
    ("coef_q", ""),
    ("coef_r", ""),
    ("coef_s", ""),
];

/// Raw key/value layers before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayers {
    pub values: BTreeMap<String, String>,
}

impl ConfigLayers {
    pub fn with_defaults() -> Self {
        let values = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self { values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, path: &str) -> Result<(), ConfigError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { path: path.to_string(), line: k + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        self.apply_text(&text, &path.display().to_string())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }
}

/// Coefficient source.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemChoice {
    Family(CoefficientFamily),
    /// Coefficient tables `x,re,im`; missing tables mean `p = 1` and zero lower-order terms.
    Tables { p: Option<PathBuf>, q: Option<PathBuf>, r: Option<PathBuf>, s: Option<PathBuf> },
    Lions { length: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem_name: String,
    pub problem: ProblemChoice,
    pub interval: IntervalSpec,
    pub bc: BoundaryPair,
    pub thetas: Vec<BoundaryCondition>,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub e: f64,
    pub e_grid: Vec<f64>,
    pub alpha: f64,
    pub quad: QuadratureSpec,
    pub seed: u64,
    pub samples: usize,
    pub mass: MassTreatment,
    pub out: PathBuf,
    /// Resolved key/value pairs, for the manifest.
    pub echo: Vec<(String, String)>,
}

fn parse<T: std::str::FromStr>(layers: &ConfigLayers, key: &str) -> Result<T, ConfigError> {
    let text = layers.get(key);
    text.parse().map_err(|_| invalid(key, format!("cannot parse {text:?}")))
}

fn parse_positive(layers: &ConfigLayers, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(layers, key)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn parse_list<T: std::str::FromStr>(layers: &ConfigLayers, key: &str) -> Result<Vec<T>, ConfigError> {
    layers
        .get(key)
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| invalid(key, format!("cannot parse {s:?}"))))
        .collect()
}

fn optional_path(layers: &ConfigLayers, key: &str) -> Option<PathBuf> {
    let v = layers.get(key);
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn from_layers(layers: &ConfigLayers) -> Result<Self, ConfigError> {
        let interval = match layers.get("interval") {
            "finite" => IntervalSpec::finite(parse(layers, "a")?, parse(layers, "b")?),
            "half_line" => IntervalSpec::half_line(parse(layers, "a")?, parse_positive(layers, "truncation")?),
            "full_line" => IntervalSpec::full_line(parse_positive(layers, "truncation")?),
            other => return Err(invalid("interval", format!("unknown interval kind {other:?}"))),
        };
        let (a, b) = interval.bounds();
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(invalid("b", format!("empty interval [{a}, {b}]")));
        }
        let bc_of = |key: &str| layers.get(key).parse::<BoundaryCondition>().map_err(|e| invalid(key, e.to_string()));
        let bc = BoundaryPair::new(bc_of("bc_left")?, bc_of("bc_right")?);
        let thetas = layers
            .get("thetas")
            .split(',')
            .map(|s| s.parse::<BoundaryCondition>().map_err(|e| invalid("thetas", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;

        let name = layers.get("problem").to_string();
        let amplitude: f64 = parse(layers, "amplitude")?;
        let problem = match name.as_str() {
            "laplacian" => ProblemChoice::Family(CoefficientFamily::Constant { p: 1.0, q: 0.0, r: 0.0, s: 0.0 }),
            "constant" => ProblemChoice::Family(CoefficientFamily::Constant { p: 1.0, q: 1.0, r: 1.0, s: 1.0 }),
            "complex_p" => ProblemChoice::Family(CoefficientFamily::ComplexConstant {
                p: c(1.0, 0.5),
                q: c(0.0, 0.0),
                r: c(0.0, 0.0),
                s: c(0.0, 0.0),
            }),
            "complex" => ProblemChoice::Family(CoefficientFamily::ComplexConstant {
                p: c(1.0, 0.5),
                q: c(2.0, 0.0),
                r: c(1.0, 0.0),
                s: c(0.0, 1.0),
            }),
            "sawtooth" => ProblemChoice::Family(CoefficientFamily::Sawtooth {
                amplitude,
                period: parse_positive(layers, "period")?,
            }),
            "spike" => ProblemChoice::Family(CoefficientFamily::Spike { amplitude, center: parse(layers, "center")? }),
            "lions" => ProblemChoice::Lions { length: parse_positive(layers, "lions_length")? },
            "table" => ProblemChoice::Tables {
                p: optional_path(layers, "coef_p"),
                q: optional_path(layers, "coef_q"),
                r: optional_path(layers, "coef_r"),
                s: optional_path(layers, "coef_s"),
            },
            other => return Err(invalid("problem", format!("unknown problem {other:?}"))),
        };

        let min_cells = if matches!(problem, ProblemChoice::Lions { .. }) { 8 } else { 2 };
        let n: usize = parse(layers, "n")?;
        if n < min_cells {
            return Err(invalid("n", format!("need at least {min_cells} cells")));
        }
        let n_list: Vec<usize> = parse_list(layers, "n_list")?;
        if n_list.is_empty() || n_list[0] < min_cells || n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_list", format!("must increase and start at >= {min_cells}")));
        }
        let e = parse_positive(layers, "e")?;
        let grid: Vec<f64> = parse_list(layers, "e_grid")?;
        let e_grid = match grid.as_slice() {
            &[start, factor, count] if start > 0.0 && factor > 1.0 && count >= 2.0 && count.fract() == 0.0 => {
                (0..count as usize).map(|k| start * factor.powi(k as i32)).collect()
            }
            _ => return Err(invalid("e_grid", "expected `start,factor,count` with start > 0, factor > 1, count >= 2")),
        };
        let alpha: f64 = parse(layers, "alpha")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let quad = QuadratureSpec::new(parse(layers, "quad_nodes")?, parse(layers, "quad_panels")?)
            .map_err(|e| invalid("quad_nodes", e.to_string()))?;
        let samples: usize = parse(layers, "samples")?;
        if samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        let mass = match layers.get("mass") {
            "lumped" => MassTreatment::Lumped,
            "consistent" => MassTreatment::Consistent,
            other => return Err(invalid("mass", format!("unknown mass treatment {other:?}"))),
        };
        let out = PathBuf::from(layers.get("out"));
        if out.as_os_str().is_empty() {
            return Err(invalid("out", "empty output directory"));
        }
        Ok(RunConfig {
            problem_name: name,
            problem,
            interval,
            bc,
            thetas,
            n,
            n_list,
            e,
            e_grid,
            alpha,
            quad,
            seed: parse(layers, "seed")?,
            samples,
            mass,
            out,
            echo: layers.values.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        })
    }
}
