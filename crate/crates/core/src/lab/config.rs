//! `key = value` experiment configuration with `#` comments.

use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::IntMatrix;
use crate::models::ModelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Perturbed,
    Incoherent,
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "perturbed" => Ok(ModelKind::Perturbed),
            "incoherent" => Ok(ModelKind::Incoherent),
            _ => Err(format!("unknown model kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    /// Semiconjugacy residual and splitting invariance.
    pub residual: f64,
    /// Centre leaf convergence.
    pub leaf: f64,
    /// Leaf convergence for the leaves fed to the averaging step.
    pub conjugacy_leaf: f64,
    /// Leaf-to-leaf and equivariance of `h`.
    pub conjugacy: f64,
    /// Off-circle uniqueness of `E^c` curves.
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            leaf: 1e-4,
            conjugacy_leaf: 1e-6,
            conjugacy: 1e-4,
            uniqueness: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: Option<ModelKind>,
    pub matrix: [i64; 4],
    pub eps: f64,
    pub c: f64,
    pub depth_k: usize,
    pub depth_n: usize,
    pub grid_n: usize,
    pub window: f64,
    pub samples: usize,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub svg_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            matrix: [3, 1, 1, 1],
            eps: 0.05,
            c: crate::models::IncoherentModel::DEFAULT_C,
            depth_k: crate::incoherent::DEFAULT_DEPTH,
            depth_n: crate::semiconjugacy::DEFAULT_DEPTH,
            grid_n: 512,
            window: crate::foliation::DEFAULT_WINDOW,
            samples: 1000,
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
            seed: 0,
            svg_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn int_matrix(&self) -> IntMatrix {
        let [a, b, c, d] = self.matrix;
        IntMatrix::new(a, b, c, d)
    }

    /// Model for the hyperbolic pipeline; `eps = 0` or kind `linear` gives the linear map.
    pub fn hyperbolic_spec(&self) -> Result<ModelSpec, ConfigError> {
        match self.model.unwrap_or(ModelKind::Perturbed) {
            ModelKind::Linear => Ok(ModelSpec::Linear {
                matrix: self.int_matrix(),
            }),
            ModelKind::Perturbed => Ok(ModelSpec::Perturbed {
                matrix: self.int_matrix(),
                eps: self.eps,
            }),
            ModelKind::Incoherent => Err(ConfigError::Invalid(
                "the coherent pipeline needs a hyperbolic model".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol_residual", t.residual),
            ("tol_leaf", t.leaf),
            ("tol_conjugacy_leaf", t.conjugacy_leaf),
            ("tol_conjugacy", t.conjugacy),
            ("tol_uniqueness", t.uniqueness),
            ("window", self.window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.grid_n < 2 {
            return Err(ConfigError::Invalid(format!(
                "grid must be at least 2, got {}",
                self.grid_n
            )));
        }
        if self.depth_k == 0 || self.depth_n == 0 {
            return Err(ConfigError::Invalid("depths must be positive".into()));
        }
        if self.samples == 0 {
            return Err(ConfigError::Invalid("samples must be positive".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "eps must be non-negative, got {}",
                self.eps
            )));
        }
        if !(self.c.abs() < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "c must lie in (-1, 1), got {}",
                self.c
            )));
        }
        Ok(())
    }
}

/// Partial configuration, from a file or from command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub model: Option<ModelKind>,
    pub matrix: Option<[i64; 4]>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub depth_k: Option<usize>,
    pub depth_n: Option<usize>,
    pub grid_n: Option<usize>,
    pub window: Option<f64>,
    pub samples: Option<usize>,
    pub tol_residual: Option<f64>,
    pub tol_leaf: Option<f64>,
    pub tol_conjugacy_leaf: Option<f64>,
    pub tol_conjugacy: Option<f64>,
    pub tol_uniqueness: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub svg_only: Option<bool>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Syntax {
        line,
        msg: format!("cannot parse `{v}` for `{key}`"),
    })
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut o = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected key = value, got `{body}`"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "model" => {
                    o.model = Some(v.parse().map_err(|msg| ConfigError::Syntax { line, msg })?)
                }
                "matrix" => {
                    let xs: Vec<i64> = v
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_value(line, key, s))
                        .collect::<Result<_, _>>()?;
                    let m: [i64; 4] = xs.try_into().map_err(|_| ConfigError::Syntax {
                        line,
                        msg: "matrix needs four integers".into(),
                    })?;
                    o.matrix = Some(m);
                }
                "eps" => o.eps = Some(parse_value(line, key, v)?),
                "c" => o.c = Some(parse_value(line, key, v)?),
                "depth_K" | "depth_k" => o.depth_k = Some(parse_value(line, key, v)?),
                "depth_N" | "depth_n" => o.depth_n = Some(parse_value(line, key, v)?),
                "grid" => o.grid_n = Some(parse_value(line, key, v)?),
                "window" => o.window = Some(parse_value(line, key, v)?),
                "samples" => o.samples = Some(parse_value(line, key, v)?),
                "tol_residual" => o.tol_residual = Some(parse_value(line, key, v)?),
                "tol_leaf" => o.tol_leaf = Some(parse_value(line, key, v)?),
                "tol_conjugacy_leaf" => o.tol_conjugacy_leaf = Some(parse_value(line, key, v)?),
                "tol_conjugacy" => o.tol_conjugacy = Some(parse_value(line, key, v)?),
                "tol_uniqueness" => o.tol_uniqueness = Some(parse_value(line, key, v)?),
                "out" => o.out = Some(PathBuf::from(v)),
                "seed" => o.seed = Some(parse_value(line, key, v)?),
                "svg_only" => o.svg_only = Some(parse_value(line, key, v)?),
                _ => {
                    return Err(ConfigError::Syntax {
                        line,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(o)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src.clone() { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            matrix => matrix, eps => eps, c => c, depth_k => depth_k,
            depth_n => depth_n, grid_n => grid_n, window => window, samples => samples,
            tol_residual => tolerances.residual, tol_leaf => tolerances.leaf,
            tol_conjugacy_leaf => tolerances.conjugacy_leaf,
            tol_conjugacy => tolerances.conjugacy, tol_uniqueness => tolerances.uniqueness,
            out => out, seed => seed, svg_only => svg_only,
        );
        if self.model.is_some() {
            cfg.model = self.model;
        }
    }
}

/// Defaults, then the file, then the flags.
pub fn resolve(
    file: Option<&ConfigOverrides>,
    flags: &ConfigOverrides,
) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(f) = file {
        f.apply(&mut cfg);
    }
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# experiment\nmodel = perturbed\nmatrix = 3 1 1 1\neps=0.1 # stronger\n\nseed = 42\ndepth_K = 12\n";
        let o = ConfigOverrides::parse(text).unwrap();
        assert_eq!(o.model, Some(ModelKind::Perturbed));
        assert_eq!(o.matrix, Some([3, 1, 1, 1]));
        assert_eq!(o.eps, Some(0.1));
        assert_eq!(o.seed, Some(42));
        assert_eq!(o.depth_k, Some(12));
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::parse("eps = 0.1\nseed = 3").unwrap();
        let flags = ConfigOverrides {
            eps: Some(0.02),
            ..Default::default()
        };
        let cfg = resolve(Some(&file), &flags).unwrap();
        assert_eq!(cfg.eps, 0.02);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn reports_line_numbers() {
        let err = ConfigOverrides::parse("eps = 0.1\nbogus = 1").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 2,
                msg: "unknown key `bogus`".into()
            }
        );
        assert!(ConfigOverrides::parse("matrix = 1 2 3").is_err());
        assert!(ConfigOverrides::parse("eps 0.1").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            ConfigOverrides {
                grid_n: Some(1),
                ..Default::default()
            },
            ConfigOverrides {
                tol_leaf: Some(0.0),
                ..Default::default()
            },
            ConfigOverrides {
                c: Some(1.5),
                ..Default::default()
            },
        ];
        for o in bad {
            assert!(resolve(None, &o).is_err());
        }
    }
}
