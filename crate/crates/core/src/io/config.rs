//! Flat `section.key = value` configuration files.
//!
//! ```text
//! # comments start with '#'
//! model.dimension = 2
//! model.trend = constant
//! model.fixed.kappa = 0.5
//! run.n0 = 2000
//! io.observations = data.csv
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::bandwidth::TuningConfig;
use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::model::{Locations, ModelSpec, Trend};
use crate::priors::{ParameterLayout, PriorSpec, Transform};
use crate::simulate::{OutputTransform, PredictionGrid, SimulationOptions};

const KEYS: &[&str] = &[
    "model.dimension",
    "model.trend",
    "model.anisotropic",
    "model.fixed.kappa",
    "model.fixed.tau",
    "prior.domain_size",
    "prior.nugget_a",
    "prior.nugget_b",
    "prior.scale_shape",
    "prior.scale_scale",
    "prior.smooth_shape",
    "prior.smooth_scale",
    "run.n0",
    "run.decay",
    "run.k_max",
    "run.gamma_stop",
    "run.seed",
    "run.threshold_r",
    "run.h_min",
    "run.h_max",
    "run.h_tolerance",
    "run.h_max_iter",
    "run.posterior_draws",
    "simulate.origin",
    "simulate.cell_size",
    "simulate.counts",
    "simulate.s",
    "simulate.seed",
    "simulate.back_transform",
    "simulate.logit_lo",
    "simulate.logit_hi",
    "simulate.predict_smooth_only",
    "simulate.write_ensemble",
    "io.observations",
    "io.h_matrix",
    "io.linear_values",
    "io.output_dir",
    "io.mixture",
];

const TRANSFORM_PREFIX: &str = "model.transform.";

#[derive(Debug, Clone, PartialEq)]
pub struct PriorOverrides {
    pub domain_size: Option<f64>,
    pub nugget_a: Option<f64>,
    pub nugget_b: Option<f64>,
    pub scale_shape: Option<f64>,
    pub scale_scale: Option<f64>,
    pub smooth_shape: Option<f64>,
    pub smooth_scale: Option<f64>,
}

impl PriorOverrides {
    /// The prior for data on `locations`; `L` defaults to the longest side
    /// of their bounding box.
    pub fn resolve(&self, locations: &Locations) -> Result<PriorSpec> {
        let l = self.domain_size.unwrap_or_else(|| locations.max_side());
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Config(
                "the observations span a single point; set prior.domain_size".into(),
            ));
        }
        let mut p = PriorSpec::for_domain(l)?;
        let (a, b) = p.nugget_beta;
        p.nugget_beta = (self.nugget_a.unwrap_or(a), self.nugget_b.unwrap_or(b));
        let (k, s) = p.scale_gamma[0];
        p.scale_gamma = vec![(self.scale_shape.unwrap_or(k), self.scale_scale.unwrap_or(s))];
        let (k, s) = p.smooth_gamma;
        p.smooth_gamma = (self.smooth_shape.unwrap_or(k), self.smooth_scale.unwrap_or(s));
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub grid: Option<PredictionGrid>,
    pub s: usize,
    pub seed: u64,
    pub back_transform: OutputTransform,
    pub options: SimulationOptions,
    /// Also write every realization, not only the median and sd maps.
    pub write_ensemble: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoConfig {
    pub observations: Option<PathBuf>,
    pub h_matrix: Option<PathBuf>,
    /// Observed functionals `z = Hy`; required with `h_matrix`.
    pub linear_values: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub mixture: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub spec: ModelSpec,
    pub prior: PriorOverrides,
    pub run: RunConfig,
    pub posterior_draws: usize,
    pub simulate: SimulateConfig,
    pub io: IoConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let c = Fields { raw: &raw };

        let dim: usize = c.get("model.dimension")?.unwrap_or(2);
        let trend = match c.str("model.trend").unwrap_or("constant") {
            "constant" => Trend::Constant,
            "linear" => Trend::Linear,
            other => {
                return Err(Error::Config(format!(
                    "model.trend must be constant or linear, got '{other}'"
                )))
            }
        };
        let mut spec = ModelSpec::isotropic(dim, trend);
        spec.anisotropic = c.get("model.anisotropic")?.unwrap_or(false);
        spec.fixed_kappa = c.get("model.fixed.kappa")?;
        spec.fixed_tau = c.get("model.fixed.tau")?;
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        check_transforms(&raw, &spec)?;

        let prior = PriorOverrides {
            domain_size: c.get("prior.domain_size")?,
            nugget_a: c.get("prior.nugget_a")?,
            nugget_b: c.get("prior.nugget_b")?,
            scale_shape: c.get("prior.scale_shape")?,
            scale_scale: c.get("prior.scale_scale")?,
            smooth_shape: c.get("prior.smooth_shape")?,
            smooth_scale: c.get("prior.smooth_scale")?,
        };

        let d = RunConfig::default();
        let t = TuningConfig::default();
        let run = RunConfig {
            n0: c.get("run.n0")?.unwrap_or(d.n0),
            decay: c.get("run.decay")?.unwrap_or(d.decay),
            k_max: c.get("run.k_max")?.unwrap_or(d.k_max),
            gamma_stop: c.get("run.gamma_stop")?,
            seed: c.get("run.seed")?.unwrap_or(d.seed),
            tuning: TuningConfig {
                threshold_r: c.get("run.threshold_r")?.unwrap_or(t.threshold_r),
                h_min: c.get("run.h_min")?.unwrap_or(t.h_min),
                h_max: c.get("run.h_max")?.unwrap_or(t.h_max),
                tolerance: c.get("run.h_tolerance")?.unwrap_or(t.tolerance),
                max_iter: c.get("run.h_max_iter")?.unwrap_or(t.max_iter),
            },
        };
        let p = ParameterLayout::new(&spec)?.len();
        run.validate(p).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        let posterior_draws = c.get("run.posterior_draws")?.unwrap_or(1000);

        let grid = match (
            c.list::<f64>("simulate.origin")?,
            c.list::<f64>("simulate.cell_size")?,
            c.list::<usize>("simulate.counts")?,
        ) {
            (None, None, None) => None,
            (Some(o), Some(s), Some(n)) => {
                if o.len() != dim {
                    return Err(Error::Config(format!(
                        "simulate.origin has {} entries for a {dim}-D model",
                        o.len()
                    )));
                }
                Some(PredictionGrid::new(o, s, n).map_err(|e| Error::Config(e.to_string()))?)
            }
            _ => {
                return Err(Error::Config(
                    "simulate.origin, simulate.cell_size and simulate.counts must be given together".into(),
                ))
            }
        };
        let back_transform = match c.str("simulate.back_transform").unwrap_or("none") {
            "none" => OutputTransform::None,
            "exp" => OutputTransform::Exp,
            "logit" => {
                let lo: f64 = c.get("simulate.logit_lo")?.unwrap_or(0.0);
                let hi: f64 = c.get("simulate.logit_hi")?.unwrap_or(1.0);
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::Config(format!("logit bounds ({lo}, {hi}) are invalid")));
                }
                OutputTransform::InverseLogit { lo, hi }
            }
            other => {
                return Err(Error::Config(format!(
                    "simulate.back_transform must be none, exp or logit, got '{other}'"
                )))
            }
        };
        if !matches!(back_transform, OutputTransform::InverseLogit { .. })
            && (raw.contains("simulate.logit_lo") || raw.contains("simulate.logit_hi"))
        {
            return Err(Error::Config(
                "simulate.logit_lo/logit_hi need simulate.back_transform = logit".into(),
            ));
        }
        let simulate = SimulateConfig {
            grid,
            s: c.get("simulate.s")?.unwrap_or(100),
            seed: c.get("simulate.seed")?.unwrap_or(run.seed),
            back_transform,
            options: SimulationOptions {
                predict_smooth_only: c.get("simulate.predict_smooth_only")?.unwrap_or(false),
            },
            write_ensemble: c.get("simulate.write_ensemble")?.unwrap_or(true),
        };
        if simulate.s == 0 {
            return Err(Error::Config("simulate.s must be at least 1".into()));
        }

        let path = |key: &str| c.str(key).map(|v| base.join(v));
        if raw.contains("io.h_matrix") != raw.contains("io.linear_values") {
            return Err(Error::Config(
                "io.h_matrix and io.linear_values must be given together".into(),
            ));
        }
        let output_dir = path("io.output_dir").unwrap_or_else(|| base.to_path_buf());
        let io = IoConfig {
            observations: path("io.observations"),
            h_matrix: path("io.h_matrix"),
            linear_values: path("io.linear_values"),
            mixture: path("io.mixture").unwrap_or_else(|| output_dir.join("mixture.txt")),
            output_dir,
        };
        Ok(Config {
            spec,
            prior,
            run,
            posterior_draws,
            simulate,
            io,
        })
    }
}

/// Transform entries may only restate the transform each parameter uses.
fn check_transforms(raw: &RawConfig, spec: &ModelSpec) -> Result<()> {
    let layout = ParameterLayout::new(spec)?;
    for (key, (value, line)) in &raw.entries {
        let Some(name) = key.strip_prefix(TRANSFORM_PREFIX) else {
            continue;
        };
        let Some(entry) = layout.entries().iter().find(|e| e.name == name) else {
            return Err(Error::Parse {
                path: String::new(),
                line: *line,
                message: format!("'{key}' names no free parameter (free: {})", layout.names().join(", ")),
            });
        };
        let expected = match entry.transform {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::ScaledLogit { .. } => "logit",
        };
        if value != expected {
            return Err(Error::Parse {
                path: String::new(),
                line: *line,
                message: format!("{name} uses the {expected} transform; '{value}' is not supported"),
            });
        }
    }
    Ok(())
}

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: String::new(),
                line: line_no,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) && !k.starts_with(TRANSFORM_PREFIX) {
                return Err(err(format!("unknown key '{k}'")));
            }
            if v.is_empty() {
                return Err(err(format!("'{k}' has no value")));
            }
            if entries.insert(k.to_string(), (v.to_string(), line_no)).is_some() {
                return Err(err(format!("'{k}' is set twice")));
            }
        }
        Ok(RawConfig { entries })
    }

    fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

struct Fields<'a> {
    raw: &'a RawConfig,
}

impl<'a> Fields<'a> {
    fn str(&self, key: &str) -> Option<&'a str> {
        debug_assert!(KEYS.contains(&key));
        self.raw.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((v, line)) = self.raw.entries.get(key) else {
            return Ok(None);
        };
        v.parse().map(Some).map_err(|_| Error::Parse {
            path: String::new(),
            line: *line,
            message: format!("cannot parse '{v}' as the value of '{key}'"),
        })
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((v, line)) = self.raw.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<Vec<T>, _>>()
            .map(Some)
            .map_err(|_| Error::Parse {
                path: String::new(),
                line: *line,
                message: format!("cannot parse '{v}' as a comma-separated list for '{key}'"),
            })
    }
}
