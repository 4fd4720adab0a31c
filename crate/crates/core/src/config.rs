//! INI-style run configuration.
//!
//! ```text
//! # comment
//! N = 2
//! m = 0.6, 0.8
//! [grid]
//! half_width = 40, 32
//! points = 161
//! ```
//!
//! Keys before the first section header belong to `[model]`. Every key is
//! also reachable as `section.key` at top level. Unknown keys, duplicate keys
//! and malformed values are rejected with their line number.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{compute_exponents, ExponentSet, ModelParams};
use crate::grid::Grid;
use crate::rescaled::{DriftScheme, RescaledBoundary, RescaledConfig, TimeScheme};
use crate::solver::{Boundary, DtPolicy, InitKind, Regularization, SolverConfig};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.n", "2", "space dimension N (1..=3)"),
    ("model.m", "0.6, 0.8", "diffusion exponents m_i, one per axis or a single value"),
    ("model.allow_linear", "false", "accept m_i = 1 on some axes"),
    ("grid.half_width", "50", "box half-widths L_i, one per axis or a single value"),
    ("grid.points", "201", "nodes per axis, one per axis or a single value"),
    ("init.kind", "bump", "bump | smooth_box | barenblatt | two_bumps | random_bumps"),
    ("init.mass", "1", "initial mass"),
    ("init.center", "0", "bump centre"),
    ("init.radii", "1", "bump radii, or the radius of each bump for two_bumps/random_bumps"),
    ("init.half_widths", "1", "smooth_box plateau half-widths"),
    ("init.width", "0.25", "smooth_box transition width"),
    ("init.time", "1", "barenblatt snapshot time"),
    ("init.second", "1", "two_bumps: centre of the second bump (the first is init.center)"),
    ("init.count", "3", "random_bumps: number of bumps"),
    ("init.spread", "1", "random_bumps: centres drawn from [-spread, spread]^N"),
    ("solver.t_end", "1", "final time"),
    ("solver.record_every", "0", "snapshot interval, 0 for initial and final only"),
    ("solver.eps_rel", "1e-6", "floor eps relative to max u0"),
    ("solver.eps_abs", "", "absolute floor eps, overrides eps_rel"),
    ("solver.cfl_safety", "0.9", "CFL safety factor"),
    ("solver.dt", "", "fixed step, overrides the CFL policy"),
    ("solver.boundary", "zero", "zero | epsilon"),
    ("solver.lp", "2", "finite exponents p of the recorded L^p norms"),
    ("solver.max_steps", "50000000", "step budget"),
    ("rescaled.t0", "1", "time shift t0 of the self-similar variables"),
    ("rescaled.duration", "40", "tau span of `relax`"),
    ("rescaled.record_every", "0", "tau interval between stored states"),
    ("rescaled.scheme", "implicit", "implicit | explicit"),
    ("rescaled.dt", "0.05", "initial implicit step in tau"),
    ("rescaled.growth", "1.1", "implicit step growth factor"),
    ("rescaled.dt_max", "1", "largest implicit step"),
    ("rescaled.safety", "0.9", "explicit CFL safety factor"),
    ("rescaled.drift", "hybrid", "hybrid | upwind"),
    ("rescaled.boundary", "noflux", "noflux | dirichlet"),
    ("rescaled.eps_rel", "1e-12", "floor eps relative to max v0"),
    ("rescaled.tol_rel", "1e-5", "steady-state tolerance on ||dv/dtau||_1 / M"),
    ("rescaled.solve_tol", "1e-12", "linear solver tolerance"),
    ("rescaled.max_iter", "2000", "linear solver iteration cap"),
    ("output.levels", "", "contour levels for export-levels, empty for automatic"),
    ("run.seed", "0", "seed of the randomized generators"),
];

/// Environment variables `ANIFD_<SECTION>_<KEY>` (upper case) override file values.
pub const ENV_PREFIX: &str = "ANIFD_";

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub half_width: Vec<f64>,
    pub points: Vec<usize>,
    pub init: InitKind,
    pub mass: f64,
    pub solver: SolverConfig,
    pub t0: f64,
    pub duration: f64,
    pub rescaled: RescaledConfig,
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl RunConfig {
    pub fn exponents(&self) -> Result<ExponentSet> {
        compute_exponents(&self.model)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width.clone(), self.points.clone())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults parse")
    }
}

struct Raw {
    values: BTreeMap<&'static str, (String, usize)>,
}

impl Raw {
    fn get(&self, key: &str) -> (&str, usize) {
        self.values.get(key).map(|(v, l)| (v.as_str(), *l)).unwrap_or_else(|| {
            let d = KEYS.iter().find(|k| k.0 == key).expect("known key");
            (d.1, 0)
        })
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::Config { line: self.get(key).1, msg: format!("{key}: {}", msg.into()) }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let (v, _) = self.get(key);
        v.trim().parse::<f64>().map_err(|_| self.err(key, format!("`{v}` is not a number")))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.get(key).0.trim().is_empty() {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let (v, _) = self.get(key);
        v.trim().parse::<usize>().map_err(|_| self.err(key, format!("`{v}` is not a nonnegative integer")))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let (v, _) = self.get(key);
        v.trim().parse::<u64>().map_err(|_| self.err(key, format!("`{v}` is not a nonnegative integer")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key).0.trim() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(self.err(key, format!("`{v}` is not a boolean"))),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (v, _) = self.get(key);
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| self.err(key, format!("`{}` is not a number", s.trim()))))
            .collect()
    }

    /// A list of length `n`, broadcasting a single value.
    fn per_axis(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        let v = self.list(key)?;
        match v.len() {
            1 => Ok(vec![v[0]; n]),
            l if l == n => Ok(v),
            l => Err(Error::DimensionMismatch { expected: n, got: l }),
        }
    }

    fn word(&self, key: &str, allowed: &[&str]) -> Result<String> {
        let v = self.get(key).0.trim().to_lowercase();
        if allowed.contains(&v.as_str()) {
            Ok(v)
        } else {
            Err(self.err(key, format!("`{v}` is not one of {}", allowed.join(", "))))
        }
    }
}

fn canonical(section: &str, key: &str) -> Option<&'static str> {
    let full = if key.contains('.') { key.to_lowercase() } else { format!("{section}.{}", key.to_lowercase()) };
    KEYS.iter().map(|k| k.0).find(|k| *k == full)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parse `text`, then apply `(key or env name, value)` overrides.
pub fn parse_config_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut raw = Raw { values: BTreeMap::new() };
    let mut section = String::from("model");
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line: lineno, msg: format!("malformed section header `{line}`") })?
                .trim()
                .to_lowercase();
            if !KEYS.iter().any(|k| k.0.starts_with(&format!("{name}."))) {
                return Err(Error::Config { line: lineno, msg: format!("unknown section `{name}`") });
            }
            section = name;
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config { line: lineno, msg: format!("expected `key = value`, got `{line}`") })?;
        let key = canonical(&section, k.trim())
            .ok_or_else(|| Error::Config { line: lineno, msg: format!("unknown key `{}` in [{section}]", k.trim()) })?;
        if raw.values.insert(key, (v.trim().to_string(), lineno)).is_some() {
            return Err(Error::Config { line: lineno, msg: format!("duplicate key `{key}`") });
        }
    }
    for (name, value) in overrides {
        let key = KEYS
            .iter()
            .map(|k| k.0)
            .find(|k| *k == name.as_str() || env_name(k) == *name)
            .ok_or_else(|| Error::Config { line: 0, msg: format!("unknown override `{name}`") })?;
        raw.values.insert(key, (value.clone(), 0));
    }
    build(&raw)
}

fn build(raw: &Raw) -> Result<RunConfig> {
    let n = raw.usize("model.n")?;
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    let m = raw.per_axis("model.m", n)?;
    let model = ModelParams { n, m, allow_linear: raw.bool("model.allow_linear")? };
    compute_exponents(&model)?;

    let half_width = raw.per_axis("grid.half_width", n)?;
    let pts = raw.per_axis("grid.points", n)?;
    let mut points = Vec::with_capacity(n);
    for p in pts {
        if p.fract() != 0.0 || p < 3.0 {
            return Err(raw.err("grid.points", format!("{p} is not an integer >= 3")));
        }
        points.push(p as usize);
    }

    let seed = raw.u64("run.seed")?;
    let mass = raw.f64("init.mass")?;
    let init = match raw.word("init.kind", &["bump", "smooth_box", "barenblatt", "two_bumps", "random_bumps"])?.as_str() {
        "bump" => InitKind::Bump { center: raw.per_axis("init.center", n)?, radii: raw.per_axis("init.radii", n)? },
        "smooth_box" => {
            InitKind::SmoothBox { half_widths: raw.per_axis("init.half_widths", n)?, width: raw.f64("init.width")? }
        }
        "barenblatt" => {
            if model.m.iter().any(|mi| *mi != model.m[0]) {
                return Err(raw.err("init.kind", "barenblatt data need isotropic m"));
            }
            InitKind::Barenblatt { m: model.m[0], t: raw.f64("init.time")? }
        }
        "two_bumps" => InitKind::TwoBumps {
            first: raw.per_axis("init.center", n)?,
            second: raw.per_axis("init.second", n)?,
            radius: raw.f64("init.radii")?,
        },
        _ => InitKind::RandomBumps {
            count: raw.usize("init.count")?,
            radius: raw.f64("init.radii")?,
            spread: raw.f64("init.spread")?,
            seed,
        },
    };

    let eps = match raw.opt_f64("solver.eps_abs")? {
        Some(a) => Regularization::Absolute(a),
        None => Regularization::Relative(raw.f64("solver.eps_rel")?),
    };
    let dt_policy = match raw.opt_f64("solver.dt")? {
        Some(dt) => DtPolicy::Fixed(dt),
        None => DtPolicy::Cfl { safety: raw.f64("solver.cfl_safety")? },
    };
    let boundary = match raw.word("solver.boundary", &["zero", "epsilon"])?.as_str() {
        "zero" => Boundary::Zero,
        _ => Boundary::Epsilon,
    };
    let solver = SolverConfig {
        eps,
        dt_policy,
        boundary,
        t_end: raw.f64("solver.t_end")?,
        record_every: raw.f64("solver.record_every")?,
        lp: raw.list("solver.lp")?,
        max_steps: raw.usize("solver.max_steps")?,
    };
    solver.validate()?;

    let scheme = match raw.word("rescaled.scheme", &["implicit", "explicit"])?.as_str() {
        "implicit" => TimeScheme::Implicit {
            dt: raw.f64("rescaled.dt")?,
            growth: raw.f64("rescaled.growth")?,
            dt_max: raw.f64("rescaled.dt_max")?,
        },
        _ => TimeScheme::Explicit { safety: raw.f64("rescaled.safety")? },
    };
    let rescaled = RescaledConfig {
        eps: Regularization::Relative(raw.f64("rescaled.eps_rel")?),
        boundary: match raw.word("rescaled.boundary", &["noflux", "dirichlet"])?.as_str() {
            "noflux" => RescaledBoundary::NoFlux,
            _ => RescaledBoundary::Dirichlet(0.0),
        },
        drift: match raw.word("rescaled.drift", &["hybrid", "upwind"])?.as_str() {
            "hybrid" => DriftScheme::Hybrid,
            _ => DriftScheme::Upwind,
        },
        scheme,
        record_every: raw.f64("rescaled.record_every")?,
        max_iter: raw.usize("rescaled.max_iter")?,
        solve_tol: raw.f64("rescaled.solve_tol")?,
        tol_rel: raw.f64("rescaled.tol_rel")?,
        tau_max: raw.f64("rescaled.duration")?,
        ..RescaledConfig::default()
    };
    rescaled.validate()?;
    let t0 = raw.f64("rescaled.t0")?;
    if !(t0 > 0.0) {
        return Err(raw.err("rescaled.t0", "must be positive"));
    }

    Ok(RunConfig {
        model,
        half_width,
        points,
        init,
        mass,
        solver,
        t0,
        duration: raw.f64("rescaled.duration")?,
        rescaled,
        levels: raw.list("output.levels")?,
        seed,
    })
}

/// The accepted keys with defaults, one per line.
pub fn describe_keys() -> String {
    let mut out = String::new();
    let mut section = "";
    for (key, default, doc) in KEYS {
        let (s, k) = key.split_once('.').expect("dotted key");
        if s != section {
            out.push_str(&format!("[{s}]\n"));
            section = s;
        }
        out.push_str(&format!("  {k:<14} default `{default}`  {doc}\n"));
    }
    out
}
