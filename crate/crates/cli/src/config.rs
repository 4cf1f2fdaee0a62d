//! Run configuration.
//!
//! A config is a TOML document with flat top-level keys and at most one
//! extra table, `[riemann]` or `[sweep]`, matching the scenario. Every key
//! except `scenario` has a default.
//!
//! ```toml
//! scenario = "collision"
//! epsilon = 1e-4
//! beta = 1e-7
//! dt = 5e-4
//! dx = 5e-3
//! t_end = 0.1
//! snapshot_every = 100
//! ```

use std::fmt;
use std::path::PathBuf;

use soh_core::analysis::AngleState;
use soh_core::scenarios::RiemannSpec;
use soh_core::twofluid::BLOCK;
use soh_core::ModelParams;
use thiserror::Error;
use toml::{Table, Value};

/// Default epsilons of the stability sweep.
pub const DEFAULT_EPSILONS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

const TOP_KEYS: &[&str] = &[
    "scenario",
    "c",
    "lambda",
    "epsilon",
    "beta",
    "gamma",
    "rho_star",
    "kappa",
    "background",
    "dt",
    "dx",
    "dy",
    "t_end",
    "seed",
    "congestion_tol",
    "snapshot_every",
    "output_dir",
    "stepper",
    "riemann",
    "sweep",
];
const RIEMANN_KEYS: &[&str] = &["x0", "rho_left", "theta_left", "rho_right", "theta_right", "rows", "pad"];
const SWEEP_KEYS: &[&str] = &["epsilons", "explicit"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` must be {expected}, found {found}")]
    Type {
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("missing required key `scenario`")]
    MissingScenario,
    #[error("unknown scenario `{0}` (expected riemann, collision, crowd or sweep)")]
    UnknownScenario(String),
    #[error("invalid value for `{key}`: {reason}")]
    Constraint { key: String, reason: String },
}

fn constraint(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Riemann,
    Collision,
    Crowd,
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Riemann => "riemann",
            Scenario::Collision => "collision",
            Scenario::Crowd => "crowd",
            Scenario::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Semi-implicit asymptotic-preserving step.
    Ap,
    /// Explicit Rusanov step with the full pressure.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiemannOptions {
    pub spec: RiemannSpec,
    /// Number of identical rows; 1 runs the 1D stepper.
    pub rows: usize,
    /// Extend the periodic domain so the wrap-around jump stays out of `[0, 1]`.
    pub pad: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub epsilons: Vec<f64>,
    /// Also run the explicit stepper at every epsilon.
    pub explicit: bool,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    /// Cells along x and y for the unit-square scenarios.
    pub nx: usize,
    pub ny: usize,
    pub stepper: Stepper,
    /// Snapshot interval in steps; 0 writes only the initial and final states.
    pub snapshot_every: usize,
    pub output_dir: Option<PathBuf>,
    pub riemann: RiemannOptions,
    pub sweep: SweepOptions,
}

impl RunConfig {
    /// Number of steps needed to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.params.t_end / self.params.dt).round() as usize
    }
}

struct Reader<'a> {
    table: &'a Table,
    prefix: &'static str,
}

impl<'a> Reader<'a> {
    fn key(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for k in self.table.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(self.key(k)));
            }
        }
        Ok(())
    }

    fn mismatch(&self, name: &str, expected: &'static str, v: &Value) -> ConfigError {
        ConfigError::Type {
            key: self.key(name),
            expected,
            found: format!("{} `{}`", v.type_str(), v),
        }
    }

    fn float(&self, name: &str, default: f64) -> Result<f64, ConfigError> {
        match self.table.get(name) {
            None => Ok(default),
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(self.mismatch(name, "a number", v)),
        }
    }

    fn uint(&self, name: &str, default: u64) -> Result<u64, ConfigError> {
        match self.table.get(name) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(self.mismatch(name, "a non-negative integer", v)),
        }
    }

    fn boolean(&self, name: &str, default: bool) -> Result<bool, ConfigError> {
        match self.table.get(name) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(self.mismatch(name, "a boolean", v)),
        }
    }

    fn string(&self, name: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(self.mismatch(name, "a string", v)),
        }
    }

    fn floats(&self, name: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.mismatch(name, "an array of numbers", v)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(self.mismatch(name, "an array of numbers", v)),
        }
    }

    fn table(&self, name: &'static str) -> Result<Option<Reader<'a>>, ConfigError> {
        match self.table.get(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Reader { table: t, prefix: name })),
            Some(v) => Err(self.mismatch(name, "a table", v)),
        }
    }
}

/// Per-scenario defaults: `(epsilon, beta, t_end)`.
fn scenario_defaults(s: Scenario) -> (f64, f64, f64) {
    match s {
        Scenario::Riemann => (1e-4, 1e-7, 0.14),
        Scenario::Collision | Scenario::Sweep => (1e-4, 1e-7, 0.1),
        Scenario::Crowd => (1e-4, 0.5, 0.075),
    }
}

fn cells_per_unit(key: &str, h: f64) -> Result<usize, ConfigError> {
    let n = (1.0 / h).round();
    if !(n >= 4.0 && (n * h - 1.0).abs() <= 1e-9) {
        return Err(constraint(
            key,
            format!("the unit length must hold a whole number (at least 4) of cells, got {h}"),
        ));
    }
    Ok(n as usize)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    let top = Reader {
        table: &table,
        prefix: "",
    };
    top.check_keys(TOP_KEYS)?;

    let scenario = match top.string("scenario")? {
        None => return Err(ConfigError::MissingScenario),
        Some("") => return Err(ConfigError::MissingScenario),
        Some("riemann") => Scenario::Riemann,
        Some("collision") => Scenario::Collision,
        Some("crowd") => Scenario::Crowd,
        Some("sweep") => Scenario::Sweep,
        Some(other) => return Err(ConfigError::UnknownScenario(other.to_string())),
    };
    let (eps, beta, t_end) = scenario_defaults(scenario);
    let defaults = ModelParams::default();
    let dx = top.float("dx", defaults.dx)?;
    let kappa = top.float("kappa", 0.0)?;
    let params = ModelParams {
        c: top.float("c", 1.0)?,
        lambda: top.float("lambda", 1.0)?,
        epsilon: top.float("epsilon", eps)?,
        beta: top.float("beta", beta)?,
        gamma: top.float("gamma", 2.0)?,
        rho_star: top.float("rho_star", 1.0)?,
        kappa,
        use_background: top.boolean("background", kappa > 0.0)?,
        dt: top.float("dt", defaults.dt)?,
        dx,
        dy: top.float("dy", dx)?,
        t_end: top.float("t_end", t_end)?,
        seed: top.uint("seed", 0)?,
        congestion_tol: top.float("congestion_tol", defaults.congestion_tol)?,
    };
    params.validate().map_err(|e| match e {
        soh_core::GridError::BadParameter { name, reason } => constraint(name, reason),
        other => constraint("params", other.to_string()),
    })?;

    let stepper = match top.string("stepper")? {
        None | Some("ap") => Stepper::Ap,
        Some("explicit") => Stepper::Explicit,
        Some(other) => return Err(constraint("stepper", format!("expected `ap` or `explicit`, got `{other}`"))),
    };
    let snapshot_every = top.uint("snapshot_every", 0)? as usize;
    let output_dir = top.string("output_dir")?.map(PathBuf::from);

    let riemann_table = top.table("riemann")?;
    let sweep_table = top.table("sweep")?;
    if riemann_table.is_some() && scenario != Scenario::Riemann {
        return Err(constraint("riemann", format!("section only applies to scenario riemann, not {scenario}")));
    }
    if sweep_table.is_some() && scenario != Scenario::Sweep {
        return Err(constraint("sweep", format!("section only applies to scenario sweep, not {scenario}")));
    }

    let reference = RiemannSpec::reference();
    let riemann = match &riemann_table {
        None => RiemannOptions {
            spec: reference,
            rows: 1,
            pad: true,
        },
        Some(r) => {
            r.check_keys(RIEMANN_KEYS)?;
            RiemannOptions {
                spec: RiemannSpec {
                    left: AngleState::new(
                        r.float("rho_left", reference.left.rho)?,
                        r.float("theta_left", reference.left.theta)?,
                    ),
                    right: AngleState::new(
                        r.float("rho_right", reference.right.rho)?,
                        r.float("theta_right", reference.right.theta)?,
                    ),
                    jump_position: r.float("x0", 0.5)?,
                    ..reference
                },
                rows: r.uint("rows", 1)? as usize,
                pad: r.boolean("pad", true)?,
            }
        }
    };
    let sweep = match &sweep_table {
        None => SweepOptions {
            epsilons: DEFAULT_EPSILONS.to_vec(),
            explicit: true,
        },
        Some(s) => {
            s.check_keys(SWEEP_KEYS)?;
            SweepOptions {
                epsilons: s.floats("epsilons")?.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec()),
                explicit: s.boolean("explicit", true)?,
            }
        }
    };

    let (nx, ny) = match scenario {
        Scenario::Riemann => {
            let nx = cells_per_unit("dx", params.dx)?;
            let spec = &riemann.spec;
            for (key, st) in [("riemann.rho_left", spec.left), ("riemann.rho_right", spec.right)] {
                if !(st.rho > 0.0 && st.rho < params.rho_star) {
                    return Err(constraint(key, format!("must lie in (0, {}), got {}", params.rho_star, st.rho)));
                }
            }
            if !(spec.jump_position > 0.0 && spec.jump_position < 1.0) {
                return Err(constraint("riemann.x0", format!("must lie in (0, 1), got {}", spec.jump_position)));
            }
            if riemann.rows == 0 {
                return Err(constraint("riemann.rows", "must be at least 1"));
            }
            (nx, riemann.rows)
        }
        _ => (cells_per_unit("dx", params.dx)?, cells_per_unit("dy", params.dy)?),
    };

    match scenario {
        Scenario::Crowd => {
            soh_core::twofluid::validate_params(&params).map_err(|e| match e {
                soh_core::SchemeError::Config(msg) => {
                    let key = if msg.contains("lambda") { "lambda" } else { "c" };
                    constraint(key, msg)
                }
                other => constraint("params", other.to_string()),
            })?;
            if !nx.is_multiple_of(BLOCK) || !ny.is_multiple_of(BLOCK) {
                return Err(constraint(
                    "dx",
                    format!("the crowd perturbation needs cell counts divisible by {BLOCK}, got {nx} x {ny}"),
                ));
            }
            if stepper == Stepper::Explicit {
                return Err(constraint("stepper", "the crowd model only has the AP stepper"));
            }
        }
        Scenario::Sweep => {
            if sweep.epsilons.is_empty() {
                return Err(constraint("sweep.epsilons", "must not be empty"));
            }
            if let Some(e) = sweep.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
                return Err(constraint("sweep.epsilons", format!("entries must be > 0, got {e}")));
            }
        }
        _ => {}
    }

    Ok(RunConfig {
        scenario,
        params,
        nx,
        ny,
        stepper,
        snapshot_every,
        output_dir,
        riemann,
        sweep,
    })
}
