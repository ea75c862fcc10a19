//! Run configuration: one TOML document, schema-checked before anything
//! executes.
//!
//! Validation walks the raw TOML value against the schema of the declared
//! command and model and collects every violation instead of stopping at
//! the first, so one round trip through the validator reports everything
//! that needs fixing. Unknown keys are rejected at every level; a
//! misspelled or misplaced setting can never fall back to a default
//! silently. Parsing materializes all defaults, and the result serializes
//! back to an equivalent document: `parse_config(c.to_toml_string()) == c`.

use std::fmt;

use serde::Serialize;
use toml::value::Table;
use toml::Value;

use frg_core::algebra::Model;
use frg_core::flows::MsrDimension;

use crate::expr;

/// One schema violation, keyed by the dotted TOML path that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Which solver a configuration drives. Must agree with the subcommand the
/// binary was invoked with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Flow,
    Lpa,
    Expand,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Flow => "flow",
            CommandKind::Lpa => "lpa",
            CommandKind::Expand => "expand",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "flow" => Some(CommandKind::Flow),
            "lpa" => Some(CommandKind::Lpa),
            "expand" => Some(CommandKind::Expand),
            _ => None,
        }
    }
}

/// Couplings of the two-scalar model, with the regulator reference scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoScalarTable {
    pub u0: f64,
    pub m1_sq: f64,
    pub m2_sq: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu_sq: f64,
}

/// Couplings of the response-field model. `dimension` selects the variant
/// whose beta functions are used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsrTable {
    pub u0: f64,
    pub m_sq: f64,
    pub lambda: f64,
    #[serde(rename = "D")]
    pub noise_d: f64,
    pub mu_sq: f64,
    pub dimension: MsrDimKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MsrDimKind {
    D4,
    D3,
}

impl MsrDimKind {
    pub fn to_core(self) -> MsrDimension {
        match self {
            MsrDimKind::D4 => MsrDimension::D4,
            MsrDimKind::D3 => MsrDimension::D3,
        }
    }
}

/// Couplings of the quartic fermion model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracTable {
    pub u0: f64,
    pub m: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CouplingsCfg {
    TwoScalar(TwoScalarTable),
    Msr(MsrTable),
    Dirac(DiracTable),
}

/// Scale interval of a run. Flow runs may go in either direction; surface
/// runs march upward only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KRange {
    pub start: f64,
    pub end: f64,
}

/// Adaptive-integrator tolerances for `flow` runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TolerancesCfg {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for TolerancesCfg {
    fn default() -> Self {
        TolerancesCfg { rel_tol: 1e-8, abs_tol: 1e-10, min_step: 1e-9, max_step: None }
    }
}

/// Well-posedness guard settings for `lpa` runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardsCfg {
    pub safety: f64,
    pub eps_prime: f64,
    pub min_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for GuardsCfg {
    fn default() -> Self {
        GuardsCfg {
            safety: frg_core::lpa::step::DEFAULT_SAFETY,
            eps_prime: frg_core::lpa::step::DEFAULT_EPS_PRIME,
            min_step: 1e-9,
            max_step: None,
        }
    }
}

/// Field-space grid for `lpa` runs. Both axes need at least 5 points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCfg {
    pub bounds1: [f64; 2],
    pub bounds2: [f64; 2],
    pub points: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Boundary values evolved by the companion coupling flow.
    Ode,
    /// Boundary values held at their initial-surface values.
    Frozen,
}

/// Surface-run settings: boundary datum and checkpoint scales. Checkpoints
/// are kept sorted and deduplicated so the effective configuration has one
/// canonical form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpaCfg {
    pub boundary: BoundaryKind,
    pub checkpoints: Vec<f64>,
}

impl Default for LpaCfg {
    fn default() -> Self {
        LpaCfg { boundary: BoundaryKind::Ode, checkpoints: Vec::new() }
    }
}

/// Expansion settings: the observable expression and the truncation order
/// used by any S, Sinv, or R form inside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpandCfg {
    pub observable: String,
    pub order: u32,
}

/// A fully validated run configuration with every default materialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: Model,
    /// Always true; runs draw on no ambient state.
    pub deterministic: bool,
    pub output_dir: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingsCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub krange: Option<KRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guards: Option<GuardsCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lpa: Option<LpaCfg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expand: Option<ExpandCfg>,
}

impl RunConfig {
    /// Canonical TOML form of the effective configuration.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Insert checkpoint scales start + i * dk for i >= 1, strictly inside
    /// the scale interval, merged with any explicit checkpoints.
    pub fn add_periodic_checkpoints(&mut self, dk: f64) -> Result<(), String> {
        if !(dk.is_finite() && dk > 0.0) {
            return Err(format!("checkpoint spacing {dk} must be a positive number"));
        }
        let range = self.krange.as_ref().ok_or("configuration has no krange")?;
        let (start, end) = (range.start, range.end);
        let slack = 1e-12 * (end - start).abs();
        let lpa = self.lpa.get_or_insert_with(LpaCfg::default);
        let mut i = 1u64;
        loop {
            let k = start + i as f64 * dk;
            if k >= end - slack {
                break;
            }
            lpa.checkpoints.push(k);
            i += 1;
        }
        canonicalize_checkpoints(&mut lpa.checkpoints);
        Ok(())
    }
}

fn canonicalize_checkpoints(cs: &mut Vec<f64>) {
    cs.sort_by(|a, b| a.partial_cmp(b).expect("checkpoints are finite"));
    cs.dedup();
}

/// Parse and validate a configuration document, collecting every schema
/// violation.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<Violation>> {
    let doc: Value = match toml::from_str(text) {
        Ok(v) => v,
        Err(e) => return Err(vec![Violation::new("(document)", e.to_string())]),
    };
    let root = match doc.as_table() {
        Some(t) => t,
        None => return Err(vec![Violation::new("(document)", "top level is not a table")]),
    };

    let mut v = Vec::new();
    let command = take_enum(root, "command", &mut v, CommandKind::parse, "flow, lpa, expand");
    let model = take_enum(root, "model", &mut v, parse_model, "two-scalar, msr, dirac");
    let deterministic = take_bool(root, "deterministic", true, &mut v);
    if !deterministic {
        v.push(Violation::new("deterministic", "only deterministic runs are supported"));
    }
    let output_dir = take_string(root, "output_dir", "out", &mut v);
    if output_dir.is_empty() {
        v.push(Violation::new("output_dir", "must be a non-empty path"));
    }

    check_unknown(
        root,
        "",
        &[
            "command",
            "model",
            "deterministic",
            "output_dir",
            "couplings",
            "krange",
            "tolerances",
            "guards",
            "grid",
            "lpa",
            "expand",
        ],
        &mut v,
    );

    let mut cfg = RunConfig {
        command: command.unwrap_or(CommandKind::Flow),
        model: model.unwrap_or(Model::Msr),
        deterministic: true,
        output_dir,
        couplings: None,
        krange: None,
        tolerances: None,
        guards: None,
        grid: None,
        lpa: None,
        expand: None,
    };

    if let (Some(cmd), Some(model)) = (command, model) {
        check_sections(root, cmd, &mut v);
        match cmd {
            CommandKind::Flow => {
                cfg.couplings = section(root, "couplings", &mut v)
                    .and_then(|t| validate_couplings(t, model, &mut v));
                cfg.krange = section(root, "krange", &mut v)
                    .and_then(|t| validate_krange(t, cmd, &mut v));
                cfg.tolerances = Some(
                    opt_section(root, "tolerances", &mut v)
                        .map(|t| validate_tolerances(t, &mut v))
                        .unwrap_or_default(),
                );
            }
            CommandKind::Lpa => {
                if model == Model::Dirac {
                    v.push(Violation::new(
                        "model",
                        "the dirac model has no field-grid potential; use the flow command",
                    ));
                }
                cfg.couplings = section(root, "couplings", &mut v)
                    .and_then(|t| validate_couplings(t, model, &mut v));
                cfg.krange = section(root, "krange", &mut v)
                    .and_then(|t| validate_krange(t, cmd, &mut v));
                cfg.grid =
                    section(root, "grid", &mut v).and_then(|t| validate_grid(t, &mut v));
                cfg.guards = Some(
                    opt_section(root, "guards", &mut v)
                        .map(|t| validate_guards(t, &mut v))
                        .unwrap_or_default(),
                );
                cfg.lpa = Some(
                    opt_section(root, "lpa", &mut v)
                        .map(|t| validate_lpa(t, cfg.krange.as_ref(), &mut v))
                        .unwrap_or_default(),
                );
            }
            CommandKind::Expand => {
                cfg.expand = section(root, "expand", &mut v)
                    .and_then(|t| validate_expand(t, model, &mut v));
            }
        }
    }

    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

fn parse_model(s: &str) -> Option<Model> {
    match s {
        "two-scalar" => Some(Model::TwoScalar),
        "msr" => Some(Model::Msr),
        "dirac" => Some(Model::Dirac),
        _ => None,
    }
}

/// Sections each command requires and tolerates. Everything else present is
/// a violation, so settings cannot leak between run kinds.
fn check_sections(root: &Table, cmd: CommandKind, v: &mut Vec<Violation>) {
    let (required, optional): (&[&str], &[&str]) = match cmd {
        CommandKind::Flow => (&["couplings", "krange"], &["tolerances"]),
        CommandKind::Lpa => (&["couplings", "krange", "grid"], &["guards", "lpa"]),
        CommandKind::Expand => (&["expand"], &[]),
    };
    for key in required {
        if !root.contains_key(*key) {
            v.push(Violation::new(*key, format!("required for command '{}'", cmd.name())));
        }
    }
    for key in ["couplings", "krange", "tolerances", "guards", "grid", "lpa", "expand"] {
        if root.contains_key(key) && !required.contains(&key) && !optional.contains(&key) {
            v.push(Violation::new(key, format!("not used by command '{}'", cmd.name())));
        }
    }
}

fn validate_couplings(t: &Table, model: Model, v: &mut Vec<Violation>) -> Option<CouplingsCfg> {
    let before = v.len();
    let cfg = match model {
        Model::TwoScalar => {
            check_unknown_model(
                t,
                "couplings",
                &["u0", "m1_sq", "m2_sq", "lambda1", "lambda2", "lambda3", "mu_sq"],
                model,
                v,
            );
            CouplingsCfg::TwoScalar(TwoScalarTable {
                u0: take_f64(t, "couplings", "u0", 0.0, v),
                m1_sq: take_f64(t, "couplings", "m1_sq", 0.0, v),
                m2_sq: take_f64(t, "couplings", "m2_sq", 0.0, v),
                lambda1: take_f64(t, "couplings", "lambda1", 0.0, v),
                lambda2: take_f64(t, "couplings", "lambda2", 0.0, v),
                lambda3: take_f64(t, "couplings", "lambda3", 0.0, v),
                mu_sq: take_positive(t, "couplings", "mu_sq", 1.0, v),
            })
        }
        Model::Msr => {
            check_unknown_model(
                t,
                "couplings",
                &["u0", "m_sq", "lambda", "D", "mu_sq", "dimension"],
                model,
                v,
            );
            let dimension = match t.get("dimension") {
                None => MsrDimKind::D4,
                Some(Value::String(s)) if s == "d4" => MsrDimKind::D4,
                Some(Value::String(s)) if s == "d3" => MsrDimKind::D3,
                Some(_) => {
                    v.push(Violation::new("couplings.dimension", "expected \"d4\" or \"d3\""));
                    MsrDimKind::D4
                }
            };
            CouplingsCfg::Msr(MsrTable {
                u0: take_f64(t, "couplings", "u0", 0.0, v),
                m_sq: take_f64(t, "couplings", "m_sq", 0.0, v),
                lambda: take_f64(t, "couplings", "lambda", 0.0, v),
                noise_d: take_f64(t, "couplings", "D", 0.0, v),
                mu_sq: take_positive(t, "couplings", "mu_sq", 1.0, v),
                dimension,
            })
        }
        Model::Dirac => {
            check_unknown_model(t, "couplings", &["u0", "m", "lambda"], model, v);
            CouplingsCfg::Dirac(DiracTable {
                u0: take_f64(t, "couplings", "u0", 0.0, v),
                m: take_f64(t, "couplings", "m", 0.0, v),
                lambda: take_f64(t, "couplings", "lambda", 0.0, v),
            })
        }
    };
    (v.len() == before).then_some(cfg)
}

fn validate_krange(t: &Table, cmd: CommandKind, v: &mut Vec<Violation>) -> Option<KRange> {
    let before = v.len();
    check_unknown(t, "krange.", &["start", "end"], v);
    let start = take_req_f64(t, "krange", "start", v);
    let end = take_req_f64(t, "krange", "end", v);
    if let (Some(start), Some(end)) = (start, end) {
        if start <= 0.0 {
            v.push(Violation::new("krange.start", "scales must be positive"));
        }
        if end <= 0.0 {
            v.push(Violation::new("krange.end", "scales must be positive"));
        }
        match cmd {
            CommandKind::Flow if start == end => {
                v.push(Violation::new("krange", "start and end must differ"));
            }
            CommandKind::Lpa if end < start => {
                v.push(Violation::new("krange", "surface runs march upward: end >= start"));
            }
            _ => {}
        }
        (v.len() == before).then(|| KRange { start, end })
    } else {
        None
    }
}

fn validate_tolerances(t: &Table, v: &mut Vec<Violation>) -> TolerancesCfg {
    check_unknown(t, "tolerances.", &["rel_tol", "abs_tol", "min_step", "max_step"], v);
    let d = TolerancesCfg::default();
    TolerancesCfg {
        rel_tol: take_positive(t, "tolerances", "rel_tol", d.rel_tol, v),
        abs_tol: take_positive(t, "tolerances", "abs_tol", d.abs_tol, v),
        min_step: take_positive(t, "tolerances", "min_step", d.min_step, v),
        max_step: take_opt_positive(t, "tolerances", "max_step", v),
    }
}

fn validate_guards(t: &Table, v: &mut Vec<Violation>) -> GuardsCfg {
    check_unknown(t, "guards.", &["safety", "eps_prime", "min_step", "max_step"], v);
    let d = GuardsCfg::default();
    GuardsCfg {
        safety: take_positive(t, "guards", "safety", d.safety, v),
        eps_prime: take_positive(t, "guards", "eps_prime", d.eps_prime, v),
        min_step: take_positive(t, "guards", "min_step", d.min_step, v),
        max_step: take_opt_positive(t, "guards", "max_step", v),
    }
}

fn validate_grid(t: &Table, v: &mut Vec<Violation>) -> Option<GridCfg> {
    let before = v.len();
    check_unknown(t, "grid.", &["bounds1", "bounds2", "points"], v);
    let bounds1 = take_interval(t, "grid", "bounds1", v);
    let bounds2 = take_interval(t, "grid", "bounds2", v);
    let points = take_points(t, "grid", "points", v);
    match (bounds1, bounds2, points) {
        (Some(bounds1), Some(bounds2), Some(points)) if v.len() == before => {
            Some(GridCfg { bounds1, bounds2, points })
        }
        _ => None,
    }
}

fn validate_lpa(t: &Table, krange: Option<&KRange>, v: &mut Vec<Violation>) -> LpaCfg {
    check_unknown(t, "lpa.", &["boundary", "checkpoints"], v);
    let boundary = match t.get("boundary") {
        None => BoundaryKind::Ode,
        Some(Value::String(s)) if s == "ode" => BoundaryKind::Ode,
        Some(Value::String(s)) if s == "frozen" => BoundaryKind::Frozen,
        Some(_) => {
            v.push(Violation::new("lpa.boundary", "expected \"ode\" or \"frozen\""));
            BoundaryKind::Ode
        }
    };
    let mut checkpoints = Vec::new();
    match t.get("checkpoints") {
        None => {}
        Some(Value::Array(items)) => {
            for (idx, item) in items.iter().enumerate() {
                match as_f64(item) {
                    Some(x) if x.is_finite() => {
                        if let Some(r) = krange {
                            if x < r.start || x > r.end {
                                v.push(Violation::new(
                                    format!("lpa.checkpoints[{idx}]"),
                                    format!("{x} lies outside [{}, {}]", r.start, r.end),
                                ));
                                continue;
                            }
                        }
                        checkpoints.push(x);
                    }
                    _ => v.push(Violation::new(
                        format!("lpa.checkpoints[{idx}]"),
                        "expected a finite number",
                    )),
                }
            }
        }
        Some(_) => v.push(Violation::new("lpa.checkpoints", "expected an array of scales")),
    }
    canonicalize_checkpoints(&mut checkpoints);
    LpaCfg { boundary, checkpoints }
}

fn validate_expand(t: &Table, model: Model, v: &mut Vec<Violation>) -> Option<ExpandCfg> {
    let before = v.len();
    check_unknown(t, "expand.", &["observable", "order"], v);
    let observable = match t.get("observable") {
        Some(Value::String(s)) if !s.trim().is_empty() => {
            if let Err(e) = expr::parse(s) {
                v.push(Violation::new("expand.observable", e));
            }
            s.clone()
        }
        Some(Value::String(_)) => {
            v.push(Violation::new("expand.observable", "must be a non-empty expression"));
            String::new()
        }
        Some(_) => {
            v.push(Violation::new("expand.observable", "expected a string"));
            String::new()
        }
        None => {
            v.push(Violation::new("expand.observable", "required for command 'expand'"));
            String::new()
        }
    };
    let _ = model;
    let order = match t.get("order") {
        None => 1,
        Some(Value::Integer(n)) if *n >= 0 => *n as u32,
        Some(_) => {
            v.push(Violation::new("expand.order", "expected a non-negative integer"));
            1
        }
    };
    (v.len() == before).then_some(ExpandCfg { observable, order })
}

fn as_f64(value: &Value) -> Option<f64> {
    match value {
        Value::Float(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

fn take_enum<T>(
    root: &Table,
    key: &str,
    v: &mut Vec<Violation>,
    parse: impl Fn(&str) -> Option<T>,
    expected: &str,
) -> Option<T> {
    match root.get(key) {
        Some(Value::String(s)) => match parse(s) {
            Some(t) => Some(t),
            None => {
                v.push(Violation::new(key, format!("'{s}' is not one of: {expected}")));
                None
            }
        },
        Some(_) => {
            v.push(Violation::new(key, format!("expected one of: {expected}")));
            None
        }
        None => {
            v.push(Violation::new(key, "required"));
            None
        }
    }
}

fn take_bool(root: &Table, key: &str, default: bool, v: &mut Vec<Violation>) -> bool {
    match root.get(key) {
        None => default,
        Some(Value::Boolean(b)) => *b,
        Some(_) => {
            v.push(Violation::new(key, "expected a boolean"));
            default
        }
    }
}

fn take_string(root: &Table, key: &str, default: &str, v: &mut Vec<Violation>) -> String {
    match root.get(key) {
        None => default.to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            v.push(Violation::new(key, "expected a string"));
            default.to_string()
        }
    }
}

fn take_f64(t: &Table, ctx: &str, key: &str, default: f64, v: &mut Vec<Violation>) -> f64 {
    match t.get(key) {
        None => default,
        Some(val) => match as_f64(val) {
            Some(x) if x.is_finite() => x,
            _ => {
                v.push(Violation::new(format!("{ctx}.{key}"), "expected a finite number"));
                default
            }
        },
    }
}

fn take_req_f64(t: &Table, ctx: &str, key: &str, v: &mut Vec<Violation>) -> Option<f64> {
    match t.get(key) {
        None => {
            v.push(Violation::new(format!("{ctx}.{key}"), "required"));
            None
        }
        Some(val) => match as_f64(val) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                v.push(Violation::new(format!("{ctx}.{key}"), "expected a finite number"));
                None
            }
        },
    }
}

fn take_positive(t: &Table, ctx: &str, key: &str, default: f64, v: &mut Vec<Violation>) -> f64 {
    let x = take_f64(t, ctx, key, default, v);
    if x <= 0.0 {
        v.push(Violation::new(format!("{ctx}.{key}"), "must be positive"));
        default
    } else {
        x
    }
}

fn take_opt_positive(t: &Table, ctx: &str, key: &str, v: &mut Vec<Violation>) -> Option<f64> {
    match t.get(key) {
        None => None,
        Some(val) => match as_f64(val) {
            Some(x) if x.is_finite() && x > 0.0 => Some(x),
            _ => {
                v.push(Violation::new(format!("{ctx}.{key}"), "expected a positive number"));
                None
            }
        },
    }
}

fn take_interval(t: &Table, ctx: &str, key: &str, v: &mut Vec<Violation>) -> Option<[f64; 2]> {
    match t.get(key) {
        Some(Value::Array(items)) if items.len() == 2 => {
            let lo = as_f64(&items[0]).filter(|x| x.is_finite());
            let hi = as_f64(&items[1]).filter(|x| x.is_finite());
            match (lo, hi) {
                (Some(lo), Some(hi)) if lo < hi => Some([lo, hi]),
                _ => {
                    v.push(Violation::new(
                        format!("{ctx}.{key}"),
                        "expected [lo, hi] with lo < hi",
                    ));
                    None
                }
            }
        }
        Some(_) => {
            v.push(Violation::new(format!("{ctx}.{key}"), "expected [lo, hi] with lo < hi"));
            None
        }
        None => {
            v.push(Violation::new(format!("{ctx}.{key}"), "required"));
            None
        }
    }
}

fn take_points(t: &Table, ctx: &str, key: &str, v: &mut Vec<Violation>) -> Option<[usize; 2]> {
    match t.get(key) {
        Some(Value::Array(items)) if items.len() == 2 => {
            let mut out = [0usize; 2];
            for (axis, item) in items.iter().enumerate() {
                match item {
                    Value::Integer(n) if *n >= 5 => out[axis] = *n as usize,
                    Value::Integer(n) => {
                        v.push(Violation::new(
                            format!("{ctx}.{key}[{axis}]"),
                            format!("{n} points, need at least 5 per axis"),
                        ));
                        return None;
                    }
                    _ => {
                        v.push(Violation::new(
                            format!("{ctx}.{key}[{axis}]"),
                            "expected an integer",
                        ));
                        return None;
                    }
                }
            }
            Some(out)
        }
        Some(_) => {
            v.push(Violation::new(format!("{ctx}.{key}"), "expected [n1, n2] integers"));
            None
        }
        None => {
            v.push(Violation::new(format!("{ctx}.{key}"), "required"));
            None
        }
    }
}

fn check_unknown(t: &Table, prefix: &str, allowed: &[&str], v: &mut Vec<Violation>) {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            v.push(Violation::new(format!("{prefix}{key}"), "unknown key"));
        }
    }
}

fn check_unknown_model(
    t: &Table,
    prefix: &str,
    allowed: &[&str],
    model: Model,
    v: &mut Vec<Violation>,
) {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            v.push(Violation::new(
                format!("{prefix}.{key}"),
                format!("unknown key for model '{model}'"),
            ));
        }
    }
}

/// A required section; absence was already reported by `check_sections`.
fn section<'a>(root: &'a Table, key: &str, v: &mut Vec<Violation>) -> Option<&'a Table> {
    match root.get(key) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            v.push(Violation::new(key, "expected a table"));
            None
        }
    }
}

fn opt_section<'a>(root: &'a Table, key: &str, v: &mut Vec<Violation>) -> Option<&'a Table> {
    section(root, key, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSR_FLOW: &str = r#"
        command = "flow"
        model = "msr"

        [couplings]
        m_sq = 0.1
        lambda = 0.5
        D = 2.0
        mu_sq = 1.0

        [krange]
        start = 0.1
        end = 10.0
    "#;

    #[test]
    fn minimal_flow_config_parses_with_defaults() {
        let cfg = parse_config(MSR_FLOW).unwrap();
        assert_eq!(cfg.command, CommandKind::Flow);
        assert_eq!(cfg.model, Model::Msr);
        assert!(cfg.deterministic);
        assert_eq!(cfg.output_dir, "out");
        let t = match cfg.couplings.as_ref().unwrap() {
            CouplingsCfg::Msr(t) => t,
            other => panic!("wrong couplings variant: {other:?}"),
        };
        assert_eq!(t.dimension, MsrDimKind::D4);
        assert_eq!(t.u0, 0.0);
        assert_eq!(cfg.tolerances, Some(TolerancesCfg::default()));
        assert!(cfg.grid.is_none() && cfg.lpa.is_none() && cfg.expand.is_none());
    }

    #[test]
    fn misplaced_coupling_is_named_in_the_violation() {
        let text = MSR_FLOW.replace("lambda = 0.5", "lambda = 0.5\nlambda3 = 0.1");
        let errs = parse_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.path == "couplings.lambda3"),
            "expected a violation at couplings.lambda3, got {errs:?}"
        );
    }

    #[test]
    fn undersized_grid_is_rejected() {
        let text = r#"
            command = "lpa"
            model = "msr"
            [couplings]
            m_sq = 0.1
            [krange]
            start = 1.0
            end = 2.0
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.5, 0.5]
            points = [3, 41]
        "#;
        let errs = parse_config(text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.path == "grid.points[0]" && e.message.contains("at least 5")),
            "expected a minimum-points violation, got {errs:?}"
        );
    }

    #[test]
    fn all_violations_are_collected_in_one_pass() {
        let text = r#"
            command = "flow"
            model = "msr"
            mystery = 1
            [couplings]
            lambda3 = 0.1
            mu_sq = -1.0
            [krange]
            start = 0.0
            end = 10.0
        "#;
        let errs = parse_config(text).unwrap_err();
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        for want in ["mystery", "couplings.lambda3", "couplings.mu_sq", "krange.start"] {
            assert!(paths.contains(&want), "missing violation at {want}; got {paths:?}");
        }
    }

    #[test]
    fn sections_from_other_commands_are_rejected() {
        let text = MSR_FLOW.to_string()
            + r#"
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.5, 0.5]
            points = [41, 41]
        "#;
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "grid" && e.message.contains("not used")));
    }

    #[test]
    fn flow_rejects_equal_endpoints_and_lpa_rejects_downward() {
        let text = MSR_FLOW.replace("end = 10.0", "end = 0.1");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "krange"));

        let text = r#"
            command = "lpa"
            model = "msr"
            [couplings]
            m_sq = 0.1
            [krange]
            start = 2.0
            end = 1.0
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.5, 0.5]
            points = [5, 5]
        "#;
        let errs = parse_config(text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "krange" && e.message.contains("upward")));
    }

    #[test]
    fn dirac_model_cannot_run_on_a_grid() {
        let text = r#"
            command = "lpa"
            model = "dirac"
            [couplings]
            m = 1.0
            [krange]
            start = 1.0
            end = 2.0
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.5, 0.5]
            points = [5, 5]
        "#;
        let errs = parse_config(text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "model"));
    }

    #[test]
    fn round_trip_preserves_the_effective_configuration() {
        let lpa = r#"
            command = "lpa"
            model = "two-scalar"
            output_dir = "runs/surface"
            [couplings]
            m1_sq = 0.1
            m2_sq = 0.2
            lambda1 = 0.3
            lambda2 = 0.4
            lambda3 = 0.01
            [krange]
            start = 1.0
            end = 2.0
            [guards]
            safety = 0.1
            max_step = 0.01
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.4, 0.4]
            points = [9, 7]
            [lpa]
            boundary = "frozen"
            checkpoints = [1.75, 1.25, 1.5, 1.25]
        "#;
        for text in [MSR_FLOW, lpa] {
            let cfg = parse_config(text).unwrap();
            let echoed = parse_config(&cfg.to_toml_string()).unwrap();
            assert_eq!(cfg, echoed);
        }
        let cfg = parse_config(lpa).unwrap();
        assert_eq!(cfg.lpa.unwrap().checkpoints, vec![1.25, 1.5, 1.75]);
    }

    #[test]
    fn expand_config_round_trips_and_checks_the_expression() {
        let text = r#"
            command = "expand"
            model = "two-scalar"
            [expand]
            observable = "Phi1^2[f] ⋆ Phi1^2[f']"
            order = 2
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.expand.as_ref().unwrap().order, 2);
        let echoed = parse_config(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, echoed);

        let bad = text.replace("Phi1^2[f]", "Phi9[f]");
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "expand.observable"));
    }

    #[test]
    fn periodic_checkpoints_stay_inside_the_interval() {
        let text = r#"
            command = "lpa"
            model = "msr"
            [couplings]
            m_sq = 0.1
            [krange]
            start = 1.0
            end = 2.0
            [grid]
            bounds1 = [-0.5, 0.5]
            bounds2 = [-0.5, 0.5]
            points = [5, 5]
            [lpa]
            checkpoints = [1.9]
        "#;
        let mut cfg = parse_config(text).unwrap();
        cfg.add_periodic_checkpoints(0.25).unwrap();
        assert_eq!(cfg.lpa.as_ref().unwrap().checkpoints, vec![1.25, 1.5, 1.75, 1.9]);
        assert!(cfg.add_periodic_checkpoints(0.0).is_err());
    }

    #[test]
    fn non_deterministic_runs_are_refused() {
        let text = "deterministic = false\n".to_string() + MSR_FLOW;
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "deterministic"));
    }
}
