//! TOML run configuration.
//!
//! ```toml
//! [ifs]
//! dimension = 1
//! label_base = 0          # optional, default 1
//! center = ["1"]          # optional invariant-ball center
//!
//! [[ifs.map]]
//! ratio = "1/2"
//! orthogonal = ["1"]      # optional, row-major, default identity
//! translation = ["0"]
//!
//! [run]
//! preset = "interval3"    # instead of [ifs]
//! depth = 4
//! view = "E"              # or "Ed"
//! mode = "strict"         # or "optimistic"
//! out = "out"
//!
//! [caps]
//! refine_depth = 12
//!
//! [boundary]
//! pairs = [["(0)", "(2)"]]
//! random_pairs = 100
//! ```

use serde::Deserialize;
use thiserror::Error;

use crate::boundary::BoundaryAddress;
use crate::graph::{Mode, View};
use crate::intersect::Caps;
use crate::presets::{self, Preset};
use crate::rational::{parse_q, Q};
use crate::similitude::{identity_matrix, IfsSpec, Similitude};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid field `{field}`: {msg}")]
    Invalid { field: String, msg: String },
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ifs: Option<RawIfs>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    caps: RawCaps,
    #[serde(default)]
    boundary: RawBoundary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIfs {
    dimension: usize,
    label_base: Option<usize>,
    center: Option<Vec<String>>,
    #[serde(default)]
    map: Vec<RawMap>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    ratio: String,
    orthogonal: Option<Vec<String>>,
    translation: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    preset: Option<String>,
    depth: Option<i64>,
    view: Option<String>,
    mode: Option<String>,
    out: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    refine_depth: Option<usize>,
    witness_word_len: Option<usize>,
    witness_period_len: Option<usize>,
    node_cap: Option<usize>,
    point_cap: Option<usize>,
    metric_vertices: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    a: Option<f64>,
    pairs: Option<Vec<[String; 2]>>,
    random_pairs: Option<usize>,
    seed: Option<u64>,
    depth: Option<usize>,
    stable_levels: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct BoundaryOptions {
    /// `None`: half the admissible maximum.
    pub a: Option<f64>,
    pub pairs: Vec<(BoundaryAddress, BoundaryAddress)>,
    pub random_pairs: usize,
    pub seed: u64,
    pub depth: usize,
    pub stable_levels: usize,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            a: None,
            pairs: Vec::new(),
            random_pairs: 100,
            seed: 1,
            depth: 8,
            stable_levels: crate::boundary::DEFAULT_STABLE_LEVELS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub preset: Preset,
    pub depth: usize,
    pub view: View,
    pub mode: Mode,
    pub out: String,
    pub boundary: BoundaryOptions,
}

pub const DEFAULT_DEPTH: usize = 4;

pub fn parse_view(s: &str) -> Option<View> {
    match s {
        "E" | "e" => Some(View::E),
        "Ed" | "ed" | "E◇" | "diamond" => Some(View::Diamond),
        _ => None,
    }
}

pub fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "strict" => Some(Mode::Strict),
        "optimistic" => Some(Mode::Optimistic),
        _ => None,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn rationals(field: &str, xs: &[String]) -> Result<Vec<Q>, ConfigError> {
    xs.iter()
        .enumerate()
        .map(|(i, s)| parse_q(s).map_err(|e| invalid(format!("{field}[{i}]"), e.to_string())))
        .collect()
}

fn build_ifs(raw: &RawIfs) -> Result<IfsSpec, ConfigError> {
    let d = raw.dimension;
    if d == 0 {
        return Err(invalid("ifs.dimension", "must be at least 1"));
    }
    if raw.map.is_empty() {
        return Err(invalid("ifs.map", "at least one map is required"));
    }
    let mut maps = Vec::new();
    for (k, m) in raw.map.iter().enumerate() {
        let f = |s: &str| format!("ifs.map[{k}].{s}");
        let ratio = parse_q(&m.ratio).map_err(|e| invalid(f("ratio"), e.to_string()))?;
        let orth = match &m.orthogonal {
            Some(o) => rationals(&f("orthogonal"), o)?,
            None => identity_matrix(d),
        };
        if orth.len() != d * d {
            return Err(invalid(f("orthogonal"), format!("expected {} entries", d * d)));
        }
        let trans = rationals(&f("translation"), &m.translation)?;
        if trans.len() != d {
            return Err(invalid(f("translation"), format!("expected {d} entries")));
        }
        let s = Similitude::new(ratio, orth, trans).map_err(|e| {
            let field = match e {
                crate::similitude::SimilError::Ratio(_) => f("ratio"),
                crate::similitude::SimilError::NotOrthogonal => f("orthogonal"),
                _ => format!("ifs.map[{k}]"),
            };
            invalid(field, e.to_string())
        })?;
        maps.push(s);
    }
    let mut ifs = IfsSpec::new(maps)
        .map_err(|e| invalid("ifs.map", e.to_string()))?
        .with_label_base(raw.label_base.unwrap_or(1));
    if let Some(c) = &raw.center {
        let c = rationals("ifs.center", c)?;
        ifs = ifs.with_center(c).map_err(|e| invalid("ifs.center", e.to_string()))?;
    }
    Ok(ifs)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ConfigError::Syntax {
            line,
            col,
            msg: e.message().to_string(),
        }
    })?;
    let preset = match (&raw.ifs, &raw.run.preset) {
        (Some(_), Some(_)) => return Err(invalid("run.preset", "give either [ifs] or run.preset, not both")),
        (None, None) => return Err(invalid("ifs", "missing [ifs] section or run.preset")),
        (None, Some(p)) => presets::by_name(p).ok_or_else(|| invalid("run.preset", format!("unknown preset {p:?}")))?,
        (Some(i), None) => Preset {
            name: "config".to_string(),
            ifs: build_ifs(i)?,
            caps: Caps::default(),
            valid_depth: None,
            designated: Vec::new(),
        },
    };
    let mut preset = preset;
    apply_caps(&mut preset.caps, &raw.caps)?;
    let depth = match raw.run.depth {
        None => DEFAULT_DEPTH,
        Some(d) if d < 0 => return Err(invalid("run.depth", "must be nonnegative")),
        Some(d) => d as usize,
    };
    let view = match &raw.run.view {
        None => View::E,
        Some(v) => parse_view(v).ok_or_else(|| invalid("run.view", "expected E or Ed"))?,
    };
    let mode = match &raw.run.mode {
        None => Mode::Strict,
        Some(m) => parse_mode(m).ok_or_else(|| invalid("run.mode", "expected strict or optimistic"))?,
    };
    let n = preset.ifs.n_maps();
    let base = preset.ifs.label_base;
    let rb = &raw.boundary;
    let mut bo = BoundaryOptions::default();
    if let Some(a) = rb.a {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid("boundary.a", "must be positive"));
        }
        bo.a = Some(a);
    }
    if let Some(ps) = &rb.pairs {
        for (i, [x, y]) in ps.iter().enumerate() {
            let p = |s: &str, j: usize| {
                BoundaryAddress::parse(s, base, n).map_err(|e| invalid(format!("boundary.pairs[{i}][{j}]"), e.to_string()))
            };
            bo.pairs.push((p(x, 0)?, p(y, 1)?));
        }
    }
    bo.random_pairs = rb.random_pairs.unwrap_or(bo.random_pairs);
    bo.seed = rb.seed.unwrap_or(bo.seed);
    bo.depth = rb.depth.unwrap_or(bo.depth);
    bo.stable_levels = rb.stable_levels.unwrap_or(bo.stable_levels);
    if bo.stable_levels == 0 {
        return Err(invalid("boundary.stable_levels", "must be at least 1"));
    }
    Ok(RunConfig {
        preset,
        depth,
        view,
        mode,
        out: raw.run.out.clone().unwrap_or_else(|| "out".to_string()),
        boundary: bo,
    })
}

fn apply_caps(c: &mut Caps, r: &RawCaps) -> Result<(), ConfigError> {
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut c.refine_depth, r.refine_depth);
    set(&mut c.witness_word_len, r.witness_word_len);
    set(&mut c.witness_period_len, r.witness_period_len);
    set(&mut c.node_cap, r.node_cap);
    set(&mut c.point_cap, r.point_cap);
    set(&mut c.metric_vertices, r.metric_vertices);
    if c.node_cap == 0 {
        return Err(invalid("caps.node_cap", "must be positive"));
    }
    Ok(())
}

/// Applies `key=value[,key=value]` overrides.
pub fn apply_caps_str(c: &mut Caps, s: &str) -> Result<(), ConfigError> {
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| invalid("caps", format!("expected key=value, got {part:?}")))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("caps.{}", k.trim()), "expected a nonnegative integer"))?;
        let mut raw = RawCaps::default();
        match k.trim() {
            "refine_depth" => raw.refine_depth = Some(v),
            "witness_word_len" => raw.witness_word_len = Some(v),
            "witness_period_len" => raw.witness_period_len = Some(v),
            "node_cap" => raw.node_cap = Some(v),
            "point_cap" => raw.point_cap = Some(v),
            "metric_vertices" => raw.metric_vertices = Some(v),
            other => return Err(invalid(format!("caps.{other}"), "unknown cap")),
        }
        apply_caps(c, &raw)?;
    }
    Ok(())
}

/// Serializes an IFS back into the `[ifs]` format.
pub fn ifs_to_toml(ifs: &IfsSpec) -> String {
    use crate::rational::fmt_q;
    let list = |xs: &[Q]| {
        let v: Vec<String> = xs.iter().map(|x| format!("\"{}\"", fmt_q(x))).collect();
        format!("[{}]", v.join(", "))
    };
    let mut out = format!("[ifs]\ndimension = {}\nlabel_base = {}\n", ifs.dim(), ifs.label_base);
    if let Some(c) = &ifs.center_hint {
        out.push_str(&format!("center = {}\n", list(c)));
    }
    for m in ifs.maps() {
        out.push_str(&format!(
            "\n[[ifs.map]]\nratio = \"{}\"\northogonal = {}\ntranslation = {}\n",
            fmt_q(m.ratio()),
            list(m.orthogonal()),
            list(m.translation())
        ));
    }
    out
}
