//! Command-line driver: argument parsing, command orchestration and exports.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::boundary::{self, BoundaryAddress, HolderReport};
use crate::config::{self, ConfigError, RunConfig};
use crate::graph::{self, AugmentedGraph, GraphError, View};
use crate::hyperbolic::{self, Metric};
use crate::intersect::Oracle;
use crate::rational::qi;
use crate::symbolic::SymbolicError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ifsgraph", version, about = "Augmented graphs of self-similar sets")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in system, e.g. interval3 or example2-1d(4).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// E or Ed.
    #[arg(long, global = true)]
    pub view: Option<String>,
    /// strict or optimistic.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated overrides, e.g. refine_depth=20,node_cap=100000.
    #[arg(long, global = true)]
    pub caps: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build the graph and export DOT, CSV and JSON.
    Build,
    /// Hyperbolicity and quasi-isometry diagnostics.
    Analyze,
    /// Boundary Gromov products and Hölder checks.
    Boundary,
    /// Condition (H) gap report.
    Gaps,
    /// All of the above plus a combined summary.
    Report,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Graph(GraphError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("{vertices} vertices exceed the metric cap {cap}; lower --depth or raise metric_vertices")]
    MetricCap { vertices: usize, cap: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Graph(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Graph(e) if e.is_resource_cap() => EXIT_RESOURCE,
            CliError::Graph(_) => EXIT_UNKNOWN,
            CliError::Symbolic(SymbolicError::ResourceCap { .. }) => EXIT_RESOURCE,
            CliError::Symbolic(_) => EXIT_CONFIG,
            CliError::MetricCap { .. } => EXIT_RESOURCE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Merges the file configuration (if any) with command-line flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid {
                field: "--preset".into(),
                msg: "give either --config or --preset".into(),
            }
            .into())
        }
        (Some(p), None) => fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            source: e,
        })?,
        (None, Some(name)) => format!("[run]\npreset = {:?}\n", name),
        (None, None) => {
            return Err(ConfigError::Invalid {
                field: "--preset".into(),
                msg: "one of --config or --preset is required".into(),
            }
            .into())
        }
    };
    let mut cfg = config::parse_config(&text)?;
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if let Some(v) = &cli.view {
        cfg.view = config::parse_view(v).ok_or(ConfigError::Invalid {
            field: "--view".into(),
            msg: "expected E or Ed".into(),
        })?;
    }
    if let Some(m) = &cli.mode {
        cfg.mode = config::parse_mode(m).ok_or(ConfigError::Invalid {
            field: "--mode".into(),
            msg: "expected strict or optimistic".into(),
        })?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.display().to_string();
    }
    if let Some(c) = &cli.caps {
        config::apply_caps_str(&mut cfg.preset.caps, c)?;
    }
    Ok(cfg)
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &str) -> Result<Self, CliError> {
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        Ok(Writer { dir, written: Vec::new() })
    }

    fn put(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        self.written.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable");
        s.push('\n');
        self.put(name, &s)
    }
}

fn view_tag(v: View) -> &'static str {
    match v {
        View::E => "E",
        View::Diamond => "Ed",
    }
}

struct Session<'c> {
    cfg: &'c RunConfig,
    oracle: Oracle,
    graph: Option<AugmentedGraph>,
}

impl<'c> Session<'c> {
    fn new(cfg: &'c RunConfig) -> Self {
        Session {
            cfg,
            oracle: Oracle::new(&cfg.preset.ifs, cfg.preset.caps),
            graph: None,
        }
    }

    fn graph(&mut self) -> Result<&AugmentedGraph, CliError> {
        if self.graph.is_none() {
            self.graph = Some(AugmentedGraph::build(&self.oracle, self.cfg.depth, self.cfg.mode)?);
        }
        Ok(self.graph.as_ref().unwrap())
    }

    fn metric_graph(&mut self) -> Result<&AugmentedGraph, CliError> {
        let cap = self.cfg.preset.caps.metric_vertices;
        let g = self.graph()?;
        if g.len() > cap {
            return Err(CliError::MetricCap { vertices: g.len(), cap });
        }
        Ok(g)
    }
}

fn run_build(s: &mut Session, w: &mut Writer) -> Result<serde_json::Value, CliError> {
    let cfg = s.cfg;
    let ifs = cfg.preset.ifs.clone();
    let g = s.graph()?.clone();
    w.put(&format!("graph_{}.dot", view_tag(cfg.view)), &graph::to_dot(&g, &ifs, Some(cfg.view), &[]))?;
    w.put("edges.csv", &graph::edges_csv(&g, &ifs, None))?;
    w.put("vertices.csv", &graph::vertices_csv(&g, &ifs))?;
    let summary = graph::summary_json(&g, &ifs);
    w.json("summary.json", &summary)?;
    w.json("degrees.json", &json!(graph::degree_report(&g)))?;
    w.put("intersect_cache.csv", &s.oracle.cache_csv())?;
    Ok(summary)
}

fn run_analyze(s: &mut Session, w: &mut Writer) -> Result<serde_json::Value, CliError> {
    let ifs = s.cfg.preset.ifs.clone();
    let g = s.metric_graph()?;
    let rep = hyperbolic::hyperbolicity_report(g);
    let cc = hyperbolic::condition_c_diagnostic(g, &ifs.invariant_ball(), ifs.min_ratio(), &qi(2));
    let gamma = graph::wsc_gamma_estimate(&g.table, &ifs.invariant_ball());
    let v = json!({
        "hyperbolicity": rep,
        "condition_c": cc,
        "wsc_gamma": gamma,
        "valid_depth": s.cfg.preset.valid_depth,
    });
    w.json("hyperbolicity.json", &v)?;
    Ok(v)
}

fn designated_pairs(cfg: &RunConfig) -> Vec<(BoundaryAddress, BoundaryAddress)> {
    cfg.preset
        .designated
        .iter()
        .map(|d| (d.xi.clone(), d.eta.clone()))
        .collect()
}

fn holder_json(r: &HolderReport) -> serde_json::Value {
    json!({
        "a": r.a,
        "alpha": r.alpha,
        "L": r.l,
        "constant": if r.constant.is_finite() { json!(r.constant) } else { json!(null) },
        "max_ratio": r.max_ratio,
        "min_ratio": r.min_ratio,
        "violations": r.violations,
        "flagged": r.flagged,
        "pairs": r.rows.len(),
    })
}

fn run_boundary(s: &mut Session, w: &mut Writer) -> Result<serde_json::Value, CliError> {
    let cfg = s.cfg;
    let ifs = cfg.preset.ifs.clone();
    let (base, n) = (ifs.label_base, ifs.n_maps());
    let g = s.metric_graph()?;
    let me = Metric::new(g, View::E);
    let hd = hyperbolic::LevelDistances::new(&me.adj);
    let l = hyperbolic::horizontal_geodesic_bound(&me, &hd).into_iter().max().unwrap_or(0);
    let delta = hyperbolic::delta_hyperbolicity(&me).delta;
    let a = cfg.boundary.a.unwrap_or_else(|| hyperbolic::a_max(delta) / 2.0);

    let mut pairs = cfg.boundary.pairs.clone();
    pairs.extend(boundary::sample_pairs(&ifs, cfg.boundary.random_pairs, cfg.boundary.seed, 3, 3));
    let bd = cfg.boundary.depth;
    let owned;
    let full = if boundary::windowable(&ifs, View::E) {
        None
    } else {
        owned = AugmentedGraph::build(&s.oracle, bd, cfg.mode)?;
        Some(&owned)
    };
    let ests = boundary::pair_estimates(&s.oracle, &pairs, bd, cfg.boundary.stable_levels, full)?;
    let upper = boundary::holder_upper_from(&s.oracle, &pairs, &ests, a, l);
    w.put("boundary_pairs.csv", &boundary::pairs_csv(&upper, base, n))?;
    let mut out = json!({
        "delta": delta,
        "monotone_pairs": ests.iter().filter(|e| e.monotone).count(),
        "non_monotone_pairs": ests.iter().filter(|e| !e.monotone).count(),
        "holder_upper": holder_json(&upper),
    });
    let lower = boundary::bilipschitz_lower_from(&s.oracle, &pairs, &ests, a);
    out["bilipschitz_lower"] = holder_json(&lower);
    let des = designated_pairs(cfg);
    if !des.is_empty() {
        let dests = boundary::pair_estimates(&s.oracle, &des, bd, cfg.boundary.stable_levels, full)?;
        let dr = boundary::bilipschitz_lower_from(&s.oracle, &des, &dests, a);
        w.put("designated_pairs.csv", &boundary::pairs_csv(&dr, base, n))?;
        out["designated_lower"] = holder_json(&dr);
        out["designated_ratios"] = json!(dr.rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    }
    w.json("boundary.json", &out)?;
    Ok(out)
}

fn run_gaps(s: &mut Session, w: &mut Writer) -> Result<serde_json::Value, CliError> {
    let cfg = s.cfg;
    let des: Vec<(usize, usize, BoundaryAddress, BoundaryAddress)> = cfg
        .preset
        .designated
        .iter()
        .map(|d| (d.k, d.level, d.xi.clone(), d.eta.clone()))
        .collect();
    s.graph()?;
    let g = s.graph.as_ref().unwrap();
    let rep = boundary::condition_h_report(&s.oracle, g, &des)?;
    w.put("gaps_plot.csv", &boundary::gap_plot_csv(&rep))?;
    let v = json!(rep);
    w.json("condition_h.json", &v)?;
    Ok(v)
}

/// Runs one command and returns the files written.
pub fn run_command(cfg: &RunConfig, command: Command) -> Result<Vec<PathBuf>, CliError> {
    let mut w = Writer::new(&cfg.out)?;
    let mut s = Session::new(cfg);
    match command {
        Command::Build => {
            run_build(&mut s, &mut w)?;
        }
        Command::Analyze => {
            run_analyze(&mut s, &mut w)?;
        }
        Command::Boundary => {
            run_boundary(&mut s, &mut w)?;
        }
        Command::Gaps => {
            run_gaps(&mut s, &mut w)?;
        }
        Command::Report => {
            let b = run_build(&mut s, &mut w)?;
            let a = run_analyze(&mut s, &mut w)?;
            let bd = run_boundary(&mut s, &mut w)?;
            let gp = run_gaps(&mut s, &mut w)?;
            let v = json!({
                "preset": cfg.preset.name,
                "depth": cfg.depth,
                "view": view_tag(cfg.view),
                "graph": b,
                "analysis": a,
                "boundary": bd,
                "gaps": {"trend": gp["trend"], "designated": gp["designated"]},
            });
            w.json("report.json", &v)?;
        }
    }
    Ok(w.written)
}

/// Entry point shared by the binary; returns the process exit status.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let res = resolve(&cli).and_then(|cfg| run_command(&cfg, cli.command));
    match res {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
