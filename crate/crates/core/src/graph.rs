//! The augmented graphs `(X, E)` and `(X, E◇)`: typed edges, incremental
//! construction, exports and separation diagnostics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::intersect::{neighbor_map, Oracle, Verdict};
use crate::rational::{dist2, fmt_q, fmt_vec, qi, Q};
use crate::similitude::{Ball, IfsSpec, Similitude};
use crate::symbolic::{LevelTable, SymbolicError, VId, DEFAULT_LEVEL_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    Vertical,
    VerticalPlus,
    Horizontal,
}

impl EdgeKind {
    pub fn tag(self) -> &'static str {
        match self {
            EdgeKind::Vertical => "v",
            EdgeKind::VerticalPlus => "v+",
            EdgeKind::Horizontal => "h",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum View {
    /// `E = E_v ∪ E_h`.
    E,
    /// `E◇ = E_v ∪ E_v⁺`.
    Diamond,
}

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::E => "E",
            View::Diamond => "Ed",
        }
    }

    pub fn has(self, k: EdgeKind) -> bool {
        match (self, k) {
            (_, EdgeKind::Vertical) => true,
            (View::E, EdgeKind::Horizontal) => true,
            (View::Diamond, EdgeKind::VerticalPlus) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Abort on any undecided pair.
    Strict,
    /// Admit undecided pairs as edges flagged uncertain.
    Optimistic,
}

/// Undirected edge stored as `a < b` in (level, index) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: VId,
    pub b: VId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(x: VId, y: VId, kind: EdgeKind) -> Edge {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Edge { a, b, kind }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("{} pair(s) undecided at level {level} (first: {first})", pairs.len())]
    Undecided {
        level: usize,
        pairs: Vec<(VId, VId, EdgeKind)>,
        first: String,
    },
}

impl GraphError {
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, GraphError::Symbolic(SymbolicError::ResourceCap { .. }))
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    pub table: LevelTable,
    /// `horizontal[n][i]`: sorted same-level neighbors of `(n, i)`.
    pub horizontal: Vec<Vec<Vec<usize>>>,
    /// `vplus_down[n][i]`: `E_v⁺` neighbors of `(n, i)` at level `n + 1`.
    pub vplus_down: Vec<Vec<Vec<usize>>>,
    /// `vplus_up[n][i]`: `E_v⁺` neighbors of `(n, i)` at level `n - 1`.
    pub vplus_up: Vec<Vec<Vec<usize>>>,
    pub uncertain: BTreeSet<Edge>,
    /// Every oracle decision made while building, in canonical pair order.
    pub decisions: Vec<(VId, VId, Verdict)>,
}

impl AugmentedGraph {
    pub fn root(ifs: &IfsSpec) -> Self {
        AugmentedGraph {
            table: LevelTable::root(ifs),
            horizontal: vec![vec![Vec::new()]],
            vplus_down: vec![vec![Vec::new()]],
            vplus_up: vec![vec![Vec::new()]],
            uncertain: BTreeSet::new(),
            decisions: Vec::new(),
        }
    }

    pub fn build(oracle: &Oracle, depth: usize, mode: Mode) -> Result<Self, GraphError> {
        Self::build_capped(oracle, depth, mode, DEFAULT_LEVEL_CAP)
    }

    pub fn build_capped(oracle: &Oracle, depth: usize, mode: Mode, cap: usize) -> Result<Self, GraphError> {
        let mut g = Self::root(oracle.ifs());
        for _ in 0..depth {
            g.extend(oracle, mode, None, cap)?;
        }
        Ok(g)
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Adds the next level with its vertical, horizontal and `E_v⁺` edges.
    pub fn extend(
        &mut self,
        oracle: &Oracle,
        mode: Mode,
        keep: Option<&(dyn Fn(&Similitude) -> bool + Sync)>,
        cap: usize,
    ) -> Result<(), GraphError> {
        let ifs = oracle.ifs();
        self.table.push_level(ifs, keep, cap)?;
        let n = self.depth();
        let size = self.table.levels[n].len();
        let t = &self.table;

        // Horizontal candidates: children of the closed horizontal neighborhoods of the parents.
        let mut hpairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for v in 0..size {
            let mut seen = HashSet::new();
            for &p in t.parents_of((n, v)) {
                let around = std::iter::once(p).chain(self.horizontal[n - 1][p].iter().copied());
                for q in around {
                    if !seen.insert(q) {
                        continue;
                    }
                    for &w in t.children_of((n - 1, q)) {
                        if w > v {
                            hpairs.insert((v, w));
                        }
                    }
                }
            }
        }
        // E_v⁺ candidates for y: horizontal neighbors of its parents that are not parents.
        let mut ppairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for y in 0..size {
            let ps = t.parents_of((n, y));
            for &p in ps {
                for &x in &self.horizontal[n - 1][p] {
                    if ps.binary_search(&x).is_err() {
                        ppairs.insert((x, y));
                    }
                }
            }
        }

        let cur = &t.levels[n];
        let prev = &t.levels[n - 1];
        let hpairs: Vec<(usize, usize)> = hpairs.into_iter().collect();
        let ppairs: Vec<(usize, usize)> = ppairs.into_iter().collect();
        let hmaps: Vec<Similitude> = hpairs
            .par_iter()
            .map(|&(a, b)| neighbor_map(&cur[a].map, &cur[b].map))
            .chain(ppairs.par_iter().map(|&(x, y)| neighbor_map(&prev[x].map, &cur[y].map)))
            .collect();
        oracle.prime(hmaps);
        let hv: Vec<Verdict> = hpairs
            .par_iter()
            .map(|&(a, b)| oracle.intersects(&cur[a].map, &cur[b].map))
            .collect();
        let pv: Vec<Verdict> = ppairs
            .par_iter()
            .map(|&(x, y)| oracle.intersects(&prev[x].map, &cur[y].map))
            .collect();

        let mut undecided = Vec::new();
        let mut horiz = vec![Vec::new(); size];
        let mut down = vec![Vec::new(); prev.len()];
        let mut up = vec![Vec::new(); size];
        for (&(a, b), v) in hpairs.iter().zip(&hv) {
            let (va, vb) = ((n, a), (n, b));
            let admit = match v {
                Verdict::Intersects(_) => true,
                Verdict::Disjoint { .. } => false,
                Verdict::Unknown { .. } => {
                    undecided.push((va, vb, EdgeKind::Horizontal));
                    self.uncertain.insert(Edge::new(va, vb, EdgeKind::Horizontal));
                    true
                }
            };
            if admit {
                horiz[a].push(b);
                horiz[b].push(a);
            }
            self.decisions.push((va, vb, v.clone()));
        }
        for (&(x, y), v) in ppairs.iter().zip(&pv) {
            let (vx, vy) = ((n - 1, x), (n, y));
            let admit = match v {
                Verdict::Intersects(_) => true,
                Verdict::Disjoint { .. } => false,
                Verdict::Unknown { .. } => {
                    undecided.push((vx, vy, EdgeKind::VerticalPlus));
                    self.uncertain.insert(Edge::new(vx, vy, EdgeKind::VerticalPlus));
                    true
                }
            };
            if admit {
                down[x].push(y);
                up[y].push(x);
            }
            self.decisions.push((vx, vy, v.clone()));
        }
        if mode == Mode::Strict && !undecided.is_empty() {
            let (a, b, _) = undecided[0];
            let first = format!("{} ~ {}", t.label(ifs, a), t.label(ifs, b));
            return Err(GraphError::Undecided {
                level: n,
                pairs: undecided,
                first,
            });
        }
        for l in horiz.iter_mut().chain(down.iter_mut()).chain(up.iter_mut()) {
            l.sort_unstable();
        }
        self.horizontal.push(horiz);
        self.vplus_down[n - 1] = down;
        self.vplus_down.push(vec![Vec::new(); size]);
        self.vplus_up.push(up);
        Ok(())
    }

    /// All edges in canonical orientation and order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (n, level) in self.table.levels.iter().enumerate() {
            for i in 0..level.len() {
                for &c in self.table.children_of((n, i)) {
                    out.push(Edge::new((n, i), (n + 1, c), EdgeKind::Vertical));
                }
                for &j in &self.horizontal[n][i] {
                    if j > i {
                        out.push(Edge::new((n, i), (n, j), EdgeKind::Horizontal));
                    }
                }
                for &c in &self.vplus_down[n][i] {
                    out.push(Edge::new((n, i), (n + 1, c), EdgeKind::VerticalPlus));
                }
            }
        }
        out.sort();
        out
    }

    pub fn edges_in(&self, view: View) -> Vec<Edge> {
        self.edges().into_iter().filter(|e| view.has(e.kind)).collect()
    }

    /// Neighbors of `v` in `view`, sorted by (level, index).
    pub fn neighbors(&self, view: View, v: VId) -> Vec<VId> {
        let (n, i) = v;
        let mut out: Vec<VId> = self.table.parents_of(v).iter().map(|&p| (n - 1, p)).collect();
        match view {
            View::E => out.extend(self.horizontal[n][i].iter().map(|&j| (n, j))),
            View::Diamond => {
                if n > 0 {
                    out.extend(self.vplus_up[n][i].iter().map(|&p| (n - 1, p)));
                }
                out.extend(self.vplus_down[n][i].iter().map(|&c| (n + 1, c)));
            }
        }
        out.extend(self.table.children_of(v).iter().map(|&c| (n + 1, c)));
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Compact adjacency with global ids `offset[level] + index`.
    pub fn adjacency(&self, view: View) -> Adjacency {
        let mut offsets = Vec::with_capacity(self.table.levels.len() + 1);
        let mut acc = 0;
        for l in &self.table.levels {
            offsets.push(acc);
            acc += l.len();
        }
        offsets.push(acc);
        let mut level = vec![0u32; acc];
        for (n, w) in offsets.windows(2).enumerate() {
            for x in &mut level[w[0]..w[1]] {
                *x = n as u32;
            }
        }
        let nbrs: Vec<Vec<u32>> = (0..acc)
            .into_par_iter()
            .map(|id| {
                let n = level[id] as usize;
                let v = (n, id - offsets[n]);
                self.neighbors(view, v)
                    .into_iter()
                    .map(|(m, j)| (offsets[m] + j) as u32)
                    .collect()
            })
            .collect();
        Adjacency {
            view,
            offsets,
            level,
            nbrs,
        }
    }

    pub fn label(&self, ifs: &IfsSpec, v: VId) -> String {
        self.table.label(ifs, v)
    }

    /// Position of the class labelled `label` (e.g. `"[02,10]"`).
    pub fn find_label(&self, ifs: &IfsSpec, label: &str) -> Option<VId> {
        self.table
            .vertices()
            .find(|&v| self.table.label(ifs, v) == label)
    }
}

/// Read-only adjacency lists over global vertex ids.
#[derive(Clone, Debug)]
pub struct Adjacency {
    pub view: View,
    /// `offsets[n]` is the id of `(n, 0)`; the last entry is the vertex count.
    pub offsets: Vec<usize>,
    pub level: Vec<u32>,
    pub nbrs: Vec<Vec<u32>>,
}

pub const UNREACHED: u32 = u32::MAX;

impl Adjacency {
    pub fn len(&self) -> usize {
        self.nbrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nbrs.is_empty()
    }

    pub fn id(&self, v: VId) -> usize {
        self.offsets[v.0] + v.1
    }

    pub fn vid(&self, id: usize) -> VId {
        let n = self.level[id] as usize;
        (n, id - self.offsets[n])
    }

    pub fn level_range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    pub fn depth(&self) -> usize {
        self.offsets.len() - 2
    }

    /// Breadth-first distances from `src`.
    pub fn bfs(&self, src: usize) -> Vec<u32> {
        self.bfs_multi(&[src])
    }

    pub fn bfs_multi(&self, srcs: &[usize]) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.len()];
        let mut queue = std::collections::VecDeque::new();
        for &s in srcs {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u] + 1;
            for &w in &self.nbrs[u] {
                let w = w as usize;
                if dist[w] == UNREACHED {
                    dist[w] = du;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Distances using only edges inside level `n`, from sources at level `n`.
    pub fn bfs_level(&self, n: usize, srcs: &[usize]) -> Vec<u32> {
        let r = self.level_range(n);
        let mut dist = vec![UNREACHED; r.len()];
        let mut queue = std::collections::VecDeque::new();
        for &s in srcs {
            if dist[s - r.start] != 0 {
                dist[s - r.start] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u - r.start] + 1;
            for &w in &self.nbrs[u] {
                let w = w as usize;
                if r.contains(&w) && dist[w - r.start] == UNREACHED {
                    dist[w - r.start] = du;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// All-pairs distance matrix, computed in parallel by source.
    pub fn all_pairs(&self) -> Vec<Vec<u32>> {
        (0..self.len()).into_par_iter().map(|s| self.bfs(s)).collect()
    }
}

/// Horizontal pairs at level `n` whose parent sets are disjoint.
pub fn conjugate_pairs(g: &AugmentedGraph, n: usize) -> Vec<(VId, VId)> {
    if n == 0 || n > g.depth() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, nb) in g.horizontal[n].iter().enumerate() {
        let pi = g.table.parents_of((n, i));
        for &j in nb {
            if j <= i {
                continue;
            }
            let pj = g.table.parents_of((n, j));
            if pi.iter().all(|p| pj.binary_search(p).is_err()) {
                out.push(((n, i), (n, j)));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct GammaRow {
    pub level: usize,
    pub classes: usize,
    pub max_cover: usize,
    /// `max_cover` maximized over this and all shallower levels.
    pub running_max: usize,
}

/// For each level, the largest number of distinct level-`n` cylinder balls
/// containing one probe point (ball centers and midpoints of overlapping
/// pairs). A lower bound for the separation constant with `D` the invariant ball.
pub fn wsc_gamma_estimate(table: &LevelTable, ball: &Ball) -> Vec<GammaRow> {
    let mut rows = Vec::new();
    let mut running = 0;
    for (n, level) in table.levels.iter().enumerate() {
        let balls: Vec<Ball> = level.iter().map(|c| ball.image(&c.map)).collect();
        let mut order: Vec<usize> = (0..balls.len()).collect();
        order.sort_by(|&a, &b| balls[a].center[0].cmp(&balls[b].center[0]));
        let max_r = balls.iter().map(|b| b.radius.clone()).max().unwrap_or_else(|| qi(0));
        let reach = qi(2) * &max_r;

        // Overlapping pairs by a sweep on the first coordinate.
        let mut probes: Vec<Vec<Q>> = balls.iter().map(|b| b.center.clone()).collect();
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                if &balls[b].center[0] - &balls[a].center[0] > reach {
                    break;
                }
                if !balls[a].separated(&balls[b]) {
                    let mid = balls[a]
                        .center
                        .iter()
                        .zip(&balls[b].center)
                        .map(|(x, y)| (x + y) / qi(2))
                        .collect();
                    probes.push(mid);
                }
            }
        }
        let max_cover = probes
            .par_iter()
            .map(|p| {
                let lo = &p[0] - &max_r;
                let start = order.partition_point(|&i| balls[i].center[0] < lo);
                order[start..]
                    .iter()
                    .take_while(|&&i| balls[i].center[0] <= &p[0] + &max_r)
                    .filter(|&&i| balls[i].contains_point(p))
                    .count()
            })
            .max()
            .unwrap_or(0);
        running = running.max(max_cover);
        rows.push(GammaRow {
            level: n,
            classes: level.len(),
            max_cover,
            running_max: running,
        });
    }
    rows
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DegreeRow {
    pub level: usize,
    pub vertices: usize,
    pub max_vertical: usize,
    pub min_vertical: usize,
    pub max_horizontal: usize,
    pub min_horizontal: usize,
    pub max_vertical_plus: usize,
    pub min_vertical_plus: usize,
    pub max_total_e: usize,
    pub max_total_diamond: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DegreeReport {
    pub rows: Vec<DegreeRow>,
    /// Set when the maximal `E` degree increased over each of the last three
    /// complete levels: a hint that the graph may not be locally finite.
    pub growth_warning: bool,
}

/// Degree statistics per level and edge kind. The deepest level is left out
/// of the growth trend since its children are not built.
pub fn degree_report(g: &AugmentedGraph) -> DegreeReport {
    let mut rows = Vec::new();
    for (n, level) in g.table.levels.iter().enumerate() {
        let mut r = DegreeRow {
            level: n,
            vertices: level.len(),
            max_vertical: 0,
            min_vertical: usize::MAX,
            max_horizontal: 0,
            min_horizontal: usize::MAX,
            max_vertical_plus: 0,
            min_vertical_plus: usize::MAX,
            max_total_e: 0,
            max_total_diamond: 0,
        };
        for i in 0..level.len() {
            let v = (n, i);
            let vert = g.table.parents_of(v).len() + g.table.children_of(v).len();
            let h = g.horizontal[n][i].len();
            let vp = g.vplus_down[n][i].len() + if n > 0 { g.vplus_up[n][i].len() } else { 0 };
            r.max_vertical = r.max_vertical.max(vert);
            r.min_vertical = r.min_vertical.min(vert);
            r.max_horizontal = r.max_horizontal.max(h);
            r.min_horizontal = r.min_horizontal.min(h);
            r.max_vertical_plus = r.max_vertical_plus.max(vp);
            r.min_vertical_plus = r.min_vertical_plus.min(vp);
            r.max_total_e = r.max_total_e.max(vert + h);
            r.max_total_diamond = r.max_total_diamond.max(vert + vp);
        }
        if level.is_empty() {
            r.min_vertical = 0;
            r.min_horizontal = 0;
            r.min_vertical_plus = 0;
        }
        rows.push(r);
    }
    let complete: Vec<usize> = rows
        .iter()
        .take(rows.len().saturating_sub(1))
        .map(|r| r.max_total_e)
        .collect();
    let growth_warning = complete.len() >= 4 && complete[complete.len() - 4..].windows(2).all(|w| w[1] > w[0]);
    DegreeReport { rows, growth_warning }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT rendering, one rank per level; edge style by kind.
pub fn to_dot(g: &AugmentedGraph, ifs: &IfsSpec, view: Option<View>, highlight: &[VId]) -> String {
    let mut s = String::from("graph X {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n");
    for (n, level) in g.table.levels.iter().enumerate() {
        let _ = write!(s, "  {{ rank=same;");
        for i in 0..level.len() {
            let _ = write!(s, " \"{n}_{i}\";");
        }
        s.push_str(" }\n");
        for i in 0..level.len() {
            let mark = if highlight.contains(&(n, i)) { ", style=filled, fillcolor=gold" } else { "" };
            let _ = writeln!(
                s,
                "  \"{n}_{i}\" [label=\"{}\"{mark}];",
                dot_escape(&g.label(ifs, (n, i)))
            );
        }
    }
    let on_path: HashSet<(VId, VId)> = highlight
        .windows(2)
        .flat_map(|w| [(w[0], w[1]), (w[1], w[0])])
        .collect();
    for e in g.edges() {
        if let Some(v) = view {
            if !v.has(e.kind) {
                continue;
            }
        }
        let style = match e.kind {
            EdgeKind::Vertical => "color=black",
            EdgeKind::Horizontal => "color=blue, constraint=false",
            EdgeKind::VerticalPlus => "color=red, style=dashed",
        };
        let extra = if g.uncertain.contains(&e) { ", label=\"?\"" } else { "" };
        let bold = if on_path.contains(&(e.a, e.b)) { ", penwidth=3" } else { "" };
        let _ = writeln!(
            s,
            "  \"{}_{}\" -- \"{}_{}\" [{style}{extra}{bold}];",
            e.a.0, e.a.1, e.b.0, e.b.1
        );
    }
    s.push_str("}\n");
    s
}

/// `level_x,key_x,level_y,key_y,kind,certainty`; keys are member labels.
pub fn edges_csv(g: &AugmentedGraph, ifs: &IfsSpec, view: Option<View>) -> String {
    let mut s = String::from("level_x,key_x,level_y,key_y,kind,certainty\n");
    for e in g.edges() {
        if let Some(v) = view {
            if !v.has(e.kind) {
                continue;
            }
        }
        let cert = if g.uncertain.contains(&e) { "uncertain" } else { "certain" };
        let _ = writeln!(
            s,
            "{},\"{}\",{},\"{}\",{},{}",
            e.a.0,
            g.label(ifs, e.a),
            e.b.0,
            g.label(ifs, e.b),
            e.kind.tag(),
            cert
        );
    }
    s
}

/// `level,index,label,ratio,translation` per vertex.
pub fn vertices_csv(g: &AugmentedGraph, ifs: &IfsSpec) -> String {
    let mut s = String::from("level,index,label,ratio,translation\n");
    for v in g.table.vertices() {
        let c = g.table.class(v);
        let _ = writeln!(
            s,
            "{},{},\"{}\",{},\"{}\"",
            v.0,
            v.1,
            c.label(ifs),
            fmt_q(c.map.ratio()),
            fmt_vec(c.map.translation())
        );
    }
    s
}

pub fn summary_json(g: &AugmentedGraph, ifs: &IfsSpec) -> serde_json::Value {
    let deg = degree_report(g);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in g.edges() {
        *counts.entry(e.kind.tag()).or_default() += 1;
    }
    let levels: Vec<serde_json::Value> = g
        .table
        .levels
        .iter()
        .enumerate()
        .map(|(n, l)| {
            json!({
                "level": n,
                "classes": l.len(),
                "labels": l.iter().map(|c| c.label(ifs)).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "depth": g.depth(),
        "vertices": g.len(),
        "edges": counts,
        "uncertain_edges": g.uncertain.len(),
        "levels": levels,
        "degrees": deg,
    })
}

/// Squared distance between cylinder-ball centers, used for sweeps.
pub fn center_dist2(g: &AugmentedGraph, ball: &Ball, a: VId, b: VId) -> Q {
    dist2(&ball.image(&g.table.class(a).map).center, &ball.image(&g.table.class(b).map).center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersect::Caps;
    use crate::presets;

    fn ex1(depth: usize) -> (IfsSpec, AugmentedGraph) {
        let ifs = presets::interval3();
        let o = Oracle::new(&ifs, Caps::default());
        let g = AugmentedGraph::build(&o, depth, Mode::Strict).unwrap();
        (ifs, g)
    }

    #[test]
    fn example1_horizontal_degrees_level2() {
        let (ifs, g) = ex1(2);
        let degs: Vec<(String, usize)> = (0..7)
            .map(|i| (g.label(&ifs, (2, i)), g.horizontal[2][i].len()))
            .collect();
        let want = [("[00]", 2), ("[01]", 3), ("[02,10]", 4), ("[11]", 4), ("[12,20]", 4), ("[21]", 3), ("[22]", 2)];
        for ((l, d), (wl, wd)) in degs.iter().zip(want) {
            assert_eq!((l.as_str(), *d), (wl, wd));
        }
    }

    #[test]
    fn example1_vertex1_diamond_degree() {
        let (ifs, g) = ex1(2);
        let v = g.find_label(&ifs, "[1]").unwrap();
        let n = g.neighbors(View::Diamond, v);
        assert_eq!(n.len(), 8);
        let plus: Vec<String> = g.vplus_down[1][v.1].iter().map(|&c| g.label(&ifs, (2, c))).collect();
        assert_eq!(plus, ["[00]", "[01]", "[21]", "[22]"]);
    }

    #[test]
    fn depth_zero() {
        let (_, g) = ex1(0);
        assert_eq!(g.len(), 1);
        assert!(g.edges().is_empty());
        assert_eq!(wsc_gamma_estimate(&g.table, &presets::interval3().invariant_ball())[0].max_cover, 1);
    }

    #[test]
    fn example1_conjugates() {
        let (ifs, g) = ex1(2);
        let pairs: Vec<(String, String)> = conjugate_pairs(&g, 2)
            .into_iter()
            .map(|(a, b)| (g.label(&ifs, a), g.label(&ifs, b)))
            .collect();
        assert!(pairs.contains(&("[01]".into(), "[11]".into())));
        assert!(!pairs.contains(&("[01]".into(), "[02,10]".into())));
        assert!(conjugate_pairs(&g, 0).is_empty());
    }

    #[test]
    fn example1_gamma() {
        let (_, g) = ex1(6);
        let rows = wsc_gamma_estimate(&g.table, &presets::interval3().invariant_ball());
        for r in &rows[1..] {
            assert_eq!(r.max_cover, 3, "level {}", r.level);
        }
    }

    #[test]
    fn example1_degree_report() {
        let (_, g) = ex1(5);
        let rep = degree_report(&g);
        for r in &rep.rows[2..] {
            assert_eq!(r.max_horizontal, 4);
        }
        assert_eq!(rep.rows[1].max_total_diamond, 8);
        assert_eq!(rep.rows[0].max_vertical, 3);
        assert!(!rep.growth_warning);
    }

    #[test]
    fn views_and_exports() {
        let (ifs, g) = ex1(3);
        assert!(g.edges_in(View::E).iter().all(|e| e.kind != EdgeKind::VerticalPlus));
        assert!(g.edges_in(View::Diamond).iter().all(|e| e.kind != EdgeKind::Horizontal));
        let dot = to_dot(&g, &ifs, None, &[]);
        assert!(dot.starts_with("graph X"));
        assert!(dot.contains("[02,10]"));
        let csv = edges_csv(&g, &ifs, Some(View::E));
        assert!(csv.lines().count() > 1);
        assert!(!csv.contains(",v+,"));
        let js = summary_json(&g, &ifs);
        assert_eq!(js["levels"][2]["classes"], 7);
    }

    #[test]
    fn structural_invariants() {
        for ifs in [presets::interval3(), presets::gasket3(), presets::mixed_ratio(), presets::interval2_osc()] {
            let o = Oracle::new(&ifs, Caps::default());
            let g = AugmentedGraph::build(&o, 4, Mode::Strict).unwrap();
            let ball = ifs.invariant_ball();
            for v in g.table.vertices() {
                if v.0 > 0 {
                    assert!(!g.table.parents_of(v).is_empty());
                }
                for w in g.neighbors(View::E, v) {
                    assert!(g.neighbors(View::E, w).contains(&v));
                    assert_ne!(w, v);
                }
                for w in g.neighbors(View::Diamond, v) {
                    assert!(g.neighbors(View::Diamond, w).contains(&v));
                }
                for &c in g.table.children_of(v) {
                    let pb = ball.image(&g.table.class(v).map);
                    let cb = ball.image(&g.table.class((v.0 + 1, c)).map);
                    assert!(pb.contains_ball(&cb));
                }
            }
            let ev: HashSet<(VId, VId)> = g
                .edges()
                .into_iter()
                .filter(|e| e.kind == EdgeKind::Vertical)
                .map(|e| (e.a, e.b))
                .collect();
            for e in g.edges() {
                if e.kind == EdgeKind::VerticalPlus {
                    assert!(!ev.contains(&(e.a, e.b)));
                }
            }
            // Two parents of one vertex are horizontal neighbors.
            for v in g.table.vertices() {
                let ps = g.table.parents_of(v);
                for &a in ps {
                    for &b in ps {
                        if a != b {
                            assert!(g.horizontal[v.0 - 1][a].contains(&b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn strict_mode_aborts_on_unknown() {
        let ifs = presets::interval3();
        let caps = Caps {
            refine_depth: 0,
            witness_word_len: 0,
            witness_period_len: 0,
            ..Caps::default()
        };
        let o = Oracle::new(&ifs, caps);
        let err = AugmentedGraph::build(&o, 2, Mode::Strict).unwrap_err();
        assert!(matches!(err, GraphError::Undecided { level: 1, .. }));
        let g = AugmentedGraph::build(&Oracle::new(&ifs, caps), 2, Mode::Optimistic).unwrap();
        assert!(!g.uncertain.is_empty());
    }
}
