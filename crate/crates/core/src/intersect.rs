//! Certified three-valued decision of `S_x(K) ∩ S_y(K) ≠ ∅`.
//!
//! Everything reduces to the neighbor map `h = S_x^{-1} S_y`: the cylinders
//! meet iff `K ∩ h(K) ≠ ∅`. The search explores relative maps
//! `g = S_a^{-1} h S_b` depth first, extending the side with the larger
//! piece (both sides when `g` is an isometry) and pruning pairs whose
//! enclosing balls are separated. Reaching the identity yields a shared
//! sub-cylinder; returning to a node on the current path yields a periodic
//! common point; exhausting the search proves disjointness.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::rational::{dist2, fmt_q, sqrt_lower, sqrt_upper, to_f64, Q};
use crate::similitude::{Ball, IfsSpec, Point, Similitude};
use crate::symbolic::{fmt_word, Word};

/// Environment variable overriding the neighbor-cache capacity.
pub const CACHE_CAP_ENV: &str = "IFSGRAPH_CACHE_CAP";
pub const DEFAULT_CACHE_CAP: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Caps {
    /// Maximal depth of the refinement search.
    pub refine_depth: usize,
    /// Maximal prefix length in the fallback witness search.
    pub witness_word_len: usize,
    /// Maximal period length in the fallback witness search.
    pub witness_period_len: usize,
    /// Maximal number of distinct relative maps visited per decision.
    pub node_cap: usize,
    /// Maximal number of candidate points per side in the fallback search.
    pub point_cap: usize,
    /// Maximal vertex count for all-pairs distance tables.
    pub metric_vertices: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            refine_depth: 12,
            witness_word_len: 6,
            witness_period_len: 3,
            node_cap: 200_000,
            point_cap: 200_000,
            metric_vertices: 8000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Witness {
    /// `S_x S_u = S_y S_v`.
    SharedMap { u: Word, v: Word },
    /// `S_x S_u (fix S_w) = S_y S_v (fix S_w2)`; `w` and `w2` are non-empty.
    SharedPoint { u: Word, w: Word, v: Word, w2: Word },
}

impl Witness {
    pub fn swapped(&self) -> Witness {
        match self {
            Witness::SharedMap { u, v } => Witness::SharedMap {
                u: v.clone(),
                v: u.clone(),
            },
            Witness::SharedPoint { u, w, v, w2 } => Witness::SharedPoint {
                u: v.clone(),
                w: w2.clone(),
                v: u.clone(),
                w2: w.clone(),
            },
        }
    }

    pub fn describe(&self, base: usize, n: usize) -> String {
        let f = |w: &Word| fmt_word(w, base, n);
        match self {
            Witness::SharedMap { u, v } => format!("map x.{} = y.{}", f(u), f(v)),
            Witness::SharedPoint { u, w, v, w2 } => {
                format!("point x.{}({}) = y.{}({})", f(u), f(w), f(v), f(w2))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Intersects(Witness),
    /// All descendant ball pairs are separated after `depth` refinements.
    Disjoint { depth: usize },
    /// A cap was exhausted at the given search depth.
    Unknown { cap: usize },
}

impl Verdict {
    pub fn intersects(&self) -> bool {
        matches!(self, Verdict::Intersects(_))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Intersects(_) => "intersects",
            Verdict::Disjoint { .. } => "disjoint",
            Verdict::Unknown { .. } => "unknown",
        }
    }

    fn swapped(&self) -> Verdict {
        match self {
            Verdict::Intersects(w) => Verdict::Intersects(w.swapped()),
            v => v.clone(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Intersects(_) => write!(f, "intersects"),
            Verdict::Disjoint { depth } => write!(f, "disjoint@{depth}"),
            Verdict::Unknown { cap } => write!(f, "unknown@{cap}"),
        }
    }
}

/// `S_w(B)`.
pub fn cylinder_ball(ifs: &IfsSpec, ball: &Ball, w: &[u8]) -> Ball {
    ball.image(&ifs.word_map(w))
}

/// `S_x^{-1} S_y`.
pub fn neighbor_map(sx: &Similitude, sy: &Similitude) -> Similitude {
    sx.inverse().then_inner(sy)
}

/// Orientation-free cache key: the smaller of `h` and `h^{-1}`, plus whether
/// `h` was inverted.
pub fn neighbor_key(h: &Similitude) -> (Similitude, bool) {
    let inv = h.inverse();
    if inv < *h {
        (inv, true)
    } else {
        (h.clone(), false)
    }
}

/// `B` and `g(B)` are disjoint.
fn rel_separated(ball: &Ball, g: &Similitude) -> bool {
    let gc = g.apply(&ball.center);
    let r = &ball.radius * (Q::one() + g.ratio());
    dist2(&gc, &ball.center) > &r * &r
}

type Edge = (Option<u8>, Option<u8>);

/// Floating-point copy of a similitude, used only to skip children that are
/// separated by a wide margin before any exact arithmetic.
struct FMap {
    ratio: f64,
    orth: Vec<f64>,
    trans: Vec<f64>,
}

impl FMap {
    fn of(s: &Similitude) -> Self {
        FMap {
            ratio: to_f64(s.ratio()),
            orth: s.orthogonal().iter().map(to_f64).collect(),
            trans: s.translation().iter().map(to_f64).collect(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| self.ratio * (0..d).map(|k| self.orth[i * d + k] * x[k]).sum::<f64>() + self.trans[i])
            .collect()
    }
}

struct Floats {
    center: Vec<f64>,
    radius: f64,
    inv: Vec<FMap>,
    /// `S_j(c)` for each map.
    fwd_center: Vec<Vec<f64>>,
    fwd_ratio: Vec<f64>,
}

impl Floats {
    fn new(ifs: &IfsSpec, ball: &Ball, inv: &[Similitude]) -> Self {
        let center: Vec<f64> = ball.center.iter().map(to_f64).collect();
        Floats {
            radius: to_f64(&ball.radius),
            inv: inv.iter().map(FMap::of).collect(),
            fwd_center: ifs.maps().iter().map(|m| FMap::of(m).apply(&center)).collect(),
            fwd_ratio: ifs.maps().iter().map(|m| to_f64(m.ratio())).collect(),
            center,
        }
    }

    /// True only when the ball test separates the child by a margin far
    /// beyond rounding error.
    fn clearly_separated(&self, image: &[f64], ratio: f64) -> bool {
        let d2: f64 = image.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let bound = self.radius * (1.0 + ratio);
        let scale: f64 = 1.0 + bound + image.iter().chain(&self.center).map(|v| v.abs()).sum::<f64>();
        d2.sqrt() > bound + 1e-9 * scale
    }
}

/// Balanced one-step refinements of `K ∩ g(K)`.
#[cfg(test)]
fn rel_children(ifs: &IfsSpec, inv: &[Similitude], g: &Similitude) -> Vec<(Similitude, Edge)> {
    let n = ifs.n_maps();
    let one = Q::one();
    let mut out = Vec::new();
    if g.ratio() < &one {
        for (i, si) in inv.iter().enumerate() {
            out.push((si.then_inner(g), (Some(i as u8), None)));
        }
    } else if g.ratio() > &one {
        for j in 0..n {
            out.push((g.then_inner(ifs.map(j)), (None, Some(j as u8))));
        }
    } else {
        for (i, si) in inv.iter().enumerate() {
            let left = si.then_inner(g);
            for j in 0..n {
                out.push((left.then_inner(ifs.map(j)), (Some(i as u8), Some(j as u8))));
            }
        }
    }
    out
}

enum Node {
    OnStack(usize),
    Done(usize),
    Capped,
}

enum Stop {
    Found(Witness),
    Cap(usize),
}

struct Search<'a> {
    ifs: &'a IfsSpec,
    ball: &'a Ball,
    inv: &'a [Similitude],
    caps: Caps,
    known: &'a dyn Fn(&Similitude) -> Option<Verdict>,
    fl: Floats,
    nodes: HashMap<Similitude, Node>,
    path: Vec<Edge>,
    stack_maps: Vec<Similitude>,
    learned: Vec<(Similitude, Verdict)>,
}

fn prepend(edges: &[Edge], w: &Witness) -> Witness {
    let (l, r) = (collect(edges, true), collect(edges, false));
    let cat = |a: &Word, b: &Word| -> Word { a.iter().chain(b).copied().collect() };
    match w {
        Witness::SharedMap { u, v } => Witness::SharedMap {
            u: cat(&l, u),
            v: cat(&r, v),
        },
        Witness::SharedPoint { u, w, v, w2 } => Witness::SharedPoint {
            u: cat(&l, u),
            w: w.clone(),
            v: cat(&r, v),
            w2: w2.clone(),
        },
    }
}

struct Frame {
    g: Similitude,
    kids: std::vec::IntoIter<(Similitude, Edge)>,
    worst: usize,
    capped: bool,
}

fn collect(edges: &[Edge], left: bool) -> Word {
    edges
        .iter()
        .filter_map(|e| if left { e.0 } else { e.1 })
        .collect()
}

impl Search<'_> {
    /// `rel_children` minus the children the float prefilter rules out.
    fn candidates(&self, g: &Similitude) -> Vec<(Similitude, Edge)> {
        let fl = &self.fl;
        let gf = FMap::of(g);
        let n = self.ifs.n_maps();
        let one = Q::one();
        let mut out = Vec::new();
        if g.ratio() < &one {
            let gc = gf.apply(&fl.center);
            for (i, si) in self.inv.iter().enumerate() {
                if !fl.clearly_separated(&fl.inv[i].apply(&gc), fl.inv[i].ratio * gf.ratio) {
                    out.push((si.then_inner(g), (Some(i as u8), None)));
                }
            }
        } else if g.ratio() > &one {
            for j in 0..n {
                if !fl.clearly_separated(&gf.apply(&fl.fwd_center[j]), gf.ratio * fl.fwd_ratio[j]) {
                    out.push((g.then_inner(self.ifs.map(j)), (None, Some(j as u8))));
                }
            }
        } else {
            for (i, si) in self.inv.iter().enumerate() {
                let mut left = None;
                for j in 0..n {
                    let img = fl.inv[i].apply(&gf.apply(&fl.fwd_center[j]));
                    if !fl.clearly_separated(&img, fl.inv[i].ratio * gf.ratio * fl.fwd_ratio[j]) {
                        let l = left.get_or_insert_with(|| si.then_inner(g));
                        out.push((l.then_inner(self.ifs.map(j)), (Some(i as u8), Some(j as u8))));
                    }
                }
            }
        }
        out
    }

    /// Unseparated refinements, closest to the identity first.
    fn frame(&self, g: Similitude) -> Frame {
        let c = &self.ball.center;
        let mut kids: Vec<(Q, Similitude, Edge)> = self
            .candidates(&g)
            .into_iter()
            .filter(|(k, _)| !rel_separated(self.ball, k))
            .map(|(k, e)| (dist2(&k.apply(c), c), k, e))
            .collect();
        kids.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
        let kids: Vec<(Similitude, Edge)> = kids.into_iter().map(|(_, k, e)| (k, e)).collect();
        Frame {
            g,
            kids: kids.into_iter(),
            worst: 0,
            capped: false,
        }
    }

    /// Witnesses for every map on the stack once the top frame reaches a
    /// node with witness `wk` through edge `e`; `cycle_at` is the stack index
    /// of that node when it is on the stack.
    fn found(&mut self, e: Edge, wk: Witness, cycle_at: Option<usize>) -> Witness {
        let mut tail = self.path.clone();
        tail.push(e);
        for (j, g) in self.stack_maps.iter().enumerate() {
            let w = match cycle_at {
                Some(idx) if j <= idx => prepend(&self.path[j..idx], &wk),
                _ => prepend(&tail[j..], &wk),
            };
            self.learned.push((g.clone(), Verdict::Intersects(w)));
        }
        match &self.learned[self.learned.len() - self.stack_maps.len()].1 {
            Verdict::Intersects(w) => w.clone(),
            _ => unreachable!(),
        }
    }

    /// Depth-first search for a cycle. Branches reaching the refinement cap
    /// stay unresolved while their siblings are still explored.
    fn run(&mut self, h: &Similitude) -> Result<usize, Stop> {
        if h.is_identity() {
            return Err(Stop::Found(Witness::SharedMap { u: vec![], v: vec![] }));
        }
        if self.caps.refine_depth == 0 {
            return Err(Stop::Cap(0));
        }
        self.nodes.insert(h.clone(), Node::OnStack(0));
        self.stack_maps.push(h.clone());
        let mut stack = vec![self.frame(h.clone())];
        loop {
            let top = stack.last_mut().unwrap();
            let Some((k, e)) = top.kids.next() else {
                let f = stack.pop().unwrap();
                self.stack_maps.pop();
                let state = if f.capped { Node::Capped } else { Node::Done(f.worst + 1) };
                if !f.capped {
                    self.learned.push((f.g.clone(), Verdict::Disjoint { depth: f.worst + 1 }));
                }
                self.nodes.insert(f.g, state);
                match stack.last_mut() {
                    Some(parent) => {
                        self.path.pop();
                        if f.capped {
                            parent.capped = true;
                        } else {
                            parent.worst = parent.worst.max(f.worst + 1);
                        }
                    }
                    None if f.capped => return Err(Stop::Cap(self.caps.refine_depth)),
                    None => return Ok(f.worst + 1),
                }
                continue;
            };
            match self.nodes.get(&k) {
                Some(Node::OnStack(idx)) => {
                    let idx = *idx;
                    let mut cyc: Vec<Edge> = self.path[idx..].to_vec();
                    cyc.push(e);
                    let wk = Witness::SharedPoint {
                        u: vec![],
                        w: collect(&cyc, true),
                        v: vec![],
                        w2: collect(&cyc, false),
                    };
                    return Err(Stop::Found(self.found(e, wk, Some(idx))));
                }
                Some(Node::Done(s)) => top.worst = top.worst.max(*s),
                Some(Node::Capped) => top.capped = true,
                None => {
                    if k.is_identity() {
                        let wk = Witness::SharedMap { u: vec![], v: vec![] };
                        return Err(Stop::Found(self.found(e, wk, None)));
                    }
                    match (self.known)(&k) {
                        Some(Verdict::Intersects(wk)) => return Err(Stop::Found(self.found(e, wk, None))),
                        Some(Verdict::Disjoint { depth }) => {
                            top.worst = top.worst.max(depth);
                            self.nodes.insert(k, Node::Done(depth));
                            continue;
                        }
                        _ => {}
                    }
                    if self.nodes.len() >= self.caps.node_cap {
                        return Err(Stop::Cap(self.path.len() + 1));
                    }
                    if self.path.len() + 1 >= self.caps.refine_depth {
                        top.capped = true;
                        continue;
                    }
                    self.path.push(e);
                    self.nodes.insert(k.clone(), Node::OnStack(self.path.len()));
                    self.stack_maps.push(k.clone());
                    let f = self.frame(k);
                    stack.push(f);
                }
            }
        }
    }
}

/// Decides `K ∩ h(K) ≠ ∅` without caching.
pub fn decide_uncached(ifs: &IfsSpec, ball: &Ball, inv: &[Similitude], caps: &Caps, h: &Similitude) -> Verdict {
    decide_with(ifs, ball, inv, caps, h, &|_| None).0
}

/// Decides `K ∩ h(K) ≠ ∅`, consulting `known` for relative maps met during the
/// search. Also returns the verdicts established for intermediate maps.
pub fn decide_with(
    ifs: &IfsSpec,
    ball: &Ball,
    inv: &[Similitude],
    caps: &Caps,
    h: &Similitude,
    known: &dyn Fn(&Similitude) -> Option<Verdict>,
) -> (Verdict, Vec<(Similitude, Verdict)>) {
    if rel_separated(ball, h) {
        return (Verdict::Disjoint { depth: 0 }, Vec::new());
    }
    let mut s = Search {
        ifs,
        ball,
        inv,
        caps: *caps,
        known,
        fl: Floats::new(ifs, ball, inv),
        nodes: HashMap::new(),
        path: Vec::new(),
        stack_maps: Vec::new(),
        learned: Vec::new(),
    };
    let v = match s.run(h) {
        Ok(d) => Verdict::Disjoint { depth: d },
        Err(Stop::Found(w)) => Verdict::Intersects(w),
        Err(Stop::Cap(depth)) => match fallback_witness(ifs, caps, h) {
            Some(w) => Verdict::Intersects(w),
            None => Verdict::Unknown { cap: depth },
        },
    };
    (v, s.learned)
}

/// Words of length `lo..=hi` in shortlex order.
fn words_up_to(n: usize, lo: usize, hi: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut layer: Vec<Word> = vec![Vec::new()];
    for len in 0..=hi {
        if len >= lo {
            out.extend(layer.iter().cloned());
        }
        if len == hi {
            break;
        }
        layer = layer
            .iter()
            .flat_map(|w| {
                (0..n as u8).map(move |s| {
                    let mut w2 = w.clone();
                    w2.push(s);
                    w2
                })
            })
            .collect();
    }
    out
}

/// Bounded search for `S_u = h S_v` or `S_u(fix S_w) = h S_v(fix S_w2)`.
fn fallback_witness(ifs: &IfsSpec, caps: &Caps, h: &Similitude) -> Option<Witness> {
    let n = ifs.n_maps();
    let prefixes = words_up_to(n, 0, caps.witness_word_len);
    let periods = words_up_to(n, 1, caps.witness_period_len);
    let prefix_maps: Vec<Similitude> = prefixes.iter().map(|u| ifs.word_map(u)).collect();

    let mut left_maps: HashMap<&Similitude, usize> = HashMap::new();
    for (i, m) in prefix_maps.iter().enumerate() {
        left_maps.entry(m).or_insert(i);
    }
    for (j, m) in prefix_maps.iter().enumerate() {
        let hm = h.then_inner(m);
        if let Some(&i) = left_maps.get(&hm) {
            return Some(Witness::SharedMap {
                u: prefixes[i].clone(),
                v: prefixes[j].clone(),
            });
        }
    }

    let fixed: Vec<Point> = periods.iter().map(|w| ifs.word_map(w).fixed_point()).collect();
    let mut left: HashMap<Point, (usize, usize)> = HashMap::new();
    'outer: for (i, m) in prefix_maps.iter().enumerate() {
        for (k, p) in fixed.iter().enumerate() {
            if left.len() >= caps.point_cap {
                break 'outer;
            }
            left.entry(m.apply(p)).or_insert((i, k));
        }
    }
    let mut tried = 0usize;
    for (j, m) in prefix_maps.iter().enumerate() {
        let hm = h.then_inner(m);
        for (k, p) in fixed.iter().enumerate() {
            tried += 1;
            if tried > caps.point_cap {
                return None;
            }
            if let Some(&(i, k0)) = left.get(&hm.apply(p)) {
                return Some(Witness::SharedPoint {
                    u: prefixes[i].clone(),
                    w: periods[k0].clone(),
                    v: prefixes[j].clone(),
                    w2: periods[k].clone(),
                });
            }
        }
    }
    None
}

/// Thread-safe decision procedure with a neighbor-map cache.
pub struct Oracle {
    ifs: IfsSpec,
    ball: Ball,
    caps: Caps,
    inv: Vec<Similitude>,
    cache: RwLock<HashMap<Similitude, Verdict>>,
    cache_cap: usize,
    computed: AtomicUsize,
    lookups: AtomicUsize,
}

impl Oracle {
    pub fn new(ifs: &IfsSpec, caps: Caps) -> Self {
        let cache_cap = std::env::var(CACHE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CACHE_CAP);
        Oracle {
            ifs: ifs.clone(),
            ball: ifs.invariant_ball(),
            caps,
            inv: ifs.maps().iter().map(Similitude::inverse).collect(),
            cache: RwLock::new(HashMap::new()),
            cache_cap,
            computed: AtomicUsize::new(0),
            lookups: AtomicUsize::new(0),
        }
    }

    pub fn ifs(&self) -> &IfsSpec {
        &self.ifs
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn caps(&self) -> &Caps {
        &self.caps
    }

    fn lookup(&self, h: &Similitude) -> Option<Verdict> {
        let (key, flipped) = neighbor_key(h);
        let v = self.cache.read().unwrap().get(&key).cloned()?;
        Some(if flipped { v.swapped() } else { v })
    }

    /// Decides `K ∩ h(K) ≠ ∅`; witnesses are relative to `h`.
    pub fn decide(&self, h: &Similitude) -> Verdict {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        if let Some(v) = self.lookup(h) {
            return v;
        }
        self.computed.fetch_add(1, Ordering::Relaxed);
        let known = |k: &Similitude| self.lookup(k);
        let (v, learned) = decide_with(&self.ifs, &self.ball, &self.inv, &self.caps, h, &known);
        let mut c = self.cache.write().unwrap();
        for (g, lv) in learned.into_iter().chain(std::iter::once((h.clone(), v.clone()))) {
            if c.len() >= self.cache_cap {
                break;
            }
            let (key, flipped) = neighbor_key(&g);
            c.entry(key).or_insert_with(|| if flipped { lv.swapped() } else { lv });
        }
        v
    }

    /// Decides the given neighbor maps one at a time in a fixed order, so
    /// that later parallel lookups see a cache independent of scheduling.
    pub fn prime(&self, hs: impl IntoIterator<Item = Similitude>) {
        let mut keys: Vec<Similitude> = hs.into_iter().map(|h| neighbor_key(&h).0).collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            self.decide(&k);
        }
    }

    /// Decides `S_x(K) ∩ S_y(K) ≠ ∅`; witness words extend `x` and `y`.
    pub fn intersects(&self, sx: &Similitude, sy: &Similitude) -> Verdict {
        self.decide(&neighbor_map(sx, sy))
    }

    /// Verdict matrix with every neighbor map decided once.
    pub fn pairwise(&self, a: &[Similitude], b: &[Similitude]) -> Vec<Vec<Verdict>> {
        a.par_iter()
            .map(|sx| b.iter().map(|sy| self.intersects(sx, sy)).collect())
            .collect()
    }

    /// (distinct maps decided, total lookups).
    pub fn stats(&self) -> (usize, usize) {
        (
            self.computed.load(Ordering::Relaxed),
            self.lookups.load(Ordering::Relaxed),
        )
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    /// One row per cached neighbor map, sorted for byte-stable output.
    pub fn cache_csv(&self) -> String {
        let c = self.cache.read().unwrap();
        let mut rows: Vec<String> = c
            .iter()
            .map(|(h, v)| {
                let depth = match v {
                    Verdict::Disjoint { depth } => depth.to_string(),
                    Verdict::Unknown { cap } => cap.to_string(),
                    Verdict::Intersects(_) => String::new(),
                };
                let orth: Vec<String> = h.orthogonal().iter().map(fmt_q).collect();
                let trans: Vec<String> = h.translation().iter().map(fmt_q).collect();
                format!(
                    "{},{},{},{},{}",
                    fmt_q(h.ratio()),
                    orth.join(" "),
                    trans.join(" "),
                    v.kind(),
                    depth
                )
            })
            .collect();
        rows.sort();
        let mut out = String::from("ratio,orthogonal,translation,verdict,depth\n");
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }

    pub fn verify(&self, sx: &Similitude, sy: &Similitude, v: &Verdict) -> bool {
        match v {
            Verdict::Intersects(w) => verify_witness(&self.ifs, sx, sy, w),
            Verdict::Disjoint { depth } => verify_disjoint(&self.ifs, &self.ball, sx, sy, *depth),
            Verdict::Unknown { .. } => true,
        }
    }

    pub fn gap_bounds(&self, sx: &Similitude, sy: &Similitude, extra: usize) -> GapBounds {
        gap_bounds(&self.ifs, &self.ball, sx, sy, extra)
    }
}

/// Exact check of an intersection witness for the pair `(S_x, S_y)`.
pub fn verify_witness(ifs: &IfsSpec, sx: &Similitude, sy: &Similitude, w: &Witness) -> bool {
    match w {
        Witness::SharedMap { u, v } => {
            sx.then_inner(&ifs.word_map(u)) == sy.then_inner(&ifs.word_map(v))
        }
        Witness::SharedPoint { u, w, v, w2 } => {
            if w.is_empty() || w2.is_empty() {
                return false;
            }
            let p = sx.then_inner(&ifs.word_map(u)).apply(&ifs.word_map(w).fixed_point());
            let q = sy.then_inner(&ifs.word_map(v)).apply(&ifs.word_map(w2).fixed_point());
            p == q
        }
    }
}

/// Re-derives a disjointness certificate in absolute coordinates: every pair
/// of descendant cylinder balls reached within `depth` balanced refinements
/// is separated.
pub fn verify_disjoint(ifs: &IfsSpec, ball: &Ball, sx: &Similitude, sy: &Similitude, depth: usize) -> bool {
    fn rec(ifs: &IfsSpec, ball: &Ball, a: &Similitude, b: &Similitude, budget: usize) -> bool {
        if ball.image(a).separated(&ball.image(b)) {
            return true;
        }
        if budget == 0 {
            return false;
        }
        let n = ifs.n_maps();
        let (ra, rb) = (a.ratio(), b.ratio());
        if ra > rb {
            (0..n).all(|i| rec(ifs, ball, &a.then_inner(ifs.map(i)), b, budget - 1))
        } else if rb > ra {
            (0..n).all(|j| rec(ifs, ball, a, &b.then_inner(ifs.map(j)), budget - 1))
        } else {
            (0..n).all(|i| {
                let a2 = a.then_inner(ifs.map(i));
                (0..n).all(|j| rec(ifs, ball, &a2, &b.then_inner(ifs.map(j)), budget - 1))
            })
        }
    }
    rec(ifs, ball, sx, sy, depth)
}

/// Certified bounds `lower <= dist(S_x(K), S_y(K)) <= upper`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapBounds {
    pub lower: Q,
    pub upper: Q,
}

/// Branch and bound over balanced refinements of the pair. Lower bounds come
/// from ball separation, upper bounds from images of the maps' fixed points.
pub fn gap_bounds(ifs: &IfsSpec, ball: &Ball, sx: &Similitude, sy: &Similitude, extra: usize) -> GapBounds {
    let fixed: Vec<Point> = ifs.maps().iter().map(Similitude::fixed_point).collect();
    let point_gap = |a: &Similitude, b: &Similitude| -> Q {
        let pa: Vec<Point> = fixed.iter().map(|p| a.apply(p)).collect();
        let pb: Vec<Point> = fixed.iter().map(|p| b.apply(p)).collect();
        let mut best: Option<Q> = None;
        for x in &pa {
            for y in &pb {
                let d = dist2(x, y);
                if best.as_ref().map_or(true, |b| &d < b) {
                    best = Some(d);
                }
            }
        }
        best.unwrap()
    };
    let ball_gap = |a: &Similitude, b: &Similitude| -> Q {
        let ba = ball.image(a);
        let bb = ball.image(b);
        sqrt_lower(&dist2(&ba.center, &bb.center)) - &ba.radius - &bb.radius
    };

    let mut upper2 = point_gap(sx, sy);
    let mut settled: Option<Q> = None;
    let mut frontier: Vec<(Similitude, Similitude)> = vec![(sx.clone(), sy.clone())];
    let n = ifs.n_maps();
    for _ in 0..extra {
        let upper = sqrt_upper(&upper2);
        let mut next = Vec::new();
        for (a, b) in frontier {
            let lo = ball_gap(&a, &b);
            if lo >= upper {
                if settled.as_ref().map_or(true, |s| &lo < s) {
                    settled = Some(lo);
                }
                continue;
            }
            let kids: Vec<(Similitude, Similitude)> = if a.ratio() > b.ratio() {
                (0..n).map(|i| (a.then_inner(ifs.map(i)), b.clone())).collect()
            } else if b.ratio() > a.ratio() {
                (0..n).map(|j| (a.clone(), b.then_inner(ifs.map(j)))).collect()
            } else {
                (0..n)
                    .flat_map(|i| {
                        let a2 = a.then_inner(ifs.map(i));
                        (0..n).map(move |j| (a2.clone(), j))
                    })
                    .map(|(a2, j)| (a2, b.then_inner(ifs.map(j))))
                    .collect()
            };
            for (a2, b2) in kids {
                let d = point_gap(&a2, &b2);
                if d < upper2 {
                    upper2 = d;
                }
                next.push((a2, b2));
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    let mut lower = settled;
    for (a, b) in &frontier {
        let lo = ball_gap(a, b);
        if lower.as_ref().map_or(true, |s| &lo < s) {
            lower = Some(lo);
        }
    }
    let upper = sqrt_upper(&upper2);
    let mut lower = lower.unwrap_or_else(|| upper.clone());
    if lower < Q::zero() {
        lower = Q::zero();
    }
    if lower > upper {
        lower = upper.clone();
    }
    GapBounds { lower, upper }
}

/// Distinct points `S_u(fix S_w)` for short `u`, `w`: a finite sample of `K`.
pub fn periodic_points(ifs: &IfsSpec, prefix_len: usize, period_len: usize) -> Vec<Point> {
    let n = ifs.n_maps();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let fixed: Vec<Point> = words_up_to(n, 1, period_len)
        .iter()
        .map(|w| ifs.word_map(w).fixed_point())
        .collect();
    for u in words_up_to(n, 0, prefix_len) {
        let m = ifs.word_map(&u);
        for p in &fixed {
            let x = m.apply(p);
            if seen.insert(x.clone()) {
                out.push(x);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::rational::{q, qi};

    fn ex1() -> (IfsSpec, Oracle) {
        let ifs = presets::interval3();
        let o = Oracle::new(&ifs, Caps::default());
        (ifs, o)
    }

    #[test]
    fn float_prefilter_keeps_unseparated_children() {
        for p in presets::catalog() {
            let ifs = p.ifs;
            let ball = ifs.invariant_ball();
            let inv: Vec<Similitude> = ifs.maps().iter().map(Similitude::inverse).collect();
            let s = Search {
                ifs: &ifs,
                ball: &ball,
                inv: &inv,
                caps: Caps::default(),
                known: &|_| None,
                fl: Floats::new(&ifs, &ball, &inv),
                nodes: HashMap::new(),
                path: Vec::new(),
                stack_maps: Vec::new(),
                learned: Vec::new(),
            };
            let mut layer = vec![Similitude::identity(ifs.dim())];
            for _ in 0..3 {
                let mut next = Vec::new();
                for g in &layer {
                    let exact: Vec<_> = rel_children(&ifs, &inv, g)
                        .into_iter()
                        .filter(|(k, _)| !rel_separated(&ball, k))
                        .collect();
                    let fast: Vec<_> = s
                        .candidates(g)
                        .into_iter()
                        .filter(|(k, _)| !rel_separated(&ball, k))
                        .collect();
                    assert_eq!(exact, fast, "{}", p.name);
                    next.extend(exact.into_iter().map(|(k, _)| k).filter(|k| !k.is_identity()));
                }
                next.sort();
                next.dedup();
                next.truncate(200);
                layer = next;
            }
        }
    }

    #[test]
    fn cylinder_balls_example1() {
        let ifs = presets::interval3();
        let b = ifs.invariant_ball();
        let c00 = cylinder_ball(&ifs, &b, &[0, 0]);
        assert_eq!((c00.center.clone(), c00.radius.clone()), (vec![q(1, 4)], q(1, 4)));
        let c22 = cylinder_ball(&ifs, &b, &[2, 2]);
        assert_eq!((c22.center.clone(), c22.radius.clone()), (vec![q(7, 4)], q(1, 4)));
        assert_eq!(cylinder_ball(&ifs, &b, &[]), b);
    }

    #[test]
    fn example1_verdicts() {
        let (ifs, o) = ex1();
        let s = |w: &[u8]| ifs.word_map(w);
        let v = o.intersects(&s(&[0]), &s(&[2]));
        assert!(v.intersects());
        assert!(o.verify(&s(&[0]), &s(&[2]), &v));
        if let Verdict::Intersects(Witness::SharedPoint { u, w, v, w2 }) = &v {
            let p = s(&[0]).then_inner(&s(u)).apply(&s(w).fixed_point());
            assert_eq!(p, vec![qi(1)]);
            assert!(!w.is_empty() && !w2.is_empty());
            let _ = v;
        } else {
            panic!("expected a point witness, got {v:?}");
        }
        let v01 = o.intersects(&s(&[0]), &s(&[1]));
        assert!(matches!(v01, Verdict::Intersects(Witness::SharedMap { .. })));
        assert!(o.verify(&s(&[0]), &s(&[1]), &v01));
        assert_eq!(o.intersects(&s(&[0, 0]), &s(&[2, 2])), Verdict::Disjoint { depth: 0 });
        assert_eq!(
            o.intersects(&s(&[1]), &s(&[1])),
            Verdict::Intersects(Witness::SharedMap { u: vec![], v: vec![] })
        );
    }

    #[test]
    fn symmetric_and_cached() {
        let (ifs, o) = ex1();
        let words: Vec<Word> = crate::symbolic::enumerate_level(&ifs, 3, 100).unwrap();
        let maps: Vec<Similitude> = words.iter().map(|w| ifs.word_map(w)).collect();
        let m = o.pairwise(&maps, &maps);
        for i in 0..maps.len() {
            for j in 0..maps.len() {
                assert_eq!(m[i][j].kind(), m[j][i].kind());
                assert!(o.verify(&maps[i], &maps[j], &m[i][j]));
            }
        }
        let (computed, lookups) = o.stats();
        assert!(computed < lookups);
        assert!(o.cache_csv().starts_with("ratio,"));
    }

    #[test]
    fn gasket_level_one() {
        let ifs = presets::gasket3();
        let o = Oracle::new(&ifs, Caps::default());
        for i in 0..3u8 {
            for j in 0..3u8 {
                let v = o.intersects(ifs.map(i as usize), ifs.map(j as usize));
                assert!(v.intersects());
                assert!(o.verify(ifs.map(i as usize), ifs.map(j as usize), &v));
            }
        }
    }

    #[test]
    fn gap_bounds_interval3() {
        let ifs = presets::interval3();
        let b = ifs.invariant_ball();
        let g = gap_bounds(&ifs, &b, &ifs.word_map(&[0, 0]), &ifs.word_map(&[2, 2]), 3);
        assert_eq!(g.lower, qi(1));
        assert_eq!(g.upper, qi(1));
    }

    #[test]
    fn gap_bounds_gasket_bracket_truth() {
        // Cylinders 00 and 11 of the gasket: triangles with vertices at distance 1/2.
        let ifs = presets::gasket3();
        let b = ifs.invariant_ball();
        let g = gap_bounds(&ifs, &b, &ifs.word_map(&[0, 0]), &ifs.word_map(&[1, 1]), 6);
        assert!(g.lower <= q(1, 2) && q(1, 2) <= g.upper);
        assert!(g.lower > Q::zero());
    }

    #[test]
    fn witnesses_reject_tampering() {
        let ifs = presets::interval3();
        let bad = Witness::SharedMap { u: vec![0], v: vec![0] };
        assert!(!verify_witness(&ifs, ifs.map(0), ifs.map(1), &bad));
        let empty = Witness::SharedPoint { u: vec![], w: vec![], v: vec![], w2: vec![] };
        assert!(!verify_witness(&ifs, ifs.map(0), ifs.map(0), &empty));
        let b = ifs.invariant_ball();
        assert!(!verify_disjoint(&ifs, &b, ifs.map(0), ifs.map(2), 5));
    }

    #[test]
    fn fallback_finds_touch() {
        let ifs = presets::interval3();
        let caps = Caps { refine_depth: 0, ..Caps::default() };
        let b = ifs.invariant_ball();
        let inv: Vec<Similitude> = ifs.maps().iter().map(Similitude::inverse).collect();
        let h = neighbor_map(ifs.map(0), ifs.map(2));
        let v = decide_uncached(&ifs, &b, &inv, &caps, &h);
        match v {
            Verdict::Intersects(w) => assert!(verify_witness(&ifs, ifs.map(0), ifs.map(2), &w)),
            other => panic!("{other:?}"),
        }
        let none = Caps {
            refine_depth: 0,
            witness_word_len: 0,
            witness_period_len: 0,
            ..Caps::default()
        };
        assert!(decide_uncached(&ifs, &b, &inv, &none, &h).is_unknown());
    }
}
