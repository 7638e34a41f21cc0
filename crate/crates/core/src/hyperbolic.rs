//! Graph metrics, Gromov products, canonical geodesics and the
//! hyperbolicity / quasi-isometry diagnostics on finite truncations.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::graph::{Adjacency, AugmentedGraph, View, UNREACHED};
use crate::rational::{qi, Q};
use crate::similitude::Ball;
use crate::symbolic::VId;

/// Exact half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Half(pub i64);

impl Half {
    pub fn from_int(n: i64) -> Half {
        Half(2 * n)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn to_q(self) -> Q {
        Q::new(self.0.into(), 2.into())
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for Half {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `2 |x ∧ y| = |x| + |y| - d(x, y)`.
pub fn gromov_twice(lx: usize, ly: usize, d: u32) -> i64 {
    lx as i64 + ly as i64 - d as i64
}

/// All-pairs metric of one view of a built graph.
pub struct Metric<'g> {
    pub graph: &'g AugmentedGraph,
    pub adj: Adjacency,
    pub dist: Vec<Vec<u32>>,
}

impl<'g> Metric<'g> {
    pub fn new(graph: &'g AugmentedGraph, view: View) -> Self {
        let adj = graph.adjacency(view);
        let dist = adj.all_pairs();
        Metric { graph, adj, dist }
    }

    pub fn view(&self) -> View {
        self.adj.view
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn level(&self, id: usize) -> usize {
        self.adj.level[id] as usize
    }

    pub fn d(&self, x: VId, y: VId) -> u32 {
        self.dist[self.adj.id(x)][self.adj.id(y)]
    }

    pub fn gromov(&self, x: VId, y: VId) -> Half {
        Half(gromov_twice(x.0, y.0, self.d(x, y)))
    }

    fn gromov_ids(&self, x: usize, y: usize) -> i64 {
        gromov_twice(self.level(x), self.level(y), self.dist[x][y])
    }

    /// Neighbors one level up (toward the root) in this view.
    fn up(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let l = self.adj.level[id];
        self.adj.nbrs[id]
            .iter()
            .filter(move |&&w| self.adj.level[w as usize] + 1 == l)
            .map(|&w| w as usize)
    }

    fn down(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let l = self.adj.level[id];
        self.adj.nbrs[id]
            .iter()
            .filter(move |&&w| self.adj.level[w as usize] == l + 1)
            .map(|&w| w as usize)
    }

    /// Level-`h` vertices reachable from `id` by steps that each go one level up.
    pub fn ancestors_at(&self, id: usize, h: usize) -> Vec<usize> {
        let mut cur = vec![id];
        let mut l = self.level(id);
        while l > h {
            let mut next: Vec<usize> = cur.iter().flat_map(|&v| self.up(v)).collect();
            next.sort_unstable();
            next.dedup();
            cur = next;
            l -= 1;
        }
        cur
    }
}

/// A geodesic in canonical shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GeodesicPath {
    pub vertices: Vec<VId>,
    /// Level of the highest (closest to the root) vertex.
    pub top_level: usize,
    /// Index range `[start, end]` of the horizontal (E) or top (E◇) part.
    pub top_start: usize,
    pub top_end: usize,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() <= 1
    }

    /// Length of the horizontal part.
    pub fn horizontal_len(&self) -> usize {
        self.top_end - self.top_start
    }

    /// `h - l/2` as a half-integer.
    pub fn gromov_from_shape(&self) -> Half {
        Half(2 * self.top_level as i64 - self.horizontal_len() as i64)
    }
}

/// Level-restricted horizontal distances, one matrix per level.
pub struct LevelDistances {
    pub per_level: Vec<Vec<Vec<u32>>>,
}

impl LevelDistances {
    pub fn new(adj: &Adjacency) -> Self {
        let per_level = (0..=adj.depth())
            .map(|n| {
                adj.level_range(n)
                    .into_par_iter()
                    .map(|s| adj.bfs_level(n, &[s]))
                    .collect()
            })
            .collect();
        LevelDistances { per_level }
    }

    fn hd(&self, adj: &Adjacency, a: usize, b: usize) -> u32 {
        let n = adj.level[a] as usize;
        let o = adj.offsets[n];
        self.per_level[n][a - o][b - o]
    }

    /// Minimal level distance from `a` to any vertex of `set` (same level).
    fn hd_set(&self, adj: &Adjacency, a: usize, set: &[usize]) -> u32 {
        set.iter().map(|&b| self.hd(adj, a, b)).min().unwrap_or(UNREACHED)
    }
}

/// Canonical geodesic of the E view: climb to the highest level `h` allowed
/// by the distance, cross horizontally, descend. Ties go to the
/// lexicographically smallest sequence of vertex ids.
pub fn canonical_geodesic_e(m: &Metric, hd: &LevelDistances, x: VId, y: VId) -> GeodesicPath {
    assert_eq!(m.view(), View::E);
    let adj = &m.adj;
    let (xi, yi) = (adj.id(x), adj.id(y));
    let d = m.dist[xi][yi] as i64;
    let (lx, ly) = (x.0 as i64, y.0 as i64);
    let mut found = None;
    for h in 0..=x.0.min(y.0) {
        let ell = d - (lx - h as i64) - (ly - h as i64);
        if ell < 0 {
            continue;
        }
        let ax = m.ancestors_at(xi, h);
        let ay = m.ancestors_at(yi, h);
        let best = ax.iter().map(|&a| hd.hd_set(adj, a, &ay)).min().unwrap_or(UNREACHED);
        if best as i64 == ell {
            found = Some((h, ell as u32, ay));
            break;
        }
    }
    let (h, ell, ay) = found.expect("every E-view geodesic has a canonical form");

    let mut path = vec![xi];
    let mut cur = xi;
    while m.level(cur) > h {
        let next = m
            .up(cur)
            .filter(|&p| {
                m.ancestors_at(p, h)
                    .iter()
                    .any(|&a| hd.hd_set(adj, a, &ay) == ell)
            })
            .min()
            .expect("feasible parent");
        path.push(next);
        cur = next;
    }
    let top_start = path.len() - 1;
    let mut left = ell;
    while left > 0 {
        let next = adj.nbrs[cur]
            .iter()
            .map(|&w| w as usize)
            .filter(|&w| m.level(w) == h && hd.hd_set(adj, w, &ay) == left - 1)
            .min()
            .expect("feasible horizontal step");
        path.push(next);
        cur = next;
        left -= 1;
    }
    let top_end = path.len() - 1;
    while m.level(cur) < y.0 {
        let next = m
            .down(cur)
            .filter(|&c| m.ancestors_at(yi, m.level(c)).binary_search(&c).is_ok())
            .min()
            .expect("feasible child");
        path.push(next);
        cur = next;
    }
    debug_assert_eq!(cur, yi);
    GeodesicPath {
        vertices: path.into_iter().map(|i| adj.vid(i)).collect(),
        top_level: h,
        top_start,
        top_end,
    }
}

/// Canonical geodesic of the E◇ view: up to the deepest common upper
/// vertex, then down.
pub fn canonical_geodesic_diamond(m: &Metric, x: VId, y: VId) -> GeodesicPath {
    assert_eq!(m.view(), View::Diamond);
    let adj = &m.adj;
    let (xi, yi) = (adj.id(x), adj.id(y));
    let mut top = None;
    for h in (0..=x.0.min(y.0)).rev() {
        let ax = m.ancestors_at(xi, h);
        let ay = m.ancestors_at(yi, h);
        if let Some(&z) = ax.iter().find(|a| ay.binary_search(a).is_ok()) {
            top = Some((h, z));
            break;
        }
    }
    let (h, z) = top.expect("the root is a common upper vertex");
    let mut path = vec![xi];
    let mut cur = xi;
    while m.level(cur) > h {
        let next = m
            .up(cur)
            .filter(|&p| m.ancestors_at(p, h).binary_search(&z).is_ok())
            .min()
            .expect("feasible up step");
        path.push(next);
        cur = next;
    }
    let top_start = path.len() - 1;
    while m.level(cur) < y.0 {
        let next = m
            .down(cur)
            .filter(|&c| m.ancestors_at(yi, m.level(c)).binary_search(&c).is_ok())
            .min()
            .expect("feasible down step");
        path.push(next);
        cur = next;
    }
    GeodesicPath {
        vertices: path.into_iter().map(|i| adj.vid(i)).collect(),
        top_level: h,
        top_start,
        top_end: top_start,
    }
}

/// Per-level `L`: the longest same-level geodesic that uses only
/// horizontal edges (level-restricted distance equal to graph distance).
pub fn horizontal_geodesic_bound(m: &Metric, hd: &LevelDistances) -> Vec<u32> {
    assert_eq!(m.view(), View::E);
    (0..=m.adj.depth())
        .map(|n| {
            let r = m.adj.level_range(n);
            let o = r.start;
            r.clone()
                .into_par_iter()
                .map(|a| {
                    let mut best = 0;
                    for b in r.clone() {
                        let h = hd.per_level[n][a - o][b - o];
                        if h != UNREACHED && h == m.dist[a][b] {
                            best = best.max(h);
                        }
                    }
                    best
                })
                .max()
                .unwrap_or(0)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DiamondReport {
    pub same_level_edges: usize,
    pub open_wedges: usize,
    pub odd_same_level_pairs: usize,
    pub counterexample: Option<String>,
}

impl DiamondReport {
    pub fn passed(&self) -> bool {
        self.same_level_edges == 0 && self.open_wedges == 0 && self.odd_same_level_pairs == 0
    }
}

/// Checks that no edge joins two vertices of one level, that every wedge
/// `u - v - w` with `v` one level below `u ≠ w` closes through a common
/// vertex one level above `u` and `w`, and that same-level distances are even.
pub fn diamond_check(m: &Metric) -> DiamondReport {
    let adj = &m.adj;
    let g = m.graph;
    let mut rep = DiamondReport {
        same_level_edges: 0,
        open_wedges: 0,
        odd_same_level_pairs: 0,
        counterexample: None,
    };
    for v in 0..adj.len() {
        for &w in &adj.nbrs[v] {
            if adj.level[w as usize] == adj.level[v] && (w as usize) > v {
                rep.same_level_edges += 1;
                rep.counterexample
                    .get_or_insert_with(|| format!("same-level edge {:?} - {:?}", adj.vid(v), adj.vid(w as usize)));
            }
        }
        let ups: Vec<usize> = m.up(v).collect();
        for (i, &u) in ups.iter().enumerate() {
            for &w in &ups[i + 1..] {
                let uu: Vec<usize> = m.up(u).collect();
                let closes = m.up(w).any(|p| uu.contains(&p));
                if !closes {
                    rep.open_wedges += 1;
                    rep.counterexample.get_or_insert_with(|| {
                        format!("open wedge {:?} - {:?} - {:?}", adj.vid(u), adj.vid(v), adj.vid(w))
                    });
                }
            }
        }
    }
    for n in 0..=adj.depth() {
        for a in adj.level_range(n) {
            for b in adj.level_range(n) {
                if b > a && m.dist[a][b] % 2 == 1 {
                    rep.odd_same_level_pairs += 1;
                    rep.counterexample
                        .get_or_insert_with(|| format!("odd distance {:?} {:?}", adj.vid(a), adj.vid(b)));
                }
            }
        }
    }
    let _ = g;
    rep
}

/// `δ'`: the largest E◇ diameter of a slice `{a : |a| = i, a on a geodesic o → z}`.
/// Returns the value with a witness `(z, i)`.
pub fn geodesic_fan_divergence(m: &Metric) -> (u32, Option<(VId, usize)>) {
    assert_eq!(m.view(), View::Diamond);
    let adj = &m.adj;
    (0..adj.len())
        .into_par_iter()
        .map(|z| {
            let mut best = (0u32, None);
            let mut slice = vec![z];
            let mut l = m.level(z);
            while l > 0 {
                let mut next: Vec<usize> = slice.iter().flat_map(|&v| m.up(v)).collect();
                next.sort_unstable();
                next.dedup();
                slice = next;
                l -= 1;
                for (i, &a) in slice.iter().enumerate() {
                    for &b in &slice[i + 1..] {
                        let d = m.dist[a][b];
                        if d > best.0 {
                            best = (d, Some((adj.vid(z), l)));
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (0, None), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1 && b.1.is_some()) { b } else { a })
}

/// Vertex count above which `delta_hyperbolicity` samples triples.
pub const EXHAUSTIVE_TRIPLE_LIMIT: usize = 1500;
pub const SAMPLED_TRIPLES: usize = 4_000_000;
pub const SAMPLE_SEED: u64 = 0x1f5_9a7e;

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DeltaResult {
    pub delta: Half,
    pub sampled: bool,
    pub witness: Option<(VId, VId, VId)>,
}

/// `max min(|x∧z|, |z∧y|) - |x∧y|` over triples, base point the root.
pub fn delta_hyperbolicity(m: &Metric) -> DeltaResult {
    let n = m.len();
    let g: Vec<Vec<i64>> = (0..n)
        .into_par_iter()
        .map(|x| (0..n).map(|y| m.gromov_ids(x, y)).collect())
        .collect();
    if n <= EXHAUSTIVE_TRIPLE_LIMIT {
        let (best, wit) = (0..n)
            .into_par_iter()
            .map(|x| {
                let gx = &g[x];
                let mut best = 0i64;
                let mut wit = None;
                for y in x..n {
                    let gy = &g[y];
                    let base = gx[y];
                    for z in 0..n {
                        let v = gx[z].min(gy[z]) - base;
                        if v > best {
                            best = v;
                            wit = Some((x, y, z));
                        }
                    }
                }
                (best, wit)
            })
            .reduce(|| (0, None), |a, b| if b.0 > a.0 { b } else { a });
        DeltaResult {
            delta: Half(best),
            sampled: false,
            witness: wit.map(|(x, y, z)| (m.adj.vid(x), m.adj.vid(y), m.adj.vid(z))),
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let mut best = 0i64;
        let mut wit = None;
        for _ in 0..SAMPLED_TRIPLES {
            let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let v = g[x][z].min(g[z][y]) - g[x][y];
            if v > best {
                best = v;
                wit = Some((x, y, z));
            }
        }
        DeltaResult {
            delta: Half(best),
            sampled: true,
            witness: wit.map(|(x, y, z)| (m.adj.vid(x), m.adj.vid(y), m.adj.vid(z))),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct QiReport {
    pub pairs: usize,
    /// Pairs with `d◇ > d + 1`.
    pub violations: usize,
    /// `max(d◇ - d - 1)`; at most 0 when there are no violations.
    pub max_excess: i64,
    /// `C = max(d - d◇)`.
    pub c: i64,
    pub first_violation: Option<(VId, VId)>,
}

/// Compares the two metrics on every pair of a common truncation.
pub fn quasi_isometry_check(e: &Metric, dm: &Metric) -> QiReport {
    assert_eq!(e.len(), dm.len());
    let n = e.len();
    let rows: Vec<(usize, i64, i64, Option<(usize, usize)>)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut viol = 0;
            let mut excess = i64::MIN;
            let mut c = i64::MIN;
            let mut first = None;
            for y in 0..n {
                let de = e.dist[x][y] as i64;
                let dd = dm.dist[x][y] as i64;
                if dd > de + 1 {
                    viol += 1;
                    first.get_or_insert((x, y));
                }
                excess = excess.max(dd - de - 1);
                c = c.max(de - dd);
            }
            (viol, excess, c, first)
        })
        .collect();
    let mut rep = QiReport {
        pairs: n * n,
        violations: 0,
        max_excess: i64::MIN,
        c: i64::MIN,
        first_violation: None,
    };
    for (v, ex, c, f) in rows {
        rep.violations += v;
        rep.max_excess = rep.max_excess.max(ex);
        rep.c = rep.c.max(c);
        if rep.first_violation.is_none() {
            rep.first_violation = f.map(|(a, b)| (e.adj.vid(a), e.adj.vid(b)));
        }
    }
    rep
}

/// Largest admissible `a`: `ln 2 / (2 δ)`, or `ln 2` when `δ = 0`.
pub fn a_max(delta: Half) -> f64 {
    if delta.0 <= 0 {
        std::f64::consts::LN_2
    } else {
        std::f64::consts::LN_2 / (2.0 * delta.to_f64())
    }
}

/// `a' = e^{δa} - 1`.
pub fn a_prime(delta: Half, a: f64) -> f64 {
    (delta.to_f64() * a).exp_m1()
}

/// `ρ_a(x, y) = exp(-a |x∧y|)`, kept as `(a, |x∧y|)`; `None` encodes `x = y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoA {
    pub a: f64,
    pub gromov: Option<Half>,
}

impl RhoA {
    pub fn value(&self) -> f64 {
        match self.gromov {
            None => 0.0,
            Some(g) => (-self.a * g.to_f64()).exp(),
        }
    }
}

pub fn rho_a(m: &Metric, x: VId, y: VId, a: f64) -> RhoA {
    RhoA {
        a,
        gromov: if x == y { None } else { Some(m.gromov(x, y)) },
    }
}

/// Triples violating `ρ(x,y) <= (1 + a') max(ρ(x,z), ρ(y,z))` beyond `1e-12`.
pub fn ultrametric_violations(m: &Metric, verts: &[VId], a: f64, delta: Half) -> usize {
    let k = 1.0 + a_prime(delta, a);
    let rho = |x: VId, y: VId| rho_a(m, x, y, a).value();
    verts
        .par_iter()
        .map(|&x| {
            let mut bad = 0;
            for &y in verts {
                let rxy = rho(x, y);
                for &z in verts {
                    if rxy > k * rho(x, z).max(rho(y, z)) + 1e-12 {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaResult {
    pub theta: Vec<Vec<f64>>,
    pub sandwich_violations: usize,
    pub a_prime: f64,
}

/// Chain metric on `verts`: shortest paths in the complete graph weighted by
/// `ρ_a`, and a check of `(1 - 2a') ρ_a <= θ_a <= ρ_a`.
pub fn theta_a(m: &Metric, verts: &[VId], a: f64, delta: Half) -> ThetaResult {
    let k = verts.len();
    let rho: Vec<Vec<f64>> = verts
        .iter()
        .map(|&x| verts.iter().map(|&y| rho_a(m, x, y, a).value()).collect())
        .collect();
    let mut th = rho.clone();
    for mid in 0..k {
        for i in 0..k {
            for j in 0..k {
                let via = th[i][mid] + th[mid][j];
                if via < th[i][j] {
                    th[i][j] = via;
                }
            }
        }
    }
    let ap = a_prime(delta, a);
    let mut bad = 0;
    for i in 0..k {
        for j in 0..k {
            if th[i][j] > rho[i][j] + 1e-12 || (1.0 - 2.0 * ap) * rho[i][j] > th[i][j] + 1e-12 {
                bad += 1;
            }
        }
    }
    ThetaResult {
        theta: th,
        sandwich_violations: bad,
        a_prime: ap,
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ConditionCRow {
    pub level: usize,
    pub probes: usize,
    pub max_chain: usize,
    /// Longest shortest touching sub-chain, counted in vertices.
    pub ell0: usize,
}

/// Condition (C) diagnostic: for each level-`n` cylinder-ball center `p`, the
/// cylinders whose balls meet `D = B(p, scale·r^n/2)` form a chain; report the
/// longest shortest path (in vertices) between two of them inside the
/// touching graph restricted to the chain.
pub fn condition_c_diagnostic(g: &AugmentedGraph, ball: &Ball, min_ratio: &Q, scale: &Q) -> Vec<ConditionCRow> {
    let mut rows = Vec::new();
    let mut rn = qi(1);
    for (n, level) in g.table.levels.iter().enumerate() {
        let balls: Vec<Ball> = level.iter().map(|c| ball.image(&c.map)).collect();
        let rad = scale * &rn / qi(2);
        let res: Vec<(usize, usize)> = (0..balls.len())
            .into_par_iter()
            .map(|pi| {
                let d = Ball {
                    center: balls[pi].center.clone(),
                    radius: rad.clone(),
                };
                let chain: Vec<usize> = (0..balls.len()).filter(|&j| !balls[j].separated(&d)).collect();
                let mut ell0 = 0;
                for (k, &s) in chain.iter().enumerate() {
                    let mut dist = vec![usize::MAX; chain.len()];
                    dist[k] = 1;
                    let mut q = std::collections::VecDeque::from([k]);
                    while let Some(u) = q.pop_front() {
                        for &w in &g.horizontal[n][chain[u]] {
                            if let Ok(wi) = chain.binary_search(&w) {
                                if dist[wi] == usize::MAX {
                                    dist[wi] = dist[u] + 1;
                                    q.push_back(wi);
                                }
                            }
                        }
                    }
                    let _ = s;
                    ell0 = ell0.max(dist.iter().filter(|&&x| x != usize::MAX).copied().max().unwrap_or(1));
                }
                (chain.len(), ell0)
            })
            .collect();
        rows.push(ConditionCRow {
            level: n,
            probes: balls.len(),
            max_chain: res.iter().map(|r| r.0).max().unwrap_or(0),
            ell0: res.iter().map(|r| r.1).max().unwrap_or(0),
        });
        rn *= min_ratio;
    }
    rows
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicityReport {
    pub depth: usize,
    pub delta: Half,
    pub delta_sampled: bool,
    pub l_per_level: Vec<u32>,
    pub l_max: u32,
    pub delta_prime: u32,
    pub delta_diamond: Half,
    pub quasi_c: i64,
    pub lemma_violations: usize,
    pub diamond: DiamondReport,
    pub a_max: f64,
}

/// Every diagnostic of this module on one truncation.
pub fn hyperbolicity_report(g: &AugmentedGraph) -> HyperbolicityReport {
    let me = Metric::new(g, View::E);
    let md = Metric::new(g, View::Diamond);
    let hd = LevelDistances::new(&me.adj);
    let l = horizontal_geodesic_bound(&me, &hd);
    let delta = delta_hyperbolicity(&me);
    let dd = delta_hyperbolicity(&md);
    let (dp, _) = geodesic_fan_divergence(&md);
    let qi_rep = quasi_isometry_check(&me, &md);
    HyperbolicityReport {
        depth: g.depth(),
        delta: delta.delta,
        delta_sampled: delta.sampled || dd.sampled,
        l_max: l.iter().copied().max().unwrap_or(0),
        l_per_level: l,
        delta_prime: dp,
        delta_diamond: dd.delta,
        quasi_c: qi_rep.c,
        lemma_violations: qi_rep.violations,
        diamond: diamond_check(&md),
        a_max: a_max(delta.delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Mode;
    use crate::intersect::{Caps, Oracle};
    use crate::presets;

    fn ex1(depth: usize) -> (crate::similitude::IfsSpec, AugmentedGraph) {
        let ifs = presets::interval3();
        let o = Oracle::new(&ifs, Caps::default());
        (ifs.clone(), AugmentedGraph::build(&o, depth, Mode::Strict).unwrap())
    }

    #[test]
    fn half_display() {
        assert_eq!(Half(1).to_string(), "1/2");
        assert_eq!(Half(4).to_string(), "2");
        assert_eq!(Half(-3).to_string(), "-3/2");
    }

    #[test]
    fn example1_distances_and_products() {
        let (ifs, g) = ex1(2);
        let me = Metric::new(&g, View::E);
        let md = Metric::new(&g, View::Diamond);
        let a = g.find_label(&ifs, "[00]").unwrap();
        let b = g.find_label(&ifs, "[22]").unwrap();
        assert_eq!(me.d(a, b), 3);
        assert_eq!(md.d(a, b), 2);
        assert_eq!(me.gromov(a, b), Half(1));
        assert_eq!(md.gromov(a, b), Half(2));
        assert_eq!(me.gromov(a, a), Half::from_int(2));
        for v in g.table.vertices() {
            assert_eq!(me.d((0, 0), v), v.0 as u32);
            assert_eq!(md.d((0, 0), v), v.0 as u32);
        }
    }

    #[test]
    fn example1_canonical_geodesics() {
        let (ifs, g) = ex1(2);
        let me = Metric::new(&g, View::E);
        let hd = LevelDistances::new(&me.adj);
        let a = g.find_label(&ifs, "[00]").unwrap();
        let b = g.find_label(&ifs, "[22]").unwrap();
        let p = canonical_geodesic_e(&me, &hd, a, b);
        let labels: Vec<String> = p.vertices.iter().map(|&v| g.label(&ifs, v)).collect();
        assert_eq!(labels, ["[00]", "[0]", "[2]", "[22]"]);
        assert_eq!((p.top_level, p.horizontal_len()), (1, 1));
        assert_eq!(p.gromov_from_shape(), me.gromov(a, b));

        let md = Metric::new(&g, View::Diamond);
        let q = canonical_geodesic_diamond(&md, a, b);
        let labels: Vec<String> = q.vertices.iter().map(|&v| g.label(&ifs, v)).collect();
        assert_eq!(labels, ["[00]", "[1]", "[22]"]);
        assert_eq!(q.top_level, 1);
        assert_eq!(canonical_geodesic_e(&me, &hd, a, a).vertices, vec![a]);
    }

    #[test]
    fn example1_constants() {
        let (_, g) = ex1(5);
        let rep = hyperbolicity_report(&g);
        assert_eq!(rep.delta, Half::from_int(1));
        assert_eq!(rep.l_per_level, [0, 1, 3, 5, 5, 5]);
        assert_eq!(rep.delta_prime, 2);
        assert_eq!(rep.lemma_violations, 0);
        assert!(rep.diamond.passed());
    }

    #[test]
    fn example1_fan_witness() {
        let (ifs, g) = ex1(2);
        let md = Metric::new(&g, View::Diamond);
        let z = g.find_label(&ifs, "[02,10]").unwrap();
        let zi = md.adj.id(z);
        let slice = md.ancestors_at(zi, 1);
        let labels: Vec<String> = slice.iter().map(|&i| g.label(&ifs, md.adj.vid(i))).collect();
        assert!(labels.contains(&"[0]".to_string()) && labels.contains(&"[1]".to_string()));
        let (dp, _) = geodesic_fan_divergence(&md);
        assert_eq!(dp, 2);
    }

    #[test]
    fn e_view_is_not_diamond() {
        let (_, g) = ex1(2);
        let me = Metric::new(&g, View::E);
        let rep = diamond_check(&me);
        assert!(rep.same_level_edges > 0);
        assert!(!rep.passed());
        let (_, g1) = ex1(1);
        assert!(diamond_check(&Metric::new(&g1, View::Diamond)).passed());
    }

    #[test]
    fn tree_case_is_zero_hyperbolic() {
        let ifs = presets::interval2_osc();
        let o = Oracle::new(&ifs, Caps::default());
        let g = AugmentedGraph::build(&o, 4, Mode::Strict).unwrap();
        let me = Metric::new(&g, View::E);
        assert_eq!(delta_hyperbolicity(&me).delta, Half(0));
        let md = Metric::new(&g, View::Diamond);
        assert_eq!(geodesic_fan_divergence(&md).0, 0);
        let single = AugmentedGraph::build(&o, 0, Mode::Strict).unwrap();
        assert_eq!(delta_hyperbolicity(&Metric::new(&single, View::E)).delta, Half(0));
    }

    #[test]
    fn rho_and_theta() {
        let (ifs, g) = ex1(4);
        let me = Metric::new(&g, View::E);
        let a = g.find_label(&ifs, "[00]").unwrap();
        let b = g.find_label(&ifs, "[22]").unwrap();
        let r = rho_a(&me, a, b, 0.3);
        assert!((r.value() - (-0.15f64).exp()).abs() < 1e-15);
        assert_eq!(rho_a(&me, a, a, 0.3).value(), 0.0);
        let delta = delta_hyperbolicity(&me).delta;
        let am = a_max(delta) / 2.0;
        let verts: Vec<VId> = g.table.vertices().collect();
        assert_eq!(ultrametric_violations(&me, &verts, am, delta), 0);
        let lvl3: Vec<VId> = verts.iter().copied().filter(|v| v.0 == 3).collect();
        let th = theta_a(&me, &lvl3, am, delta);
        assert_eq!(th.sandwich_violations, 0);
        let two = theta_a(&me, &[a, b], am, delta);
        assert!((two.theta[0][1] - rho_a(&me, a, b, am).value()).abs() < 1e-15);
        assert!(theta_a(&me, &[a], am, delta).theta[0][0] == 0.0);
    }

    #[test]
    fn example1_condition_c() {
        let (ifs, g) = ex1(5);
        let rows = condition_c_diagnostic(&g, &ifs.invariant_ball(), ifs.min_ratio(), &qi(2));
        assert!(rows.iter().all(|r| r.ell0 <= 3));
        assert_eq!(rows[5].ell0, 3);
    }

    #[test]
    fn a_max_values() {
        assert!((a_max(Half(0)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((a_max(Half(2)) - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
        let am = a_max(Half(2));
        assert!(a_prime(Half(2), am) < 2f64.sqrt() - 1.0 + 1e-12);
    }
}
