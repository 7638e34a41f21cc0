//! Eventually periodic boundary addresses, rays, the boundary map and the
//! Hölder / condition (H) diagnostics.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{AugmentedGraph, GraphError, Mode, View, UNREACHED};
use crate::hyperbolic::{gromov_twice, Half};
use crate::intersect::{Oracle, Verdict};
use crate::rational::{dist2, fmt_q, fmt_sig12, fmt_vec, qi, sqrt_bounds, sqrt_upper, to_f64, Q};
use crate::similitude::{IfsSpec, Point, Similitude};
use crate::symbolic::{fmt_word, level_scale, parse_word, truncate_to_level, SymbolicError, VId, Word, DEFAULT_LEVEL_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddressError {
    #[error("empty period")]
    EmptyPeriod,
    #[error("malformed address {0:?}; expected u(w)")]
    Syntax(String),
    #[error(transparent)]
    Symbol(#[from] SymbolicError),
}

/// The infinite word `u w w w ...`, normalized: `w` is primitive and `u`
/// does not end with the last symbol of `w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryAddress {
    pre: Word,
    period: Word,
}

impl BoundaryAddress {
    pub fn new(mut pre: Word, mut period: Word) -> Result<Self, AddressError> {
        if period.is_empty() {
            return Err(AddressError::EmptyPeriod);
        }
        let p = period.len();
        if let Some(d) = (1..p).find(|&d| p % d == 0 && (d..p).all(|i| period[i] == period[i - d])) {
            period.truncate(d);
        }
        while pre.last().is_some() && pre.last() == period.last() {
            pre.pop();
            period.rotate_right(1);
        }
        Ok(BoundaryAddress { pre, period })
    }

    pub fn periodic(period: Word) -> Result<Self, AddressError> {
        Self::new(Vec::new(), period)
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.pre
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    pub fn symbol(&self, i: usize) -> u8 {
        if i < self.pre.len() {
            self.pre[i]
        } else {
            self.period[(i - self.pre.len()) % self.period.len()]
        }
    }

    pub fn prefix(&self, len: usize) -> Word {
        (0..len).map(|i| self.symbol(i)).collect()
    }

    /// The prefix lying in `J_n`.
    pub fn level_word(&self, ifs: &IfsSpec, n: usize) -> Result<Word, SymbolicError> {
        if self.symbols().any(|s| s as usize >= ifs.n_maps()) {
            return Err(SymbolicError::BadSymbol(self.symbols().max().unwrap()));
        }
        let rn = level_scale(ifs, n);
        let mut r = Q::one();
        let mut len = 0;
        while r > rn {
            r *= ifs.map(self.symbol(len) as usize).ratio();
            len += 1;
        }
        truncate_to_level(ifs, &self.prefix(len), n)
    }

    fn symbols(&self) -> impl Iterator<Item = u8> + '_ {
        self.pre.iter().chain(&self.period).copied()
    }

    /// Display with the preset's symbol base.
    pub fn label(&self, base: usize, n_maps: usize) -> String {
        format!("{}({})", word_or_empty(&self.pre, base, n_maps), fmt_word(&self.period, base, n_maps))
    }

    pub fn parse(s: &str, base: usize, n_maps: usize) -> Result<Self, AddressError> {
        let t = s.trim();
        let open = t.find('(').ok_or_else(|| AddressError::Syntax(s.to_string()))?;
        let inner = t[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| AddressError::Syntax(s.to_string()))?;
        let pre = if open == 0 { Vec::new() } else { parse_word(&t[..open], base, n_maps)? };
        Self::new(pre, parse_word(inner, base, n_maps)?)
    }
}

fn word_or_empty(w: &[u8], base: usize, n: usize) -> String {
    if w.is_empty() {
        String::new()
    } else {
        fmt_word(w, base, n)
    }
}

impl fmt::Display for BoundaryAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.symbols().max().unwrap_or(0) as usize + 1;
        write!(f, "{}", self.label(0, n.max(2)))
    }
}

impl FromStr for BoundaryAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, 0, 10)
    }
}

impl Serialize for BoundaryAddress {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Vertices `[i|_0], ..., [i|_depth]` of `g` along the address.
pub fn ray(ifs: &IfsSpec, g: &AugmentedGraph, addr: &BoundaryAddress, depth: usize) -> Result<Vec<VId>, SymbolicError> {
    (0..=depth.min(g.depth()))
        .map(|n| {
            let w = addr.level_word(ifs, n)?;
            let i = g
                .table
                .find_word(ifs, n, &w)
                .ok_or(SymbolicError::PrefixTooShort { len: w.len(), level: n })?;
            Ok((n, i))
        })
        .collect()
}

/// `Φ(u w^∞) = S_u(fix S_w)`, exactly.
pub fn phi_exact(ifs: &IfsSpec, addr: &BoundaryAddress) -> Point {
    ifs.word_map(&addr.pre).apply(&ifs.word_map(&addr.period).fixed_point())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryPointApprox {
    #[serde(serialize_with = "ser_point")]
    pub point: Point,
    #[serde(serialize_with = "ser_q")]
    pub error_radius: Q,
    pub depth: usize,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(x))
}

fn ser_point<S: serde::Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_vec(p))
}

/// `S_u(x0)` for the level-`depth` prefix `u`; `Φ` lies within the error radius.
pub fn phi(ifs: &IfsSpec, addr: &BoundaryAddress, depth: usize, x0: Option<&[Q]>) -> Result<BoundaryPointApprox, SymbolicError> {
    let ball = ifs.invariant_ball();
    let u = addr.level_word(ifs, depth)?;
    let x0: Point = x0.map(<[Q]>::to_vec).unwrap_or_else(|| ball.center.clone());
    let off = if x0 == ball.center {
        Q::zero()
    } else {
        sqrt_upper(&dist2(&x0, &ball.center))
    };
    Ok(BoundaryPointApprox {
        point: ifs.word_map(&u).apply(&x0),
        error_radius: ifs.word_ratio(&u) * (off + &ball.radius),
        depth,
    })
}

/// Certified bounds on `|Φξ - Φη|`.
pub fn phi_distance(ifs: &IfsSpec, a: &BoundaryAddress, b: &BoundaryAddress) -> (Q, Q) {
    sqrt_bounds(&dist2(&phi_exact(ifs, a), &phi_exact(ifs, b)))
}

/// The two rays of a pair inside a graph, with their level distances.
#[derive(Clone, Debug)]
pub struct PairRays {
    pub graph: AugmentedGraph,
    pub x: Vec<VId>,
    pub y: Vec<VId>,
    pub dist: Vec<u32>,
    pub windowed: bool,
}

/// Whether `pair_rays` can restrict the graph to a window around the pair.
pub fn windowable(ifs: &IfsSpec, view: View) -> bool {
    let max = ifs.maps().iter().map(|m| m.ratio()).max().unwrap();
    view == View::E && max * qi(2) <= Q::one()
}

/// Builds the rays of `a` and `b` to `depth` and the distances `d(x_n, y_n)`.
///
/// With `full` the given graph is used. Otherwise, for the E view of a system
/// with all ratios at most `1/2`, level `h` only keeps classes whose cylinder
/// ball meets `B(Φξ, ρ_h) ∪ B(Φη, ρ_h)` with `ρ_h = 2R r^h (d(x_{h-1}, y_{h-1}) + 2)`,
/// which contains every canonical geodesic between `x_h` and `y_h`.
pub fn pair_rays(
    oracle: &Oracle,
    a: &BoundaryAddress,
    b: &BoundaryAddress,
    depth: usize,
    view: View,
    mode: Mode,
    full: Option<&AugmentedGraph>,
) -> Result<PairRays, GraphError> {
    let ifs = oracle.ifs();
    let dist_along = |g: &AugmentedGraph, x: &[VId], y: &[VId]| -> Vec<u32> {
        let adj = g.adjacency(view);
        x.iter()
            .zip(y)
            .map(|(&u, &v)| adj.bfs(adj.id(u))[adj.id(v)])
            .collect()
    };
    if full.is_some() || !windowable(ifs, view) {
        let owned;
        let g = match full {
            Some(g) if g.depth() >= depth => g,
            _ => {
                owned = AugmentedGraph::build(oracle, depth, mode)?;
                &owned
            }
        };
        let x = ray(ifs, g, a, depth)?;
        let y = ray(ifs, g, b, depth)?;
        let dist = dist_along(g, &x, &y);
        return Ok(PairRays {
            graph: g.clone(),
            x,
            y,
            dist,
            windowed: false,
        });
    }

    let ball = oracle.ball().clone();
    let (pa, pb) = (phi_exact(ifs, a), phi_exact(ifs, b));
    let mut g = AugmentedGraph::root(ifs);
    let mut x = vec![(0, 0)];
    let mut y = vec![(0, 0)];
    let mut dist = vec![0u32];
    for h in 1..=depth {
        let rho = qi(2) * &ball.radius * level_scale(ifs, h) * qi(dist[h - 1] as i64 + 2);
        let keep = |m: &Similitude| {
            let c = ball.image(m);
            let reach = &c.radius + &rho;
            let r2 = &reach * &reach;
            dist2(&c.center, &pa) <= r2 || dist2(&c.center, &pb) <= r2
        };
        g.extend(oracle, mode, Some(&keep), DEFAULT_LEVEL_CAP)?;
        let rx = ray(ifs, &g, a, h)?;
        let ry = ray(ifs, &g, b, h)?;
        x.push(rx[h]);
        y.push(ry[h]);
        let adj = g.adjacency(view);
        dist.push(adj.bfs_multi(&[adj.id(x[h])])[adj.id(y[h])]);
    }
    Ok(PairRays {
        graph: g,
        x,
        y,
        dist,
        windowed: true,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GromovStatus {
    Stabilized,
    Unstabilized,
    SamePoint,
}

/// `|x_n ∧ y_n|` along two rays.
#[derive(Clone, Debug, Serialize)]
pub struct GromovEstimate {
    pub values: Vec<Half>,
    pub distances: Vec<u32>,
    pub value: Half,
    pub status: GromovStatus,
    pub monotone: bool,
    pub windowed: bool,
}

impl GromovEstimate {
    pub fn stabilized(&self) -> bool {
        self.status == GromovStatus::Stabilized
    }
}

pub const DEFAULT_STABLE_LEVELS: usize = 3;

pub fn gromov_from_rays(rays: &PairRays, stable: usize) -> GromovEstimate {
    let values: Vec<Half> = rays
        .dist
        .iter()
        .enumerate()
        .map(|(n, &d)| {
            assert_ne!(d, UNREACHED, "rays lie in one connected graph");
            Half(gromov_twice(n, n, d))
        })
        .collect();
    let monotone = values.windows(2).all(|w| w[0] <= w[1]);
    let same = rays.dist.iter().all(|&d| d <= 1);
    let k = stable.max(1);
    let tail = &values[values.len().saturating_sub(k)..];
    let status = if same {
        GromovStatus::SamePoint
    } else if values.len() >= k && tail.iter().all(|v| *v == tail[0]) {
        GromovStatus::Stabilized
    } else {
        GromovStatus::Unstabilized
    };
    GromovEstimate {
        value: *values.last().unwrap(),
        values,
        distances: rays.dist.clone(),
        status,
        monotone,
        windowed: rays.windowed,
    }
}

pub fn boundary_gromov(
    oracle: &Oracle,
    view: View,
    a: &BoundaryAddress,
    b: &BoundaryAddress,
    depth: usize,
    stable: usize,
    full: Option<&AugmentedGraph>,
) -> Result<GromovEstimate, GraphError> {
    let rays = pair_rays(oracle, a, b, depth, view, Mode::Strict, full)?;
    Ok(gromov_from_rays(&rays, stable))
}

/// `α = -ln r / a`.
pub fn alpha(r: &Q, a: f64) -> f64 {
    -to_f64(r).ln() / a
}

/// `ρ_a(ξ, η)^α = r^{|ξ∧η|}`.
pub fn rho_alpha(r: &Q, g: Half) -> f64 {
    to_f64(r).powf(g.to_f64())
}

/// `(L + 1) r^{-L/2} 2R`.
pub fn holder_constant(r: &Q, l: u32, radius: &Q) -> f64 {
    (l as f64 + 1.0) * to_f64(r).powf(-(l as f64) / 2.0) * 2.0 * to_f64(radius)
}

#[derive(Clone, Debug, Serialize)]
pub struct PairRow {
    pub xi: BoundaryAddress,
    pub eta: BoundaryAddress,
    #[serde(serialize_with = "ser_q")]
    pub dist_lower: Q,
    #[serde(serialize_with = "ser_q")]
    pub dist_upper: Q,
    pub gromov: Half,
    pub status: GromovStatus,
    pub rho_alpha: f64,
    /// `dist_upper / ρ^α` for the upper check, `dist_lower / ρ^α` for the lower one.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub a: f64,
    pub alpha: f64,
    pub l: u32,
    pub constant: f64,
    pub rows: Vec<PairRow>,
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub violations: usize,
    pub flagged: usize,
}

/// Gromov estimates along E-view rays, one per pair, in order.
pub fn pair_estimates(
    oracle: &Oracle,
    pairs: &[(BoundaryAddress, BoundaryAddress)],
    depth: usize,
    stable: usize,
    full: Option<&AugmentedGraph>,
) -> Result<Vec<GromovEstimate>, GraphError> {
    pairs
        .iter()
        .map(|(a, b)| boundary_gromov(oracle, View::E, a, b, depth, stable, full))
        .collect()
}

fn pair_rows(ifs: &IfsSpec, pairs: &[(BoundaryAddress, BoundaryAddress)], ests: &[GromovEstimate], upper: bool) -> Vec<PairRow> {
    let r = ifs.min_ratio().clone();
    pairs
        .par_iter()
        .zip(ests)
        .map(|((a, b), est)| {
            let (lo, hi) = phi_distance(ifs, a, b);
            let ra = rho_alpha(&r, est.value);
            let ratio = (est.stabilized() && a != b).then(|| to_f64(if upper { &hi } else { &lo }) / ra);
            PairRow {
                xi: a.clone(),
                eta: b.clone(),
                dist_lower: lo,
                dist_upper: hi,
                gromov: est.value,
                status: est.status.clone(),
                rho_alpha: ra,
                ratio,
            }
        })
        .collect()
}

fn summarize(a: f64, l: u32, constant: f64, r: &Q, rows: Vec<PairRow>, upper: bool) -> HolderReport {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let violations = if upper {
        ratios.iter().filter(|&&x| x > constant * (1.0 + 1e-12)).count()
    } else {
        0
    };
    HolderReport {
        a,
        alpha: alpha(r, a),
        l,
        constant,
        flagged: rows.iter().filter(|r| r.ratio.is_none() && r.xi != r.eta).count(),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        rows,
        violations,
    }
}

/// `|Φξ - Φη| <= C ρ_a(ξ,η)^α` with `C = (L+1) r^{-L/2} 2R` over the pairs.
/// Pairs whose Gromov estimate has not stabilized are flagged and skipped.
pub fn holder_upper_check(
    oracle: &Oracle,
    pairs: &[(BoundaryAddress, BoundaryAddress)],
    a: f64,
    l: u32,
    depth: usize,
    full: Option<&AugmentedGraph>,
) -> Result<HolderReport, GraphError> {
    let ests = pair_estimates(oracle, pairs, depth, DEFAULT_STABLE_LEVELS, full)?;
    Ok(holder_upper_from(oracle, pairs, &ests, a, l))
}

pub fn holder_upper_from(
    oracle: &Oracle,
    pairs: &[(BoundaryAddress, BoundaryAddress)],
    ests: &[GromovEstimate],
    a: f64,
    l: u32,
) -> HolderReport {
    let r = oracle.ifs().min_ratio().clone();
    let constant = holder_constant(&r, l, &oracle.ball().radius);
    summarize(a, l, constant, &r, pair_rows(oracle.ifs(), pairs, ests, true), true)
}

/// `min |Φξ - Φη| / ρ_a(ξ,η)^α` over the pairs (lower distance bound).
pub fn bilipschitz_lower_check(
    oracle: &Oracle,
    pairs: &[(BoundaryAddress, BoundaryAddress)],
    a: f64,
    depth: usize,
    full: Option<&AugmentedGraph>,
) -> Result<HolderReport, GraphError> {
    let ests = pair_estimates(oracle, pairs, depth, DEFAULT_STABLE_LEVELS, full)?;
    Ok(bilipschitz_lower_from(oracle, pairs, &ests, a))
}

pub fn bilipschitz_lower_from(
    oracle: &Oracle,
    pairs: &[(BoundaryAddress, BoundaryAddress)],
    ests: &[GromovEstimate],
    a: f64,
) -> HolderReport {
    let r = oracle.ifs().min_ratio().clone();
    summarize(a, 0, f64::NAN, &r, pair_rows(oracle.ifs(), pairs, ests, false), false)
}

/// Deterministic pseudo-random address pairs.
pub fn sample_pairs(ifs: &IfsSpec, count: usize, seed: u64, max_pre: usize, max_period: usize) -> Vec<(BoundaryAddress, BoundaryAddress)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ifs.n_maps() as u8;
    let mut word = |min: usize, max: usize| -> Word {
        let len = rng.gen_range(min..=max);
        (0..len).map(|_| rng.gen_range(0..n)).collect()
    };
    (0..count)
        .map(|_| {
            let a = BoundaryAddress::new(word(0, max_pre), word(1, max_period)).unwrap();
            let b = BoundaryAddress::new(word(0, max_pre), word(1, max_period)).unwrap();
            (a, b)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GapTrend {
    BoundedBelow,
    Decaying,
    Vacuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionHRow {
    pub level: usize,
    pub pairs: usize,
    pub disjoint: usize,
    pub unknown: usize,
    pub partial: bool,
    /// Smallest certified gap lower bound divided by `r^n`.
    #[serde(serialize_with = "ser_opt_q")]
    pub min_normalized: Option<Q>,
    #[serde(serialize_with = "ser_opt_q")]
    pub min_normalized_upper: Option<Q>,
}

fn ser_opt_q<S: serde::Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&fmt_q(v)),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignatedGap {
    pub k: usize,
    pub level: usize,
    pub xi: BoundaryAddress,
    pub eta: BoundaryAddress,
    pub verdict: String,
    #[serde(serialize_with = "ser_q")]
    pub normalized_lower: Q,
    #[serde(serialize_with = "ser_q")]
    pub normalized_upper: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionHReport {
    pub rows: Vec<ConditionHRow>,
    pub designated: Vec<DesignatedGap>,
    pub trend: GapTrend,
}

/// Extra refinement levels used by the gap bounds.
pub const GAP_EXTRA: usize = 4;

/// Condition (H) row of level `n`: over same-level class pairs found disjoint,
/// the smallest certified gap divided by `r^n`. Pairs far apart are skipped by
/// a sweep along the first coordinate once their ball gap exceeds the current
/// best upper bound.
pub fn condition_h_gap(oracle: &Oracle, g: &AugmentedGraph, n: usize) -> ConditionHRow {
    let ifs = oracle.ifs();
    let ball = oracle.ball();
    let level = &g.table.levels[n];
    let rn = level_scale(ifs, n);
    let centers: Vec<Vec<f64>> = level.iter().map(|c| ball.image(&c.map).center.iter().map(to_f64).collect()).collect();
    let mut order: Vec<(f64, f64, usize)> = level
        .iter()
        .enumerate()
        .map(|(i, c)| (centers[i][0], to_f64(&ball.image(&c.map).radius), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let max_rad = order.iter().map(|o| o.1).fold(0.0, f64::max);

    let mut row = ConditionHRow {
        level: n,
        pairs: 0,
        disjoint: 0,
        unknown: 0,
        partial: false,
        min_normalized: None,
        min_normalized_upper: None,
    };
    let mut best_upper = f64::INFINITY;
    let mut best_lower: Option<Q> = None;
    let mut best_upper_q: Option<Q> = None;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[j].0 - order[i].0 - 2.0 * max_rad > best_upper * (1.0 + 1e-9) + 1e-300 {
                break;
            }
            let (a, b) = (&level[order[i].2].map, &level[order[j].2].map);
            row.pairs += 1;
            match oracle.intersects(a, b) {
                Verdict::Intersects(_) => {}
                Verdict::Unknown { .. } => {
                    row.unknown += 1;
                    row.partial = true;
                }
                Verdict::Disjoint { .. } => {
                    row.disjoint += 1;
                    // Ball gaps only grow under refinement, so such a pair cannot lower either minimum.
                    let (ca, cb) = (&centers[order[i].2], &centers[order[j].2]);
                    let cd = ca.iter().zip(cb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                    if cd - order[i].1 - order[j].1 > best_upper * (1.0 + 1e-9) + 1e-12 * (1.0 + cd) {
                        continue;
                    }
                    let gb = oracle.gap_bounds(a, b, GAP_EXTRA);
                    if best_lower.as_ref().map_or(true, |l| gb.lower < *l) {
                        best_lower = Some(gb.lower.clone());
                    }
                    if best_upper_q.as_ref().map_or(true, |u| gb.upper < *u) {
                        best_upper = to_f64(&gb.upper);
                        best_upper_q = Some(gb.upper);
                    }
                }
            }
        }
    }
    row.min_normalized = best_lower.map(|l| l / &rn);
    row.min_normalized_upper = best_upper_q.map(|u| u / &rn);
    row
}

/// Gap between the level cylinders of a designated pair, normalized by `r^n`.
pub fn designated_gap(oracle: &Oracle, k: usize, n: usize, xi: &BoundaryAddress, eta: &BoundaryAddress) -> Result<DesignatedGap, SymbolicError> {
    let ifs = oracle.ifs();
    let a = ifs.word_map(&xi.level_word(ifs, n)?);
    let b = ifs.word_map(&eta.level_word(ifs, n)?);
    let v = oracle.intersects(&a, &b);
    let gb = oracle.gap_bounds(&a, &b, GAP_EXTRA);
    let rn = level_scale(ifs, n);
    Ok(DesignatedGap {
        k,
        level: n,
        xi: xi.clone(),
        eta: eta.clone(),
        verdict: v.kind().to_string(),
        normalized_lower: gb.lower / &rn,
        normalized_upper: gb.upper / &rn,
    })
}

/// Decaying when the later half of the rows has a minimum below half the
/// minimum of the earlier half.
pub fn classify_trend(values: &[Q]) -> GapTrend {
    if values.len() < 2 {
        return GapTrend::Vacuous;
    }
    let mid = values.len() / 2;
    let early = values[..mid].iter().min().unwrap();
    let late = values[mid..].iter().min().unwrap();
    if late * qi(2) < *early {
        GapTrend::Decaying
    } else {
        GapTrend::BoundedBelow
    }
}

pub fn condition_h_report(
    oracle: &Oracle,
    g: &AugmentedGraph,
    designated: &[(usize, usize, BoundaryAddress, BoundaryAddress)],
) -> Result<ConditionHReport, SymbolicError> {
    let rows: Vec<ConditionHRow> = (0..=g.depth()).map(|n| condition_h_gap(oracle, g, n)).collect();
    let designated: Vec<DesignatedGap> = designated
        .iter()
        .map(|(k, n, xi, eta)| designated_gap(oracle, *k, *n, xi, eta))
        .collect::<Result<_, _>>()?;
    let trend = if designated.is_empty() {
        let vals: Vec<Q> = rows.iter().filter_map(|r| r.min_normalized.clone()).collect();
        classify_trend(&vals)
    } else {
        let vals: Vec<Q> = designated.iter().map(|d| d.normalized_upper.clone()).collect();
        classify_trend(&vals)
    };
    Ok(ConditionHReport { rows, designated, trend })
}

/// Normalized gap per level, for external plotting.
pub fn gap_plot_csv(rep: &ConditionHReport) -> String {
    let mut out = String::from("level,min_normalized_lower,min_normalized_lower_approx,partial\n");
    for r in &rep.rows {
        let (e, a) = match &r.min_normalized {
            Some(v) => (fmt_q(v), fmt_sig12(to_f64(v))),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!("{},{},{},{}\n", r.level, e, a, r.partial));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct NetReport {
    pub level: usize,
    pub samples: usize,
    pub covered: usize,
    pub uncovered: Vec<BoundaryAddress>,
}

/// Every sample `Φ(ξ)` lies within `2R r^n` of `S_v(fix S_0)` for some
/// level-`n` vertex `v`.
pub fn net_check(ifs: &IfsSpec, g: &AugmentedGraph, n: usize, samples: &[BoundaryAddress]) -> NetReport {
    let ball = ifs.invariant_ball();
    let tail = ifs.map(0).fixed_point();
    let reach = qi(2) * &ball.radius * level_scale(ifs, n);
    let r2 = &reach * &reach;
    let marks: Vec<Point> = g.table.levels[n].iter().map(|c| c.map.apply(&tail)).collect();
    let uncovered: Vec<BoundaryAddress> = samples
        .par_iter()
        .filter(|s| {
            let p = phi_exact(ifs, s);
            !marks.iter().any(|m| dist2(m, &p) <= r2)
        })
        .cloned()
        .collect();
    NetReport {
        level: n,
        samples: samples.len(),
        covered: samples.len() - uncovered.len(),
        uncovered,
    }
}

/// All `u (w)` with `|u| <= max_pre`, `1 <= |w| <= max_period`, normalized and deduplicated.
pub fn all_addresses(n_maps: usize, max_pre: usize, max_period: usize) -> Vec<BoundaryAddress> {
    let words = |lo: usize, hi: usize| -> Vec<Word> {
        let mut out = Vec::new();
        let mut layer: Vec<Word> = vec![Vec::new()];
        for len in 0..=hi {
            if len >= lo {
                out.extend(layer.iter().cloned());
            }
            layer = layer
                .iter()
                .flat_map(|w| {
                    (0..n_maps as u8).map(move |s| {
                        let mut v = w.clone();
                        v.push(s);
                        v
                    })
                })
                .collect();
        }
        out
    };
    let mut out: Vec<BoundaryAddress> = words(0, max_pre)
        .into_iter()
        .flat_map(|u| {
            words(1, max_period)
                .into_iter()
                .map(move |w| BoundaryAddress::new(u.clone(), w).unwrap())
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Per-pair CSV: exact distance bounds and approximate real diagnostics.
pub fn pairs_csv(rep: &HolderReport, base: usize, n_maps: usize) -> String {
    let mut out = String::from("xi,eta,dist_lower,dist_upper,gromov,status,rho_alpha_approx,ratio_approx\n");
    for r in &rep.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:?},{},{}\n",
            r.xi.label(base, n_maps),
            r.eta.label(base, n_maps),
            fmt_q(&r.dist_lower),
            fmt_q(&r.dist_upper),
            r.gromov,
            r.status,
            fmt_sig12(r.rho_alpha),
            r.ratio.map(fmt_sig12).unwrap_or_default(),
        ));
    }
    out
}
