//! Acceptance criteria, run in order with their time limits.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{brute_delta_twice, brute_fan, brute_l, offset, IntervalModel};
use ifsgraph::boundary::{self, BoundaryAddress, GromovEstimate};
use ifsgraph::graph::{AugmentedGraph, Mode, View};
use ifsgraph::hyperbolic::{self, Half, LevelDistances, Metric};
use ifsgraph::intersect::Oracle;
use ifsgraph::presets::{self, Preset};
use ifsgraph::rational::{pow, q, qi};
use ifsgraph::symbolic::{quotient_level, DEFAULT_LEVEL_CAP};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn build(p: &Preset, depth: usize) -> (Oracle, AugmentedGraph) {
    let o = Oracle::new(&p.ifs, p.caps);
    let g = AugmentedGraph::build(&o, depth, Mode::Strict).expect("graph builds");
    (o, g)
}

fn named(name: &str) -> Preset {
    presets::by_name(name).expect("known preset")
}

/// Level-2 quotient of interval3.
fn c1_quotient() -> Outcome {
    let classes = quotient_level(&presets::interval3(), 2, DEFAULT_LEVEL_CAP).map_err(|e| e.to_string())?;
    let ifs = presets::interval3();
    let got: Vec<String> = classes.iter().map(|c| c.label(&ifs)).collect();
    let want = ["[00]", "[01]", "[02,10]", "[11]", "[12,20]", "[21]", "[22]"];
    ensure(got == want, || format!("classes {got:?}"))?;
    Ok(format!("{} classes", got.len()))
}

/// Horizontal degrees at levels 2..=6 and the E◇ degree of `[1]`.
fn c2_degrees() -> Outcome {
    let p = named("interval3");
    let (_, g) = build(&p, 6);
    for n in 2..=6 {
        let last = (1i64 << (n + 1)) - 2;
        for (i, c) in g.table.levels[n].iter().enumerate() {
            let m = offset(c.rep());
            let want = if m == 0 || m == last {
                2
            } else if m == 1 || m == last - 1 {
                3
            } else {
                4
            };
            let got = g.horizontal[n][i].len();
            ensure(got == want, || format!("level {n}: {} has degree {got}", c.label(&p.ifs)))?;
        }
        let zeros = vec![0u8; n];
        let twos = vec![2u8; n];
        let mut z1 = vec![0u8; n - 1];
        z1.push(1);
        let mut t1 = vec![2u8; n - 1];
        t1.push(1);
        for (w, want) in [(zeros, 2), (twos, 2), (z1, 3), (t1, 3)] {
            let i = g.table.find_word(&p.ifs, n, &w).ok_or("missing word")?;
            ensure(g.horizontal[n][i].len() == want, || format!("level {n}: {w:?}"))?;
        }
    }
    let one = g.find_label(&p.ifs, "[1]").ok_or("no vertex [1]")?;
    let deg = g.neighbors(View::Diamond, one).len();
    ensure(deg == 8, || format!("[1] has {deg} E◇ edges"))?;
    Ok("degrees 2/3/4 at levels 2-6, [1] has 8 E◇ edges".into())
}

/// `d◇ <= d + 1` on every pair.
fn c3_lemma() -> Outcome {
    let mut pairs = 0;
    for name in ["interval3", "gasket3", "mixed-ratio"] {
        let (_, g) = build(&named(name), 4);
        let rep = hyperbolic::quasi_isometry_check(&Metric::new(&g, View::E), &Metric::new(&g, View::Diamond));
        ensure(rep.violations == 0, || format!("{name}: {} violations, first {:?}", rep.violations, rep.first_violation))?;
        pairs += rep.pairs;
    }
    Ok(format!("{pairs} pairs, 0 violations"))
}

/// Diamond law and even same-level distances in E◇.
fn c4_diamond() -> Outcome {
    let mut checked = Vec::new();
    for p in presets::catalog() {
        let (_, g) = build(&p, 4);
        let rep = hyperbolic::diamond_check(&Metric::new(&g, View::Diamond));
        ensure(rep.passed(), || format!("{}: {rep:?}", p.name))?;
        checked.push(format!("{}({})", p.name, g.len()));
    }
    Ok(checked.join(" "))
}

/// Canonical geodesic shapes reproduce the Gromov products.
fn c5_gromov_shapes() -> Outcome {
    let mut total = 0usize;
    for p in presets::catalog() {
        let (_, g) = build(&p, 4);
        let me = Metric::new(&g, View::E);
        let md = Metric::new(&g, View::Diamond);
        let hd = LevelDistances::new(&me.adj);
        let verts: Vec<_> = g.table.vertices().collect();
        for &x in &verts {
            for &y in &verts {
                let pe = hyperbolic::canonical_geodesic_e(&me, &hd, x, y);
                ensure(pe.len() as u32 == me.d(x, y), || format!("{}: E length {x:?} {y:?}", p.name))?;
                ensure(pe.gromov_from_shape() == me.gromov(x, y), || {
                    format!("{}: E shape {x:?} {y:?}: {} vs {}", p.name, pe.gromov_from_shape(), me.gromov(x, y))
                })?;
                let pd = hyperbolic::canonical_geodesic_diamond(&md, x, y);
                ensure(pd.len() as u32 == md.d(x, y), || format!("{}: E◇ length {x:?} {y:?}", p.name))?;
                ensure(Half::from_int(pd.top_level as i64) == md.gromov(x, y), || {
                    format!("{}: E◇ top {x:?} {y:?}: {} vs {}", p.name, pd.top_level, md.gromov(x, y))
                })?;
                total += 1;
            }
        }
    }
    Ok(format!("{total} ordered pairs"))
}

/// δ, L and δ' on interval3 at depths 3..=5, against the integer model.
fn c6_constants() -> Outcome {
    let p = named("interval3");
    let mut seen = Vec::new();
    let mut problems = Vec::new();
    for depth in 3..=5 {
        let (_, g) = build(&p, depth);
        let rep = hyperbolic::hyperbolicity_report(&g);
        let model = IntervalModel::new(depth);
        let levels: Vec<usize> = model.nodes.iter().map(|n| n.0).collect();
        let delta2 = brute_delta_twice(&IntervalModel::all_pairs(&model.adj_e), &levels);
        let l = brute_l(&model);
        let fan = brute_fan(&model);
        if rep.delta.twice() != delta2 || rep.l_per_level != l || rep.delta_prime != fan {
            return Err(format!("depth {depth}: report disagrees with brute force"));
        }
        if rep.delta.twice() > 2 {
            problems.push(format!("depth {depth}: delta {}", rep.delta));
        }
        if rep.l_per_level[1..].iter().any(|&x| x != 1) {
            problems.push(format!("depth {depth}: L per level {:?}", rep.l_per_level));
        }
        if rep.delta_prime != 2 {
            problems.push(format!("depth {depth}: delta' {}", rep.delta_prime));
        }
        seen.push((rep.delta, rep.l_max, rep.delta_prime));
    }
    if seen.windows(2).any(|w| w[0] != w[1]) {
        problems.push(format!("unstable across depths: {seen:?}"));
    }
    let (d, l, dp) = seen[seen.len() - 1];
    let summary = format!("delta {d}, L max {l}, delta' {dp}");
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

/// Every build decision re-verifies; no Unknown on the OSC presets.
fn c7_soundness() -> Outcome {
    let mut runs: Vec<(Preset, usize)> = vec![(named("interval3"), 5), (named("gasket3"), 6)];
    for p in presets::catalog() {
        runs.push((p, 4));
    }
    let mut verified = 0;
    for (p, depth) in runs {
        let (o, g) = build(&p, depth);
        for (a, b, v) in &g.decisions {
            ensure(!v.is_unknown(), || format!("{} depth {depth}: unknown {a:?} {b:?}", p.name))?;
            let (sa, sb) = (&g.table.class(*a).map, &g.table.class(*b).map);
            ensure(o.verify(sa, sb, v), || format!("{}: certificate of {a:?} {b:?} fails", p.name))?;
            verified += 1;
        }
    }
    Ok(format!("{verified} certificates re-verified, 0 unknown"))
}

/// Hölder upper bound on 100 pairs and the pair `(0)`, `(2)`.
fn c8_holder() -> Outcome {
    let p = named("interval3");
    let (o, g) = build(&p, 5);
    let me = Metric::new(&g, View::E);
    let hd = LevelDistances::new(&me.adj);
    let l = hyperbolic::horizontal_geodesic_bound(&me, &hd).into_iter().max().unwrap();
    let delta = hyperbolic::delta_hyperbolicity(&me).delta;
    let a = hyperbolic::a_max(delta) / 2.0;
    let pairs = boundary::sample_pairs(&p.ifs, 100, 8, 3, 3);
    let rep = boundary::holder_upper_check(&o, &pairs, a, l, 14, None).map_err(|e| e.to_string())?;
    ensure(rep.violations == 0, || format!("{} violations", rep.violations))?;
    let unchecked: Vec<_> = rep
        .rows
        .iter()
        .filter(|r| r.ratio.is_none() && r.dist_upper > qi(0))
        .collect();
    ensure(unchecked.is_empty(), || format!("{} distinct pairs left unchecked", unchecked.len()))?;

    let zero = BoundaryAddress::periodic(vec![0]).unwrap();
    let two = BoundaryAddress::periodic(vec![2]).unwrap();
    let one = boundary::holder_upper_check(&o, &[(zero, two)], a, l, 14, None).map_err(|e| e.to_string())?;
    let ratio = one.rows[0].ratio.ok_or("(0),(2) did not stabilize")?;
    let hand = 2.0 * std::f64::consts::SQRT_2;
    ensure((ratio - hand).abs() <= 1e-9, || format!("(0),(2) ratio {ratio}"))?;
    Ok(format!(
        "max ratio {:.6} <= C {:.6} (L = {l}), (0),(2) ratio {ratio:.12}",
        rep.max_ratio.unwrap_or(0.0),
        rep.constant
    ))
}

/// Gap exactly 1 on interval3; designated example2-1d gaps `c_k 3^{-(k+1)}` with `1 < c_k < 3/2`
/// and decreasing lower ratios along the designated pairs.
fn c9_condition_h() -> Outcome {
    let mut problems = Vec::new();
    let p = named("interval3");
    let (o, g) = build(&p, 6);
    let mut rows = Vec::new();
    for n in 1..=6 {
        let row = boundary::condition_h_gap(&o, &g, n);
        let exact = row.min_normalized == Some(qi(1)) && row.min_normalized_upper == Some(qi(1));
        if !exact {
            problems.push(format!(
                "interval3 level {n}: gap {:?} ({} disjoint of {} pairs)",
                row.min_normalized.as_ref().map(|v| v.to_string()),
                row.disjoint,
                row.pairs
            ));
        }
        rows.push(row);
    }

    let e2 = named("example2-1d(4)");
    let (o2, g2) = build(&e2, 4);
    let a2 = hyperbolic::a_max(hyperbolic::delta_hyperbolicity(&Metric::new(&g2, View::E)).delta) / 2.0;
    let mut cs = Vec::new();
    for d in &e2.designated {
        let gap = boundary::designated_gap(&o2, d.k, d.level, &d.xi, &d.eta).map_err(|e| e.to_string())?;
        if gap.normalized_lower != gap.normalized_upper {
            problems.push(format!("k = {}: gap not exact", d.k));
        }
        let c = &gap.normalized_lower * pow(&qi(3), d.k + 1);
        if !(c > qi(1) && c < q(3, 2)) {
            problems.push(format!("k = {}: c_k = {c}", d.k));
        }
        cs.push(c);
    }

    let pairs: Vec<(BoundaryAddress, BoundaryAddress)> =
        e2.designated.iter().map(|d| (d.xi.clone(), d.eta.clone())).collect();
    let depth = e2.valid_depth.expect("truncated family");
    let ests: Vec<GromovEstimate> = boundary::pair_estimates(&o2, &pairs, depth, boundary::DEFAULT_STABLE_LEVELS, None)
        .map_err(|e| e.to_string())?;
    let lower = boundary::bilipschitz_lower_from(&o2, &pairs, &ests, a2);
    let ratios: Vec<Option<f64>> = lower.rows.iter().map(|r| r.ratio).collect();
    let decreasing = ratios.iter().all(Option::is_some) && ratios.windows(2).all(|w| w[1] < w[0]);
    if !decreasing {
        problems.push(format!("lower ratios at depth {depth}: {ratios:?}"));
    }

    let summary = format!(
        "c_k = [{}], lower ratios {:?}",
        cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "),
        ratios
    );
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

/// `|x_n ∧ y_n|` is nondecreasing along every tested pair to depth 8.
fn c10_monotone() -> Outcome {
    let mut total = 0;
    for p in presets::catalog() {
        let o = Oracle::new(&p.ifs, p.caps);
        let mut pairs = boundary::sample_pairs(&p.ifs, 6, 10, 2, 2);
        pairs.extend(p.designated.iter().map(|d| (d.xi.clone(), d.eta.clone())));
        let full;
        let g = if boundary::windowable(&p.ifs, View::E) {
            None
        } else {
            full = AugmentedGraph::build(&o, 8, Mode::Strict).map_err(|e| e.to_string())?;
            Some(&full)
        };
        let ests = boundary::pair_estimates(&o, &pairs, 8, boundary::DEFAULT_STABLE_LEVELS, g).map_err(|e| e.to_string())?;
        for ((a, b), e) in pairs.iter().zip(&ests) {
            ensure(e.values.len() == 9, || format!("{}: {a} {b} has {} levels", p.name, e.values.len()))?;
            ensure(e.monotone, || format!("{}: {a} {b}: {:?}", p.name, e.values))?;
        }
        total += pairs.len();
    }
    Ok(format!("{total} pairs on {} presets", presets::NAMES.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "level-2 quotient", limit: secs(1), run: c1_quotient },
        Criterion { id: 2, name: "degree regression", limit: secs(10), run: c2_degrees },
        Criterion { id: 3, name: "d◇ <= d + 1", limit: secs(120), run: c3_lemma },
        Criterion { id: 4, name: "diamond and even-distance laws", limit: secs(120), run: c4_diamond },
        Criterion { id: 5, name: "Gromov product from geodesic shape", limit: secs(120), run: c5_gromov_shapes },
        Criterion { id: 6, name: "hyperbolicity constants", limit: secs(300), run: c6_constants },
        Criterion { id: 7, name: "certificate soundness", limit: secs(300), run: c7_soundness },
        Criterion { id: 8, name: "Hölder upper bound", limit: secs(60), run: c8_holder },
        Criterion { id: 9, name: "gap dichotomy", limit: secs(120), run: c9_condition_h },
        Criterion { id: 10, name: "boundary monotonicity", limit: secs(60), run: c10_monotone },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let t = Instant::now();
        let res = (c.run)();
        let el = t.elapsed();
        let res = match res {
            Ok(d) if el > c.limit => Err(format!("{d}; took {:.1}s, limit {}s", el.as_secs_f64(), c.limit.as_secs())),
            r => r,
        };
        match res {
            Ok(d) => println!("criterion {:>2} PASS [{:>7.2}s] {}: {d}", c.id, el.as_secs_f64(), c.name),
            Err(d) => {
                println!("criterion {:>2} FAIL [{:>7.2}s] {}: {d}", c.id, el.as_secs_f64(), c.name);
                failed.push(c.id);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed {:?}",
        criteria.len() - failed.len(),
        failed.len(),
        failed
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
