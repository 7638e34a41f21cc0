//! Built-in IFS catalog.

use crate::boundary::BoundaryAddress;
use crate::intersect::Caps;
use crate::rational::{pow, q, qi, Q};
use crate::similitude::{IfsSpec, Point, Similitude};

/// A named IFS together with the settings it is meant to be run with.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: String,
    pub ifs: IfsSpec,
    pub caps: Caps,
    /// Deepest level at which the preset is a faithful model (truncated families).
    pub valid_depth: Option<usize>,
    /// Designated boundary pairs `(xi_k, eta)` with the level at which each is examined.
    pub designated: Vec<DesignatedPair>,
}

#[derive(Clone, Debug)]
pub struct DesignatedPair {
    pub k: usize,
    pub level: usize,
    pub xi: BoundaryAddress,
    pub eta: BoundaryAddress,
}

pub const NAMES: &[&str] = &[
    "interval3",
    "gasket3",
    "interval2-osc",
    "mixed-ratio",
    "example2-1d",
    "example2-2d",
];

fn hom(r: Q, t: Vec<Q>) -> Similitude {
    Similitude::homothety(r, t).expect("preset maps are contractions")
}

/// `S_i(x) = (x + i)/2`, `i = 0, 1, 2`; attractor `[0, 2]`.
pub fn interval3() -> IfsSpec {
    let maps = (0..3).map(|i| hom(q(1, 2), vec![q(i, 2)])).collect();
    IfsSpec::new(maps)
        .unwrap()
        .with_label_base(0)
        .with_center(vec![qi(1)])
        .unwrap()
}

/// Sierpinski-type gasket on the triangle `(0,0), (1,0), (1/2,1)`.
pub fn gasket3() -> IfsSpec {
    let verts = [(qi(0), qi(0)), (qi(1), qi(0)), (q(1, 2), qi(1))];
    let maps = verts
        .iter()
        .map(|(a, b)| hom(q(1, 2), vec![a / qi(2), b / qi(2)]))
        .collect();
    IfsSpec::new(maps).unwrap().with_label_base(0)
}

/// `x/3` and `x/3 + 2/3`: the middle-thirds Cantor set, a tree.
pub fn interval2_osc() -> IfsSpec {
    let maps = vec![hom(q(1, 3), vec![qi(0)]), hom(q(1, 3), vec![q(2, 3)])];
    IfsSpec::new(maps).unwrap().with_label_base(0)
}

/// `x/2`, `x/4 + 1/2`, `x/4 + 3/4` on `[0, 1]`, labeled from 1.
pub fn mixed_ratio() -> IfsSpec {
    let maps = vec![
        hom(q(1, 2), vec![qi(0)]),
        hom(q(1, 4), vec![q(1, 2)]),
        hom(q(1, 4), vec![q(3, 4)]),
    ];
    IfsSpec::new(maps)
        .unwrap()
        .with_label_base(1)
        .with_center(vec![q(1, 2)])
        .unwrap()
}

/// Two maps with ratios `1/2` and `1/4` (`x/2`, `x/4 + 3/4`), labeled from 1.
pub fn two_ratio_pair() -> IfsSpec {
    let maps = vec![hom(q(1, 2), vec![qi(0)]), hom(q(1, 4), vec![q(3, 4)])];
    IfsSpec::new(maps).unwrap().with_label_base(1)
}

/// `n_k = 1 + k(k+1)/2`.
pub fn lacunary_level(k: usize) -> usize {
    1 + k * (k + 1) / 2
}

/// `sum_{k=1}^{k_max} 3^{-n_k}`.
pub fn lacunary_sum(k_max: usize) -> Q {
    (1..=k_max)
        .map(|k| pow(&q(1, 3), lacunary_level(k)))
        .sum()
}

/// Offset of the displaced map in the one-dimensional family: `1/3 + lambda`.
pub fn example2_1d_shift(k_max: usize) -> Q {
    q(1, 3) + lacunary_sum(k_max)
}

/// `x/3 + j/3` for `j = 0, 1, 2` and `x/3 + t` with `t = 1/3 + sum 3^{-n_k}`.
pub fn example2_1d_ifs(k_max: usize) -> IfsSpec {
    let t = example2_1d_shift(k_max);
    let maps = vec![
        hom(q(1, 3), vec![qi(0)]),
        hom(q(1, 3), vec![q(1, 3)]),
        hom(q(1, 3), vec![q(2, 3)]),
        hom(q(1, 3), vec![t]),
    ];
    IfsSpec::new(maps)
        .unwrap()
        .with_label_base(0)
        .with_center(vec![q(1, 2)])
        .unwrap()
}

/// Ternary digits `d_1 .. d_len` of a rational in `[0, 1)`.
fn ternary_digits(x: &Q, len: usize) -> Vec<u8> {
    let mut v = x.clone();
    let three = qi(3);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        v *= &three;
        let d = v.floor();
        out.push(num_traits::ToPrimitive::to_u8(&d.numer()).unwrap());
        v -= d;
    }
    out
}

/// `xi_k = w_k 2^inf` where `w_k` is the first `n_k - 1` ternary digits of `t`
/// followed by `0`, and `eta = 3 0^inf`.
pub fn example2_1d_pairs(k_max: usize) -> Vec<DesignatedPair> {
    let t = example2_1d_shift(k_max);
    let eta = BoundaryAddress::new(vec![3], vec![0]).unwrap();
    (1..k_max)
        .map(|k| {
            let n = lacunary_level(k);
            let mut w = ternary_digits(&t, n - 1);
            w.push(0);
            DesignatedPair {
                k,
                level: n,
                xi: BoundaryAddress::new(w, vec![2]).unwrap(),
                eta: eta.clone(),
            }
        })
        .collect()
}

/// Refinement cap of the example2 families: overlapping neighbor maps there
/// only close into cycles after several hundred steps.
pub const EXAMPLE2_REFINE_DEPTH: usize = 4096;

pub fn example2_1d(k_max: usize) -> Preset {
    let caps = Caps {
        refine_depth: EXAMPLE2_REFINE_DEPTH,
        ..Caps::default()
    };
    Preset {
        name: format!("example2-1d({k_max})"),
        ifs: example2_1d_ifs(k_max),
        caps,
        valid_depth: Some(lacunary_level(k_max) - 1),
        designated: example2_1d_pairs(k_max),
    }
}

/// Five maps `(x + q_i)/3` on the triangle `(0,0), (1,0), (1/2,1)`:
/// `q_0 = (0,0)`, `q_1 = (1,0)`, `q_2 = (2,0)`, `q_3 = (3 x0, 1)`, `q_4 = (1,2)`,
/// with `x0 = 1/2 - sum_{k <= k_max} 3^{-n_k}`.
pub fn example2_2d_ifs(k_max: usize) -> IfsSpec {
    let x0 = q(1, 2) - lacunary_sum(k_max);
    let offsets: [(Q, Q); 5] = [
        (qi(0), qi(0)),
        (qi(1), qi(0)),
        (qi(2), qi(0)),
        (qi(3) * x0, qi(1)),
        (qi(1), qi(2)),
    ];
    let maps = offsets
        .iter()
        .map(|(a, b)| hom(q(1, 3), vec![a / qi(3), b / qi(3)]))
        .collect();
    IfsSpec::new(maps).unwrap().with_label_base(0)
}

/// `xi_k = w_k 2^inf` with `w_k = 3 a_2 .. a_{n_k - 1} 0`, `eta = 1 4^inf`;
/// `a_i = 1` exactly when `i = n_j` for some `j`.
pub fn example2_2d_pairs(k_max: usize) -> Vec<DesignatedPair> {
    let eta = BoundaryAddress::new(vec![1], vec![4]).unwrap();
    let marks: Vec<usize> = (1..=k_max).map(lacunary_level).collect();
    (1..k_max)
        .map(|k| {
            let n = lacunary_level(k);
            let mut w = vec![3u8];
            for i in 2..n {
                w.push(u8::from(marks.contains(&i)));
            }
            w.push(0);
            DesignatedPair {
                k,
                level: n,
                xi: BoundaryAddress::new(w, vec![2]).unwrap(),
                eta: eta.clone(),
            }
        })
        .collect()
}

pub fn example2_2d(k_max: usize) -> Preset {
    let caps = Caps {
        refine_depth: EXAMPLE2_REFINE_DEPTH,
        ..Caps::default()
    };
    Preset {
        name: format!("example2-2d({k_max})"),
        ifs: example2_2d_ifs(k_max),
        caps,
        valid_depth: Some(lacunary_level(k_max) - 1),
        designated: example2_2d_pairs(k_max),
    }
}

fn plain(name: &str, ifs: IfsSpec) -> Preset {
    Preset {
        name: name.to_string(),
        ifs,
        caps: Caps::default(),
        valid_depth: None,
        designated: Vec::new(),
    }
}

pub const DEFAULT_K_MAX: usize = 4;

pub fn catalog() -> Vec<Preset> {
    NAMES.iter().map(|n| by_name(n).unwrap()).collect()
}

/// Looks up `name`, `name(k)` or `name:k` (the latter two for the example2 families).
pub fn by_name(spec: &str) -> Option<Preset> {
    let s = spec.trim();
    let (base, arg) = match s.find(['(', ':']) {
        Some(i) => {
            let rest = s[i + 1..].trim_end_matches(')');
            (&s[..i], Some(rest.trim().parse::<usize>().ok()?))
        }
        None => (s, None),
    };
    let k = arg.unwrap_or(DEFAULT_K_MAX);
    if k < 2 && base.starts_with("example2") {
        return None;
    }
    match (base, arg) {
        ("interval3", None) => Some(plain("interval3", interval3())),
        ("gasket3", None) => Some(plain("gasket3", gasket3())),
        ("interval2-osc", None) => Some(plain("interval2-osc", interval2_osc())),
        ("mixed-ratio", None) => Some(plain("mixed-ratio", mixed_ratio())),
        ("example2-1d", _) => Some(example2_1d(k)),
        ("example2-2d", _) => Some(example2_2d(k)),
        _ => None,
    }
}

/// Vertex points of the gasket (fixed points of the three maps).
pub fn gasket_vertices() -> Vec<Point> {
    gasket3().maps().iter().map(Similitude::fixed_point).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lacunary_levels() {
        let n: Vec<usize> = (1..=4).map(lacunary_level).collect();
        assert_eq!(n, [2, 4, 7, 11]);
        assert_eq!(lacunary_sum(1), q(1, 9));
    }

    #[test]
    fn example2_1d_words() {
        let p = example2_1d_pairs(4);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0].xi.to_string(), "10(2)");
        assert_eq!(p[1].xi.to_string(), "1100(2)");
        assert_eq!(p[2].xi.to_string(), "1101000(2)");
        assert_eq!(p[0].eta.to_string(), "3(0)");
    }

    #[test]
    fn example2_2d_words() {
        let p = example2_2d_pairs(4);
        assert_eq!(p[0].xi.to_string(), "30(2)");
        assert_eq!(p[1].xi.to_string(), "3100(2)");
        assert_eq!(p[2].xi.to_string(), "3101000(2)");
    }

    #[test]
    fn lookup() {
        for n in NAMES {
            assert!(by_name(n).is_some(), "{n}");
        }
        assert_eq!(by_name("example2-1d(3)").unwrap().valid_depth, Some(6));
        assert!(by_name("example2-1d(x)").is_none());
        assert!(by_name("interval3(2)").is_none());
        assert!(by_name("nope").is_none());
    }
}
