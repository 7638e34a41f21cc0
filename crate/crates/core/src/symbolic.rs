//! Words, the level sets `J_n` and the quotient `X = J/~` level by level.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::One;
use rayon::prelude::*;
use thiserror::Error;

use crate::rational::{pow, Q};
use crate::similitude::{Ball, IfsSpec, MapKey, Similitude};

/// Finite word over `0..N` (internal 0-based symbols).
pub type Word = Vec<u8>;

/// Default cap on the number of classes (or words) per level.
pub const DEFAULT_LEVEL_CAP: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("level {level} exceeds the cap of {cap} entries")]
    ResourceCap { level: usize, cap: usize },
    #[error("prefix of length {len} is too short to reach level {level}")]
    PrefixTooShort { len: usize, level: usize },
    #[error("symbol {0} out of range")]
    BadSymbol(u8),
}

pub fn fmt_word(w: &[u8], base: usize, n_maps: usize) -> String {
    if w.is_empty() {
        return "o".to_string();
    }
    if n_maps + base <= 10 {
        w.iter().map(|&s| char::from(b'0' + s + base as u8)).collect()
    } else {
        let parts: Vec<String> = w.iter().map(|&s| (s as usize + base).to_string()).collect();
        parts.join(".")
    }
}

/// Parses a word written with the display alphabet. Multi-digit symbols are
/// separated by `.`; `o` or the empty string is the empty word.
pub fn parse_word(s: &str, base: usize, n_maps: usize) -> Result<Word, SymbolicError> {
    let s = s.trim();
    if s.is_empty() || s == "o" {
        return Ok(Vec::new());
    }
    let raw: Vec<usize> = if s.contains('.') || s.contains(',') {
        s.split(['.', ','])
            .map(|t| t.trim().parse::<usize>().map_err(|_| SymbolicError::BadSymbol(0)))
            .collect::<Result<_, _>>()?
    } else {
        s.chars()
            .map(|c| c.to_digit(10).map(|d| d as usize).ok_or(SymbolicError::BadSymbol(0)))
            .collect::<Result<_, _>>()?
    };
    raw.into_iter()
        .map(|v| {
            if v < base || v - base >= n_maps {
                Err(SymbolicError::BadSymbol(v.min(255) as u8))
            } else {
                Ok((v - base) as u8)
            }
        })
        .collect()
}

/// `r^n` where `r` is the minimal ratio.
pub fn level_scale(ifs: &IfsSpec, n: usize) -> Q {
    pow(ifs.min_ratio(), n)
}

/// `r_w <= r^n < r_{w'}`, `w'` being `w` without its last symbol.
pub fn is_level_word(ifs: &IfsSpec, w: &[u8], n: usize) -> bool {
    if n == 0 {
        return w.is_empty();
    }
    if w.is_empty() || w.iter().any(|&s| s as usize >= ifs.n_maps()) {
        return false;
    }
    let rn = level_scale(ifs, n);
    let head = ifs.word_ratio(&w[..w.len() - 1]);
    let full = &head * ifs.map(*w.last().unwrap() as usize).ratio();
    full <= rn && rn < head
}

/// The unique prefix of `address` lying in `J_n`.
pub fn truncate_to_level(ifs: &IfsSpec, address: &[u8], n: usize) -> Result<Word, SymbolicError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let rn = level_scale(ifs, n);
    let mut r = Q::one();
    for (i, &s) in address.iter().enumerate() {
        if s as usize >= ifs.n_maps() {
            return Err(SymbolicError::BadSymbol(s));
        }
        r *= ifs.map(s as usize).ratio();
        if r <= rn {
            return Ok(address[..=i].to_vec());
        }
    }
    Err(SymbolicError::PrefixTooShort {
        len: address.len(),
        level: n,
    })
}

/// Suffixes `u` such that `w u` lies in `J_{n+1}` for any `w` in `J_n` with
/// ratio `r_w`. Only depends on `r_w`.
fn extensions(ifs: &IfsSpec, r_w: &Q, target: &Q) -> Vec<(Word, Q)> {
    let mut out = Vec::new();
    let mut stack: Vec<(Word, Q)> = vec![(Vec::new(), r_w.clone())];
    while let Some((u, r)) = stack.pop() {
        for s in 0..ifs.n_maps() {
            let r2 = &r * ifs.map(s).ratio();
            let mut u2 = u.clone();
            u2.push(s as u8);
            if &r2 <= target {
                out.push((u2, r2));
            } else {
                stack.push((u2, r2));
            }
        }
    }
    out.sort();
    out
}

/// All words of `J_n` in lexicographic order.
pub fn enumerate_level(ifs: &IfsSpec, n: usize, cap: usize) -> Result<Vec<Word>, SymbolicError> {
    let mut cur: Vec<(Word, Q)> = vec![(Vec::new(), Q::one())];
    for lvl in 1..=n {
        let target = level_scale(ifs, lvl);
        let mut ext_cache: HashMap<Q, Vec<(Word, Q)>> = HashMap::new();
        let mut next = Vec::new();
        for (w, r) in &cur {
            let ext = ext_cache
                .entry(r.clone())
                .or_insert_with(|| extensions(ifs, r, &target));
            for (u, r2) in ext.iter() {
                let mut w2 = w.clone();
                w2.extend_from_slice(u);
                next.push((w2, r2.clone()));
                if next.len() > cap {
                    return Err(SymbolicError::ResourceCap { level: lvl, cap });
                }
            }
        }
        cur = next;
    }
    let mut words: Vec<Word> = cur.into_iter().map(|(w, _)| w).collect();
    words.sort();
    Ok(words)
}

/// An element `[w]` of `X`: all words of one level sharing a map.
#[derive(Clone, Debug)]
pub struct VertexClass {
    pub level: usize,
    /// Sorted; the first member is the class representative.
    pub members: Vec<Word>,
    pub map: Similitude,
}

impl VertexClass {
    pub fn key(&self) -> &MapKey {
        &self.map
    }

    pub fn rep(&self) -> &Word {
        &self.members[0]
    }

    pub fn label(&self, ifs: &IfsSpec) -> String {
        let parts: Vec<String> = self
            .members
            .iter()
            .map(|w| fmt_word(w, ifs.label_base, ifs.n_maps()))
            .collect();
        format!("[{}]", parts.join(","))
    }
}

/// Partition of `J_n` by map equality, classes ordered by smallest member.
pub fn quotient_level(ifs: &IfsSpec, n: usize, cap: usize) -> Result<Vec<VertexClass>, SymbolicError> {
    let words = enumerate_level(ifs, n, cap)?;
    let mut by_key: HashMap<Similitude, Vec<Word>> = HashMap::new();
    for w in words {
        by_key.entry(ifs.word_map(&w)).or_default().push(w);
    }
    let mut classes: Vec<VertexClass> = by_key
        .into_iter()
        .map(|(map, mut members)| {
            members.sort();
            VertexClass {
                level: n,
                members,
                map,
            }
        })
        .collect();
    classes.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    Ok(classes)
}

/// Vertex id: (level, index within level).
pub type VId = (usize, usize);

/// Quotient levels `0..=depth` with parent/child links, built incrementally.
#[derive(Clone, Debug)]
pub struct LevelTable {
    pub levels: Vec<Vec<VertexClass>>,
    pub index: Vec<HashMap<MapKey, usize>>,
    pub parents: Vec<Vec<Vec<usize>>>,
    pub children: Vec<Vec<Vec<usize>>>,
    /// Number of classes dropped by the keep-filter at each level.
    pub dropped: Vec<usize>,
}

impl LevelTable {
    pub fn root(ifs: &IfsSpec) -> Self {
        let root = VertexClass {
            level: 0,
            members: vec![Vec::new()],
            map: Similitude::identity(ifs.dim()),
        };
        let mut idx = HashMap::new();
        idx.insert(root.map.clone(), 0);
        LevelTable {
            levels: vec![vec![root]],
            index: vec![idx],
            parents: vec![vec![Vec::new()]],
            children: vec![vec![Vec::new()]],
            dropped: vec![0],
        }
    }

    pub fn build(ifs: &IfsSpec, depth: usize, cap: usize) -> Result<Self, SymbolicError> {
        let mut t = Self::root(ifs);
        for _ in 0..depth {
            t.push_level(ifs, None, cap)?;
        }
        Ok(t)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn class(&self, v: VId) -> &VertexClass {
        &self.levels[v.0][v.1]
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> impl Iterator<Item = VId> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(l, v)| (0..v.len()).map(move |i| (l, i)))
    }

    pub fn find(&self, level: usize, key: &MapKey) -> Option<usize> {
        self.index.get(level)?.get(key).copied()
    }

    /// Class at `level` containing `w` (which must be a word of `J_level`).
    pub fn find_word(&self, ifs: &IfsSpec, level: usize, w: &[u8]) -> Option<usize> {
        self.find(level, &ifs.word_map(w))
    }

    pub fn parents_of(&self, v: VId) -> &[usize] {
        &self.parents[v.0][v.1]
    }

    pub fn children_of(&self, v: VId) -> &[usize] {
        &self.children[v.0][v.1]
    }

    /// Appends level `depth + 1`. `keep` may drop classes (e.g. outside a
    /// window); it must be inherited by ancestors, i.e. whenever a class is
    /// kept so are the classes of all its prefixes.
    pub fn push_level(
        &mut self,
        ifs: &IfsSpec,
        keep: Option<&(dyn Fn(&Similitude) -> bool + Sync)>,
        cap: usize,
    ) -> Result<(), SymbolicError> {
        let n = self.depth() + 1;
        let target = level_scale(ifs, n);
        let prev = &self.levels[n - 1];

        let mut ratios: Vec<Q> = prev.iter().map(|c| c.map.ratio().clone()).collect();
        ratios.sort();
        ratios.dedup();
        let ext: HashMap<Q, Vec<(Word, Q)>> = ratios
            .into_iter()
            .map(|r| {
                let e = extensions(ifs, &r, &target);
                (r, e)
            })
            .collect();
        let ext_maps: HashMap<Word, Similitude> = ext
            .values()
            .flatten()
            .map(|(u, _)| (u.clone(), ifs.word_map(u)))
            .collect();

        let produced: Vec<Vec<(Similitude, Word)>> = prev
            .par_iter()
            .map(|c| {
                ext[c.map.ratio()]
                    .iter()
                    .map(|(u, _)| (c.map.then_inner(&ext_maps[u]), u.clone()))
                    .collect()
            })
            .collect();

        // key -> (parent set, member suffix pairs)
        let mut groups: HashMap<Similitude, (Vec<usize>, Vec<(usize, Word)>)> = HashMap::new();
        for (pi, list) in produced.into_iter().enumerate() {
            for (m, u) in list {
                let e = groups.entry(m).or_default();
                if e.0.last() != Some(&pi) {
                    e.0.push(pi);
                }
                e.1.push((pi, u));
            }
        }
        let before = groups.len();
        if let Some(f) = keep {
            let keys: Vec<Similitude> = groups.keys().cloned().collect();
            let verdicts: Vec<bool> = keys.par_iter().map(|k| f(k)).collect();
            for (k, ok) in keys.into_iter().zip(verdicts) {
                if !ok {
                    groups.remove(&k);
                }
            }
        }
        if groups.len() > cap {
            return Err(SymbolicError::ResourceCap { level: n, cap });
        }
        let dropped = before - groups.len();

        let mut classes: Vec<(VertexClass, Vec<usize>)> = groups
            .into_iter()
            .map(|(map, (mut parents, pairs))| {
                let mut members: Vec<Word> = pairs
                    .iter()
                    .flat_map(|(pi, u)| {
                        prev[*pi].members.iter().map(move |w| {
                            let mut w2 = w.clone();
                            w2.extend_from_slice(u);
                            w2
                        })
                    })
                    .collect();
                members.sort();
                members.dedup();
                parents.sort_unstable();
                parents.dedup();
                (
                    VertexClass {
                        level: n,
                        members,
                        map,
                    },
                    parents,
                )
            })
            .collect();
        classes.sort_by(|a, b| a.0.members[0].cmp(&b.0.members[0]));

        let mut index = HashMap::with_capacity(classes.len());
        let mut level = Vec::with_capacity(classes.len());
        let mut parents = Vec::with_capacity(classes.len());
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); prev.len()];
        for (i, (c, ps)) in classes.into_iter().enumerate() {
            index.insert(c.map.clone(), i);
            for &p in &ps {
                kids[p].push(i);
            }
            level.push(c);
            parents.push(ps);
        }
        self.children[n - 1] = kids;
        self.levels.push(level);
        self.index.push(index);
        self.parents.push(parents);
        self.children.push(vec![Vec::new(); self.levels[n].len()]);
        self.dropped.push(dropped);
        Ok(())
    }

    /// Label of a vertex for display.
    pub fn label(&self, ifs: &IfsSpec, v: VId) -> String {
        self.class(v).label(ifs)
    }

    pub fn cylinder_ball(&self, ball: &Ball, v: VId) -> Ball {
        ball.image(&self.class(v).map)
    }

    /// Deterministic summary: number of classes per level.
    pub fn level_sizes(&self) -> BTreeMap<usize, usize> {
        self.levels.iter().enumerate().map(|(l, v)| (l, v.len())).collect()
    }
}

impl fmt::Display for LevelTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, v) in self.levels.iter().enumerate() {
            writeln!(f, "level {l}: {} classes", v.len())?;
        }
        Ok(())
    }
}
