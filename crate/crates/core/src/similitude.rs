//! Similarity maps `x -> r*O*x + b` with exact rational data, IFS specs and
//! certified invariant balls.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{dist2, fmt_q, fmt_vec, qi, sqrt_bounds, sqrt_exact, Q};

pub type Point = Vec<Q>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimilError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("ratio {0} is not in (0,1)")]
    Ratio(String),
    #[error("orthogonal part is not exactly orthogonal")]
    NotOrthogonal,
    #[error("an IFS needs at least two maps, got {0}")]
    TooFewMaps(usize),
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// `x -> ratio * orth * x + trans`. `orth` is row-major `dim x dim`.
///
/// Fields are kept normalized (rationals are always reduced), so derived
/// equality and hashing coincide with equality of maps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Similitude {
    ratio: Q,
    orth: Vec<Q>,
    trans: Vec<Q>,
}

/// Exact identity of a map; two maps are equal iff their keys are.
pub type MapKey = Similitude;

fn is_orthogonal(m: &[Q], d: usize) -> bool {
    for i in 0..d {
        for j in 0..d {
            let mut s = Q::zero();
            for k in 0..d {
                s += &m[k * d + i] * &m[k * d + j];
            }
            let want = if i == j { Q::one() } else { Q::zero() };
            if s != want {
                return false;
            }
        }
    }
    true
}

pub fn identity_matrix(d: usize) -> Vec<Q> {
    let mut m = vec![Q::zero(); d * d];
    for i in 0..d {
        m[i * d + i] = Q::one();
    }
    m
}

impl Similitude {
    /// Contracting similitude; the only kind allowed in an IFS.
    pub fn new(ratio: Q, orth: Vec<Q>, trans: Vec<Q>) -> Result<Self, SimilError> {
        if !ratio.is_positive() || ratio >= Q::one() {
            return Err(SimilError::Ratio(fmt_q(&ratio)));
        }
        Self::general(ratio, orth, trans)
    }

    /// Any similarity with positive ratio, possibly expanding.
    pub fn general(ratio: Q, orth: Vec<Q>, trans: Vec<Q>) -> Result<Self, SimilError> {
        let d = trans.len();
        if d == 0 {
            return Err(SimilError::ZeroDimension);
        }
        if orth.len() != d * d {
            return Err(SimilError::Dimension(orth.len(), d * d));
        }
        if !ratio.is_positive() {
            return Err(SimilError::Ratio(fmt_q(&ratio)));
        }
        if !is_orthogonal(&orth, d) {
            return Err(SimilError::NotOrthogonal);
        }
        Ok(Similitude { ratio, orth, trans })
    }

    /// Homothety `x -> ratio*x + trans`.
    pub fn homothety(ratio: Q, trans: Vec<Q>) -> Result<Self, SimilError> {
        let d = trans.len();
        Self::new(ratio, identity_matrix(d), trans)
    }

    pub fn identity(d: usize) -> Self {
        Similitude {
            ratio: Q::one(),
            orth: identity_matrix(d),
            trans: vec![Q::zero(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.trans.len()
    }

    pub fn ratio(&self) -> &Q {
        &self.ratio
    }

    pub fn orthogonal(&self) -> &[Q] {
        &self.orth
    }

    pub fn translation(&self) -> &[Q] {
        &self.trans
    }

    pub fn is_identity(&self) -> bool {
        self.ratio.is_one()
            && self.trans.iter().all(Zero::is_zero)
            && self.orth == identity_matrix(self.dim())
    }

    fn orth_is_identity(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let v = &self.orth[i * d + j];
                if i == j {
                    v.is_one()
                } else {
                    v.is_zero()
                }
            })
        })
    }

    fn linear(&self, x: &[Q]) -> Point {
        let d = self.dim();
        if self.orth_is_identity() {
            return x.iter().map(|v| &self.ratio * v).collect();
        }
        (0..d)
            .map(|i| {
                let mut s = Q::zero();
                for j in 0..d {
                    let m = &self.orth[i * d + j];
                    if !m.is_zero() {
                        s += m * &x[j];
                    }
                }
                &self.ratio * s
            })
            .collect()
    }

    pub fn apply(&self, x: &[Q]) -> Point {
        assert_eq!(x.len(), self.dim(), "point dimension");
        let mut y = self.linear(x);
        for (a, b) in y.iter_mut().zip(&self.trans) {
            *a += b;
        }
        y
    }

    /// `self ∘ inner`, i.e. `x -> self(inner(x))`.
    pub fn compose(&self, inner: &Similitude) -> Result<Similitude, SimilError> {
        if self.dim() != inner.dim() {
            return Err(SimilError::Dimension(self.dim(), inner.dim()));
        }
        Ok(self.then_inner(inner))
    }

    /// Infallible `self ∘ inner` for maps already known to share a dimension.
    pub fn then_inner(&self, inner: &Similitude) -> Similitude {
        debug_assert_eq!(self.dim(), inner.dim());
        let d = self.dim();
        let orth = if inner.orth_is_identity() {
            self.orth.clone()
        } else if self.orth_is_identity() {
            inner.orth.clone()
        } else {
            let mut m = vec![Q::zero(); d * d];
            for i in 0..d {
                for j in 0..d {
                    let mut s = Q::zero();
                    for k in 0..d {
                        s += &self.orth[i * d + k] * &inner.orth[k * d + j];
                    }
                    m[i * d + j] = s;
                }
            }
            m
        };
        let mut trans = self.linear(&inner.trans);
        for (a, b) in trans.iter_mut().zip(&self.trans) {
            *a += b;
        }
        Similitude {
            ratio: &self.ratio * &inner.ratio,
            orth,
            trans,
        }
    }

    pub fn inverse(&self) -> Similitude {
        let d = self.dim();
        let mut ot = vec![Q::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                ot[i * d + j] = self.orth[j * d + i].clone();
            }
        }
        let ratio = self.ratio.recip();
        let inv = Similitude {
            ratio,
            orth: ot,
            trans: vec![Q::zero(); d],
        };
        let neg: Point = self.trans.iter().map(|v| -v).collect();
        let trans = inv.linear(&neg);
        Similitude { trans, ..inv }
    }

    /// The unique `x` with `self(x) = z`.
    pub fn invert_apply(&self, z: &[Q]) -> Point {
        let shifted: Point = z.iter().zip(&self.trans).map(|(a, b)| a - b).collect();
        let d = self.dim();
        let inv_r = self.ratio.recip();
        (0..d)
            .map(|i| {
                let mut s = Q::zero();
                for j in 0..d {
                    s += &self.orth[j * d + i] * &shifted[j];
                }
                &inv_r * s
            })
            .collect()
    }

    /// Solves `(I - rO) x = b` exactly. Requires `ratio != 1` (true for every
    /// contraction and for every non-isometric neighbor map).
    pub fn fixed_point(&self) -> Point {
        assert!(!self.ratio.is_one(), "fixed point of an isometry");
        let d = self.dim();
        if self.orth_is_identity() {
            let s = (Q::one() - &self.ratio).recip();
            return self.trans.iter().map(|b| b * &s).collect();
        }
        let mut a: Vec<Vec<Q>> = (0..d)
            .map(|i| {
                let mut row: Vec<Q> = (0..d)
                    .map(|j| {
                        let v = -(&self.ratio * &self.orth[i * d + j]);
                        if i == j {
                            v + Q::one()
                        } else {
                            v
                        }
                    })
                    .collect();
                row.push(self.trans[i].clone());
                row
            })
            .collect();
        for col in 0..d {
            let piv = (col..d)
                .find(|&r| !a[r][col].is_zero())
                .expect("I - rO is invertible for r != 1");
            a.swap(col, piv);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v /= &p;
            }
            for r in 0..d {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in col..=d {
                        let t = &f * &a[col][c];
                        a[r][c] -= t;
                    }
                }
            }
        }
        a.into_iter().map(|row| row[d].clone()).collect()
    }

    pub fn key(&self) -> MapKey {
        self.clone()
    }
}

impl fmt::Display for Similitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.orth_is_identity() {
            write!(f, "x -> {}*x + {}", fmt_q(&self.ratio), fmt_vec(&self.trans))
        } else {
            write!(
                f,
                "x -> {}*{}*x + {}",
                fmt_q(&self.ratio),
                fmt_vec(&self.orth),
                fmt_vec(&self.trans)
            )
        }
    }
}

/// Closed ball with exact rational center and radius.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ball {
    pub center: Point,
    pub radius: Q,
}

impl Ball {
    pub fn image(&self, s: &Similitude) -> Ball {
        Ball {
            center: s.apply(&self.center),
            radius: s.ratio() * &self.radius,
        }
    }

    /// `|c1 - c2| > r1 + r2`, decided exactly.
    pub fn separated(&self, other: &Ball) -> bool {
        let r = &self.radius + &other.radius;
        dist2(&self.center, &other.center) > &r * &r
    }

    pub fn contains_ball(&self, other: &Ball) -> bool {
        if other.radius > self.radius {
            return false;
        }
        let slack = &self.radius - &other.radius;
        dist2(&self.center, &other.center) <= &slack * &slack
    }

    pub fn contains_point(&self, p: &[Q]) -> bool {
        dist2(&self.center, p) <= &self.radius * &self.radius
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({}, {})", fmt_vec(&self.center), fmt_q(&self.radius))
    }
}

/// Ordered list of contracting similitudes on a common space.
#[derive(Clone, Debug)]
pub struct IfsSpec {
    dim: usize,
    maps: Vec<Similitude>,
    min_ratio: Q,
    /// First displayed symbol (0 or 1).
    pub label_base: usize,
    pub center_hint: Option<Point>,
}

impl IfsSpec {
    pub fn new(maps: Vec<Similitude>) -> Result<Self, SimilError> {
        if maps.len() < 2 {
            return Err(SimilError::TooFewMaps(maps.len()));
        }
        let dim = maps[0].dim();
        for m in &maps {
            if m.dim() != dim {
                return Err(SimilError::Dimension(dim, m.dim()));
            }
            if m.ratio() >= &Q::one() {
                return Err(SimilError::Ratio(fmt_q(m.ratio())));
            }
        }
        let min_ratio = maps.iter().map(|m| m.ratio().clone()).min().unwrap();
        Ok(IfsSpec {
            dim,
            maps,
            min_ratio,
            label_base: 1,
            center_hint: None,
        })
    }

    pub fn with_label_base(mut self, base: usize) -> Self {
        self.label_base = base;
        self
    }

    pub fn with_center(mut self, c: Point) -> Result<Self, SimilError> {
        if c.len() != self.dim {
            return Err(SimilError::Dimension(self.dim, c.len()));
        }
        self.center_hint = Some(c);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &Similitude {
        &self.maps[i]
    }

    pub fn min_ratio(&self) -> &Q {
        &self.min_ratio
    }

    pub fn equal_ratios(&self) -> bool {
        self.maps.iter().all(|m| m.ratio() == &self.min_ratio)
    }

    /// Composition `S_{w_1} ∘ ... ∘ S_{w_n}`; the empty word gives the identity.
    pub fn word_map(&self, w: &[u8]) -> Similitude {
        if w.len() > 32 {
            let (a, b) = w.split_at(w.len() / 2);
            return self.word_map(a).then_inner(&self.word_map(b));
        }
        let mut acc = Similitude::identity(self.dim);
        for &s in w {
            acc = acc.then_inner(&self.maps[s as usize]);
        }
        acc
    }

    pub fn word_ratio(&self, w: &[u8]) -> Q {
        let mut r = Q::one();
        for &s in w {
            r *= self.maps[s as usize].ratio();
        }
        r
    }

    pub fn fixed_points_mean(&self) -> Point {
        let n = qi(self.maps.len() as i64);
        let mut acc = vec![Q::zero(); self.dim];
        for m in &self.maps {
            for (a, b) in acc.iter_mut().zip(m.fixed_point()) {
                *a += b;
            }
        }
        acc.into_iter().map(|v| v / &n).collect()
    }

    /// See [`invariant_ball`].
    pub fn invariant_ball(&self) -> Ball {
        invariant_ball(self, self.center_hint.as_deref())
    }
}

/// Ball `B(c, R)` with `S_i(B) ⊆ B` for every map, hence `K ⊆ B`.
///
/// `R = max_i |S_i(c) - c| / (1 - r_i)`, exact whenever every distance is a
/// rational square root; otherwise each square root is rounded up by a
/// relative `2^-40`. The containment is re-verified exactly.
pub fn invariant_ball(ifs: &IfsSpec, center_hint: Option<&[Q]>) -> Ball {
    let c: Point = match center_hint {
        Some(c) => c.to_vec(),
        None => ifs.fixed_points_mean(),
    };
    let mut radius = Q::zero();
    let mut dists = Vec::with_capacity(ifs.n_maps());
    for m in ifs.maps() {
        let q = dist2(&m.apply(&c), &c);
        let root = match sqrt_exact(&q) {
            Some(r) => r,
            None => sqrt_bounds(&q).1,
        };
        let need = &root / (Q::one() - m.ratio());
        if need > radius {
            radius = need;
        }
        dists.push(q);
    }
    for (m, q) in ifs.maps().iter().zip(&dists) {
        let room = (Q::one() - m.ratio()) * &radius;
        assert!(&room * &room >= *q, "invariant ball verification failed");
    }
    Ball { center: c, radius }
}
