//! Exact rational scalars: construction, parsing, formatting and certified
//! square-root bounds.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational. Values whose reduced numerator and denominator fit in
/// `i64` are stored inline; the rest fall back to `BigRational`. The
/// representation is canonical, so derived equality and hashing are exact.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Q(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    /// Reduced, denominator positive, neither part equal to `i64::MIN`.
    Small(i64, i64),
    Big(BigRational),
}

fn small(n: i64, d: i64) -> Q {
    Q(Repr::Small(n, d))
}

fn fits(v: i128) -> Option<i64> {
    i64::try_from(v).ok().filter(|&x| x != i64::MIN)
}

/// `n/d` from 128-bit parts, `d > 0`.
fn from_i128(n: i128, d: i128) -> Q {
    let g = match (u64::try_from(n.unsigned_abs()), u64::try_from(d)) {
        (Ok(a), Ok(b)) => a.gcd(&b) as i128,
        _ => n.gcd(&d),
    };
    let (n, d) = if g > 1 { (n / g, d / g) } else { (n, d) };
    match (fits(n), fits(d)) {
        (Some(n), Some(d)) => small(n, d),
        _ => Q(Repr::Big(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))),
    }
}

impl Q {
    /// `n/d` reduced; panics when `d` is zero.
    pub fn new(n: BigInt, d: BigInt) -> Q {
        Q::from_big(BigRational::new(n, d))
    }

    pub fn from_integer(n: BigInt) -> Q {
        Q::from_big(BigRational::from_integer(n))
    }

    fn from_big(r: BigRational) -> Q {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) if n != i64::MIN && d != i64::MIN => small(n, d),
            _ => Q(Repr::Big(r)),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(r) => r.clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn recip(&self) -> Q {
        match &self.0 {
            Repr::Small(0, _) => panic!("reciprocal of zero"),
            Repr::Small(n, d) if *n < 0 => small(-d, -n),
            Repr::Small(n, d) => small(*d, *n),
            Repr::Big(r) => Q::from_big(r.recip()),
        }
    }

    pub fn abs(&self) -> Q {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n > 0,
            Repr::Big(r) => r.is_positive(),
        }
    }

    pub fn floor(&self) -> Q {
        match &self.0 {
            Repr::Small(n, d) => small(n.div_floor(d), 1),
            Repr::Big(r) => Q::from_big(r.floor()),
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        match &self.0 {
            Repr::Small(n, d) => Some(*n as f64 / *d as f64),
            Repr::Big(r) => r.to_f64().filter(|v| v.is_finite()),
        }
    }
}

impl Zero for Q {
    fn zero() -> Q {
        small(0, 1)
    }

    fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }
}

impl One for Q {
    fn one() -> Q {
        small(1, 1)
    }

    fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }
}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(self))
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(self))
    }
}

fn add_ref(x: &Q, y: &Q) -> Q {
    match (&x.0, &y.0) {
        (Repr::Small(a, b), Repr::Small(c, d)) if b == d => from_i128(*a as i128 + *c as i128, *b as i128),
        (Repr::Small(a, b), Repr::Small(c, d)) => {
            let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
            from_i128(a * d + c * b, b * d)
        }
        _ => Q::from_big(x.to_big() + y.to_big()),
    }
}

fn mul_ref(x: &Q, y: &Q) -> Q {
    match (&x.0, &y.0) {
        (Repr::Small(a, b), Repr::Small(c, d)) => from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128),
        _ => Q::from_big(x.to_big() * y.to_big()),
    }
}

fn neg_ref(x: &Q) -> Q {
    match &x.0 {
        Repr::Small(n, d) => small(-n, *d),
        Repr::Big(r) => Q::from_big(-r),
    }
}

fn sub_ref(x: &Q, y: &Q) -> Q {
    add_ref(x, &neg_ref(y))
}

fn div_ref(x: &Q, y: &Q) -> Q {
    mul_ref(x, &y.recip())
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident, $tra:ident, $ma:ident) => {
        impl $tr<&Q> for &Q {
            type Output = Q;
            fn $m(self, o: &Q) -> Q {
                $f(self, o)
            }
        }
        impl $tr<Q> for &Q {
            type Output = Q;
            fn $m(self, o: Q) -> Q {
                $f(self, &o)
            }
        }
        impl $tr<&Q> for Q {
            type Output = Q;
            fn $m(self, o: &Q) -> Q {
                $f(&self, o)
            }
        }
        impl $tr<Q> for Q {
            type Output = Q;
            fn $m(self, o: Q) -> Q {
                $f(&self, &o)
            }
        }
        impl $tra<&Q> for Q {
            fn $ma(&mut self, o: &Q) {
                *self = $f(self, o);
            }
        }
        impl $tra<Q> for Q {
            fn $ma(&mut self, o: Q) {
                *self = $f(self, &o);
            }
        }
    };
}

binop!(Add, add, add_ref, AddAssign, add_assign);
binop!(Sub, sub, sub_ref, SubAssign, sub_assign);
binop!(Mul, mul, mul_ref, MulAssign, mul_assign);
binop!(Div, div, div_ref, DivAssign, div_assign);

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        neg_ref(&self)
    }
}

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        neg_ref(self)
    }
}

impl Sum for Q {
    fn sum<I: Iterator<Item = Q>>(it: I) -> Q {
        it.fold(Q::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Q> for Q {
    fn sum<I: Iterator<Item = &'a Q>>(it: I) -> Q {
        it.fold(Q::zero(), |a, b| a + b)
    }
}

/// Relative precision (in bits) of the non-exact square-root bounds.
const SQRT_BITS: u64 = 40;

pub fn q(n: i64, d: i64) -> Q {
    assert!(d != 0, "zero denominator");
    from_i128(n as i128 * d.signum() as i128, d.unsigned_abs() as i128)
}

pub fn qi(n: i64) -> Q {
    from_i128(n as i128, 1)
}

pub fn pow(x: &Q, e: usize) -> Q {
    let mut acc = Q::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRationalError(pub String);

impl fmt::Display for ParseRationalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not an exact rational: {:?}", self.0)
    }
}

impl std::error::Error for ParseRationalError {}

/// Parses `p`, `p/q` or a finite decimal such as `-0.125`.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let t = s.trim();
    let err = || ParseRationalError(s.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((a, b)) = t.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| err())?;
        let d: BigInt = b.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        if !ip.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{}{}", if ip.is_empty() { "0" } else { ip }, fp);
        let n: BigInt = digits.parse().map_err(|_| err())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let v = Q::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Q::from_integer(n))
}

/// `p/q`, or `p` when the denominator is one.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn fmt_vec(v: &[Q]) -> String {
    let parts: Vec<String> = v.iter().map(fmt_q).collect();
    format!("({})", parts.join(", "))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let x = &x.to_big();
        // Very large numerators/denominators: scale down through the bit lengths.
        let nb = x.numer().bits() as i64;
        let db = x.denom().bits() as i64;
        let shift = (nb - db).clamp(-1000, 1000);
        let scaled = if shift >= 0 {
            x / BigRational::from_integer(BigInt::one() << (shift as usize))
        } else {
            x * BigRational::from_integer(BigInt::one() << ((-shift) as usize))
        };
        scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
    })
}

/// Twelve significant digits, the format used for approximate diagnostics.
pub fn fmt_sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{:.11e}", x)
    }
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist2(a: &[Q], b: &[Q]) -> Q {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            &d * &d
        })
        .sum()
}

fn exact_sqrt_int(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    if &(&r * &r) == n {
        Some(r)
    } else {
        None
    }
}

/// Exact square root when `x` is the square of a rational.
pub fn sqrt_exact(x: &Q) -> Option<Q> {
    let n = exact_sqrt_int(&x.numer())?;
    let d = exact_sqrt_int(&x.denom())?;
    Some(Q::new(n, d))
}

/// Rational bounds `lo <= sqrt(x) <= hi`, equal when `x` is a rational square.
/// Otherwise `hi - lo <= 2^-40 * sqrt(x)`.
pub fn sqrt_bounds(x: &Q) -> (Q, Q) {
    assert!(!x.is_negative(), "square root of a negative rational");
    if let Some(r) = sqrt_exact(x) {
        return (r.clone(), r);
    }
    // sqrt(p/s) = sqrt(p*s)/s
    let p = x.numer();
    let s = x.denom();
    let ps = &p * &s;
    let b = ps.bits();
    let k = if b / 2 >= SQRT_BITS { 0 } else { SQRT_BITS - b / 2 + 1 };
    let scaled = &ps << (2 * k as usize);
    let m = scaled.sqrt();
    let den = &s * (BigInt::one() << k as usize);
    let lo = Q::new(m.clone(), den.clone());
    let hi = Q::new(m + BigInt::one(), den);
    (lo, hi)
}

pub fn sqrt_upper(x: &Q) -> Q {
    sqrt_bounds(x).1
}

pub fn sqrt_lower(x: &Q) -> Q {
    sqrt_bounds(x).0
}

/// Least common multiple of the denominators, handy for integer-scaled oracles.
pub fn common_denominator<'a>(xs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    xs.into_iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(&x.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-2").unwrap(), qi(-2));
        assert_eq!(parse_q(" 0.125 ").unwrap(), q(1, 8));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
        assert!(parse_q("").is_err());
    }

    #[test]
    fn format_roundtrip() {
        for x in [q(1, 2), qi(3), q(-7, 9), qi(0)] {
            assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
        }
        assert_eq!(fmt_q(&q(4, 2)), "2");
    }

    #[test]
    fn sqrt_perfect_squares_are_exact() {
        assert_eq!(sqrt_bounds(&q(9, 4)), (q(3, 2), q(3, 2)));
        assert_eq!(sqrt_bounds(&qi(0)), (qi(0), qi(0)));
    }

    #[test]
    fn sqrt_bounds_bracket() {
        for x in [qi(2), q(13, 36), q(1, 3), qi(12345)] {
            let (lo, hi) = sqrt_bounds(&x);
            assert!(&lo * &lo <= x);
            assert!(&hi * &hi >= x);
            let width = to_f64(&(&hi - &lo));
            assert!(width <= to_f64(&x).sqrt() * 2f64.powi(-38));
        }
    }

    #[test]
    fn sig12() {
        assert_eq!(fmt_sig12(2.0 * 2f64.sqrt()), "2.82842712475");
        assert_eq!(fmt_sig12(1.0), "1");
        assert!(fmt_sig12(1e-9).contains('e'));
    }
}
