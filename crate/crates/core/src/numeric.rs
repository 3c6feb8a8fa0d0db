//! Scalar and number-theoretic primitives.
//!
//! Every real-valued quantity is computed through the [`Real`] trait, which is
//! implemented for `f64` (FLOAT mode) and [`BigRational`] (EXACT mode). The
//! dynamically tagged [`Scalar`] is used where the mode is only known at run
//! time, e.g. for weights parsed from JSON or values written to reports.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// Arithmetic mode of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Float => f.write_str("float"),
            Mode::Exact => f.write_str("exact"),
        }
    }
}

/// Field operations shared by the FLOAT and EXACT computation paths.
pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    const MODE: Mode;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self;

    /// Converts a tagged scalar. EXACT values may be rounded into FLOAT mode;
    /// FLOAT values are never promoted to EXACT.
    fn from_scalar(s: &Scalar) -> Result<Self>;

    fn to_scalar(&self) -> Scalar;

    fn to_f64(&self) -> f64;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn powi(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }

    /// Sums values in iteration order.
    fn sum_ordered<I: IntoIterator<Item = Self>>(values: I) -> Self {
        values.into_iter().fold(Self::zero(), |acc, v| acc + v)
    }
}

impl Real for f64 {
    const MODE: Mode = Mode::Float;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self {
        ToPrimitive::to_f64(&BigRational::new(num, den)).unwrap_or(f64::NAN)
    }

    fn from_scalar(s: &Scalar) -> Result<Self> {
        Ok(s.to_f64())
    }

    fn to_scalar(&self) -> Scalar {
        Scalar::Float(*self)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn powi(&self, k: usize) -> Self {
        f64::powi(*self, k as i32)
    }
}

impl Real for BigRational {
    const MODE: Mode = Mode::Exact;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(num.into(), den.into())
    }

    fn from_big_ratio(num: BigInt, den: BigInt) -> Self {
        BigRational::new(num, den)
    }

    fn from_scalar(s: &Scalar) -> Result<Self> {
        match s {
            Scalar::Exact(r) => Ok(r.clone()),
            Scalar::Float(v) => Err(Error::ModeMismatch(format!(
                "float value {v} cannot enter an exact computation"
            ))),
        }
    }

    fn to_scalar(&self) -> Scalar {
        Scalar::Exact(self.clone())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    /// Accumulates over a running common denominator and reduces once.
    fn sum_ordered<I: IntoIterator<Item = Self>>(values: I) -> Self {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for v in values {
            let (n, d) = v.into_raw();
            if d == den {
                num += n;
            } else {
                num = num * &d + n * &den;
                den *= d;
            }
        }
        BigRational::new(num, den)
    }
}

/// A real value tagged with its arithmetic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Float(f64),
    Exact(BigRational),
}

impl Scalar {
    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Float(_) => Mode::Float,
            Scalar::Exact(_) => Mode::Exact,
        }
    }

    pub fn from_ratio(num: i64, den: i64, mode: Mode) -> Scalar {
        match mode {
            Mode::Float => Scalar::Float(num as f64 / den as f64),
            Mode::Exact => Scalar::Exact(BigRational::new(num.into(), den.into())),
        }
    }

    pub fn zero(mode: Mode) -> Scalar {
        Scalar::from_ratio(0, 1, mode)
    }

    pub fn one(mode: Mode) -> Scalar {
        Scalar::from_ratio(1, 1, mode)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Float(v) => *v,
            Scalar::Exact(r) => Real::to_f64(r),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Float(v) => *v < 0.0,
            Scalar::Exact(r) => r.is_negative(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Float(v) => *v == 0.0,
            Scalar::Exact(r) => r.is_zero(),
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    /// Parses `"p/q"`, an integer, or a decimal literal (optionally with an
    /// exponent). Decimal literals are read exactly in EXACT mode.
    pub fn parse(text: &str, mode: Mode) -> Result<Scalar> {
        let s = text.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p = BigInt::from_str(p.trim())
                .map_err(|_| Error::Parse(format!("bad numerator in {text:?}")))?;
            let q = BigInt::from_str(q.trim())
                .map_err(|_| Error::Parse(format!("bad denominator in {text:?}")))?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {text:?}")));
            }
            let r = BigRational::new(p, q);
            return Ok(match mode {
                Mode::Exact => Scalar::Exact(r),
                Mode::Float => Scalar::Float(Real::to_f64(&r)),
            });
        }
        match mode {
            Mode::Float => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Scalar::Float)
                .ok_or_else(|| Error::Parse(format!("not a finite number: {text:?}"))),
            Mode::Exact => parse_decimal_exact(s).map(Scalar::Exact),
        }
    }

    fn binop(
        &self,
        other: &Scalar,
        op: &str,
        float: impl Fn(f64, f64) -> f64,
        exact: impl Fn(&BigRational, &BigRational) -> Result<BigRational>,
    ) -> Result<Scalar> {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Scalar::Float(float(*a, *b))),
            (Scalar::Exact(a), Scalar::Exact(b)) => exact(a, b).map(Scalar::Exact),
            _ => Err(Error::ModeMismatch(format!(
                "{op} of {} and {} operands",
                self.mode(),
                other.mode()
            ))),
        }
    }

    pub fn checked_add(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, "add", |a, b| a + b, |a, b| Ok(a + b))
    }

    pub fn checked_sub(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, "sub", |a, b| a - b, |a, b| Ok(a - b))
    }

    pub fn checked_mul(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(other, "mul", |a, b| a * b, |a, b| Ok(a * b))
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar> {
        self.binop(
            other,
            "div",
            |a, b| a / b,
            |a, b| {
                if b.is_zero() {
                    domain("division by zero")
                } else {
                    Ok(a / b)
                }
            },
        )
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Float(v) => write!(f, "{v}"),
            Scalar::Exact(r) => write!(f, "{r}"),
        }
    }
}

/// EXACT values serialize as `"p/q"` strings, FLOAT values as JSON numbers.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Float(v) => serializer.serialize_f64(*v),
            Scalar::Exact(r) => serializer.collect_str(r),
        }
    }
}

fn parse_decimal_exact(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a decimal number: {s:?}"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(&all_digits).map_err(|_| bad())?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(r)
}

fn check_unit_closed<R: Real>(x: &R, what: &str) -> Result<()> {
    if *x < R::zero() || *x > R::one() {
        return domain(format!("{what} argument {x:?} outside [0,1]"));
    }
    Ok(())
}

pub(crate) fn b1_unchecked<R: Real>(x: &R) -> R {
    x.clone() - R::from_ratio(1, 2)
}

pub(crate) fn b2_unchecked<R: Real>(x: &R) -> R {
    x.clone() * x.clone() - x.clone() + R::from_ratio(1, 6)
}

/// Bernoulli polynomial of degree one, `x - 1/2`, on `[0,1]`.
pub fn b1<R: Real>(x: &R) -> Result<R> {
    check_unit_closed(x, "b1")?;
    Ok(b1_unchecked(x))
}

/// Bernoulli polynomial of degree two, `x^2 - x + 1/6`, on `[0,1]`.
pub fn b2<R: Real>(x: &R) -> Result<R> {
    check_unit_closed(x, "b2")?;
    Ok(b2_unchecked(x))
}

/// The representative of `j` modulo an odd `n` in `{-(n-1)/2, ..., (n-1)/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedResidue {
    value: i64,
    modulus: u64,
}

impl SignedResidue {
    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }
}

pub fn signed_residue(j: u64, n: u64) -> Result<SignedResidue> {
    if n < 3 || n % 2 == 0 {
        return domain(format!("signed residue needs an odd modulus >= 3, got {n}"));
    }
    let m = j % n;
    let value = if m <= (n - 1) / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    };
    Ok(SignedResidue { value, modulus: n })
}

/// `|r(j, n)|` for `0 <= j < n`, `n` odd. No validation.
#[inline]
pub(crate) fn abs_residue(m: u64, n: u64) -> u64 {
    if 2 * m < n {
        m
    } else {
        n - m
    }
}

/// The harmonic number `H_m = 1 + 1/2 + ... + 1/m`.
pub fn harmonic<R: Real>(m: u64) -> Result<R> {
    if m < 1 {
        return domain("harmonic number needs m >= 1");
    }
    Ok(R::sum_ordered((1..=m).map(|j| R::from_ratio(1, j as i64))))
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the first twelve prime bases cover all of `u64`.
pub fn is_odd_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 3 || n % 2 == 0 {
        return false;
    }
    for &p in &BASES[1..] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// All odd primes in `[lo, hi]`, ascending.
pub fn odd_primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 3 || lo > hi {
        return Vec::new();
    }
    let start = lo.max(3) | 1;
    (start..=hi).step_by(2).filter(|&n| is_odd_prime(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(b1(&q(0, 1)).unwrap(), q(-1, 2));
        assert_eq!(b1(&q(1, 2)).unwrap(), q(0, 1));
        assert_eq!(b1(&q(3, 4)).unwrap(), q(1, 4));
        assert_eq!(b2(&q(0, 1)).unwrap(), q(1, 6));
        assert_eq!(b2(&q(1, 1)).unwrap(), q(1, 6));
        assert_eq!(b2(&q(1, 2)).unwrap(), q(-1, 12));
        assert!(b1(&1.5f64).is_err());
        assert!(b2(&-0.1f64).is_err());
    }

    #[test]
    fn residues() {
        assert_eq!(signed_residue(2, 5).unwrap().value(), 2);
        assert_eq!(signed_residue(3, 5).unwrap().value(), -2);
        assert_eq!(signed_residue(7, 5).unwrap().value(), 2);
        assert!(signed_residue(3, 4).is_err());
        assert!(signed_residue(3, 1).is_err());
    }

    #[test]
    fn residue_bijection_for_primes() {
        for n in odd_primes_in(3, 101) {
            let h = (n - 1) / 2;
            for q in 1..=h {
                let mut seen: Vec<i64> = (1..n)
                    .map(|k| signed_residue(q * k, n).unwrap().value())
                    .collect();
                seen.sort_unstable();
                let expected: Vec<i64> = (-(h as i64)..=h as i64).filter(|&v| v != 0).collect();
                assert_eq!(seen, expected, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic::<BigRational>(1).unwrap(), q(1, 1));
        assert_eq!(harmonic::<BigRational>(2).unwrap(), q(3, 2));
        assert_eq!(harmonic::<BigRational>(3).unwrap(), q(11, 6));
        assert!(harmonic::<f64>(0).is_err());
    }

    #[test]
    fn primes() {
        assert!(is_odd_prime(5));
        assert!(!is_odd_prime(2));
        assert!(!is_odd_prime(9));
        assert!(!is_odd_prime(1));
        assert!(is_odd_prime(18446744073709551557));
        assert!(!is_odd_prime(3215031751)); // strong pseudoprime to bases 2, 3, 5, 7
        assert_eq!(odd_primes_in(3, 12), vec![3, 5, 7, 11]);
        assert_eq!(odd_primes_in(8, 10), Vec::<u64>::new());
        assert_eq!(odd_primes_in(13, 13), vec![13]);
        assert_eq!(odd_primes_in(0, 3), vec![3]);
    }

    #[test]
    fn primes_match_trial_division() {
        let trial = |n: u64| n >= 3 && n % 2 == 1 && (3..).step_by(2).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..5000 {
            assert_eq!(is_odd_prime(n), trial(n), "n={n}");
        }
    }

    #[test]
    fn scalar_parsing() {
        assert_eq!(Scalar::parse("1/4", Mode::Exact).unwrap(), Scalar::Exact(q(1, 4)));
        assert_eq!(Scalar::parse("0.25", Mode::Exact).unwrap(), Scalar::Exact(q(1, 4)));
        assert_eq!(Scalar::parse("-2.5e-1", Mode::Exact).unwrap(), Scalar::Exact(q(-1, 4)));
        assert_eq!(Scalar::parse("3", Mode::Exact).unwrap(), Scalar::Exact(q(3, 1)));
        assert_eq!(Scalar::parse("1/4", Mode::Float).unwrap(), Scalar::Float(0.25));
        assert!(Scalar::parse("1/0", Mode::Exact).is_err());
        assert!(Scalar::parse("abc", Mode::Exact).is_err());
        assert!(Scalar::parse("nan", Mode::Float).is_err());
        assert!(Scalar::parse(".", Mode::Exact).is_err());
    }

    #[test]
    fn scalar_modes_do_not_mix() {
        let a = Scalar::from_ratio(1, 3, Mode::Exact);
        let b = Scalar::from_ratio(1, 3, Mode::Float);
        assert!(matches!(a.checked_add(&b), Err(Error::ModeMismatch(_))));
        assert_eq!(a.checked_add(&a).unwrap(), Scalar::Exact(q(2, 3)));
        assert!(BigRational::from_scalar(&b).is_err());
        assert!(a.checked_div(&Scalar::zero(Mode::Exact)).is_err());
    }

    #[test]
    fn exact_scalars_are_reduced() {
        let s = Scalar::parse("6/-4", Mode::Exact).unwrap();
        let r = s.as_exact().unwrap();
        assert_eq!(r.numer(), &BigInt::from(-3));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    #[test]
    fn lazy_exact_sum_matches_fold() {
        let values: Vec<BigRational> = (1..40).map(|k| q(k % 7 - 3, k)).collect();
        let folded = values.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(BigRational::sum_ordered(values), folded);
    }

    #[test]
    fn serialization() {
        let e = serde_json::to_string(&Scalar::Exact(q(1, 27))).unwrap();
        assert_eq!(e, "\"1/27\"");
        let f = serde_json::to_string(&Scalar::Float(0.5)).unwrap();
        assert_eq!(f, "0.5");
    }
}
