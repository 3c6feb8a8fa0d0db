//! The univariate kernel `η` and the weighted reproducing kernel `K_{d,γ}`.
//!
//! Besides the generic evaluators there is an integer-scaled evaluator for
//! pairs of lattice nodes. On nodes `a/n` the value `12 n² η(a/n, b/n)` is an
//! integer, so exact kernel sums over a lattice reduce to integer arithmetic
//! over one fixed denominator.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};
use crate::numeric::{b1_unchecked, b2_unchecked, Real, Scalar};
use crate::weights::{subsets, WeightModel, Weights};

/// A point of `[0,1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<R>(Vec<R>);

impl<R: Real> Point<R> {
    pub fn new(coords: Vec<R>) -> Result<Point<R>> {
        for (j, x) in coords.iter().enumerate() {
            if *x < R::zero() || *x >= R::one() {
                return domain(format!("coordinate {} = {x:?} outside [0,1)", j + 1));
            }
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[R] {
        &self.0
    }
}

pub(crate) fn eta_unchecked<R: Real>(x: &R, y: &R) -> R {
    let diff = (x.clone() - y.clone()).abs();
    R::from_ratio(1, 2) * b2_unchecked(&diff) + b1_unchecked(x) * b1_unchecked(y)
}

/// `η(x, y) = B_2(|x - y|)/2 + B_1(x) B_1(y)` for `x, y ∈ [0,1)`.
pub fn eta<R: Real>(x: &R, y: &R) -> Result<R> {
    for v in [x, y] {
        if *v < R::zero() || *v >= R::one() {
            return domain(format!("eta argument {v:?} outside [0,1)"));
        }
    }
    Ok(eta_unchecked(x, y))
}

/// Weights converted once into the computation's field.
#[derive(Clone, Debug)]
pub(crate) enum PreparedWeights<R> {
    Product(Vec<R>),
    /// `Γ_1, ..., Γ_d`.
    Order(Vec<R>),
    Explicit(Vec<(u64, R)>),
}

impl<R: Real> PreparedWeights<R> {
    pub(crate) fn new(w: &Weights) -> Result<Self> {
        let conv = |g: &[Scalar]| g.iter().map(R::from_scalar).collect::<Result<Vec<R>>>();
        Ok(match w.model() {
            WeightModel::Product(g) => PreparedWeights::Product(conv(g)?),
            WeightModel::OrderDependent(g) => PreparedWeights::Order(conv(g)?),
            WeightModel::Explicit(map) => PreparedWeights::Explicit(
                map.iter()
                    .map(|(u, g)| Ok((u.mask(), R::from_scalar(g)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// `Σ_{u ≠ ∅} γ_u Π_{j∈u} t_j`.
    pub(crate) fn nonempty_sum(&self, t: &[R]) -> R {
        match self {
            PreparedWeights::Product(g) => {
                let mut prod = R::one();
                for (gj, tj) in g.iter().zip(t) {
                    prod = prod * (R::one() + gj.clone() * tj.clone());
                }
                prod - R::one()
            }
            PreparedWeights::Order(g) => {
                let e = elementary_symmetric(t);
                g.iter()
                    .zip(&e[1..])
                    .fold(R::zero(), |acc, (gk, ek)| acc + gk.clone() * ek.clone())
            }
            PreparedWeights::Explicit(entries) => {
                entries.iter().fold(R::zero(), |acc, (mask, g)| {
                    let mut prod = g.clone();
                    for (j, tj) in t.iter().enumerate() {
                        if mask & (1 << j) != 0 {
                            prod = prod * tj.clone();
                        }
                    }
                    acc + prod
                })
            }
        }
    }
}

/// `e_0, ..., e_m` of the values `t_1, ..., t_m`.
fn elementary_symmetric<T>(t: &[T]) -> Vec<T>
where
    T: Clone + Zero + One + Add<Output = T> + Mul<Output = T>,
{
    let mut e = vec![T::zero(); t.len() + 1];
    e[0] = T::one();
    for (j, tj) in t.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            e[k] = e[k].clone() + e[k - 1].clone() * tj.clone();
        }
    }
    e
}

fn check_dims<R>(x: &Point<R>, y: &Point<R>, w: &Weights) -> Result<()> {
    if x.0.len() != w.d() || y.0.len() != w.d() {
        return Err(Error::Domain(format!(
            "kernel dimension mismatch: points {} and {}, weights {}",
            x.0.len(),
            y.0.len(),
            w.d()
        )));
    }
    Ok(())
}

/// `K_{d,γ}(x, y) = Σ_{u ⊆ {1..d}} γ_u Π_{j∈u} η(x_j, y_j)`, including the
/// `u = ∅` term. Product and order-dependent weights avoid the `2^d` sum.
pub fn kernel_eval<R: Real>(x: &Point<R>, y: &Point<R>, w: &Weights) -> Result<R> {
    check_dims(x, y, w)?;
    let t: Vec<R> = x.0.iter().zip(&y.0).map(|(a, b)| eta_unchecked(a, b)).collect();
    Ok(R::one() + PreparedWeights::new(w)?.nonempty_sum(&t))
}

/// The kernel as the literal sum over all `2^d` subsets (`d <= 20`).
pub fn kernel_eval_by_subsets<R: Real>(x: &Point<R>, y: &Point<R>, w: &Weights) -> Result<R> {
    check_dims(x, y, w)?;
    let t: Vec<R> = x.0.iter().zip(&y.0).map(|(a, b)| eta_unchecked(a, b)).collect();
    let mut total = R::zero();
    for u in subsets(w.d())? {
        let mut term = w.gamma_as::<R>(&u)?;
        for j in u.indices() {
            term = term * t[j - 1].clone();
        }
        total = total + term;
    }
    Ok(total)
}

/// `12 n² η(a/n, b/n)` for `0 <= a, b < n`; always an integer.
pub fn lattice_eta_scaled(a: u64, b: u64, n: u64) -> i64 {
    let (a, b, n) = (a as i64, b as i64, n as i64);
    let m = (a - b).abs();
    6 * m * m - 6 * m * n + n * n + 3 * (2 * a - n) * (2 * b - n)
}

/// Table of `η` on lattice node pairs; computed on the fly above a size cap.
#[derive(Clone, Debug)]
pub(crate) struct EtaTable<T> {
    n: u64,
    values: Option<Vec<T>>,
    convert: fn(i64, u64) -> T,
}

const ETA_TABLE_MAX_N: u64 = 2048;

impl<T: Clone> EtaTable<T> {
    pub(crate) fn new(n: u64, convert: fn(i64, u64) -> T) -> Self {
        let values = (n <= ETA_TABLE_MAX_N).then(|| {
            let mut v = Vec::with_capacity((n * n) as usize);
            for a in 0..n {
                for b in 0..n {
                    v.push(convert(lattice_eta_scaled(a, b, n), n));
                }
            }
            v
        });
        EtaTable { n, values, convert }
    }

    #[inline]
    pub(crate) fn get(&self, a: u64, b: u64) -> T {
        match &self.values {
            Some(v) => v[(a * self.n + b) as usize].clone(),
            None => (self.convert)(lattice_eta_scaled(a, b, self.n), self.n),
        }
    }
}

pub(crate) fn scaled_to_f64(e: i64, n: u64) -> f64 {
    e as f64 / (12.0 * (n as f64) * (n as f64))
}

pub(crate) fn scaled_identity(e: i64, _n: u64) -> i64 {
    e
}

/// Integer types usable as exact accumulators.
pub(crate) trait ScaledInt:
    Clone + Send + Sync + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn from_i128(v: i128) -> Self;
    fn from_big(v: &BigInt) -> Self;
    fn into_big(self) -> BigInt;
}

impl ScaledInt for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }

    fn from_i128(v: i128) -> Self {
        v
    }

    fn from_big(v: &BigInt) -> Self {
        v.to_i128().expect("caller checked the i128 bound")
    }

    fn into_big(self) -> BigInt {
        BigInt::from(self)
    }
}

impl ScaledInt for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }

    fn from_i128(v: i128) -> Self {
        BigInt::from(v)
    }

    fn from_big(v: &BigInt) -> Self {
        v.clone()
    }

    fn into_big(self) -> BigInt {
        self
    }
}

/// Exact weights over the common denominator `den`, so that for a node pair
/// with scaled kernel values `E_j = 12 n² η_j`,
/// `Σ_{u≠∅} γ_u Π_{j∈u} η_j = nonempty(E) / den`.
#[derive(Clone, Debug)]
pub(crate) enum IntWeights<I> {
    Product { base: Vec<I>, slope: Vec<I>, base_product: I },
    Order { coeffs: Vec<I> },
    Explicit { entries: Vec<(u64, I)> },
}

/// Exact rational weights scaled to integers plus their common denominator
/// and a bound (in bits) on `|nonempty(E)|`.
#[derive(Clone, Debug)]
pub(crate) struct ScaledWeights {
    pub(crate) model: IntWeights<BigInt>,
    pub(crate) den: BigInt,
    pub(crate) pair_bits: f64,
}

fn log2_big(v: &BigInt) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = v.bits();
    let shift = bits.saturating_sub(60);
    let top = (v.abs() >> shift).to_f64().unwrap_or(1.0);
    top.log2() + shift as f64
}

fn log2_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().filter(|t| t.is_finite()).collect();
    let Some(max) = terms.iter().cloned().reduce(f64::max) else {
        return f64::NEG_INFINITY;
    };
    max + terms.iter().map(|t| (t - max).exp2()).sum::<f64>().log2()
}

fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |l, v| l.lcm(v.denom()))
}

fn exact_of(s: &Scalar) -> Result<&BigRational> {
    s.as_exact().ok_or_else(|| {
        Error::ModeMismatch(format!("float weight {s} cannot enter an exact computation"))
    })
}

fn scale_to(v: &BigRational, l: &BigInt) -> BigInt {
    v.numer() * (l / v.denom())
}

impl ScaledWeights {
    pub(crate) fn new(w: &Weights, n: u64) -> Result<ScaledWeights> {
        let d = w.d();
        let s = BigInt::from(12u64 * n * n);
        let log_e = ((4 * n * n) as f64).log2();
        match w.model() {
            WeightModel::Product(g) => {
                let mut base = Vec::with_capacity(d);
                let mut slope = Vec::with_capacity(d);
                let mut bits = 0.0;
                for gj in g {
                    let r = exact_of(gj)?;
                    let b = r.denom() * &s;
                    bits += log2_sum([log2_big(&b), log2_big(r.numer()) + log_e]);
                    base.push(b);
                    slope.push(r.numer().clone());
                }
                let base_product: BigInt = base.iter().product();
                Ok(ScaledWeights {
                    den: base_product.clone(),
                    pair_bits: log2_sum([bits, log2_big(&base_product)]),
                    model: IntWeights::Product { base, slope, base_product },
                })
            }
            WeightModel::OrderDependent(g) => {
                let exact = g.iter().map(exact_of).collect::<Result<Vec<_>>>()?;
                let l = lcm_of_denominators(exact.iter().copied());
                let mut coeffs = Vec::with_capacity(d);
                let mut terms = Vec::with_capacity(d);
                let mut log_binom = 0.0f64;
                for (k, gk) in exact.iter().enumerate() {
                    let k = k + 1;
                    log_binom += (((d - k + 1) as f64) / k as f64).log2();
                    let c = scale_to(gk, &l) * num_traits::pow(s.clone(), d - k);
                    terms.push(log2_big(&c) + log_binom + k as f64 * log_e);
                    coeffs.push(c);
                }
                Ok(ScaledWeights {
                    den: l * num_traits::pow(s, d),
                    pair_bits: log2_sum(terms),
                    model: IntWeights::Order { coeffs },
                })
            }
            WeightModel::Explicit(map) => {
                let exact = map
                    .values()
                    .map(exact_of)
                    .collect::<Result<Vec<_>>>()?;
                let l = lcm_of_denominators(exact.iter().copied());
                let mut entries = Vec::with_capacity(map.len());
                let mut terms = Vec::with_capacity(map.len());
                for ((u, _), g) in map.iter().zip(exact) {
                    let c = scale_to(g, &l) * num_traits::pow(s.clone(), d - u.len());
                    terms.push(log2_big(&c) + u.len() as f64 * log_e);
                    entries.push((u.mask(), c));
                }
                Ok(ScaledWeights {
                    den: l * num_traits::pow(s, d),
                    pair_bits: log2_sum(terms),
                    model: IntWeights::Explicit { entries },
                })
            }
        }
    }

    /// True when sums of `count` pair values (plus `den` terms) fit in `i128`.
    pub(crate) fn fits_i128(&self, count: f64) -> bool {
        let total = log2_sum([self.pair_bits, log2_big(&self.den)]) + count.max(1.0).log2() + 2.0;
        total < 125.0
    }

    pub(crate) fn convert<I: ScaledInt>(&self) -> IntWeights<I> {
        let conv = |v: &[BigInt]| v.iter().map(I::from_big).collect::<Vec<I>>();
        match &self.model {
            IntWeights::Product { base, slope, base_product } => IntWeights::Product {
                base: conv(base),
                slope: conv(slope),
                base_product: I::from_big(base_product),
            },
            IntWeights::Order { coeffs } => IntWeights::Order { coeffs: conv(coeffs) },
            IntWeights::Explicit { entries } => IntWeights::Explicit {
                entries: entries.iter().map(|(m, c)| (*m, I::from_big(c))).collect(),
            },
        }
    }
}

impl<I: ScaledInt> IntWeights<I> {
    /// `den · Σ_{u≠∅} γ_u Π_{j∈u} η_j` given `e[j] = 12 n² η_j`.
    #[inline]
    pub(crate) fn nonempty(&self, e: &[i64]) -> I {
        match self {
            IntWeights::Product { base, slope, base_product } => {
                let mut prod = I::one();
                for ((b, s), &ej) in base.iter().zip(slope).zip(e) {
                    prod = prod * (b.clone() + s.clone() * I::from_i64(ej));
                }
                prod - base_product.clone()
            }
            IntWeights::Order { coeffs } => {
                let t: Vec<I> = e.iter().map(|&v| I::from_i64(v)).collect();
                let es = elementary_symmetric(&t);
                coeffs
                    .iter()
                    .zip(&es[1..])
                    .fold(I::zero(), |acc, (c, ek)| acc + c.clone() * ek.clone())
            }
            IntWeights::Explicit { entries } => entries.iter().fold(I::zero(), |acc, (mask, c)| {
                let mut prod = c.clone();
                for (j, &ej) in e.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        prod = prod * I::from_i64(ej);
                    }
                }
                acc + prod
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Mode;
    use crate::weights::Subset;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    fn pt(c: &[(i64, i64)]) -> Point<BigRational> {
        Point::new(c.iter().map(|&(a, b)| q(a, b)).collect()).unwrap()
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(&q(0, 1), &q(0, 1)).unwrap(), q(1, 3));
        assert_eq!(eta(&q(1, 2), &q(1, 2)).unwrap(), q(1, 12));
        assert_eq!(eta(&q(0, 1), &q(1, 3)).unwrap(), q(1, 18));
        assert!(eta(&1.0f64, &0.0).is_err());
        assert!(eta(&0.0f64, &-0.5).is_err());
    }

    #[test]
    fn kernel_examples() {
        let w1 = Weights::product_ratios(&[(1, 1)], Mode::Exact).unwrap();
        assert_eq!(kernel_eval(&pt(&[(0, 1)]), &pt(&[(0, 1)]), &w1).unwrap(), q(4, 3));
        let w2 = Weights::product_ratios(&[(1, 1), (1, 1)], Mode::Exact).unwrap();
        let origin = pt(&[(0, 1), (0, 1)]);
        assert_eq!(kernel_eval(&origin, &origin, &w2).unwrap(), q(16, 9));
        let zero = Weights::product_ratios(&[(0, 1), (0, 1)], Mode::Exact).unwrap();
        let y = pt(&[(1, 3), (5, 7)]);
        assert_eq!(kernel_eval(&origin, &y, &zero).unwrap(), q(1, 1));
        assert!(kernel_eval(&pt(&[(0, 1)]), &origin, &w2).is_err());
        assert!(Point::new(vec![q(1, 1)]).is_err());
    }

    #[test]
    fn scaled_eta_matches_rational_eta() {
        for n in [1u64, 2, 3, 4, 7, 10, 13] {
            for a in 0..n {
                for b in 0..n {
                    let exact = eta(&q(a as i64, n as i64), &q(b as i64, n as i64)).unwrap();
                    let scaled = q(lattice_eta_scaled(a, b, n), 12 * (n * n) as i64);
                    assert_eq!(exact, scaled, "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn fast_paths_match_subset_sum() {
        let x = pt(&[(1, 5), (2, 3), (0, 1), (3, 8)]);
        let y = pt(&[(4, 5), (1, 7), (1, 2), (3, 8)]);
        let exact = |p, qq| Scalar::from_ratio(p, qq, Mode::Exact);
        let models = [
            Weights::product_ratios(&[(1, 1), (1, 4), (1, 9), (2, 3)], Mode::Exact).unwrap(),
            Weights::order_dependent(vec![exact(1, 2), exact(1, 3), exact(1, 5), exact(1, 7)]).unwrap(),
            Weights::explicit(
                4,
                Mode::Exact,
                [
                    (Subset::from_indices(&[1, 4]).unwrap(), exact(1, 2)),
                    (Subset::from_indices(&[2]).unwrap(), exact(3, 2)),
                ],
            )
            .unwrap(),
        ];
        for w in &models {
            assert_eq!(
                kernel_eval(&x, &y, w).unwrap(),
                kernel_eval_by_subsets(&x, &y, w).unwrap(),
                "{}",
                w.descriptor()
            );
        }
    }

    #[test]
    fn scaled_weights_reproduce_kernel() {
        let n = 7u64;
        let exact = |p, qq| Scalar::from_ratio(p, qq, Mode::Exact);
        let models = [
            Weights::product_ratios(&[(1, 1), (1, 4), (3, 9)], Mode::Exact).unwrap(),
            Weights::order_dependent(vec![exact(1, 2), exact(2, 3), exact(1, 5)]).unwrap(),
            Weights::explicit(
                3,
                Mode::Exact,
                [(Subset::from_indices(&[1, 3]).unwrap(), exact(5, 2))],
            )
            .unwrap(),
        ];
        for w in &models {
            let sw = ScaledWeights::new(w, n).unwrap();
            assert!(sw.fits_i128(49.0));
            let iw: IntWeights<i128> = sw.convert();
            let bw: IntWeights<BigInt> = sw.convert();
            for (a, b) in [([1u64, 2, 3], [4u64, 0, 6]), ([0, 0, 0], [0, 0, 0]), ([6, 5, 1], [2, 2, 2])] {
                let e: Vec<i64> = a.iter().zip(&b).map(|(&x, &y)| lattice_eta_scaled(x, y, n)).collect();
                let x = pt(&a.map(|v| (v as i64, n as i64)));
                let y = pt(&b.map(|v| (v as i64, n as i64)));
                let direct = kernel_eval(&x, &y, w).unwrap() - q(1, 1);
                let via_int = BigRational::new(iw.nonempty(&e).into_big(), sw.den.clone());
                let via_big = BigRational::new(bw.nonempty(&e), sw.den.clone());
                assert_eq!(direct, via_int);
                assert_eq!(direct, via_big);
            }
        }
    }

    #[test]
    fn float_weights_rejected_by_scaled_path() {
        let w = Weights::product(vec![Scalar::Float(0.5)]).unwrap();
        assert!(matches!(ScaledWeights::new(&w, 5), Err(Error::ModeMismatch(_))));
    }
}
