//! Squared worst-case errors `e²(n, z)` and their average `ē²(n)`.
//!
//! For a rule with nodes `x_0, ..., x_{n-1}` the squared worst-case error in
//! the reproducing kernel Hilbert space with kernel `K` is
//!
//! ```text
//! e²(n, z) = (1/n²) Σ_i Σ_k K(x_i, x_k) - 1
//!          = (1/n²) Σ_i Σ_k Σ_{u≠∅} γ_u Π_{j∈u} η(x_{i,j}, x_{k,j}),
//! ```
//!
//! which holds because `∫ η(x, y) dy = 0` for every `x`. The average over
//! all generating vectors factorizes across coordinates:
//! `ē²(n) = Σ_{u≠∅} γ_u (1/n²) Σ_{i,k} M(i,k)^{|u|}` with
//! `M(i,k) = (1/(n-1)) Σ_{z=1}^{n-1} η({iz/n}, {kz/n})`.
//!
//! EXACT mode works on integers: `12 n² η` is integral on lattice nodes, so
//! every sum is accumulated over a fixed denominator and reduced once.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{capacity, domain, Error, Result};
use crate::kernel::{
    kernel_eval, scaled_identity, scaled_to_f64, EtaTable, IntWeights, Point, PreparedWeights,
    ScaledInt, ScaledWeights,
};
use crate::lattice::{lattice_points, qmc_quadrature, qmc_quadrature_on_nodes, GeneratingVector};
use crate::numeric::{Mode, Scalar};
use crate::weights::Weights;

/// Cap on the number of generating vectors an exhaustive loop may visit.
pub const MAX_EXHAUSTIVE_VECTORS: u128 = 10_000_000;

/// Cap on `n` for the `O(n³)` factorized average.
pub const MAX_FACTORIZED_N: u64 = 2000;

/// Slack below zero tolerated for FLOAT squared errors.
pub const FLOAT_NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WceMethod {
    DoubleSum,
    ExhaustiveAvg,
    FactorizedAvg,
    QuadratureIdentity,
}

/// A squared worst-case error, or an average of them when `z` is absent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WceResult {
    pub n: u64,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<u64>>,
    pub mode: Mode,
    pub method: WceMethod,
    pub e2: Scalar,
}

struct FloatCore {
    table: EtaTable<f64>,
    weights: PreparedWeights<f64>,
    factors: Option<ProductFactors<f64>>,
}

struct ExactCore<I> {
    table: EtaTable<i64>,
    weights: IntWeights<I>,
    factors: Option<ProductFactors<I>>,
    /// The same factors when every pair product fits in `i64`.
    narrow: Option<ProductFactors<i64>>,
}

enum Core {
    Float(FloatCore),
    Exact128(ExactCore<i128>),
    ExactBig(ExactCore<BigInt>),
}

/// Entry cap for per-coordinate factor tables.
const FACTOR_TABLE_MAX_ENTRIES: u64 = 1 << 21;

/// Rows are split across threads only from this `n` on.
const PARALLEL_ROWS_MIN_N: u64 = 512;

/// For product weights, per-coordinate tables `f_j(a, b)` with
/// `Σ_{u≠∅} γ_u Π_{j∈u} η_j = Π_j f_j(a_j, b_j) - offset` (up to the
/// common scale of the core).
struct ProductFactors<T> {
    n: usize,
    values: Vec<T>,
    offset: T,
}

impl<T: Clone> ProductFactors<T> {
    fn build(n: u64, d: usize, offset: T, f: impl Fn(usize, i64) -> T) -> Option<Self> {
        if n * n * d as u64 > FACTOR_TABLE_MAX_ENTRIES {
            return None;
        }
        let table = EtaTable::new(n, scaled_identity);
        let mut values = Vec::with_capacity((n * n) as usize * d);
        for j in 0..d {
            for a in 0..n {
                for b in 0..n {
                    values.push(f(j, table.get(a, b)));
                }
            }
        }
        Some(ProductFactors { n: n as usize, values, offset })
    }

    /// Offsets of coordinate `j`'s row for numerator `a`.
    #[inline]
    fn row_starts(&self, xi: &[u64], starts: &mut [usize]) {
        let nn = self.n * self.n;
        for (j, (&a, s)) in xi.iter().zip(starts.iter_mut()).enumerate() {
            *s = j * nn + a as usize * self.n;
        }
    }
}

impl<T: Clone + std::ops::Mul<Output = T>> ProductFactors<T> {
    #[inline]
    fn product(&self, starts: &[usize], xk: &[u64]) -> T {
        let mut p = self.values[starts[0] + xk[0] as usize].clone();
        for j in 1..starts.len() {
            p = p * self.values[starts[j] + xk[j] as usize].clone();
        }
        p
    }
}

/// `i64` copies of exact factors when `Π_j max |f_j|` stays below `2^62`.
fn narrow_factors<I: ScaledInt>(f: &ProductFactors<I>, d: usize) -> Option<ProductFactors<i64>> {
    let nn = f.n * f.n;
    let mut values = Vec::with_capacity(f.values.len());
    let mut bound: u128 = 1;
    for j in 0..d {
        let mut max = 0u128;
        for v in &f.values[j * nn..(j + 1) * nn] {
            let v = v.clone().into_big().to_i64()?;
            max = max.max(v.unsigned_abs() as u128);
            values.push(v);
        }
        bound = bound.checked_mul(max.max(1))?;
        if bound >= 1 << 62 {
            return None;
        }
    }
    let offset = f.offset.clone().into_big().to_i64()?;
    Some(ProductFactors { n: f.n, values, offset })
}

fn map_rows<T: Send>(n: u64, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n >= PARALLEL_ROWS_MIN_N {
        (0..n as usize).into_par_iter().with_min_len(16).map(f).collect()
    } else {
        (0..n as usize).map(f).collect()
    }
}

/// Evaluates `e²(n, ·)` for many generating vectors with fixed `n` and weights.
pub struct WceEvaluator {
    n: u64,
    d: usize,
    mode: Mode,
    den: BigInt,
    core: Core,
}

/// Node numerators `i z_j mod n`, row-major.
fn node_numerators(n: u64, z: &[u64]) -> Vec<u64> {
    let d = z.len();
    let mut nums = vec![0u64; n as usize * d];
    for i in 1..n as usize {
        for j in 0..d {
            nums[i * d + j] = (nums[(i - 1) * d + j] + z[j]) % n;
        }
    }
    nums
}

impl<I: ScaledInt> ExactCore<I> {
    fn new(n: u64, d: usize, weights: IntWeights<I>, with_factors: bool) -> Self {
        let factors = match (&weights, with_factors) {
            (IntWeights::Product { base, slope, base_product }, true) => {
                ProductFactors::build(n, d, base_product.clone(), |j, e| {
                    base[j].clone() + slope[j].clone() * I::from_i64(e)
                })
            }
            _ => None,
        };
        let narrow = factors.as_ref().and_then(|f| narrow_factors(f, d));
        ExactCore { table: EtaTable::new(n, scaled_identity), weights, factors, narrow }
    }

    /// `Σ_k Π_j f_j(a_j, x_{k,j})` over `k` in `ks`, minus `|ks| · offset`.
    #[inline]
    fn factor_row(&self, nums: &[u64], d: usize, a: &[u64], ks: std::ops::Range<usize>) -> Option<I> {
        let count = ks.len() as i64;
        if let Some(f) = &self.narrow {
            let row = |j: usize| {
                let s = j * f.n * f.n + a[j] as usize * f.n;
                &f.values[s..s + f.n]
            };
            let mut acc: i128 = 0;
            match d {
                1 => {
                    let r0 = row(0);
                    for k in ks {
                        acc += r0[nums[k] as usize] as i128;
                    }
                }
                2 => {
                    let (r0, r1) = (row(0), row(1));
                    for xk in nums[ks.start * 2..ks.end * 2].chunks_exact(2) {
                        acc += (r0[xk[0] as usize] * r1[xk[1] as usize]) as i128;
                    }
                }
                3 => {
                    let (r0, r1, r2) = (row(0), row(1), row(2));
                    for xk in nums[ks.start * 3..ks.end * 3].chunks_exact(3) {
                        let p = r0[xk[0] as usize] * r1[xk[1] as usize] * r2[xk[2] as usize];
                        acc += p as i128;
                    }
                }
                _ => {
                    let rows: Vec<&[i64]> = (0..d).map(row).collect();
                    for xk in nums[ks.start * d..ks.end * d].chunks_exact(d) {
                        let mut p = rows[0][xk[0] as usize];
                        for j in 1..d {
                            p *= rows[j][xk[j] as usize];
                        }
                        acc += p as i128;
                    }
                }
            }
            return Some(I::from_i128(acc - f.offset as i128 * count as i128));
        }
        let f = self.factors.as_ref()?;
        let mut starts = vec![0usize; d];
        f.row_starts(a, &mut starts);
        let mut acc = I::zero();
        for k in ks {
            acc = acc + f.product(&starts, &nums[k * d..(k + 1) * d]);
        }
        Some(acc - f.offset.clone() * I::from_i64(count))
    }

    /// `n² · den · e²`, summing each row `i` as `diag + 2 Σ_{k>i}`.
    fn double_sum(&self, n: u64, d: usize, z: &[u64]) -> I {
        let nums = node_numerators(n, z);
        let rows: Vec<I> = map_rows(n, |i| {
            let xi = &nums[i * d..(i + 1) * d];
            if let Some(diag) = self.factor_row(&nums, d, xi, i..i + 1) {
                let off = self.factor_row(&nums, d, xi, i + 1..n as usize).expect("factors");
                return diag + off.clone() + off;
            }
            let mut e = vec![0i64; d];
            for j in 0..d {
                e[j] = self.table.get(xi[j], xi[j]);
            }
            let diag = self.weights.nonempty(&e);
            let mut off = I::zero();
            for k in i + 1..n as usize {
                let xk = &nums[k * d..(k + 1) * d];
                for j in 0..d {
                    e[j] = self.table.get(xi[j], xk[j]);
                }
                off = off + self.weights.nonempty(&e);
            }
            diag + off.clone() + off
        });
        rows.into_iter().fold(I::zero(), |acc, r| acc + r)
    }

    /// `n · den · Σ_i K(x_i, y)` for the node `y`, including the `u = ∅` term.
    fn kernel_row(&self, n: u64, d: usize, nums: &[u64], y: &[u64], den: &I) -> I {
        let count = I::from_i64(n as i64);
        if let Some(acc) = self.factor_row(nums, d, y, 0..n as usize) {
            return acc + den.clone() * count;
        }
        let mut e = vec![0i64; d];
        let mut acc = I::zero();
        for i in 0..n as usize {
            let xi = &nums[i * d..(i + 1) * d];
            for j in 0..d {
                e[j] = self.table.get(xi[j], y[j]);
            }
            acc = acc + self.weights.nonempty(&e);
        }
        acc + den.clone() * count
    }
}

impl FloatCore {
    fn new(n: u64, d: usize, weights: PreparedWeights<f64>) -> Self {
        let factors = match &weights {
            PreparedWeights::Product(g) => {
                let scale = 12.0 * (n as f64) * (n as f64);
                ProductFactors::build(n, d, 1.0, |j, e| 1.0 + g[j] * (e as f64 / scale))
            }
            _ => None,
        };
        FloatCore { table: EtaTable::new(n, scaled_to_f64), weights, factors }
    }

    fn double_sum(&self, n: u64, d: usize, z: &[u64]) -> f64 {
        let nums = node_numerators(n, z);
        let rows: Vec<f64> = map_rows(n, |i| {
            let xi = &nums[i * d..(i + 1) * d];
            if let Some(f) = &self.factors {
                let mut starts = vec![0usize; d];
                f.row_starts(xi, &mut starts);
                let diag = f.product(&starts, xi) - 1.0;
                let mut off = 0.0;
                for k in i + 1..n as usize {
                    off += f.product(&starts, &nums[k * d..(k + 1) * d]) - 1.0;
                }
                return diag + 2.0 * off;
            }
            let mut t = vec![0.0f64; d];
            for j in 0..d {
                t[j] = self.table.get(xi[j], xi[j]);
            }
            let diag = self.weights.nonempty_sum(&t);
            let mut off = 0.0;
            for k in i + 1..n as usize {
                let xk = &nums[k * d..(k + 1) * d];
                for j in 0..d {
                    t[j] = self.table.get(xi[j], xk[j]);
                }
                off += self.weights.nonempty_sum(&t);
            }
            diag + 2.0 * off
        });
        rows.into_iter().sum::<f64>() / (n as f64 * n as f64)
    }
}

fn check_float_nonnegative(v: f64, what: &str) -> Result<()> {
    if v < -FLOAT_NEGATIVE_SLACK || v.is_nan() {
        return Err(Error::Consistency(format!("{what} = {v} is negative")));
    }
    Ok(())
}

fn check_exact_nonnegative(v: &BigRational, what: &str) -> Result<()> {
    if v.is_negative() {
        return Err(Error::Consistency(format!("{what} = {v} is negative")));
    }
    Ok(())
}

impl WceEvaluator {
    pub fn new(n: u64, w: &Weights, mode: Mode) -> Result<WceEvaluator> {
        if n == 0 {
            return domain("a lattice rule needs n >= 1");
        }
        let d = w.d();
        let (den, core) = match mode {
            Mode::Float => (
                BigInt::from(1),
                Core::Float(FloatCore::new(n, d, PreparedWeights::new(w)?)),
            ),
            Mode::Exact => {
                let sw = ScaledWeights::new(w, n)?;
                let pairs = (n as f64) * (n as f64) * 2.0;
                let core = if sw.fits_i128(pairs) {
                    Core::Exact128(ExactCore::new(n, d, sw.convert(), true))
                } else {
                    Core::ExactBig(ExactCore::new(n, d, sw.convert(), false))
                };
                (sw.den, core)
            }
        };
        Ok(WceEvaluator { n, d, mode, den, core })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn check_z(&self, z: &[u64]) -> Result<()> {
        if z.len() != self.d {
            return domain(format!(
                "generating vector has {} components but the weights have d = {}",
                z.len(),
                self.d
            ));
        }
        GeneratingVector::new(self.n, z.to_vec()).map(|_| ())
    }

    /// `n² · den · e²(n, z)` (EXACT evaluators only).
    fn exact_numerator(&self, z: &[u64]) -> BigInt {
        match &self.core {
            Core::Exact128(c) => c.double_sum(self.n, self.d, z).into_big(),
            Core::ExactBig(c) => c.double_sum(self.n, self.d, z),
            Core::Float(_) => unreachable!("exact numerator requested from a float evaluator"),
        }
    }

    fn exact_denominator(&self) -> BigInt {
        BigInt::from(self.n) * BigInt::from(self.n) * &self.den
    }

    /// `e²(n, z)` by the kernel double sum.
    pub fn e2(&self, z: &[u64]) -> Result<Scalar> {
        self.check_z(z)?;
        match &self.core {
            Core::Float(c) => {
                let v = c.double_sum(self.n, self.d, z);
                check_float_nonnegative(v, "e^2")?;
                Ok(Scalar::Float(v))
            }
            _ => {
                let v = BigRational::new(self.exact_numerator(z), self.exact_denominator());
                check_exact_nonnegative(&v, "e^2")?;
                Ok(Scalar::Exact(v))
            }
        }
    }

    /// `e²(n, z)` as a float regardless of mode.
    pub fn e2_f64(&self, z: &[u64]) -> Result<f64> {
        Ok(self.e2(z)?.to_f64())
    }

    /// `e²(n, z)` as `-Q_{d,n,z}(g)` with `g(y) = 1 - (1/n) Σ_i K(x_i, y)`.
    pub fn e2_via_quadrature_identity(&self, z: &[u64], w: &Weights) -> Result<Scalar> {
        self.check_z(z)?;
        let gv = GeneratingVector::new(self.n, z.to_vec())?;
        let points = lattice_points(&gv);
        let n = self.n;
        match &self.core {
            Core::Float(_) => {
                let nodes: Vec<Point<f64>> = (0..points.len()).map(|i| points.point(i)).collect();
                let q: f64 = qmc_quadrature(
                    |y| {
                        let mut s = 0.0;
                        for x in &nodes {
                            s += kernel_eval(x, y, w)?;
                        }
                        Ok(1.0 - s / n as f64)
                    },
                    &points,
                )?;
                Ok(Scalar::Float(-q))
            }
            Core::Exact128(c) => self.exact_quadrature(c, &points, z),
            Core::ExactBig(c) => self.exact_quadrature(c, &points, z),
        }
    }

    fn exact_quadrature<I: ScaledInt>(
        &self,
        core: &ExactCore<I>,
        points: &crate::lattice::LatticePointSet,
        z: &[u64],
    ) -> Result<Scalar> {
        let (n, d) = (self.n, self.d);
        let nums = node_numerators(n, z);
        let den_i = I::from_big(&self.den);
        let scale = BigInt::from(n) * &self.den;
        let q: BigRational = qmc_quadrature_on_nodes(
            |y| {
                let row = core.kernel_row(n, d, &nums, y, &den_i).into_big();
                // Every node shares the denominator; the ordered sum reduces once.
                Ok(BigRational::new_raw(&scale - row, scale.clone()))
            },
            points,
        )?;
        Ok(Scalar::Exact(-q))
    }
}

/// `e²(n, z)` by the kernel double sum.
pub fn wce_squared(gv: &GeneratingVector, w: &Weights, mode: Mode) -> Result<WceResult> {
    let eval = WceEvaluator::new(gv.n(), w, mode)?;
    Ok(WceResult {
        n: gv.n(),
        d: gv.d(),
        z: Some(gv.z().to_vec()),
        mode,
        method: WceMethod::DoubleSum,
        e2: eval.e2(gv.z())?,
    })
}

/// `e²(n, z)` through the lattice quadrature engine.
pub fn wce_squared_via_quadrature_identity(
    gv: &GeneratingVector,
    w: &Weights,
    mode: Mode,
) -> Result<WceResult> {
    let eval = WceEvaluator::new(gv.n(), w, mode)?;
    Ok(WceResult {
        n: gv.n(),
        d: gv.d(),
        z: Some(gv.z().to_vec()),
        mode,
        method: WceMethod::QuadratureIdentity,
        e2: eval.e2_via_quadrature_identity(gv.z(), w)?,
    })
}

/// Number of generating vectors `(n-1)^d`, or `None` past `u128`.
pub fn vector_count(n: u64, d: usize) -> Option<u128> {
    (n.saturating_sub(1) as u128).checked_pow(d as u32)
}

/// The `t`-th vector of `{1, ..., n-1}^d` in lexicographic order.
pub(crate) fn vector_at(mut t: u128, n: u64, d: usize) -> Vec<u64> {
    let base = (n - 1) as u128;
    let mut z = vec![1u64; d];
    for j in (0..d).rev() {
        z[j] = (t % base) as u64 + 1;
        t /= base;
    }
    z
}

pub(crate) fn check_exhaustive_capacity(n: u64, d: usize, what: &str) -> Result<u128> {
    if n < 2 {
        return domain(format!("{what} needs n >= 2"));
    }
    match vector_count(n, d) {
        Some(c) if c <= MAX_EXHAUSTIVE_VECTORS => Ok(c),
        _ => capacity(format!(
            "{what}: (n-1)^d = {}^{d} exceeds {MAX_EXHAUSTIVE_VECTORS} generating vectors",
            n - 1
        )),
    }
}

const BLOCK: u128 = 1024;

/// Exact average of `e²(n, z)` over all `(n-1)^d` generating vectors.
pub fn avg_wce_squared_exhaustive(n: u64, w: &Weights, mode: Mode) -> Result<WceResult> {
    let d = w.d();
    let count = check_exhaustive_capacity(n, d, "exhaustive average").map_err(|e| match e {
        Error::Capacity(msg) => Error::Capacity(format!("{msg}; use the factorized average")),
        other => other,
    })?;
    let eval = WceEvaluator::new(n, w, mode)?;
    let blocks = count.div_ceil(BLOCK);
    let e2 = match mode {
        Mode::Float => {
            let sums: Vec<f64> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    (b * BLOCK..((b + 1) * BLOCK).min(count))
                        .map(|t| match &eval.core {
                            Core::Float(c) => c.double_sum(n, d, &vector_at(t, n, d)),
                            _ => unreachable!(),
                        })
                        .sum::<f64>()
                })
                .collect();
            let v = sums.into_iter().sum::<f64>() / count as f64;
            check_float_nonnegative(v, "average e^2")?;
            Scalar::Float(v)
        }
        Mode::Exact => {
            let sums: Vec<BigInt> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    (b * BLOCK..((b + 1) * BLOCK).min(count))
                        .map(|t| eval.exact_numerator(&vector_at(t, n, d)))
                        .sum::<BigInt>()
                })
                .collect();
            let total: BigInt = sums.into_iter().sum();
            let v = BigRational::new(total, eval.exact_denominator() * BigInt::from(count));
            check_exact_nonnegative(&v, "average e^2")?;
            Scalar::Exact(v)
        }
    };
    Ok(WceResult { n, d, z: None, mode, method: WceMethod::ExhaustiveAvg, e2 })
}

/// Scaled coordinate averages `m(i,k) = 12 n² Σ_{z=1}^{n-1} η({iz/n}, {kz/n})`
/// for `i <= k`, row-major over the upper triangle.
fn coordinate_averages(n: u64) -> Vec<i64> {
    let table = EtaTable::new(n, scaled_identity);
    let rows: Vec<Vec<i64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|k| {
                    let (mut a, mut b, mut s) = (0u64, 0u64, 0i64);
                    for _ in 1..n {
                        a = (a + i) % n;
                        b = (b + k) % n;
                        s += table.get(a, b);
                    }
                    s
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// `ē²(n)` via the coordinate factorization; cost `O(n³ + n² d)`.
pub fn avg_wce_squared_factorized(n: u64, w: &Weights, mode: Mode) -> Result<WceResult> {
    let d = w.d();
    if n < 2 {
        return domain("factorized average needs n >= 2");
    }
    if n > MAX_FACTORIZED_N {
        return capacity(format!(
            "factorized average builds an O(n^3) table; n = {n} exceeds {MAX_FACTORIZED_N}"
        ));
    }
    let m = coordinate_averages(n);
    // Entries above the diagonal stand for both (i,k) and (k,i).
    let multiplicity = |idx_in_row: usize| if idx_in_row == 0 { 1 } else { 2 };
    let e2 = match mode {
        Mode::Float => {
            let w_k = w.order_sums::<f64>()?;
            let scale = (n - 1) as f64 * 12.0 * (n as f64) * (n as f64);
            let mut power_sums = vec![0.0f64; d + 1];
            let mut idx = 0;
            for i in 0..n {
                for off in 0..(n - i) as usize {
                    let mu = m[idx] as f64 / scale;
                    idx += 1;
                    let mult = multiplicity(off) as f64;
                    let mut p = mu;
                    for s in power_sums.iter_mut().skip(1) {
                        *s += mult * p;
                        p *= mu;
                    }
                }
            }
            let nn = n as f64 * n as f64;
            let v = (1..=d).map(|k| w_k[k] * power_sums[k] / nn).sum::<f64>();
            check_float_nonnegative(v, "average e^2")?;
            Scalar::Float(v)
        }
        Mode::Exact => {
            let w_k = w.order_sums::<BigRational>()?;
            let mut power_sums = vec![BigInt::zero(); d + 1];
            let mut idx = 0;
            for i in 0..n {
                for off in 0..(n - i) as usize {
                    let mu = BigInt::from(m[idx]);
                    idx += 1;
                    let mult = multiplicity(off);
                    let mut p = mu.clone();
                    for s in power_sums.iter_mut().skip(1) {
                        *s += &p * mult;
                        p *= &mu;
                    }
                }
            }
            let scale = BigInt::from((n - 1) * 12 * n * n);
            let nn = BigInt::from(n * n);
            let mut v = BigRational::zero();
            let mut scale_k = BigInt::from(1);
            for k in 1..=d {
                scale_k *= &scale;
                v += &w_k[k] * BigRational::new(power_sums[k].clone(), &nn * &scale_k);
            }
            check_exact_nonnegative(&v, "average e^2")?;
            Scalar::Exact(v)
        }
    };
    Ok(WceResult { n, d, z: None, mode, method: WceMethod::FactorizedAvg, e2 })
}

/// Converts a result value into `f64` for reporting.
pub fn e2_as_f64(r: &WceResult) -> f64 {
    match &r.e2 {
        Scalar::Float(v) => *v,
        Scalar::Exact(q) => ToPrimitive::to_f64(q).unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Scalar {
        Scalar::Exact(<BigRational as crate::numeric::Real>::from_ratio(n, d))
    }

    fn unit(d: usize, mode: Mode) -> Weights {
        Weights::product_ratios(&vec![(1, 1); d], mode).unwrap()
    }

    fn zeros(d: usize) -> Weights {
        Weights::product_ratios(&vec![(0, 1); d], Mode::Exact).unwrap()
    }

    #[test]
    fn double_sum_examples() {
        let gv = GeneratingVector::new(3, vec![1]).unwrap();
        assert_eq!(wce_squared(&gv, &unit(1, Mode::Exact), Mode::Exact).unwrap().e2, q(1, 27));
        let gv2 = GeneratingVector::new(7, vec![1, 3]).unwrap();
        assert_eq!(wce_squared(&gv2, &zeros(2), Mode::Exact).unwrap().e2, q(0, 1));
        let single = GeneratingVector::new(1, vec![1]).unwrap();
        assert_eq!(
            wce_squared(&single, &unit(1, Mode::Exact), Mode::Exact).unwrap().e2,
            q(1, 3)
        );
        let f = wce_squared(&gv, &unit(1, Mode::Exact), Mode::Float).unwrap();
        assert!((f.e2.to_f64() - 1.0 / 27.0).abs() < 1e-16);
    }

    #[test]
    fn quadrature_identity_examples() {
        let w = unit(1, Mode::Exact);
        for (n, z) in [(3u64, 1u64), (5, 2), (2, 1), (1, 1)] {
            let gv = GeneratingVector::new(n, vec![z]).unwrap();
            let a = wce_squared(&gv, &w, Mode::Exact).unwrap();
            let b = wce_squared_via_quadrature_identity(&gv, &w, Mode::Exact).unwrap();
            assert_eq!(a.e2, b.e2, "n={n}");
            let fb = wce_squared_via_quadrature_identity(&gv, &w, Mode::Float).unwrap();
            assert!((fb.e2.to_f64() - a.e2.to_f64()).abs() < 1e-14);
        }
        let gv = GeneratingVector::new(5, vec![1, 2]).unwrap();
        assert_eq!(
            wce_squared_via_quadrature_identity(&gv, &zeros(2), Mode::Exact).unwrap().e2,
            q(0, 1)
        );
    }

    #[test]
    fn averages() {
        let w = unit(1, Mode::Exact);
        assert_eq!(avg_wce_squared_exhaustive(3, &w, Mode::Exact).unwrap().e2, q(1, 27));
        assert_eq!(avg_wce_squared_factorized(3, &w, Mode::Exact).unwrap().e2, q(1, 27));
        assert_eq!(avg_wce_squared_factorized(7, &zeros(3), Mode::Exact).unwrap().e2, q(0, 1));
        assert_eq!(avg_wce_squared_exhaustive(7, &zeros(2), Mode::Exact).unwrap().e2, q(0, 1));
        let w2 = unit(2, Mode::Exact);
        let ex = avg_wce_squared_exhaustive(5, &w2, Mode::Exact).unwrap();
        let fa = avg_wce_squared_factorized(5, &w2, Mode::Exact).unwrap();
        assert_eq!(ex.e2, fa.e2);
        let ff = avg_wce_squared_factorized(5, &w2, Mode::Float).unwrap();
        assert!((ff.e2.to_f64() - ex.e2.to_f64()).abs() < 1e-12);
    }

    #[test]
    fn capacity_guards() {
        let w = unit(8, Mode::Float);
        assert!(matches!(avg_wce_squared_exhaustive(101, &w, Mode::Float), Err(Error::Capacity(_))));
        let w1 = unit(1, Mode::Float);
        assert!(matches!(avg_wce_squared_factorized(2003, &w1, Mode::Float), Err(Error::Capacity(_))));
        assert!(avg_wce_squared_factorized(1, &w1, Mode::Float).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let eval = WceEvaluator::new(5, &unit(2, Mode::Float), Mode::Float).unwrap();
        assert!(eval.e2(&[1]).is_err());
        assert!(eval.e2(&[1, 5]).is_err());
    }

    #[test]
    fn float_weights_cannot_run_exact() {
        assert!(matches!(
            WceEvaluator::new(5, &unit(2, Mode::Float), Mode::Exact),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn vector_enumeration_is_lexicographic() {
        let all: Vec<Vec<u64>> = (0..vector_count(4, 2).unwrap()).map(|t| vector_at(t, 4, 2)).collect();
        assert_eq!(all.first().unwrap(), &vec![1, 1]);
        assert_eq!(all[1], vec![1, 2]);
        assert_eq!(all.last().unwrap(), &vec![3, 3]);
        assert_eq!(all.len(), 9);
    }
}
