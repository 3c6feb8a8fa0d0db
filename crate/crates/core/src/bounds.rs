//! Upper bounds on the mean squared worst-case error `ē²(n)` and the
//! verification of the chain
//!
//! ```text
//! ē²(n) <= proposition_rhs <= intermediate_rhs <= final_rhs.
//! ```
//!
//! Every bound depends on a subset `u` only through `γ_u` and `|u|`, so each
//! is evaluated as `Σ_k W_k f(k)` with `W_k = Σ_{|u|=k} γ_u`. For product
//! weights the terms that are geometric in `|u|` also have a closed product
//! form `Σ_{u≠∅} γ_u b^{|u|} = Π_j (1 + b γ_j) - 1`, which is used as an
//! independent evaluation route.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::numeric::{is_odd_prime, Mode, Scalar};
use crate::tn::{tn_table, TnTable};
use crate::wce::avg_wce_squared_factorized;
use crate::weights::{WeightModel, Weights};

/// Relative slack allowed on each link of the inequality chain.
pub const CHAIN_RELATIVE_SLACK: f64 = 1e-12;

/// `c_u = 2/3^k + 1/4^k` for `|u| = k`.
pub fn c_small(k: usize) -> f64 {
    2.0 / 3f64.powi(k as i32) + 1.0 / 4f64.powi(k as i32)
}

/// `t̃c_u = 4 (23π²/18)^k + (4 + 10π²/9)^k`.
pub fn c_tilde(k: usize) -> f64 {
    4.0 * (23.0 * PI * PI / 18.0).powi(k as i32) + (4.0 + 10.0 * PI * PI / 9.0).powi(k as i32)
}

/// `C_u = 2/3^k + 1/4^k + 4 (23/24)^k + (3/π² + 5/6)^k`.
pub fn c_big(k: usize) -> f64 {
    let k = k as i32;
    2.0 / 3f64.powi(k) + 1.0 / 4f64.powi(k) + 4.0 * (23.0 / 24.0f64).powi(k)
        + (3.0 / (PI * PI) + 5.0 / 6.0).powi(k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    pub order: usize,
    pub c: f64,
    pub c_tilde: f64,
    pub c_big: f64,
}

pub fn bound_constants(k: usize) -> BoundConstants {
    BoundConstants { order: k, c: c_small(k), c_tilde: c_tilde(k), c_big: c_big(k) }
}

/// A sum `Σ_{u≠∅} γ_u a b^{|u|}` term: coefficient `a`, ratio `b`.
type Geometric = (f64, f64);

/// `c_u` as geometric terms.
const C_SMALL_TERMS: [Geometric; 2] = [(2.0, 1.0 / 3.0), (1.0, 0.25)];

fn c_big_terms() -> [Geometric; 4] {
    [
        (2.0, 1.0 / 3.0),
        (1.0, 0.25),
        (4.0, 23.0 / 24.0),
        (1.0, 3.0 / (PI * PI) + 5.0 / 6.0),
    ]
}

/// `Σ_{u≠∅} γ_u Σ_t a_t b_t^{|u|}` for product weights, via `Π_j (1 + b γ_j) - 1`.
fn product_geometric_sum(gammas: &[f64], terms: &[Geometric]) -> f64 {
    terms
        .iter()
        .map(|&(a, b)| a * (gammas.iter().fold(1.0, |p, g| p * (1.0 + b * g)) - 1.0))
        .sum()
}

fn product_gammas(w: &Weights) -> Option<Vec<f64>> {
    match w.model() {
        WeightModel::Product(g) => Some(g.iter().map(Scalar::to_f64).collect()),
        _ => None,
    }
}

fn check_bound_n(n: u64) -> Result<()> {
    if !is_odd_prime(n) {
        return domain(format!("bounds need an odd prime n, got {n}"));
    }
    Ok(())
}

fn check_table(n: u64, table: &TnTable) -> Result<()> {
    if table.n() != n {
        return domain(format!("T_n table is for n = {}, expected {n}", table.n()));
    }
    Ok(())
}

/// Scale `(1/(2π²)) n/(n-1)` applied per coordinate of `u`.
fn coordinate_scale(n: u64) -> f64 {
    let nf = n as f64;
    nf / ((nf - 1.0) * 2.0 * PI * PI)
}

/// Additive shift `10π² log n / (9n)` applied to every `T_n(κ)`.
fn tn_shift(n: u64) -> f64 {
    let nf = n as f64;
    10.0 * PI * PI * nf.ln() / (9.0 * nf)
}

/// The mean-square bound expressed through `T_n`:
/// `(1/n) Σ_{u≠∅} γ_u [c_u + ((1/(2π²)) n/(n-1))^{|u|} Σ_κ (T_n(κ) + 10π² log n/(9n))^{|u|}]`.
pub fn proposition_rhs(n: u64, w: &Weights, table: &TnTable) -> Result<f64> {
    check_bound_n(n)?;
    check_table(n, table)?;
    let a = coordinate_scale(n);
    let delta = tn_shift(n);
    let bases: Vec<f64> = table.values_f64().into_iter().map(|t| a * (t + delta)).collect();
    let nf = n as f64;
    if let Some(g) = product_gammas(w) {
        let kappa_part: f64 = bases
            .iter()
            .map(|&b| g.iter().fold(1.0, |p, gj| p * (1.0 + b * gj)) - 1.0)
            .sum();
        return Ok((product_geometric_sum(&g, &C_SMALL_TERMS) + kappa_part) / nf);
    }
    proposition_rhs_by_order(n, w, &bases)
}

fn proposition_rhs_by_order(n: u64, w: &Weights, bases: &[f64]) -> Result<f64> {
    let w_k = w.order_sums::<f64>()?;
    let mut total = 0.0;
    for (k, wk) in w_k.iter().enumerate().skip(1) {
        if *wk == 0.0 {
            continue;
        }
        let kappa_sum: f64 = bases.iter().map(|b| b.powi(k as i32)).sum();
        total += wk * (c_small(k) + kappa_sum);
    }
    Ok(total / n as f64)
}

/// The proposition bound evaluated through order sums only, for any weights.
pub fn proposition_rhs_order_form(n: u64, w: &Weights, table: &TnTable) -> Result<f64> {
    check_bound_n(n)?;
    check_table(n, table)?;
    let a = coordinate_scale(n);
    let delta = tn_shift(n);
    let bases: Vec<f64> = table.values_f64().into_iter().map(|t| a * (t + delta)).collect();
    proposition_rhs_by_order(n, w, &bases)
}

/// The proposition bound after the κ-sum is majorized as in the final
/// theorem's proof: `|K_n| <= 4√n log n` values bounded by `23π²/18`, the
/// rest by `(4 + 10π²/9) log n/√n`, giving `t̃c_u √n log n`.
pub fn intermediate_rhs(n: u64, w: &Weights) -> Result<f64> {
    check_bound_n(n)?;
    let nf = n as f64;
    let a = coordinate_scale(n);
    let s = nf.sqrt() * nf.ln();
    if let Some(g) = product_gammas(w) {
        let terms = [
            (4.0 * s, a * 23.0 * PI * PI / 18.0),
            (s, a * (4.0 + 10.0 * PI * PI / 9.0)),
        ];
        return Ok(
            (product_geometric_sum(&g, &C_SMALL_TERMS) + product_geometric_sum(&g, &terms)) / nf,
        );
    }
    let w_k = w.order_sums::<f64>()?;
    let total: f64 = w_k
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, wk)| **wk != 0.0)
        .map(|(k, wk)| wk * (c_small(k) + a.powi(k as i32) * c_tilde(k) * s))
        .sum();
    Ok(total / nf)
}

/// Diagnostic: the same split using the actual `K_n` and the actual count of
/// values outside it, rather than the worst-case counts. Not part of the chain.
pub fn intermediate_rhs_actual_split(n: u64, w: &Weights, table: &TnTable) -> Result<f64> {
    check_bound_n(n)?;
    check_table(n, table)?;
    let nf = n as f64;
    let a = coordinate_scale(n);
    let threshold = 4.0 * nf.ln() / nf.sqrt();
    let in_k = table.values_f64().into_iter().filter(|&t| t >= threshold).count() as f64;
    let out_k = (n - 1) as f64 - in_k;
    let high = 23.0 * PI * PI / 18.0;
    let low = (4.0 + 10.0 * PI * PI / 9.0) * nf.ln() / nf.sqrt();
    let w_k = w.order_sums::<f64>()?;
    let total: f64 = w_k
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, wk)| **wk != 0.0)
        .map(|(k, wk)| {
            let k32 = k as i32;
            wk * (c_small(k) + in_k * (a * high).powi(k32) + out_k * (a * low).powi(k32))
        })
        .sum();
    Ok(total / nf)
}

/// `Σ_{∅≠u⊆{1..d}} γ_u C_u`.
pub fn weighted_c_sum(w: &Weights) -> Result<f64> {
    if let Some(g) = product_gammas(w) {
        return Ok(product_geometric_sum(&g, &c_big_terms()));
    }
    weighted_c_sum_order_form(w)
}

/// `Σ_k W_k C_k`, valid for every weight model.
pub fn weighted_c_sum_order_form(w: &Weights) -> Result<f64> {
    let w_k = w.order_sums::<f64>()?;
    Ok(w_k
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, wk)| **wk != 0.0)
        .map(|(k, wk)| wk * c_big(k))
        .sum())
}

/// `(log n / √n) Σ_{u≠∅} γ_u C_u`.
pub fn final_rhs(n: u64, w: &Weights) -> Result<f64> {
    if n < 3 {
        return domain(format!("the final bound needs n >= 3, got {n}"));
    }
    let nf = n as f64;
    Ok(nf.ln() / nf.sqrt() * weighted_c_sum(w)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionRow {
    pub d: usize,
    pub c_sum: f64,
    pub gamma_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    pub rows: Vec<DimensionRow>,
    /// Relative increment of the C-sum over the last doubling of `d`.
    pub last_relative_increment: f64,
    pub appears_bounded: bool,
}

/// Tolerance on the last relative increment for calling the C-sum bounded.
pub const BOUNDED_INCREMENT_TOL: f64 = 1e-6;

/// `Σ_{u⊆{1..d}} γ_u C_u` and `Σ_{j<=d} γ_j` for product weights
/// `γ_j = rule(j)` at `d = 1, 2, 4, ..., d_max`.
pub fn dimension_independence_report(rule: impl Fn(usize) -> f64, d_max: usize) -> Result<DimensionReport> {
    if d_max == 0 {
        return domain("d_max must be at least 1");
    }
    let mut dims = Vec::new();
    let mut d = 1;
    while d < d_max {
        dims.push(d);
        d *= 2;
    }
    dims.push(d_max);
    let gammas: Vec<f64> = (1..=d_max).map(&rule).collect();
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return domain(format!("product weight rule produced {g}"));
    }
    let rows: Vec<DimensionRow> = dims
        .iter()
        .map(|&d| DimensionRow {
            d,
            c_sum: product_geometric_sum(&gammas[..d], &c_big_terms()),
            gamma_sum: gammas[..d].iter().sum(),
        })
        .collect();
    let last_relative_increment = match rows.as_slice() {
        [.., prev, last] if last.c_sum > 0.0 => (last.c_sum - prev.c_sum) / last.c_sum,
        [.., _, last] if last.c_sum == 0.0 => 0.0,
        [only] if only.c_sum.is_finite() => 0.0,
        _ => f64::INFINITY,
    };
    let appears_bounded = last_relative_increment.is_finite()
        && last_relative_increment < BOUNDED_INCREMENT_TOL
        && rows.iter().all(|r| r.c_sum.is_finite());
    Ok(DimensionReport { rows, last_relative_increment, appears_bounded })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChainPass {
    pub avg_le_proposition: bool,
    pub proposition_le_intermediate: bool,
    pub intermediate_le_final: bool,
}

impl ChainPass {
    pub fn all(&self) -> bool {
        self.avg_le_proposition && self.proposition_le_intermediate && self.intermediate_le_final
    }
}

/// Evaluated bounds for one `(n, weights)` pair.
///
/// `good_z_error_bound = √final_rhs` bounds the worst-case error `e(n, z)` of
/// the best generating vector (averaging gives `e² <= final_rhs`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: u64,
    pub d: usize,
    pub weights: String,
    pub e2_avg: f64,
    pub prop_rhs: f64,
    pub intermediate_rhs: f64,
    pub intermediate_rhs_actual_split: f64,
    pub final_rhs: f64,
    pub good_z_error_bound: f64,
    /// `final_rhs · √n / log n = Σ γ_u C_u`.
    pub rate_constant: f64,
    pub chain: ChainPass,
    pub pass: bool,
}

/// `a <= b` up to [`CHAIN_RELATIVE_SLACK`].
pub fn le_with_slack(a: f64, b: f64) -> bool {
    a <= b + CHAIN_RELATIVE_SLACK * a.abs().max(b.abs())
}

pub fn verify_chain(n: u64, w: &Weights) -> Result<BoundReport> {
    check_bound_n(n)?;
    let e2_avg = avg_wce_squared_factorized(n, w, Mode::Float)?.e2.to_f64();
    let table = tn_table(n, Mode::Float)?;
    verify_chain_with(n, w, e2_avg, &table)
}

/// As [`verify_chain`] with a precomputed `ē²(n)` and `T_n` table.
pub fn verify_chain_with(n: u64, w: &Weights, e2_avg: f64, table: &TnTable) -> Result<BoundReport> {
    let prop_rhs = proposition_rhs(n, w, table)?;
    let inter = intermediate_rhs(n, w)?;
    let actual = intermediate_rhs_actual_split(n, w, table)?;
    let fin = final_rhs(n, w)?;
    let chain = ChainPass {
        avg_le_proposition: le_with_slack(e2_avg, prop_rhs),
        proposition_le_intermediate: le_with_slack(prop_rhs, inter),
        intermediate_le_final: le_with_slack(inter, fin),
    };
    let nf = n as f64;
    Ok(BoundReport {
        n,
        d: w.d(),
        weights: w.descriptor(),
        e2_avg,
        prop_rhs,
        intermediate_rhs: inter,
        intermediate_rhs_actual_split: actual,
        final_rhs: fin,
        good_z_error_bound: fin.sqrt(),
        rate_constant: fin * nf.sqrt() / nf.ln(),
        pass: chain.all(),
        chain,
    })
}
