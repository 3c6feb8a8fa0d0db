//! The number-theoretic sums `T_n(κ) = Σ_{q=1}^{(n-1)/2} 1 / (q |r(qκ, n)|)`
//! and the counting statistics built on them.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{capacity, domain, Error, Result};
use crate::numeric::{abs_residue, harmonic, is_odd_prime, signed_residue, Mode, Real, Scalar};

/// Largest `n` accepted by [`tn_table`] (the table costs `O(n²)`).
pub const MAX_TABLE_N: u64 = 100_000;

/// Slack used when a float comparison decides a pass/fail count.
pub const COUNT_SLACK: f64 = 1e-15;

fn check_prime(n: u64) -> Result<()> {
    if !is_odd_prime(n) {
        return domain(format!("n = {n} is not an odd prime"));
    }
    Ok(())
}

/// `T_n(κ)` by direct summation.
pub fn tn_value<R: Real>(n: u64, kappa: u64) -> Result<R> {
    check_prime(n)?;
    if kappa == 0 || kappa >= n {
        return domain(format!("kappa = {kappa} outside 1..={}", n - 1));
    }
    let terms = (1..=(n - 1) / 2)
        .map(|q| {
            let r = signed_residue(q * kappa, n)?.value().unsigned_abs();
            Ok(R::from_ratio(1, (q * r) as i64))
        })
        .collect::<Result<Vec<R>>>()?;
    Ok(R::sum_ordered(terms))
}

#[derive(Clone, Debug, PartialEq)]
enum TnValues {
    Float(Vec<f64>),
    Exact(Vec<BigRational>),
}

/// `(T_n(1), ..., T_n(n-1))` for an odd prime `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TnTable {
    n: u64,
    values: TnValues,
}

impl TnTable {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mode(&self) -> Mode {
        match self.values {
            TnValues::Float(_) => Mode::Float,
            TnValues::Exact(_) => Mode::Exact,
        }
    }

    pub fn len(&self) -> usize {
        (self.n - 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n <= 1
    }

    /// `T_n(κ)` for `1 <= κ <= n-1`.
    pub fn value(&self, kappa: u64) -> Result<Scalar> {
        if kappa == 0 || kappa >= self.n {
            return domain(format!("kappa = {kappa} outside 1..={}", self.n - 1));
        }
        let i = (kappa - 1) as usize;
        Ok(match &self.values {
            TnValues::Float(v) => Scalar::Float(v[i]),
            TnValues::Exact(v) => Scalar::Exact(v[i].clone()),
        })
    }

    pub fn values_f64(&self) -> Vec<f64> {
        match &self.values {
            TnValues::Float(v) => v.clone(),
            TnValues::Exact(v) => v.iter().map(Real::to_f64).collect(),
        }
    }

    pub fn exact_values(&self) -> Option<&[BigRational]> {
        match &self.values {
            TnValues::Exact(v) => Some(v),
            TnValues::Float(_) => None,
        }
    }

    pub fn max(&self) -> Scalar {
        match &self.values {
            TnValues::Float(v) => Scalar::Float(v.iter().cloned().fold(f64::MIN, f64::max)),
            TnValues::Exact(v) => Scalar::Exact(v.iter().max().cloned().unwrap_or_default()),
        }
    }
}

/// `lcm(1, ..., m)`.
fn lcm_upto(m: u64) -> BigInt {
    (1..=m).fold(BigInt::one(), |l, j| l.lcm(&BigInt::from(j)))
}

fn float_table(n: u64) -> Vec<f64> {
    let h = (n - 1) / 2;
    let recip: Vec<f64> = (0..=h).map(|m| if m == 0 { 0.0 } else { 1.0 / m as f64 }).collect();
    (1..n)
        .into_par_iter()
        .map(|kappa| {
            let mut r = 0u64;
            let mut s = 0.0f64;
            for q in 1..=h as usize {
                r += kappa;
                if r >= n {
                    r -= n;
                }
                s += recip[q] * recip[abs_residue(r, n) as usize];
            }
            s
        })
        .collect()
}

/// Exact table over the common denominator `L²`, `L = lcm(1, ..., (n-1)/2)`.
fn exact_table(n: u64) -> Vec<BigRational> {
    let h = (n - 1) / 2;
    let l = lcm_upto(h);
    let inv: Vec<BigInt> = (0..=h)
        .map(|m| if m == 0 { BigInt::zero() } else { &l / m })
        .collect();
    let den = &l * &l;
    (1..n)
        .into_par_iter()
        .map(|kappa| {
            let mut r = 0u64;
            let mut num = BigInt::zero();
            for q in 1..=h as usize {
                r += kappa;
                if r >= n {
                    r -= n;
                }
                num += &inv[q] * &inv[abs_residue(r, n) as usize];
            }
            BigRational::new(num, den.clone())
        })
        .collect()
}

pub fn tn_table(n: u64, mode: Mode) -> Result<TnTable> {
    check_prime(n)?;
    if n > MAX_TABLE_N {
        return capacity(format!("T_n table costs O(n^2); n = {n} exceeds {MAX_TABLE_N}"));
    }
    let values = match mode {
        Mode::Float => TnValues::Float(float_table(n)),
        Mode::Exact => TnValues::Exact(exact_table(n)),
    };
    Ok(TnTable { n, values })
}

/// `(2/(n-1)) H_{(n-1)/2}²`, the exact mean of `T_n` over `κ`.
pub fn tn_mean_closed_form<R: Real>(n: u64) -> Result<R> {
    check_prime(n)?;
    let h = harmonic::<R>((n - 1) / 2)?;
    Ok(R::from_ratio(2, (n - 1) as i64) * h.clone() * h)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TnMean {
    pub mean: Scalar,
    pub closed_form: Scalar,
}

/// Empirical mean of the table and its closed form; they must agree.
pub fn tn_mean(table: &TnTable) -> Result<TnMean> {
    let n = table.n;
    let count = (n - 1) as i64;
    match &table.values {
        TnValues::Exact(v) => {
            let mean = BigRational::sum_ordered(v.iter().cloned()) / BigRational::from_integer(count.into());
            let closed = tn_mean_closed_form::<BigRational>(n)?;
            if mean != closed {
                return Err(Error::Consistency(format!(
                    "mean of T_{n} table {mean} differs from closed form {closed}"
                )));
            }
            Ok(TnMean { mean: Scalar::Exact(mean), closed_form: Scalar::Exact(closed) })
        }
        TnValues::Float(v) => {
            let mean = v.iter().sum::<f64>() / count as f64;
            let closed = tn_mean_closed_form::<f64>(n)?;
            if (mean - closed).abs() > 1e-12 {
                return Err(Error::Consistency(format!(
                    "mean of T_{n} table {mean} differs from closed form {closed}"
                )));
            }
            Ok(TnMean { mean: Scalar::Float(mean), closed_form: Scalar::Float(closed) })
        }
    }
}

/// `|{κ : T_n(κ) >= t}|`. Exact tables compare exactly against exact
/// thresholds; any float operand makes the comparison a float one.
pub fn count_at_or_above(table: &TnTable, t: &Scalar) -> Result<usize> {
    let positive = match t {
        Scalar::Float(v) => *v > 0.0,
        Scalar::Exact(r) => *r > BigRational::zero(),
    };
    if !positive {
        return domain(format!("threshold must be positive, got {t}"));
    }
    Ok(match (&table.values, t) {
        (TnValues::Exact(v), Scalar::Exact(r)) => v.iter().filter(|x| *x >= r).count(),
        _ => {
            let t = t.to_f64();
            table.values_f64().into_iter().filter(|&x| x >= t).count()
        }
    })
}

/// Counts `T_n(κ) >= t - slack` in floating point.
fn count_with_slack(table: &TnTable, t: f64, slack: f64) -> usize {
    table.values_f64().into_iter().filter(|&x| x >= t - slack).count()
}

/// The count bound for `T_n(κ) >= 4 log n / √n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub n: u64,
    pub threshold: f64,
    pub count: usize,
    pub bound: f64,
    pub pass: bool,
}

/// Values within [`COUNT_SLACK`] below the threshold are counted, so a pass
/// never depends on rounding.
pub fn lemma_check(table: &TnTable) -> LemmaCheck {
    let n = table.n;
    let nf = n as f64;
    let threshold = 4.0 * nf.ln() / nf.sqrt();
    let count = count_with_slack(table, threshold, COUNT_SLACK);
    let bound = 4.0 * nf.sqrt() * nf.ln();
    LemmaCheck { n, threshold, count, bound, pass: count as f64 <= bound }
}

/// The constructive count refuting the `(log n)^α` conjecture:
/// at least `⌊√n⌋` values satisfy `T_n(κ) >= 1/√n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalsificationCheck {
    pub n: u64,
    pub threshold: f64,
    pub count_low_threshold: usize,
    pub floor_sqrt_n: u64,
    pub pass: bool,
}

/// Values must clear the threshold by [`COUNT_SLACK`] to be counted, so a
/// pass never depends on rounding.
pub fn conjecture_falsification_check(table: &TnTable) -> Result<FalsificationCheck> {
    let n = table.n;
    if n < 7 {
        return domain(format!("the falsification count needs n >= 7, got {n}"));
    }
    let threshold = 1.0 / (n as f64).sqrt();
    let count = count_with_slack(table, threshold, -COUNT_SLACK);
    let floor_sqrt_n = n.isqrt();
    Ok(FalsificationCheck {
        n,
        threshold,
        count_low_threshold: count,
        floor_sqrt_n,
        pass: count as u64 >= floor_sqrt_n,
    })
}

/// The chain `mean <= (2/(n-1))(1 + log((n-1)/2))² <= 16 (log n)² / n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanBoundCheck {
    pub n: u64,
    pub mean: f64,
    pub log_bound: f64,
    pub mu_tilde: f64,
    pub mean_le_log_bound: bool,
    pub log_bound_le_mu_tilde: bool,
}

impl MeanBoundCheck {
    pub fn pass(&self) -> bool {
        self.mean_le_log_bound && self.log_bound_le_mu_tilde
    }
}

pub fn mean_bound_check(n: u64) -> Result<MeanBoundCheck> {
    let mean = tn_mean_closed_form::<f64>(n)?;
    let nf = n as f64;
    let log_bound = 2.0 / (nf - 1.0) * (1.0 + ((nf - 1.0) / 2.0).ln()).powi(2);
    let mu_tilde = 16.0 * nf.ln().powi(2) / nf;
    Ok(MeanBoundCheck {
        n,
        mean,
        log_bound,
        mu_tilde,
        mean_le_log_bound: mean <= log_bound * (1.0 + 1e-12),
        log_bound_le_mu_tilde: log_bound <= mu_tilde * (1.0 + 1e-12),
    })
}

/// Summary statistics for one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TnStats {
    pub n: u64,
    pub mode: Mode,
    pub mean: Scalar,
    pub mean_closed_form: Scalar,
    pub max: Scalar,
    pub lemma: LemmaCheck,
    pub falsification: Option<FalsificationCheck>,
}

pub fn tn_stats(table: &TnTable) -> Result<TnStats> {
    let mean = tn_mean(table)?;
    Ok(TnStats {
        n: table.n,
        mode: table.mode(),
        mean: mean.mean,
        mean_closed_form: mean.closed_form,
        max: table.max(),
        lemma: lemma_check(table),
        falsification: if table.n >= 7 {
            Some(conjecture_falsification_check(table)?)
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn values() {
        assert_eq!(tn_value::<BigRational>(5, 1).unwrap(), q(5, 4));
        assert_eq!(tn_value::<BigRational>(5, 2).unwrap(), q(1, 1));
        assert_eq!(tn_value::<BigRational>(3, 1).unwrap(), q(1, 1));
        assert!(tn_value::<f64>(5, 5).is_err());
        assert!(tn_value::<f64>(5, 0).is_err());
        assert!(tn_value::<f64>(9, 1).is_err());
    }

    #[test]
    fn tables() {
        let t5 = tn_table(5, Mode::Exact).unwrap();
        assert_eq!(t5.exact_values().unwrap(), &[q(5, 4), q(1, 1), q(1, 1), q(5, 4)]);
        let t3 = tn_table(3, Mode::Exact).unwrap();
        assert_eq!(t3.exact_values().unwrap(), &[q(1, 1), q(1, 1)]);
        assert_eq!(tn_table(101, Mode::Float).unwrap().len(), 100);
        assert!(tn_table(15, Mode::Float).is_err());
    }

    #[test]
    fn tables_match_direct_summation() {
        for n in crate::numeric::odd_primes_in(3, 61) {
            let exact = tn_table(n, Mode::Exact).unwrap();
            let float = tn_table(n, Mode::Float).unwrap().values_f64();
            for kappa in 1..n {
                let direct = tn_value::<BigRational>(n, kappa).unwrap();
                assert_eq!(exact.value(kappa).unwrap(), Scalar::Exact(direct.clone()));
                assert!((float[(kappa - 1) as usize] - Real::to_f64(&direct)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn means() {
        let m5 = tn_mean(&tn_table(5, Mode::Exact).unwrap()).unwrap();
        assert_eq!(m5.mean, Scalar::Exact(q(9, 8)));
        assert_eq!(m5.closed_form, Scalar::Exact(q(9, 8)));
        let m3 = tn_mean(&tn_table(3, Mode::Exact).unwrap()).unwrap();
        assert_eq!(m3.mean, Scalar::Exact(q(1, 1)));
        let check = mean_bound_check(5).unwrap();
        assert!(check.pass());
        assert!((check.mu_tilde - 16.0 * 5f64.ln().powi(2) / 5.0).abs() < 1e-15);
        assert!(9.0 / 8.0 <= check.mu_tilde && check.mu_tilde < 8.3);
    }

    #[test]
    fn counts() {
        let t5 = tn_table(5, Mode::Exact).unwrap();
        let ex = |a, b| Scalar::Exact(q(a, b));
        assert_eq!(count_at_or_above(&t5, &ex(2, 1)).unwrap(), 0);
        assert_eq!(count_at_or_above(&t5, &ex(1, 1)).unwrap(), 4);
        assert_eq!(count_at_or_above(&t5, &ex(5, 4)).unwrap(), 2);
        assert_eq!(count_at_or_above(&t5, &Scalar::Float(1.25)).unwrap(), 2);
        assert!(count_at_or_above(&t5, &ex(0, 1)).is_err());
    }

    #[test]
    fn lemma_and_falsification_examples() {
        let l5 = lemma_check(&tn_table(5, Mode::Exact).unwrap());
        assert!((l5.threshold - 2.879).abs() < 1e-3);
        assert_eq!(l5.count, 0);
        assert!((l5.bound - 14.39).abs() < 1e-2);
        assert!(l5.pass);
        let l3 = lemma_check(&tn_table(3, Mode::Float).unwrap());
        assert!((l3.threshold - 2.537).abs() < 1e-3);
        assert_eq!(l3.count, 0);
        assert!(l3.pass);

        // T_7 = (49/36, 1, 1, 1, 1, 49/36): all six clear 1/√7.
        let f7 = conjecture_falsification_check(&tn_table(7, Mode::Exact).unwrap()).unwrap();
        assert_eq!(f7.floor_sqrt_n, 2);
        assert_eq!(f7.count_low_threshold, 6);
        assert!(f7.pass);
        let f11 = conjecture_falsification_check(&tn_table(11, Mode::Float).unwrap()).unwrap();
        assert!((f11.threshold - 0.302).abs() < 1e-3);
        assert_eq!(f11.floor_sqrt_n, 3);
        assert_eq!(f11.count_low_threshold, 10);
        assert!(conjecture_falsification_check(&tn_table(5, Mode::Float).unwrap()).is_err());
    }

    #[test]
    fn stats_json_shape() {
        let stats = tn_stats(&tn_table(5, Mode::Float).unwrap()).unwrap();
        let v = serde_json::to_value(&stats).unwrap();
        assert_eq!(v["mean"], serde_json::json!(1.125));
        assert!(v["falsification"].is_null());
        assert_eq!(v["lemma"]["count"], serde_json::json!(0));
    }
}
