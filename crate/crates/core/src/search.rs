//! Searching for generating vectors with small `e²(n, z)`.
//!
//! Candidates are scored in FLOAT mode. Values within a relative
//! [`TIE_RELATIVE_TOL`] of the running minimum are kept on a shortlist; the
//! winner is the smallest EXACT value on the shortlist when the instance is
//! small enough (`n <= 200`, `d <= 3`, exact weights), otherwise the
//! lexicographically smallest shortlisted vector. Shortlists are merged in
//! candidate order, so the result does not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::numeric::{Mode, Scalar};
use crate::wce::{check_exhaustive_capacity, vector_at, WceEvaluator};
use crate::weights::Weights;

/// Float values this close (relatively) to the minimum count as ties.
pub const TIE_RELATIVE_TOL: f64 = 1e-12;

/// Largest `n` and `d` for which the winner is confirmed in EXACT mode.
pub const EXACT_VERIFY_MAX_N: u64 = 200;
pub const EXACT_VERIFY_MAX_D: usize = 3;

/// Shortlist length; the lexicographically smallest entries are kept.
pub const SHORTLIST_CAP: usize = 64;

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64)";

const BLOCK: u128 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchMethod {
    Exhaustive,
    Random,
    Cbc,
}

impl SearchMethod {
    pub fn from_name(name: &str) -> Option<SearchMethod> {
        match name.to_ascii_lowercase().as_str() {
            "exhaustive" => Some(SearchMethod::Exhaustive),
            "random" => Some(SearchMethod::Random),
            "cbc" => Some(SearchMethod::Cbc),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub n: u64,
    pub d: usize,
    pub z: Vec<u64>,
    /// EXACT when the winner was confirmed exactly, FLOAT otherwise.
    pub e2: Scalar,
    pub e2_f64: f64,
    pub exact_verified: bool,
    pub method: SearchMethod,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<&'static str>,
    /// Best `e²` of the `s`-dimensional rule after choosing coordinate `s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbc_trace: Option<Vec<f64>>,
}

fn is_near(v: f64, min: f64) -> bool {
    v - min <= TIE_RELATIVE_TOL * min.abs()
}

#[derive(Clone, Debug)]
struct Shortlist {
    min: f64,
    entries: Vec<(f64, Vec<u64>)>,
}

impl Shortlist {
    fn new() -> Shortlist {
        Shortlist { min: f64::INFINITY, entries: Vec::new() }
    }

    fn push(&mut self, v: f64, z: Vec<u64>) {
        if v < self.min {
            self.min = v;
            let min = self.min;
            self.entries.retain(|(e, _)| is_near(*e, min));
        }
        if is_near(v, self.min) {
            self.entries.push((v, z));
            if self.entries.len() > 2 * SHORTLIST_CAP {
                self.trim();
            }
        }
    }

    fn trim(&mut self) {
        self.entries.sort_by(|a, b| a.1.cmp(&b.1));
        self.entries.dedup_by(|a, b| a.1 == b.1);
        self.entries.truncate(SHORTLIST_CAP);
    }

    fn merge(mut self, other: Shortlist) -> Shortlist {
        for (v, z) in other.entries {
            self.push(v, z);
        }
        self
    }

    fn finish(mut self) -> Vec<(f64, Vec<u64>)> {
        let min = self.min;
        self.entries.retain(|(e, _)| is_near(*e, min));
        self.trim();
        self.entries
    }
}

fn exact_eligible(n: u64, d: usize, w: &Weights) -> bool {
    n <= EXACT_VERIFY_MAX_N && d <= EXACT_VERIFY_MAX_D && w.mode() == Mode::Exact
}

/// Picks the winner of a finished shortlist: `(z, e², float e², exact?)`.
fn pick(
    entries: Vec<(f64, Vec<u64>)>,
    n: u64,
    w: &Weights,
) -> Result<(Vec<u64>, Scalar, f64, bool)> {
    let Some(first) = entries.first().cloned() else {
        return domain("search produced no candidates");
    };
    if !exact_eligible(n, w.d(), w) {
        return Ok((first.1, Scalar::Float(first.0), first.0, false));
    }
    let exact = WceEvaluator::new(n, w, Mode::Exact)?;
    let mut best: Option<(Scalar, f64, Vec<u64>)> = None;
    // Entries are in lexicographic order, so a strict comparison keeps the
    // smallest z among exact ties.
    for (v, z) in entries {
        let e = exact.e2(&z)?;
        let better = match &best {
            None => true,
            Some((b, _, _)) => e.as_exact().unwrap() < b.as_exact().unwrap(),
        };
        if better {
            best = Some((e, v, z));
        }
    }
    let (e, _, z) = best.expect("non-empty shortlist");
    let f = e.to_f64();
    Ok((z, e, f, true))
}

fn check_search_args(n: u64, w: &Weights) -> Result<()> {
    if n < 2 {
        return domain(format!("search needs n >= 2, got {n}"));
    }
    if w.d() == 0 {
        return domain("search needs d >= 1");
    }
    Ok(())
}

/// Global minimizer of `e²(n, ·)` over `{1, ..., n-1}^d`.
pub fn exhaustive_search(n: u64, w: &Weights) -> Result<SearchResult> {
    check_search_args(n, w)?;
    let d = w.d();
    let count = check_exhaustive_capacity(n, d, "exhaustive search")?;
    let eval = WceEvaluator::new(n, w, Mode::Float)?;
    let blocks = count.div_ceil(BLOCK);
    let lists: Vec<Result<Shortlist>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut list = Shortlist::new();
            for t in b * BLOCK..((b + 1) * BLOCK).min(count) {
                let z = vector_at(t, n, d);
                list.push(eval.e2_f64(&z)?, z);
            }
            Ok(list)
        })
        .collect();
    let mut merged = Shortlist::new();
    for l in lists {
        merged = merged.merge(l?);
    }
    let (z, e2, e2_f64, exact_verified) = pick(merged.finish(), n, w)?;
    Ok(SearchResult {
        n,
        d,
        z,
        e2,
        e2_f64,
        exact_verified,
        method: SearchMethod::Exhaustive,
        evaluations: count as u64,
        seed: None,
        rng: None,
        cbc_trace: None,
    })
}

/// Best of `trials` vectors drawn uniformly from `{1, ..., n-1}^d`.
pub fn random_search(n: u64, w: &Weights, trials: u64, seed: u64) -> Result<SearchResult> {
    check_search_args(n, w)?;
    if trials == 0 {
        return domain("random search needs trials >= 1");
    }
    let d = w.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<u64>> = (0..trials)
        .map(|_| (0..d).map(|_| rng.random_range(1..n)).collect())
        .collect();
    let eval = WceEvaluator::new(n, w, Mode::Float)?;
    let values: Vec<Result<f64>> = draws.par_iter().map(|z| eval.e2_f64(z)).collect();
    let mut list = Shortlist::new();
    for (v, z) in values.into_iter().zip(draws) {
        list.push(v?, z);
    }
    let (z, e2, e2_f64, exact_verified) = pick(list.finish(), n, w)?;
    Ok(SearchResult {
        n,
        d,
        z,
        e2,
        e2_f64,
        exact_verified,
        method: SearchMethod::Random,
        evaluations: trials,
        seed: Some(seed),
        rng: Some(RNG_NAME),
        cbc_trace: None,
    })
}

/// Component-by-component construction: coordinate `s` minimizes the
/// `s`-dimensional `e²` with the weights restricted to `{1, ..., s}`.
pub fn cbc_search(n: u64, w: &Weights) -> Result<SearchResult> {
    if n < 3 {
        return domain(format!("CBC search needs n >= 3, got {n}"));
    }
    check_search_args(n, w)?;
    let d = w.d();
    let mut z: Vec<u64> = Vec::with_capacity(d);
    let mut trace = Vec::with_capacity(d);
    let mut last = None;
    for s in 1..=d {
        let ws = w.restrict(s)?;
        let eval = WceEvaluator::new(n, &ws, Mode::Float)?;
        let values: Vec<Result<f64>> = (1..n)
            .into_par_iter()
            .map(|c| {
                let mut zs = z.clone();
                zs.push(c);
                eval.e2_f64(&zs)
            })
            .collect();
        let mut list = Shortlist::new();
        for (c, v) in (1..n).zip(values) {
            let mut zs = z.clone();
            zs.push(c);
            list.push(v?, zs);
        }
        let chosen = pick(list.finish(), n, &ws)?;
        z = chosen.0.clone();
        trace.push(chosen.2);
        last = Some(chosen);
    }
    let (z, e2, e2_f64, exact_verified) = last.expect("d >= 1");
    Ok(SearchResult {
        n,
        d,
        z,
        e2,
        e2_f64,
        exact_verified,
        method: SearchMethod::Cbc,
        evaluations: d as u64 * (n - 1),
        seed: None,
        rng: None,
        cbc_trace: Some(trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GeneratingVector;
    use crate::wce::{avg_wce_squared_factorized, wce_squared};
    use num_rational::BigRational;

    fn w(g: &[(i64, i64)]) -> Weights {
        Weights::product_ratios(g, Mode::Exact).unwrap()
    }

    #[test]
    fn exhaustive_examples() {
        let r = exhaustive_search(3, &w(&[(1, 1)])).unwrap();
        assert_eq!(r.z, vec![1]);
        assert_eq!(r.e2, Scalar::Exact(<BigRational as crate::numeric::Real>::from_ratio(1, 27)));
        assert!(r.exact_verified);
        let zero = exhaustive_search(7, &w(&[(0, 1), (0, 1), (0, 1)])).unwrap();
        assert_eq!(zero.z, vec![1, 1, 1]);
        assert!(zero.e2.is_zero());
    }

    #[test]
    fn best_matches_recomputation_and_average() {
        let wt = w(&[(1, 1), (1, 4), (1, 9)]);
        let r = exhaustive_search(11, &wt).unwrap();
        let again = wce_squared(&GeneratingVector::new(11, r.z.clone()).unwrap(), &wt, Mode::Exact)
            .unwrap();
        assert_eq!(again.e2, r.e2);
        let avg = avg_wce_squared_factorized(11, &wt, Mode::Exact).unwrap();
        assert!(r.e2.as_exact().unwrap() <= avg.e2.as_exact().unwrap());
    }

    #[test]
    fn random_is_reproducible_and_never_beats_exhaustive() {
        let wt = w(&[(1, 1), (1, 1), (1, 1)]);
        let a = random_search(13, &wt, 500, 42).unwrap();
        let b = random_search(13, &wt, 500, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rng, Some(RNG_NAME));
        let ex = exhaustive_search(13, &wt).unwrap();
        assert!(ex.e2_f64 <= a.e2_f64);
        let one = random_search(13, &wt, 1, 7).unwrap();
        assert_eq!(one.evaluations, 1);
    }

    #[test]
    fn cbc_examples() {
        let wt = w(&[(1, 1)]);
        let c = cbc_search(7, &wt).unwrap();
        let e = exhaustive_search(7, &wt).unwrap();
        assert_eq!((c.z.clone(), c.e2.clone()), (e.z, e.e2));
        let wt2 = w(&[(1, 1), (1, 1)]);
        let c2 = cbc_search(5, &wt2).unwrap();
        let e2 = exhaustive_search(5, &wt2).unwrap();
        let avg = avg_wce_squared_factorized(5, &wt2, Mode::Exact).unwrap();
        let (c2v, e2v) = (c2.e2.as_exact().unwrap().clone(), e2.e2.as_exact().unwrap().clone());
        assert!(c2v >= e2v);
        assert!(c2v <= *avg.e2.as_exact().unwrap());
        let trace = c2.cbc_trace.unwrap();
        assert!(trace.windows(2).all(|p| p[1] >= p[0]));
        let zero = cbc_search(5, &w(&[(0, 1), (0, 1), (0, 1)])).unwrap();
        assert_eq!(zero.z, vec![1, 1, 1]);
        assert!(cbc_search(2, &wt).is_err());
    }

    #[test]
    fn float_weights_skip_exact_confirmation() {
        let wt = Weights::product_ratios(&[(1, 1), (1, 2)], Mode::Float).unwrap();
        let r = exhaustive_search(7, &wt).unwrap();
        assert!(!r.exact_verified);
        assert!(matches!(r.e2, Scalar::Float(_)));
    }

    #[test]
    fn capacity_guard() {
        let wt = w(&[(1, 1); 5]);
        assert!(exhaustive_search(101, &wt).is_err());
        assert!(random_search(101, &wt, 0, 1).is_err());
    }
}
