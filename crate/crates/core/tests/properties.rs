use std::collections::BTreeMap;

use latwce::kernel::{eta, kernel_eval, kernel_eval_by_subsets, Point};
use latwce::numeric::{b1, b2, odd_primes_in, signed_residue};
use latwce::tn::{count_at_or_above, mean_bound_check, tn_mean, tn_table};
use latwce::wce::{avg_wce_squared_factorized, wce_squared, WceEvaluator};
use latwce::weights::subsets;
use latwce::{GeneratingVector, Mode, Scalar, Weights};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Rationals `p/r` in `[0, 1)`.
fn unit_rational() -> impl Strategy<Value = BigRational> {
    (1i64..=60).prop_flat_map(|r| (0..r).prop_map(move |p| q(p, r)))
}

fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (0i64..=10, 1i64..=10)
}

fn point(d: usize) -> impl Strategy<Value = Point<BigRational>> {
    prop::collection::vec(unit_rational(), d).prop_map(|c| Point::new(c).unwrap())
}

fn to_f64_point(p: &Point<BigRational>) -> Point<f64> {
    Point::new(p.coords().iter().map(|c| c.to_f64().unwrap()).collect()).unwrap()
}

/// Exact `LDLᵀ` test: a symmetric matrix is PSD iff every pivot is
/// non-negative and rows with a zero pivot vanish.
fn is_psd(mut a: Vec<Vec<BigRational>>) -> bool {
    let m = a.len();
    for k in 0..m {
        let p = a[k][k].clone();
        if p.is_negative() {
            return false;
        }
        if p.is_zero() {
            if (k + 1..m).any(|i| !a[i][k].is_zero()) {
                return false;
            }
            continue;
        }
        for i in k + 1..m {
            let f = &a[i][k] / &p;
            for j in k + 1..m {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
        }
    }
    true
}

fn simpson(f: impl Fn(&BigRational) -> BigRational, a: &BigRational, b: &BigRational) -> BigRational {
    let mid = (a + b) / BigInt::from(2);
    (b - a) * (f(a) + f(&mid) * BigInt::from(4) + f(b)) / BigInt::from(6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn b2_is_symmetric(x in unit_rational()) {
        let y = q(1, 1) - &x;
        prop_assert_eq!(b2(&x).unwrap(), b2(&y).unwrap());
        let xf = x.to_f64().unwrap();
        prop_assert!((b2(&xf).unwrap() - b2(&x).unwrap().to_f64().unwrap()).abs() < 1e-15);
        prop_assert!((b1(&xf).unwrap() - b1(&x).unwrap().to_f64().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn signed_residues_are_centred(j in 0u64..100_000, half in 1u64..500) {
        let n = 2 * half + 1;
        let r = signed_residue(j, n).unwrap();
        prop_assert!(r.value().unsigned_abs() <= half);
        prop_assert_eq!((r.value() + n as i64).rem_euclid(n as i64) as u64, j % n);
    }

    /// `η(x, ·)` is quadratic on each side of `x`, so Simpson's rule on the
    /// two pieces integrates it exactly.
    #[test]
    fn eta_has_zero_mean(x in unit_rational()) {
        // The right-hand piece is evaluated at y = 1 through its polynomial.
        let f = |y: &BigRational| {
            if *y == q(1, 1) {
                let bx = &x - q(1, 2);
                let d = q(1, 1) - &x;
                (&d * &d - &d + q(1, 6)) / BigInt::from(2) + bx * q(1, 2)
            } else {
                eta(&x, y).unwrap()
            }
        };
        let total = simpson(f, &q(0, 1), &x) + simpson(f, &x, &q(1, 1));
        prop_assert!(total.is_zero());
    }

    #[test]
    fn kernel_is_symmetric_and_float_agrees(
        (x, y) in (1usize..=4).prop_flat_map(|d| (point(d), point(d))),
        g in prop::collection::vec(ratio(), 4),
    ) {
        let w = Weights::product_ratios(&g[..x.dim()], Mode::Exact).unwrap();
        let kxy = kernel_eval(&x, &y, &w).unwrap();
        prop_assert_eq!(&kxy, &kernel_eval(&y, &x, &w).unwrap());
        let kf = kernel_eval(&to_f64_point(&x), &to_f64_point(&y), &w).unwrap();
        prop_assert!((kf - kxy.to_f64().unwrap()).abs() <= 1e-12 * kf.abs().max(1.0));
    }

    #[test]
    fn product_fast_path_equals_subset_sum(
        (x, y) in (1usize..=6).prop_flat_map(|d| (point(d), point(d))),
        g in prop::collection::vec(ratio(), 6),
    ) {
        let w = Weights::product_ratios(&g[..x.dim()], Mode::Exact).unwrap();
        prop_assert_eq!(kernel_eval(&x, &y, &w).unwrap(), kernel_eval_by_subsets(&x, &y, &w).unwrap());
    }

    #[test]
    fn gram_matrices_are_psd(
        pts in (1usize..=3).prop_flat_map(|d| prop::collection::vec(point(d), 2..=12)),
        g in prop::collection::vec(ratio(), 3),
    ) {
        let w = Weights::product_ratios(&g[..pts[0].dim()], Mode::Exact).unwrap();
        let gram: Vec<Vec<BigRational>> = pts
            .iter()
            .map(|x| pts.iter().map(|y| kernel_eval(x, y, &w).unwrap()).collect())
            .collect();
        prop_assert!(is_psd(gram));
    }

    #[test]
    fn squared_error_grows_with_each_weight(
        n in 2u64..=13,
        zs in prop::collection::vec(1u64..1000, 2),
        entries in prop::collection::vec(ratio(), 3),
        which in 0usize..3,
        bump in 1i64..=5,
    ) {
        let z: Vec<u64> = zs.iter().map(|v| v % (n - 1) + 1).collect();
        let sets: Vec<_> = subsets(2).unwrap().filter(|u| !u.is_empty()).collect();
        let build = |extra: i64| {
            let map: BTreeMap<_, _> = sets
                .iter()
                .zip(&entries)
                .enumerate()
                .map(|(i, (u, &(p, r)))| {
                    let p = if i == which { p + extra * r } else { p };
                    (*u, Scalar::from_ratio(p, r, Mode::Exact))
                })
                .collect();
            Weights::explicit(2, Mode::Exact, map).unwrap()
        };
        let gv = GeneratingVector::new(n, z).unwrap();
        let lo = wce_squared(&gv, &build(0), Mode::Exact).unwrap().e2;
        let hi = wce_squared(&gv, &build(bump), Mode::Exact).unwrap().e2;
        prop_assert!(lo.as_exact().unwrap() <= hi.as_exact().unwrap());
    }

    #[test]
    fn squared_error_is_invariant_under_coordinate_permutation(
        n in 2u64..=17,
        zs in prop::collection::vec(1u64..1000, 3),
        g in prop::collection::vec(ratio(), 3),
    ) {
        let z: Vec<u64> = zs.iter().map(|v| v % (n - 1) + 1).collect();
        let perm = [2usize, 0, 1];
        let zp: Vec<u64> = perm.iter().map(|&j| z[j]).collect();
        let gp: Vec<(i64, i64)> = perm.iter().map(|&j| g[j]).collect();
        let a = wce_squared(&GeneratingVector::new(n, z).unwrap(),
            &Weights::product_ratios(&g, Mode::Exact).unwrap(), Mode::Exact).unwrap();
        let b = wce_squared(&GeneratingVector::new(n, zp).unwrap(),
            &Weights::product_ratios(&gp, Mode::Exact).unwrap(), Mode::Exact).unwrap();
        prop_assert_eq!(a.e2, b.e2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn best_vector_is_no_worse_than_the_average(
        idx in 0usize..8,
        g in prop::collection::vec(ratio(), 2),
    ) {
        let n = [3u64, 5, 7, 11, 13, 17, 19, 23][idx];
        let w = Weights::product_ratios(&g, Mode::Exact).unwrap();
        let eval = WceEvaluator::new(n, &w, Mode::Exact).unwrap();
        let mut best: Option<BigRational> = None;
        for a in 1..n {
            for b in 1..n {
                let v = eval.e2(&[a, b]).unwrap().as_exact().unwrap().clone();
                if best.as_ref().is_none_or(|cur| v < *cur) {
                    best = Some(v);
                }
            }
        }
        let avg = avg_wce_squared_factorized(n, &w, Mode::Exact).unwrap();
        prop_assert!(best.unwrap() <= *avg.e2.as_exact().unwrap());
    }
}

#[test]
fn tn_is_symmetric_in_kappa() {
    for n in odd_primes_in(3, 101) {
        let t = tn_table(n, Mode::Exact).unwrap();
        let v = t.exact_values().unwrap();
        for k in 1..n as usize {
            assert_eq!(v[k - 1], v[n as usize - k - 1], "n={n} κ={k}");
        }
    }
}

/// `t · |{κ : T_n(κ) >= t}| <= Σ_κ T_n(κ)` for every threshold.
#[test]
fn counts_obey_markov() {
    for n in odd_primes_in(3, 211) {
        let t = tn_table(n, Mode::Exact).unwrap();
        let total = tn_mean(&t).unwrap().mean.as_exact().unwrap() * BigInt::from(n - 1);
        for (p, r) in [(1, 10), (1, 2), (1, 1), (3, 2), (2, 1)] {
            let thr = q(p, r);
            let c = count_at_or_above(&t, &Scalar::Exact(thr.clone())).unwrap();
            assert!(&thr * BigInt::from(c as u64) <= total, "n={n} t={thr}");
        }
    }
}

#[test]
fn mean_bound_holds_to_one_hundred_thousand() {
    for n in odd_primes_in(3, 100_000) {
        let c = mean_bound_check(n).unwrap();
        assert!(c.pass(), "{c:?}");
    }
}
