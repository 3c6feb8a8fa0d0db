//! Rank-1 lattice point sets and the equal-weight rule `Q_{d,n,z}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::kernel::Point;
use crate::numeric::{b2_unchecked, Real};

/// Number of points `n` and generating vector `z ∈ {1, ..., n-1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GeneratingVector {
    n: u64,
    z: Vec<u64>,
}

impl GeneratingVector {
    /// For `n = 1` the rule is the single node at the origin and the entries
    /// of `z` are not constrained.
    pub fn new(n: u64, z: Vec<u64>) -> Result<GeneratingVector> {
        if n == 0 {
            return domain("a lattice rule needs n >= 1");
        }
        if z.is_empty() {
            return domain("generating vector must have at least one component");
        }
        if n > 1 {
            if let Some((j, zj)) = z.iter().enumerate().find(|(_, &zj)| zj == 0 || zj >= n) {
                return domain(format!("z_{} = {zj} outside 1..={}", j + 1, n - 1));
            }
        }
        Ok(GeneratingVector { n, z })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    pub fn d(&self) -> usize {
        self.z.len()
    }
}

/// The nodes `x_i = ({i z_1 / n}, ..., {i z_d / n})`, stored as numerators
/// over the common denominator `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePointSet {
    n: u64,
    d: usize,
    numerators: Vec<u64>,
}

impl LatticePointSet {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Numerators `i z_j mod n` of node `i`.
    pub fn numerators(&self, i: usize) -> &[u64] {
        &self.numerators[i * self.d..(i + 1) * self.d]
    }

    pub fn point<R: Real>(&self, i: usize) -> Point<R> {
        let n = self.n as i64;
        Point::new(
            self.numerators(i)
                .iter()
                .map(|&a| R::from_ratio(a as i64, n))
                .collect(),
        )
        .expect("lattice nodes lie in [0,1)^d")
    }
}

pub fn lattice_points(gv: &GeneratingVector) -> LatticePointSet {
    let (n, d) = (gv.n, gv.d());
    let mut numerators = vec![0u64; n as usize * d];
    for i in 1..n as usize {
        for j in 0..d {
            // i z_j mod n, built incrementally from the previous node.
            numerators[i * d + j] = (numerators[(i - 1) * d + j] + gv.z[j]) % n;
        }
    }
    LatticePointSet { n, d, numerators }
}

/// Nodes are evaluated across threads only from this `n` on.
const PARALLEL_NODES_MIN_N: u64 = 256;

/// `Q_{d,n,z}(f)` for an integrand given on node numerators (`x = a / n`).
///
/// Values may be computed concurrently; they are always summed in index
/// order `i = 0, ..., n-1`.
pub fn qmc_quadrature_on_nodes<R, F>(f: F, points: &LatticePointSet) -> Result<R>
where
    R: Real,
    F: Fn(&[u64]) -> Result<R> + Sync,
{
    let eval = |i: usize| {
        f(points.numerators(i)).map_err(|e| Error::Integrand {
            index: i,
            source: Box::new(e),
        })
    };
    let values: Vec<Result<R>> = if points.n >= PARALLEL_NODES_MIN_N {
        (0..points.len()).into_par_iter().map(eval).collect()
    } else {
        (0..points.len()).map(eval).collect()
    };
    let values = values.into_iter().collect::<Result<Vec<R>>>()?;
    Ok(R::sum_ordered(values) / R::from_int(points.n as i64))
}

/// `Q_{d,n,z}(f) = (1/n) Σ_i f(x_i)`.
pub fn qmc_quadrature<R, F>(f: F, points: &LatticePointSet) -> Result<R>
where
    R: Real,
    F: Fn(&Point<R>) -> Result<R> + Sync,
{
    let n = points.n as i64;
    qmc_quadrature_on_nodes(
        |nums| {
            let p = Point::new(nums.iter().map(|&a| R::from_ratio(a as i64, n)).collect())?;
            f(&p)
        },
        points,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntegrandKind {
    /// `f ≡ 1`.
    Const,
    /// `Π_j x_j`.
    ProdLinear,
    /// `Π_j (1 + x_j - 1/2)`.
    ProdCentered,
    /// `Π_j B_2(x_j)`.
    ProdB2,
}

impl IntegrandKind {
    pub const ALL: [IntegrandKind; 4] = [
        IntegrandKind::Const,
        IntegrandKind::ProdLinear,
        IntegrandKind::ProdCentered,
        IntegrandKind::ProdB2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IntegrandKind::Const => "CONST",
            IntegrandKind::ProdLinear => "PROD_LINEAR",
            IntegrandKind::ProdCentered => "PROD_CENTERED",
            IntegrandKind::ProdB2 => "PROD_B2",
        }
    }

    pub fn from_name(name: &str) -> Option<IntegrandKind> {
        IntegrandKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

/// An integrand on `[0,1)^d` with a known integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestIntegrand {
    kind: IntegrandKind,
    d: usize,
}

impl TestIntegrand {
    pub fn new(kind: IntegrandKind, d: usize) -> TestIntegrand {
        TestIntegrand { kind, d }
    }

    pub fn kind(&self) -> IntegrandKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eval<R: Real>(&self, x: &Point<R>) -> Result<R> {
        if x.dim() != self.d {
            return domain(format!(
                "{} expects dimension {}, got {}",
                self.name(),
                self.d,
                x.dim()
            ));
        }
        let c = x.coords();
        Ok(match self.kind {
            IntegrandKind::Const => R::one(),
            IntegrandKind::ProdLinear => c.iter().fold(R::one(), |acc, v| acc * v.clone()),
            IntegrandKind::ProdCentered => c.iter().fold(R::one(), |acc, v| {
                acc * (R::one() + v.clone() - R::from_ratio(1, 2))
            }),
            IntegrandKind::ProdB2 => c.iter().fold(R::one(), |acc, v| acc * b2_unchecked(v)),
        })
    }

    pub fn exact_integral<R: Real>(&self) -> R {
        match self.kind {
            IntegrandKind::Const | IntegrandKind::ProdCentered => R::one(),
            IntegrandKind::ProdLinear => R::from_ratio(1, 2).powi(self.d),
            IntegrandKind::ProdB2 => R::zero(),
        }
    }
}

pub fn builtin_integrands(d: usize) -> Vec<TestIntegrand> {
    IntegrandKind::ALL
        .into_iter()
        .map(|k| TestIntegrand::new(k, d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::from_ratio(n, d)
    }

    #[test]
    fn point_examples() {
        let p = lattice_points(&GeneratingVector::new(3, vec![1]).unwrap());
        assert_eq!(p.point::<BigRational>(2).coords(), &[q(2, 3)]);
        let p = lattice_points(&GeneratingVector::new(5, vec![1, 2]).unwrap());
        assert_eq!(p.point::<BigRational>(3).coords(), &[q(3, 5), q(1, 5)]);
        assert_eq!(p.numerators(0), &[0, 0]);
        assert!(GeneratingVector::new(5, vec![5]).is_err());
        assert!(GeneratingVector::new(5, vec![0]).is_err());
        assert!(GeneratingVector::new(5, vec![]).is_err());
        assert!(GeneratingVector::new(1, vec![1]).is_ok());
    }

    #[test]
    fn each_coordinate_is_a_full_residue_system_for_primes() {
        for n in crate::numeric::odd_primes_in(3, 101) {
            for zj in 1..n {
                let p = lattice_points(&GeneratingVector::new(n, vec![zj]).unwrap());
                let mut col: Vec<u64> = (0..p.len()).map(|i| p.numerators(i)[0]).collect();
                col.sort_unstable();
                assert_eq!(col, (0..n).collect::<Vec<_>>(), "n={n} z={zj}");
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        let p = lattice_points(&GeneratingVector::new(3, vec![1]).unwrap());
        let one: BigRational = qmc_quadrature(|_| Ok(q(1, 1)), &p).unwrap();
        assert_eq!(one, q(1, 1));
        let lin: BigRational = qmc_quadrature(|x: &Point<BigRational>| Ok(x.coords()[0].clone()), &p).unwrap();
        assert_eq!(lin, q(1, 3));
        let centered: BigRational =
            qmc_quadrature(|x: &Point<BigRational>| Ok(x.coords()[0].clone() - q(1, 2)), &p).unwrap();
        assert_eq!(centered, q(-1, 6));
    }

    #[test]
    fn const_rule_is_exact_for_any_rule() {
        let c = TestIntegrand::new(IntegrandKind::Const, 3);
        for (n, z) in [(7u64, vec![1u64, 2, 3]), (12, vec![5, 7, 11]), (1, vec![1, 1, 1])] {
            let p = lattice_points(&GeneratingVector::new(n, z).unwrap());
            let v: BigRational = qmc_quadrature(|x| c.eval(x), &p).unwrap();
            assert_eq!(v, q(1, 1));
        }
    }

    #[test]
    fn integrand_failures_carry_the_index() {
        let p = lattice_points(&GeneratingVector::new(5, vec![2]).unwrap());
        let err = qmc_quadrature::<f64, _>(
            |x| {
                if x.coords()[0] > 0.5 {
                    Err(Error::Domain("boom".into()))
                } else {
                    Ok(1.0)
                }
            },
            &p,
        )
        .unwrap_err();
        // Nodes are 0, 2/5, 4/5, 1/5, 3/5; index 2 is the first above 1/2.
        assert!(matches!(err, Error::Integrand { index: 2, .. }), "{err:?}");
    }

    #[test]
    fn builtin_integrals() {
        let all = builtin_integrands(3);
        assert_eq!(all.len(), 4);
        assert_eq!(all[1].exact_integral::<BigRational>(), q(1, 8));
        assert_eq!(TestIntegrand::new(IntegrandKind::ProdB2, 2).exact_integral::<BigRational>(), q(0, 1));
        assert_eq!(
            TestIntegrand::new(IntegrandKind::ProdCentered, 5).exact_integral::<BigRational>(),
            q(1, 1)
        );
        assert_eq!(IntegrandKind::from_name("prod_b2"), Some(IntegrandKind::ProdB2));
    }

    /// Fine-grid midpoint rule in 1-D agrees with the stored integrals.
    #[test]
    fn stored_integrals_match_quadrature_in_one_dimension() {
        let m = 200_000;
        for f in builtin_integrands(1) {
            let approx: f64 = (0..m)
                .map(|k| {
                    let x = Point::new(vec![(k as f64 + 0.5) / m as f64]).unwrap();
                    f.eval(&x).unwrap()
                })
                .sum::<f64>()
                / m as f64;
            assert!((approx - f.exact_integral::<f64>()).abs() < 1e-9, "{}", f.name());
        }
    }
}
