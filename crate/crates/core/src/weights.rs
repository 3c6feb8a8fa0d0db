//! Subset weights `γ_u` for the weighted unanchored Sobolev space.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{capacity, domain, Error, Result};
use crate::numeric::{Mode, Real, Scalar};

/// Largest `d` for which sums over all `2^d` subsets are allowed.
pub const MAX_SUBSET_DIM: usize = 20;

/// Largest coordinate index a [`Subset`] can hold.
pub const MAX_SUBSET_INDEX: usize = 64;

/// A set of 1-based coordinate indices, `u ⊆ {1, ..., 64}`.
///
/// Ordered canonically: by size, then lexicographically on the sorted indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_indices(indices: &[usize]) -> Result<Subset> {
        let mut mask = 0u64;
        for &j in indices {
            if j == 0 || j > MAX_SUBSET_INDEX {
                return domain(format!(
                    "subset index {j} outside 1..={MAX_SUBSET_INDEX}"
                ));
            }
            mask |= 1 << (j - 1);
        }
        Ok(Subset(mask))
    }

    /// Bit `j - 1` of `mask` marks index `j`.
    pub fn from_mask(mask: u64) -> Subset {
        Subset(mask)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, j: usize) -> bool {
        (1..=MAX_SUBSET_INDEX).contains(&j) && self.0 & (1 << (j - 1)) != 0
    }

    /// Largest index in the set, 0 for the empty set.
    pub fn max_index(&self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn indices(&self) -> Vec<usize> {
        (1..=MAX_SUBSET_INDEX).filter(|&j| self.contains(j)).collect()
    }

    pub fn union(&self, other: &Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn is_disjoint(&self, other: &Subset) -> bool {
        self.0 & other.0 == 0
    }
}

impl Ord for Subset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.indices().cmp(&other.indices()))
    }
}

impl PartialOrd for Subset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.indices().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// Iterator over all subsets of `{1, ..., d}` in canonical order.
pub struct Subsets {
    d: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        let combo = self.current.take()?;
        let out = Subset::from_indices(&combo).expect("indices within 1..=d");
        self.current = next_combination(combo, self.d);
        Some(out)
    }
}

/// Next combination in lexicographic order, moving to the next size when the
/// current size is exhausted.
fn next_combination(mut combo: Vec<usize>, d: usize) -> Option<Vec<usize>> {
    let k = combo.len();
    for pos in (0..k).rev() {
        // Largest value allowed at `pos` is d - (k - 1 - pos).
        if combo[pos] < d - (k - 1 - pos) {
            combo[pos] += 1;
            for next in pos + 1..k {
                combo[next] = combo[next - 1] + 1;
            }
            return Some(combo);
        }
    }
    if k < d {
        Some((1..=k + 1).collect())
    } else {
        None
    }
}

/// All subsets of `{1, ..., d}`: by size, then lexicographic.
pub fn subsets(d: usize) -> Result<Subsets> {
    if d == 0 {
        return domain("subset enumeration needs d >= 1");
    }
    if d > MAX_SUBSET_DIM {
        return capacity(format!(
            "enumerating 2^{d} subsets exceeds the d <= {MAX_SUBSET_DIM} cap; \
             use product or order-dependent weights, whose sums aggregate by |u|"
        ));
    }
    Ok(Subsets {
        d,
        current: Some(Vec::new()),
    })
}

/// The weight model behind a [`Weights`] value.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightModel {
    /// `γ_u = Π_{j∈u} γ_j`.
    Product(Vec<Scalar>),
    /// `γ_u = Γ_{|u|}`; entry `k - 1` holds `Γ_k`.
    OrderDependent(Vec<Scalar>),
    /// Listed subsets; missing non-empty subsets have weight zero.
    Explicit(BTreeMap<Subset, Scalar>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Product,
    OrderDependent,
    Explicit,
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightKind::Product => "product",
            WeightKind::OrderDependent => "order",
            WeightKind::Explicit => "explicit",
        })
    }
}

/// A weight collection over `d` coordinates. `γ_∅ = 1` always.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    d: usize,
    mode: Mode,
    model: WeightModel,
}

fn check_values<'a>(values: impl IntoIterator<Item = &'a Scalar>, mode: Mode) -> Result<()> {
    for v in values {
        if v.mode() != mode {
            return Err(Error::ModeMismatch(format!(
                "weight {v} is {} but the collection is {mode}",
                v.mode()
            )));
        }
        if v.is_negative() {
            return domain(format!("weights must be non-negative, got {v}"));
        }
        if let Scalar::Float(x) = v {
            if !x.is_finite() {
                return domain(format!("weights must be finite, got {x}"));
            }
        }
    }
    Ok(())
}

fn mode_of(values: &[Scalar]) -> Mode {
    values.first().map_or(Mode::Float, Scalar::mode)
}

impl Weights {
    pub fn product(gammas: Vec<Scalar>) -> Result<Weights> {
        if gammas.is_empty() {
            return domain("product weights need at least one coordinate");
        }
        let mode = mode_of(&gammas);
        check_values(&gammas, mode)?;
        Ok(Weights {
            d: gammas.len(),
            mode,
            model: WeightModel::Product(gammas),
        })
    }

    /// Order-dependent weights; `big_gammas[k - 1]` is the weight of every
    /// subset of size `k`, so `d = big_gammas.len()`.
    pub fn order_dependent(big_gammas: Vec<Scalar>) -> Result<Weights> {
        if big_gammas.is_empty() {
            return domain("order-dependent weights need at least one coordinate");
        }
        let mode = mode_of(&big_gammas);
        check_values(&big_gammas, mode)?;
        Ok(Weights {
            d: big_gammas.len(),
            mode,
            model: WeightModel::OrderDependent(big_gammas),
        })
    }

    pub fn explicit(
        d: usize,
        mode: Mode,
        entries: impl IntoIterator<Item = (Subset, Scalar)>,
    ) -> Result<Weights> {
        if d == 0 || d > MAX_SUBSET_INDEX {
            return domain(format!("explicit weights need 1 <= d <= {MAX_SUBSET_INDEX}, got {d}"));
        }
        let mut map = BTreeMap::new();
        for (u, g) in entries {
            if u.is_empty() {
                return domain("the weight of the empty set is fixed to 1 and cannot be listed");
            }
            if u.max_index() > d {
                return domain(format!("subset {u:?} has an index above d = {d}"));
            }
            check_values([&g], mode)?;
            if map.insert(u, g).is_some() {
                return domain(format!("subset {u:?} listed twice"));
            }
        }
        Ok(Weights {
            d,
            mode,
            model: WeightModel::Explicit(map),
        })
    }

    /// Product weights from `(numerator, denominator)` pairs.
    pub fn product_ratios(gammas: &[(i64, i64)], mode: Mode) -> Result<Weights> {
        Weights::product(
            gammas
                .iter()
                .map(|&(p, q)| Scalar::from_ratio(p, q, mode))
                .collect(),
        )
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    pub fn kind(&self) -> WeightKind {
        match self.model {
            WeightModel::Product(_) => WeightKind::Product,
            WeightModel::OrderDependent(_) => WeightKind::OrderDependent,
            WeightModel::Explicit(_) => WeightKind::Explicit,
        }
    }

    /// `γ_u`, with `γ_∅ = 1`.
    pub fn gamma(&self, u: &Subset) -> Result<Scalar> {
        if u.max_index() > self.d {
            return domain(format!("subset {u:?} not contained in {{1,...,{}}}", self.d));
        }
        if u.is_empty() {
            return Ok(Scalar::one(self.mode));
        }
        match &self.model {
            WeightModel::Product(g) => u.indices().into_iter().try_fold(
                Scalar::one(self.mode),
                |acc, j| acc.checked_mul(&g[j - 1]),
            ),
            WeightModel::OrderDependent(g) => Ok(g[u.len() - 1].clone()),
            WeightModel::Explicit(map) => Ok(map
                .get(u)
                .cloned()
                .unwrap_or_else(|| Scalar::zero(self.mode))),
        }
    }

    pub fn gamma_as<R: Real>(&self, u: &Subset) -> Result<R> {
        R::from_scalar(&self.gamma(u)?)
    }

    /// `W_k = Σ_{|u| = k} γ_u` for `k = 0, ..., d` (so `W_0 = 1`).
    ///
    /// Every quantity that depends on `u` only through `|u|` reduces to these
    /// sums. For product weights they are the elementary symmetric
    /// polynomials of `γ_1, ..., γ_d`, so no subset enumeration is needed.
    pub fn order_sums<R: Real>(&self) -> Result<Vec<R>> {
        let d = self.d;
        let mut sums = vec![R::zero(); d + 1];
        sums[0] = R::one();
        match &self.model {
            WeightModel::Product(g) => {
                for (j, gamma) in g.iter().enumerate() {
                    let gamma = R::from_scalar(gamma)?;
                    for k in (1..=j + 1).rev() {
                        let add = sums[k - 1].clone() * gamma.clone();
                        sums[k] = sums[k].clone() + add;
                    }
                }
            }
            WeightModel::OrderDependent(g) => {
                let mut binom = R::one();
                for k in 1..=d {
                    binom = binom * R::from_ratio((d - k + 1) as i64, k as i64);
                    sums[k] = binom.clone() * R::from_scalar(&g[k - 1])?;
                }
            }
            WeightModel::Explicit(map) => {
                for (u, gamma) in map {
                    sums[u.len()] = sums[u.len()].clone() + R::from_scalar(gamma)?;
                }
            }
        }
        Ok(sums)
    }

    /// Restriction to coordinates `1, ..., s`.
    pub fn restrict(&self, s: usize) -> Result<Weights> {
        if s == 0 || s > self.d {
            return domain(format!("cannot restrict d = {} weights to {s} coordinates", self.d));
        }
        let model = match &self.model {
            WeightModel::Product(g) => WeightModel::Product(g[..s].to_vec()),
            WeightModel::OrderDependent(g) => WeightModel::OrderDependent(g[..s].to_vec()),
            WeightModel::Explicit(map) => WeightModel::Explicit(
                map.iter()
                    .filter(|(u, _)| u.max_index() <= s)
                    .map(|(u, g)| (*u, g.clone()))
                    .collect(),
            ),
        };
        Ok(Weights {
            d: s,
            mode: self.mode,
            model,
        })
    }

    /// True when `γ_u` depends on `u` only through `|u|`.
    pub fn is_exchangeable(&self) -> bool {
        match &self.model {
            WeightModel::Product(g) => g.windows(2).all(|w| w[0] == w[1]),
            WeightModel::OrderDependent(_) => true,
            WeightModel::Explicit(_) => false,
        }
    }

    /// True when every non-empty subset has weight zero.
    pub fn all_zero(&self) -> bool {
        match &self.model {
            WeightModel::Product(g) | WeightModel::OrderDependent(g) => g.iter().all(Scalar::is_zero),
            WeightModel::Explicit(map) => map.values().all(Scalar::is_zero),
        }
    }

    /// Short human-readable description, e.g. `product[1, 1/4]`.
    pub fn descriptor(&self) -> String {
        let list = |g: &[Scalar]| g.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        match &self.model {
            WeightModel::Product(g) => format!("product[{}]", list(g)),
            WeightModel::OrderDependent(g) => format!("order[{}]", list(g)),
            WeightModel::Explicit(map) => {
                let entries: Vec<String> = map.iter().map(|(u, g)| format!("{u:?}:{g}")).collect();
                format!("explicit(d={})[{}]", self.d, entries.join(", "))
            }
        }
    }

    /// Parses a weight specification.
    ///
    /// Accepts the JSON forms `{"type":"product","gammas":[...]}`,
    /// `{"type":"order","Gammas":[...]}` and
    /// `{"type":"explicit","d":D,"entries":[{"u":[1,3],"gamma":0.5}]}`, or
    /// the shorthand `product:[1,1/4]` / `order:[...]`. Numbers may be JSON
    /// numbers, decimal strings or `"p/q"` strings.
    pub fn from_spec(text: &str, mode: Mode) -> Result<Weights> {
        let text = text.trim();
        if text.starts_with('{') {
            return Weights::from_json(text, mode);
        }
        let (kind, list) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("unrecognised weight spec {text:?}")))?;
        let list = list
            .trim()
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("expected [..] list in weight spec {text:?}")))?;
        let values = list
            .split(',')
            .map(|v| Scalar::parse(v.trim().trim_matches('"'), mode))
            .collect::<Result<Vec<_>>>()?;
        match kind.trim() {
            "product" => Weights::product(values),
            "order" => Weights::order_dependent(values),
            other => Err(Error::Parse(format!("unknown weight type {other:?}"))),
        }
    }

    pub fn from_json(text: &str, mode: Mode) -> Result<Weights> {
        let spec: WeightSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("weight spec: {e}")))?;
        let scalars = |values: &[Value]| -> Result<Vec<Scalar>> {
            values.iter().map(|v| json_scalar(v, mode)).collect()
        };
        match spec {
            WeightSpec::Product { gammas } => Weights::product(scalars(&gammas)?),
            WeightSpec::Order { big_gammas } => Weights::order_dependent(scalars(&big_gammas)?),
            WeightSpec::Explicit { d, entries } => {
                let entries = entries
                    .iter()
                    .map(|e| Ok((Subset::from_indices(&e.u)?, json_scalar(&e.gamma, mode)?)))
                    .collect::<Result<Vec<_>>>()?;
                Weights::explicit(d, mode, entries)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum WeightSpec {
    Product {
        gammas: Vec<Value>,
    },
    Order {
        #[serde(rename = "Gammas")]
        big_gammas: Vec<Value>,
    },
    Explicit {
        d: usize,
        entries: Vec<ExplicitEntry>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitEntry {
    u: Vec<usize>,
    gamma: Value,
}

/// JSON numbers are re-read from their shortest decimal form, so `0.7` is
/// exactly `7/10` in EXACT mode.
fn json_scalar(v: &Value, mode: Mode) -> Result<Scalar> {
    match v {
        Value::Number(n) => Scalar::parse(&n.to_string(), mode),
        Value::String(s) => Scalar::parse(s, mode),
        other => Err(Error::Parse(format!("expected a number, got {other}"))),
    }
}
