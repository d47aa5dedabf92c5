//! Points of the state space: dense finite-dimensional vectors and finitely
//! supported sequences indexed by the integers.
//!
//! Sparse vectors never store an explicit zero. Arithmetic that cancels a
//! coordinate to exactly `0.0` removes it from the support; nothing is pruned
//! by magnitude.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ambient norm of the state space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `(sum |v_i|^p)^(1/p)` with finite `p >= 1`.
    Lp(f64),
    /// `max |v_i|`.
    #[default]
    Sup,
}

impl NormKind {
    pub fn lp(p: f64) -> Result<Self> {
        let kind = NormKind::Lp(p);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormKind::Lp(p) if !(p.is_finite() && p >= 1.0) => Err(Error::InvalidParameter {
                name: "p",
                reason: format!("Lp exponent must be finite and >= 1, got {p}"),
            }),
            _ => Ok(()),
        }
    }

    /// Norm of `n` coordinates each of absolute value at most `a`.
    pub fn of_constant_block(&self, a: f64, n: usize) -> f64 {
        match *self {
            NormKind::Sup => {
                if n == 0 {
                    0.0
                } else {
                    a.abs()
                }
            }
            NormKind::Lp(p) => a.abs() * (n as f64).powf(1.0 / p),
        }
    }

    fn fold<'a>(&self, coords: impl Iterator<Item = &'a f64>) -> f64 {
        match *self {
            NormKind::Sup => coords.fold(0.0_f64, |m, v| m.max(v.abs())),
            NormKind::Lp(p) if p == 1.0 => coords.map(|v| v.abs()).sum(),
            NormKind::Lp(p) if p == 2.0 => {
                // scaled to avoid overflow on large coordinates
                let vals: Vec<f64> = coords.map(|v| v.abs()).collect();
                let m = vals.iter().cloned().fold(0.0_f64, f64::max);
                if m == 0.0 || !m.is_finite() {
                    return m;
                }
                m * vals.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
            }
            NormKind::Lp(p) => {
                let vals: Vec<f64> = coords.map(|v| v.abs()).collect();
                let m = vals.iter().cloned().fold(0.0_f64, f64::max);
                if m == 0.0 || !m.is_finite() {
                    return m;
                }
                m * vals
                    .iter()
                    .map(|v| (v / m).powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p)
            }
        }
    }
}

/// A finitely supported real sequence on the integers, sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    entries: Vec<(i64, f64)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from `(index, value)` pairs. Repeated indices are
    /// summed; zero results are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Self {
        let mut map: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, v) in pairs {
            *map.entry(i).or_insert(0.0) += v;
        }
        SparseVec {
            entries: map.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    /// Trusted constructor: `entries` must be strictly increasing in index.
    /// Zeros are still removed.
    pub(crate) fn from_sorted(mut entries: Vec<(i64, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        entries.retain(|&(_, v)| v != 0.0);
        SparseVec { entries }
    }

    pub fn unit(index: i64, value: f64) -> Self {
        Self::from_pairs([(index, value)])
    }

    pub fn entries(&self) -> &[(i64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: i64) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Smallest and largest stored index.
    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        Some((self.entries.first()?.0, self.entries.last()?.0))
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        kind.fold(self.entries.iter().map(|(_, v)| v))
    }

    /// `a * x + y`.
    pub fn axpy(a: f64, x: &SparseVec, y: &SparseVec) -> SparseVec {
        if a == 0.0 {
            return y.clone();
        }
        let mut out = Vec::with_capacity(x.len() + y.len());
        let (mut i, mut j) = (0, 0);
        let (xs, ys) = (&x.entries, &y.entries);
        while i < xs.len() || j < ys.len() {
            let pick = match (xs.get(i), ys.get(j)) {
                (Some(&(ix, _)), Some(&(iy, _))) => ix.cmp(&iy),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => unreachable!(),
            };
            let (idx, v) = match pick {
                std::cmp::Ordering::Less => {
                    i += 1;
                    (xs[i - 1].0, a * xs[i - 1].1)
                }
                std::cmp::Ordering::Greater => {
                    j += 1;
                    ys[j - 1]
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (xs[i - 1].0, a * xs[i - 1].1 + ys[j - 1].1)
                }
            };
            if v != 0.0 {
                out.push((idx, v));
            }
        }
        SparseVec { entries: out }
    }

    pub fn scale(&self, a: f64) -> SparseVec {
        SparseVec::from_sorted(self.entries.iter().map(|&(i, v)| (i, a * v)).collect())
    }

    /// Keeps coordinates whose index satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(i64) -> bool) -> SparseVec {
        SparseVec {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(i, _)| keep(i))
                .collect(),
        }
    }

    /// Applies `f(index, value)` to every stored coordinate, keeping the index.
    pub fn map_values(&self, f: impl Fn(i64, f64) -> f64) -> SparseVec {
        SparseVec::from_sorted(self.entries.iter().map(|&(i, v)| (i, f(i, v))).collect())
    }

    /// Moves every coordinate by `offset` and multiplies it by `factor(new_index)`.
    pub(crate) fn relabel(&self, offset: i64, factor: impl Fn(i64) -> f64) -> SparseVec {
        SparseVec::from_sorted(
            self.entries
                .iter()
                .map(|&(i, v)| {
                    let n = i + offset;
                    (n, v * factor(n))
                })
                .collect(),
        )
    }
}

/// A point of the state space.
#[derive(Debug, Clone, PartialEq)]
pub enum StateVector {
    Dense(Vec<f64>),
    Sparse(SparseVec),
}

impl From<SparseVec> for StateVector {
    fn from(v: SparseVec) -> Self {
        StateVector::Sparse(v)
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector::Dense(v)
    }
}

impl StateVector {
    pub fn dense(coords: impl Into<Vec<f64>>) -> Self {
        StateVector::Dense(coords.into())
    }

    pub fn sparse<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Self {
        StateVector::Sparse(SparseVec::from_pairs(pairs))
    }

    /// The zero vector of the same backend and dimension.
    pub fn zeros_like(&self) -> StateVector {
        match self {
            StateVector::Dense(v) => StateVector::Dense(vec![0.0; v.len()]),
            StateVector::Sparse(_) => StateVector::Sparse(SparseVec::new()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            StateVector::Dense(v) => v.iter().all(|&x| x == 0.0),
            StateVector::Sparse(s) => s.is_empty(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            StateVector::Dense(v) => v.iter().all(|x| x.is_finite()),
            StateVector::Sparse(s) => s.entries().iter().all(|(_, x)| x.is_finite()),
        }
    }

    pub fn backend_name(&self) -> String {
        match self {
            StateVector::Dense(v) => format!("dense({})", v.len()),
            StateVector::Sparse(_) => "sparse".to_string(),
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseVec> {
        match self {
            StateVector::Sparse(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&[f64]> {
        match self {
            StateVector::Dense(v) => Some(v),
            _ => None,
        }
    }

    /// Coordinate at `index` (dense vectors use 0-based positions).
    pub fn coord(&self, index: i64) -> f64 {
        match self {
            StateVector::Dense(v) => usize::try_from(index)
                .ok()
                .and_then(|i| v.get(i).copied())
                .unwrap_or(0.0),
            StateVector::Sparse(s) => s.get(index),
        }
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match self {
            StateVector::Dense(v) => kind.fold(v.iter()),
            StateVector::Sparse(s) => s.norm(kind),
        }
    }

    pub fn check_compatible(&self, other: &StateVector) -> Result<()> {
        match (self, other) {
            (StateVector::Dense(a), StateVector::Dense(b)) if a.len() != b.len() => {
                Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: b.len(),
                })
            }
            (StateVector::Dense(_), StateVector::Dense(_))
            | (StateVector::Sparse(_), StateVector::Sparse(_)) => Ok(()),
            _ => Err(Error::BackendMismatch(format!(
                "{} vs {}",
                self.backend_name(),
                other.backend_name()
            ))),
        }
    }

    /// `a * x + y`.
    pub fn axpy(a: f64, x: &StateVector, y: &StateVector) -> Result<StateVector> {
        x.check_compatible(y)?;
        Ok(match (x, y) {
            (StateVector::Dense(xv), StateVector::Dense(yv)) => {
                StateVector::Dense(xv.iter().zip(yv).map(|(xi, yi)| a * xi + yi).collect())
            }
            (StateVector::Sparse(xs), StateVector::Sparse(ys)) => {
                StateVector::Sparse(SparseVec::axpy(a, xs, ys))
            }
            _ => unreachable!(),
        })
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        StateVector::axpy(1.0, other, self)
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        StateVector::axpy(-1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> StateVector {
        match self {
            StateVector::Dense(v) => StateVector::Dense(v.iter().map(|x| a * x).collect()),
            StateVector::Sparse(s) => StateVector::Sparse(s.scale(a)),
        }
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &StateVector, kind: NormKind) -> Result<f64> {
        Ok(self.sub(other)?.norm(kind))
    }

    /// Hashable key that identifies the vector up to a relative granularity
    /// of `1e-15` of its largest coordinate.
    pub fn quantized_key(&self) -> QuantKey {
        let coords: Vec<(i64, f64)> = match self {
            StateVector::Dense(v) => v.iter().enumerate().map(|(i, &x)| (i as i64, x)).collect(),
            StateVector::Sparse(s) => s.entries().to_vec(),
        };
        let max = coords.iter().fold(0.0_f64, |m, (_, x)| m.max(x.abs()));
        let exp = if max > 0.0 && max.is_finite() {
            max.log2().floor() as i32
        } else {
            0
        };
        let unit = 2f64.powi(exp) * 1e-15;
        let cells = coords
            .into_iter()
            .map(|(i, x)| (i, (x / unit).round() as i64))
            .filter(|&(_, q)| q != 0)
            .collect();
        QuantKey {
            dense: matches!(self, StateVector::Dense(_)),
            exp,
            cells,
        }
    }
}

/// Memo key produced by [`StateVector::quantized_key`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantKey {
    dense: bool,
    exp: i32,
    cells: Vec<(i64, i64)>,
}

/// Ambient norm of `v`.
pub fn norm(v: &StateVector, kind: NormKind) -> f64 {
    v.norm(kind)
}

/// `a * x + y`, failing on mismatched backends.
pub fn axpy(a: f64, x: &StateVector, y: &StateVector) -> Result<StateVector> {
    StateVector::axpy(a, x, y)
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateVector::Dense(v) => write!(f, "{v:?}"),
            StateVector::Sparse(s) => {
                f.write_str("{")?;
                for (k, (i, v)) in s.entries().iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{i}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

// Dense vectors serialize as JSON arrays, sparse ones as objects keyed by the
// decimal index.
impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StateVector::Dense(v) => v.serialize(serializer),
            StateVector::Sparse(s) => {
                let mut map = serializer.serialize_map(Some(s.len()))?;
                for (i, v) in s.entries() {
                    map.serialize_entry(&i.to_string(), v)?;
                }
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Dense(Vec<f64>),
            Sparse(BTreeMap<String, f64>),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Dense(v) => Ok(StateVector::Dense(v)),
            Repr::Sparse(m) => {
                let mut pairs = Vec::with_capacity(m.len());
                for (k, v) in m {
                    let idx: i64 = k.trim().parse().map_err(|_| {
                        de::Error::custom(format!("sparse key `{k}` is not an integer"))
                    })?;
                    pairs.push((idx, v));
                }
                Ok(StateVector::sparse(pairs))
            }
        }
    }
}
