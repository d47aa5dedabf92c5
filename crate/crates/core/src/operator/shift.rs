//! Bilateral weighted backward shifts `(B_w x)_n = w_{n+1} x_{n+1}` with
//! eventually constant weights.
//!
//! The splitting is fixed: `M = {x : x_n = 0 for n > 0}` and
//! `N = {x : x_n = 0 for n <= 0}`. Operator norms of powers restricted to
//! `M` and `N` are suprema of products of consecutive weights, which are
//! computed exactly (in log space) because only finitely many windows touch
//! the core table.

use serde::{Deserialize, Serialize};

use crate::error::{CriterionSide, Error, Result};
use crate::state::SparseVec;

/// Weight sequence: a finite core table starting at `core_start`, a constant
/// value for every index left of it and another for every index right of it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    core_start: i64,
    core: Vec<f64>,
    left_tail: f64,
    right_tail: f64,
    // prefix sums of ln|core|
    log_prefix: Vec<f64>,
}

impl WeightSpec {
    /// `core[i]` is the weight at index `core_start + i`.
    pub fn new(core_start: i64, core: Vec<f64>, left_tail: f64, right_tail: f64) -> Result<Self> {
        for (name, w) in [("left_tail", left_tail), ("right_tail", right_tail)] {
            if !w.is_finite() || w == 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "{name} must be finite and nonzero, got {w}"
                )));
            }
        }
        if let Some((i, w)) = core
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w == 0.0)
        {
            return Err(Error::InvalidWeights(format!(
                "core weight at index {} must be finite and nonzero, got {w}",
                core_start + i as i64
            )));
        }
        let mut log_prefix = Vec::with_capacity(core.len() + 1);
        log_prefix.push(0.0);
        for w in &core {
            let last = *log_prefix.last().unwrap();
            log_prefix.push(last + w.abs().ln());
        }
        Ok(WeightSpec {
            core_start,
            core,
            left_tail,
            right_tail,
            log_prefix,
        })
    }

    /// `w_n = left` for `n < split`, `w_n = right` for `n >= split`.
    pub fn constant_tails(left: f64, right: f64, split: i64) -> Result<Self> {
        WeightSpec::new(split, Vec::new(), left, right)
    }

    /// The classic instance: `w_n = left` for `n <= 0`, `right` for `n > 0`.
    pub fn two_sided(left: f64, right: f64) -> Result<Self> {
        WeightSpec::constant_tails(left, right, 1)
    }

    /// Builds a spec from a sparse `{index: weight}` core table, which must
    /// cover a contiguous index range.
    pub fn from_table(
        core: &[(i64, f64)],
        left_tail: f64,
        right_tail: f64,
        empty_split: i64,
    ) -> Result<Self> {
        let mut sorted = core.to_vec();
        sorted.sort_by_key(|&(i, _)| i);
        if sorted.is_empty() {
            return WeightSpec::constant_tails(left_tail, right_tail, empty_split);
        }
        for w in sorted.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::InvalidWeights(format!(
                    "core table must be contiguous; gap between indices {} and {}",
                    w[0].0, w[1].0
                )));
            }
        }
        WeightSpec::new(
            sorted[0].0,
            sorted.iter().map(|&(_, w)| w).collect(),
            left_tail,
            right_tail,
        )
    }

    pub fn core_start(&self) -> i64 {
        self.core_start
    }

    /// One past the last core index.
    pub fn core_end(&self) -> i64 {
        self.core_start + self.core.len() as i64
    }

    pub fn core(&self) -> &[f64] {
        &self.core
    }

    pub fn left_tail(&self) -> f64 {
        self.left_tail
    }

    pub fn right_tail(&self) -> f64 {
        self.right_tail
    }

    pub fn weight(&self, n: i64) -> f64 {
        if n < self.core_start {
            self.left_tail
        } else if n < self.core_end() {
            self.core[(n - self.core_start) as usize]
        } else {
            self.right_tail
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.core
            .iter()
            .fold(self.left_tail.abs().max(self.right_tail.abs()), |m, w| {
                m.max(w.abs())
            })
    }

    pub fn inf_abs(&self) -> f64 {
        self.core
            .iter()
            .fold(self.left_tail.abs().min(self.right_tail.abs()), |m, w| {
                m.min(w.abs())
            })
    }

    /// `sum_{i=a}^{b} ln|w_i|`, zero for an empty range.
    pub fn log_weight_sum(&self, a: i64, b: i64) -> f64 {
        if a > b {
            return 0.0;
        }
        let (s, e) = (self.core_start, self.core_end());
        let mut total = 0.0;
        let left_hi = b.min(s - 1);
        if left_hi >= a {
            total += (left_hi - a + 1) as f64 * self.left_tail.abs().ln();
        }
        let (c_lo, c_hi) = (a.max(s), b.min(e - 1));
        if c_hi >= c_lo {
            let lo = (c_lo - s) as usize;
            let hi = (c_hi - s) as usize + 1;
            total += self.log_prefix[hi] - self.log_prefix[lo];
        }
        let right_lo = a.max(e);
        if b >= right_lo {
            total += (b - right_lo + 1) as f64 * self.right_tail.abs().ln();
        }
        total
    }

    /// `ln ‖B^n|_M‖ = max_{j <= 0} ln|w_{j-n+1} ... w_j|`.
    pub fn log_power_norm_stable(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as i64;
        // windows ending left of the core see only the left tail
        let mut best = n as f64 * self.left_tail.abs().ln();
        for j in self.core_start.min(1)..=0 {
            best = best.max(self.log_weight_sum(j - n + 1, j));
        }
        best
    }

    /// `ln ‖B^{-n}|_N‖ = max_{j >= 1} -ln|w_{j+1} ... w_{j+n}|`.
    pub fn log_power_norm_unstable_inverse(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as i64;
        let mut best = -(n as f64) * self.right_tail.abs().ln();
        for j in 1..self.core_end().max(1) {
            best = best.max(-self.log_weight_sum(j + 1, j + n));
        }
        best
    }

    /// `(B_w x)_n = w_{n+1} x_{n+1}`.
    pub fn apply(&self, x: &SparseVec) -> SparseVec {
        x.relabel(-1, |n| self.weight(n + 1))
    }

    /// `(B_w^{-1} y)_n = y_{n-1} / w_n`.
    pub fn apply_inverse(&self, y: &SparseVec) -> SparseVec {
        y.relabel(1, |n| 1.0 / self.weight(n))
    }
}

/// Outcome of the weighted-shift criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftCriterion {
    pub holds: bool,
    /// `lim_n sup_k |w_{-k} ... w_{-k-n}|^{1/n}`.
    pub left_margin: f64,
    /// `lim_n inf_k |w_k ... w_{k+n}|^{1/n}`.
    pub right_margin: f64,
}

impl ShiftCriterion {
    pub fn violated_side(&self) -> Option<(CriterionSide, f64)> {
        if !(self.left_margin < 1.0) {
            Some((CriterionSide::Left, self.left_margin))
        } else if !(self.right_margin > 1.0) {
            Some((CriterionSide::Right, self.right_margin))
        } else {
            None
        }
    }
}

/// Evaluates both limits of the weighted-shift criterion.
///
/// Every window of `n + 1` consecutive weights contains at most
/// `core.len()` entries from the core table (plus a bounded number from the
/// far tail when the core straddles the origin), so their contribution
/// vanishes under the `n`-th root and the limits equal the tail moduli.
pub fn check_shift_criterion(weights: &WeightSpec) -> ShiftCriterion {
    let left_margin = weights.left_tail().abs();
    let right_margin = weights.right_tail().abs();
    ShiftCriterion {
        holds: left_margin < 1.0 && right_margin > 1.0,
        left_margin,
        right_margin,
    }
}
