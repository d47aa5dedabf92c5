//! Depth-bounded Picard iteration for `h = Ψ_1^{-1}(β ∘ (I + h))` with `R = T`.
//!
//! Level `n` of the iteration needs `φ_{n-1}` on the orbit points `T^i x`
//! within a window around the previous level's targets, so every level is
//! computed on a contiguous range of orbit indices. The two series are
//! accumulated by marching along the orbit. The marching restarts at fixed
//! block boundaries (multiples of `K + 1` in the absolute orbit index), so
//! each target keeps between `K + 1` and `2K + 1` terms and every level sees
//! the same truncated linear operator.
//!
//! Error bounds are carried per orbit index with the same marching, using
//! the scalar weights `c d t^k`. Orbit points that overflow are treated as
//! unknown: their `β`-value is replaced by zero at a cost of `‖β‖_∞`.

use crate::error::{Error, Result};
use crate::operator::GhOperator;
use crate::perturbation::Perturbation;
use crate::state::StateVector;

/// Picard iterates at the base point and their per-level increments.
#[derive(Debug, Clone)]
pub struct PicardTrace {
    /// `φ_n(x)` for `n = 1..=depth`.
    pub values: Vec<StateVector>,
    /// `max_i ‖φ_n(T^i x) - φ_{n-1}(T^i x)‖` over the orbit window that level
    /// `n + 1` reads, for `n = 1..=depth`.
    pub sup_increments: Vec<f64>,
    /// Contraction factor of the Picard map.
    pub q: f64,
}

struct Level {
    lo: i64,
    values: Vec<StateVector>,
    errors: Vec<f64>,
}

impl Level {
    fn get(&self, i: i64) -> &StateVector {
        &self.values[(i - self.lo) as usize]
    }

    fn error(&self, i: i64) -> f64 {
        self.errors[(i - self.lo) as usize]
    }
}

/// Parameters of one forward evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub terms: usize,
    pub depth: usize,
    pub q: f64,
    /// Truncation tail of one series evaluation.
    pub tail: f64,
    /// `q^depth ‖h‖_∞`.
    pub picard_error: f64,
}

/// Orbit points beyond this norm are treated as unknown.
const ORBIT_LIMIT: f64 = 1e200;

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Returns `φ_depth(x)`, its certified distance from `h(x)`, and the trace.
pub(crate) fn march(
    op: &GhOperator,
    beta: &Perturbation,
    x: &StateVector,
    plan: Plan,
) -> Result<(StateVector, f64, PicardTrace)> {
    let Plan {
        terms: k,
        depth,
        q,
        tail,
        picard_error,
    } = plan;
    op.check_vector(x)?;
    let mut trace = PicardTrace {
        values: Vec::with_capacity(depth),
        sup_increments: Vec::with_capacity(depth),
        q,
    };
    if depth == 0 {
        return Ok((x.zeros_like(), 0.0, trace));
    }
    let kk = k as i64;
    let block = kk + 1;
    let left = 2 * kk + 1;
    let right = 2 * kk;
    let range = |m: usize| {
        let s = (depth - m) as i64;
        (-s * left, s * right)
    };
    let norm = op.norm_kind();
    if !(x.is_finite() && x.norm(norm) <= ORBIT_LIMIT) {
        return Err(Error::Overflow("evaluating h at a non-finite point".into()));
    }
    let constants = op.constants();
    let (t, cd) = (constants.t, constants.c * constants.d);
    let (s_bound, lip) = (beta.sup_bound(), beta.lip_bound());

    // orbit[i] = T^i x, `None` once the orbit leaves the representable range
    let (olo, ohi) = range(0);
    let mut orbit: Vec<Option<StateVector>> = vec![None; (ohi - olo + 1) as usize];
    orbit[(-olo) as usize] = Some(x.clone());
    for i in 1..=ohi {
        let next = match &orbit[(i - 1 - olo) as usize] {
            Some(p) => Some(op.apply(p)?).filter(|v| v.is_finite() && v.norm(norm) <= ORBIT_LIMIT),
            None => None,
        };
        orbit[(i - olo) as usize] = next;
    }
    for i in (olo..0).rev() {
        let next = match &orbit[(i + 1 - olo) as usize] {
            Some(p) => {
                Some(op.apply_inverse(p)?).filter(|v| v.is_finite() && v.norm(norm) <= ORBIT_LIMIT)
            }
            None => None,
        };
        orbit[(i - olo) as usize] = next;
    }
    let point = |i: i64| orbit[(i - olo) as usize].as_ref();

    let stable = !op.stable_is_trivial();
    let unstable = !op.unstable_is_trivial();
    let zero = op.zero_vector();
    let mut prev: Option<Level> = None;

    for n in 1..=depth {
        let (glo, ghi) = range(n - 1);
        let mut pm = Vec::with_capacity((ghi - glo + 1) as usize);
        let mut pn = Vec::with_capacity((ghi - glo + 1) as usize);
        // bound on the error of each g value
        let mut zeta = Vec::with_capacity((ghi - glo + 1) as usize);
        for i in glo..=ghi {
            let Some(p) = point(i) else {
                pm.push(zero.clone());
                pn.push(zero.clone());
                zeta.push(s_bound);
                continue;
            };
            let (arg, err) = match &prev {
                Some(level) => (p.add(level.get(i))?, lip * level.error(i)),
                None => (p.clone(), 0.0),
            };
            let g = beta.eval(&arg);
            pm.push(if stable {
                op.project_stable(&g)?
            } else {
                zero.clone()
            });
            pn.push(if unstable {
                op.project_unstable(&g)?
            } else {
                zero.clone()
            });
            zeta.push(err.min(2.0 * s_bound));
        }
        let pm_at = |j: i64| &pm[(j - glo) as usize];
        let pn_at = |j: i64| &pn[(j - glo) as usize];
        let zeta_at = |j: i64| zeta[(j - glo) as usize];

        let (lo, hi) = range(n);
        let mut values = Vec::with_capacity((hi - lo + 1) as usize);
        let mut errors = Vec::with_capacity((hi - lo + 1) as usize);
        let mut s = floor_div(lo, block) * block;
        while s <= hi {
            let t0 = s.max(lo);
            let t1 = (s + kk).min(hi);
            let width = (t1 - t0 + 1) as usize;
            let mut a_part = vec![zero.clone(); width];
            let mut b_part = vec![zero.clone(); width];
            let mut err_part = vec![tail; width];
            if stable {
                let mut a = zero.clone();
                let mut ea = 0.0;
                for j in (s - kk - 1)..=t1 {
                    if j >= t0 {
                        a_part[(j - t0) as usize] = a.clone();
                        err_part[(j - t0) as usize] += ea;
                    }
                    if j < t1 {
                        a = op.apply(&a)?.add(pm_at(j))?;
                        ea = t * ea + cd * zeta_at(j);
                    }
                }
            }
            if unstable {
                let mut b = zero.clone();
                let mut eb = 0.0;
                for j in (t0..=s + 2 * kk).rev() {
                    b = op.apply_inverse(&pn_at(j).add(&b)?)?;
                    eb = t * (cd * zeta_at(j) + eb);
                    if j <= t1 {
                        b_part[(j - t0) as usize] = b.clone();
                        err_part[(j - t0) as usize] += eb;
                    }
                }
            }
            for (a, b) in a_part.into_iter().zip(b_part) {
                values.push(a.sub(&b)?);
            }
            errors.extend(err_part);
            s += block;
        }

        let mut inc: f64 = 0.0;
        for (offset, v) in values.iter().enumerate() {
            let i = lo + offset as i64;
            let d = match &prev {
                Some(level) => v.distance(level.get(i), norm)?,
                None => v.norm(norm),
            };
            inc = inc.max(d);
        }
        if !inc.is_finite() {
            return Err(Error::Overflow(format!("Picard level {n}")));
        }
        let level = Level { lo, values, errors };
        trace.values.push(level.get(0).clone());
        trace.sup_increments.push(inc);
        prev = Some(level);
    }
    let level = prev.expect("depth >= 1");
    let h = level.get(0).clone();
    Ok((h, level.error(0) + picard_error, trace))
}
