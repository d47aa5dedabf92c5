//! Certified conjugacies between `T` and `S = T + β`.
//!
//! The forward map `h` solves `H ∘ T = S ∘ H` with `H = I + h` and is a
//! fixed point of `φ ↦ Ψ_1^{-1}(β ∘ (I + φ))`, where
//! `Ψ_1(φ) = φ ∘ T - T ∘ φ`. The backward map `h'` solves `H' ∘ S = T ∘ H'`
//! and is given directly by `h' = Ψ_2^{-1}(-β)` with `Ψ_2(φ) = φ ∘ S - T ∘ φ`.
//! Both maps take values in `Y = M + T^{-1}(N)` and are evaluated lazily,
//! point by point, with certified error bounds.

mod forward;
mod series;
mod verify;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

pub use forward::PicardTrace;
pub use series::{
    psi_inverse_eval, psi_inverse_eval_terms, series_terms, tail_bound, LinearOrbit, OrbitMap,
    PerturbedOrbit, SeriesPolicy, SeriesValue,
};
pub use verify::{
    psi_apply, verify_conjugacy, verify_inverse, y_membership_residual, HolderModulus,
    InverseReport, PointResidual, VerificationReport,
};

use crate::error::{Error, Result};
use crate::operator::{admissible_eps, GhOperator};
use crate::perturbation::{s_inverse_rate, Perturbation};
use crate::state::{QuantKey, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `h` with `H ∘ T = S ∘ H`.
    Forward,
    /// `h'` with `H' ∘ S = T ∘ H'`.
    Backward,
}

/// A value together with a certified bound on its distance from the exact one.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: StateVector,
    pub error_bound: f64,
}

/// A lazily evaluated `h` or `h'`.
pub struct ConjugacyMap {
    op: GhOperator,
    beta: Perturbation,
    neg_beta: Perturbation,
    direction: Direction,
    policy: SeriesPolicy,
    picard_tol: f64,
    terms: usize,
    depth: usize,
    q: f64,
    picard_error: f64,
    inner_tol: f64,
    memo: DashMap<(usize, QuantKey), Evaluation>,
}

impl std::fmt::Debug for ConjugacyMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConjugacyMap")
            .field("direction", &self.direction)
            .field("beta", &self.beta)
            .field("policy", &self.policy)
            .field("terms", &self.terms)
            .field("depth", &self.depth)
            .field("q", &self.q)
            .finish()
    }
}

fn check_s_invertible(op: &GhOperator, beta: &Perturbation) -> Result<()> {
    let rate = s_inverse_rate(op, beta);
    if rate < 1.0 {
        Ok(())
    } else {
        Err(Error::ContractionViolated(format!(
            "Lip(beta) * |T^-1| = {} * {} = {rate} must be < 1",
            beta.lip_bound(),
            op.restriction_norms().norm_tinv
        )))
    }
}

/// Builds the forward map `h`, `H ∘ T = S ∘ H`.
///
/// Picard depth `n` is the smallest with `q^n ‖h‖_∞ <= picard_tol`, where
/// `q = c d (1+t)/(1-t) Lip(β)` and `‖h‖_∞ <= c d (1+t)/(1-t) ‖β‖_∞`. The
/// certified error per point is at most `tol Σ_{i<n} q^i + q^n ‖h‖_∞`; the
/// reported bound is the sharper value propagated along the orbit.
pub fn solve_h(
    op: &GhOperator,
    beta: &Perturbation,
    gamma: f64,
    policy: &SeriesPolicy,
    picard_tol: f64,
) -> Result<ConjugacyMap> {
    policy.validate()?;
    if !(picard_tol > 0.0 && picard_tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "picard_tol",
            reason: format!("must be positive and finite, got {picard_tol}"),
        });
    }
    let constants = op.constants();
    let eps = admissible_eps(&constants, gamma)?;
    if beta.lip_bound() > eps {
        return Err(Error::EpsExceeded {
            lip: beta.lip_bound(),
            eps,
        });
    }
    check_s_invertible(op, beta)?;

    let gain = constants.series_gain();
    let q = gain * beta.lip_bound();
    let h_bound = gain * beta.sup_bound();
    let terms = series_terms(&constants, beta.sup_bound(), policy.tol, policy.k_cap)?;

    let mut depth = 0usize;
    let mut picard_err = h_bound;
    while picard_err > picard_tol || (depth == 0 && h_bound > 0.0) {
        depth += 1;
        picard_err = q.powi(depth as i32) * h_bound;
        if depth > policy.k_cap {
            return Err(Error::IterationCap {
                cap: policy.k_cap,
                last_increment: picard_err,
            });
        }
    }
    let picard_error = if h_bound == 0.0 { 0.0 } else { picard_err };

    Ok(ConjugacyMap {
        op: op.clone(),
        beta: beta.clone(),
        neg_beta: beta.negated(),
        direction: Direction::Forward,
        policy: *policy,
        picard_tol,
        terms,
        depth,
        q,
        picard_error,
        inner_tol: 0.0,
        memo: DashMap::new(),
    })
}

/// Builds the backward map `h'`, `H' ∘ S = T ∘ H'`, evaluated directly by
/// the series with `R = S`.
pub fn solve_h_prime(
    op: &GhOperator,
    beta: &Perturbation,
    policy: &SeriesPolicy,
) -> Result<ConjugacyMap> {
    policy.validate()?;
    check_s_invertible(op, beta)?;
    let constants = op.constants();
    let terms = series_terms(&constants, beta.sup_bound(), policy.tol, policy.k_cap)?;

    // Spread the tolerance over the propagated S^{-1} errors.
    let lambda = PerturbedOrbit { op, beta, tol: 0.0 }.inverse_lipschitz();
    let weights = series::stable_power_norms(op, terms);
    let mut growth = 0.0;
    let mut amplification = 0.0;
    for w in &weights {
        growth = 1.0 + lambda * growth;
        amplification += w * beta.lip_bound() * growth;
    }
    let inner_tol = if amplification.is_finite() && amplification > 1.0 {
        policy.tol / amplification
    } else {
        policy.tol
    };

    Ok(ConjugacyMap {
        op: op.clone(),
        beta: beta.clone(),
        neg_beta: beta.negated(),
        direction: Direction::Backward,
        policy: *policy,
        picard_tol: 0.0,
        terms,
        depth: 0,
        q: constants.series_gain() * beta.lip_bound(),
        picard_error: 0.0,
        inner_tol,
        memo: DashMap::new(),
    })
}

impl ConjugacyMap {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn op(&self) -> &GhOperator {
        &self.op
    }

    pub fn beta(&self) -> &Perturbation {
        &self.beta
    }

    pub fn policy(&self) -> SeriesPolicy {
        self.policy
    }

    pub fn picard_tol(&self) -> f64 {
        self.picard_tol
    }

    /// Series cutoff `K`.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Picard depth (zero for the backward map).
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `c d (1+t)/(1-t) Lip(β)`.
    pub fn contraction_rate(&self) -> f64 {
        self.q
    }

    /// Certified `‖h‖_∞ <= c d (1+t)/(1-t) ‖β‖_∞`.
    pub fn sup_bound(&self) -> f64 {
        self.op.constants().series_gain() * self.beta.sup_bound()
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// `h(x)` or `h'(x)`.
    pub fn eval(&self, x: &StateVector) -> Result<Evaluation> {
        self.op.check_vector(x)?;
        if self.beta.is_trivial() {
            return Ok(Evaluation {
                value: x.zeros_like(),
                error_bound: 0.0,
            });
        }
        let key = (self.depth, x.quantized_key());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let evaluation = match self.direction {
            Direction::Forward => {
                let (value, error_bound, _) = forward::march(&self.op, &self.beta, x, self.plan())?;
                Evaluation { value, error_bound }
            }
            Direction::Backward => {
                let orbit = PerturbedOrbit {
                    op: &self.op,
                    beta: &self.beta,
                    tol: self.inner_tol,
                };
                let s = psi_inverse_eval_terms(&self.op, &orbit, &self.neg_beta, x, self.terms)?;
                Evaluation {
                    value: s.value,
                    error_bound: s.error_bound,
                }
            }
        };
        self.memo.entry(key).or_insert_with(|| evaluation.clone());
        Ok(evaluation)
    }

    /// `x + h(x)` (or `x + h'(x)`) with the same error bound.
    pub fn eval_homeomorphism(&self, x: &StateVector) -> Result<Evaluation> {
        let e = self.eval(x)?;
        Ok(Evaluation {
            value: x.add(&e.value)?,
            error_bound: e.error_bound,
        })
    }

    /// The Picard iterates at `x` (forward map only).
    pub fn picard_trace(&self, x: &StateVector) -> Result<PicardTrace> {
        if self.direction != Direction::Forward {
            return Err(Error::InvalidParameter {
                name: "direction",
                reason: "Picard trace exists for the forward map only".into(),
            });
        }
        let (_, _, trace) = forward::march(&self.op, &self.beta, x, self.plan())?;
        Ok(trace)
    }

    fn plan(&self) -> forward::Plan {
        forward::Plan {
            terms: self.terms,
            depth: self.depth,
            q: self.q,
            tail: tail_bound(&self.op.constants(), self.beta.sup_bound(), self.terms),
            picard_error: self.picard_error,
        }
    }
}

/// `H(x) = x + h(x)` for a forward map.
#[allow(non_snake_case)]
pub fn eval_H(map: &ConjugacyMap, x: &StateVector) -> Result<Evaluation> {
    expect_direction(map, Direction::Forward)?;
    map.eval_homeomorphism(x)
}

/// `H'(x) = x + h'(x)` for a backward map.
#[allow(non_snake_case)]
pub fn eval_H_prime(map: &ConjugacyMap, x: &StateVector) -> Result<Evaluation> {
    expect_direction(map, Direction::Backward)?;
    map.eval_homeomorphism(x)
}

fn expect_direction(map: &ConjugacyMap, want: Direction) -> Result<()> {
    if map.direction == want {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "direction",
            reason: format!("expected a {want:?} map, got {:?}", map.direction),
        })
    }
}
