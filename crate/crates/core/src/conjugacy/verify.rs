use serde::{Deserialize, Serialize};

use super::{ConjugacyMap, Direction};
use crate::error::{Error, Result};
use crate::operator::GhOperator;
use crate::perturbation::apply_s;
use crate::state::StateVector;

/// Floating-point allowance added to every certified bound: a few hundred
/// ulps of the largest vector involved, times the number of series terms.
fn roundoff(map: &ConjugacyMap, scale: f64) -> f64 {
    let ops = (map.terms() as f64 + 1.0) * (map.depth() as f64 + 1.0) + 16.0;
    64.0 * f64::EPSILON * ops * (1.0 + scale)
}

/// Modulus of continuity `δ ↦ min(C δ^θ, 2 ‖h‖_∞)` for `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderModulus {
    pub constant: f64,
    pub theta: f64,
    /// Certified `‖h‖_∞`.
    pub sup_bound: f64,
}

impl HolderModulus {
    /// Bound on `‖h(a) - h(b)‖` when `‖a - b‖ <= delta`.
    pub fn eval(&self, delta: f64) -> f64 {
        let holder = if self.constant.is_finite() {
            self.constant * delta.powf(self.theta)
        } else {
            f64::INFINITY
        };
        holder.min(2.0 * self.sup_bound)
    }
}

/// `‖P_M T P_N v‖`, zero exactly when `v ∈ Y = M + T^{-1}(N)`.
pub fn y_membership_residual(op: &GhOperator, v: &StateVector) -> Result<f64> {
    let w = op.project_stable(&op.apply(&op.project_unstable(v)?)?)?;
    Ok(w.norm(op.norm_kind()))
}

/// `Ψ(φ)(x) = φ(R x) - T φ(x)`.
pub fn psi_apply(
    op: &GhOperator,
    r_forward: impl Fn(&StateVector) -> Result<StateVector>,
    phi: impl Fn(&StateVector) -> Result<StateVector>,
    x: &StateVector,
) -> Result<StateVector> {
    phi(&r_forward(x)?)?.sub(&op.apply(&phi(x)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub point_id: usize,
    pub residual: f64,
    pub certified_bound: f64,
    pub y_membership_residual: f64,
}

/// Residuals of one identity over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub identity: String,
    pub max_residual: f64,
    /// Largest per-point certified bound.
    pub certified_bound: f64,
    pub n_samples: usize,
    /// Number of points whose residual exceeds its own bound.
    pub n_exceeding: usize,
    pub max_y_membership_residual: f64,
    pub passed: bool,
    #[serde(skip)]
    pub per_point: Vec<PointResidual>,
}

impl VerificationReport {
    fn from_points(identity: &str, per_point: Vec<PointResidual>) -> Self {
        let max = |f: fn(&PointResidual) -> f64| per_point.iter().map(f).fold(0.0, f64::max);
        let n_exceeding = per_point
            .iter()
            .filter(|p| !(p.residual <= p.certified_bound))
            .count();
        VerificationReport {
            identity: identity.to_string(),
            max_residual: max(|p| p.residual),
            certified_bound: max(|p| p.certified_bound),
            n_samples: per_point.len(),
            n_exceeding,
            max_y_membership_residual: max(|p| p.y_membership_residual),
            passed: n_exceeding == 0,
            per_point,
        }
    }
}

/// Checks `H ∘ T = S ∘ H` (forward map) or `H' ∘ S = T ∘ H'` (backward map)
/// on `samples`.
///
/// Bounds: `e(Tx) + (‖T‖ + Lip β) e(x)` forward, `e'(Sx) + ‖T‖ e'(x)`
/// backward, where `e` is the per-point certified evaluation error.
pub fn verify_conjugacy(map: &ConjugacyMap, samples: &[StateVector]) -> Result<VerificationReport> {
    let op = map.op();
    let beta = map.beta();
    let kind = op.norm_kind();
    let norm_t = op.restriction_norms().norm_t;
    let mut points = Vec::with_capacity(samples.len());
    for (id, x) in samples.iter().enumerate() {
        let hx = map.eval_homeomorphism(x)?;
        let (residual, bound, scale) = match map.direction() {
            Direction::Forward => {
                let tx = op.apply(x)?;
                let htx = map.eval_homeomorphism(&tx)?;
                let s_hx = apply_s(op, beta, &hx.value)?;
                let r = htx.value.distance(&s_hx, kind)?;
                let b = htx.error_bound + (norm_t + beta.lip_bound()) * hx.error_bound;
                (r, b, htx.value.norm(kind).max(s_hx.norm(kind)))
            }
            Direction::Backward => {
                let sx = apply_s(op, beta, x)?;
                let hsx = map.eval_homeomorphism(&sx)?;
                let t_hx = op.apply(&hx.value)?;
                let r = hsx.value.distance(&t_hx, kind)?;
                let b = hsx.error_bound + norm_t * hx.error_bound;
                (r, b, hsx.value.norm(kind).max(t_hx.norm(kind)))
            }
        };
        let h_only = hx.value.sub(x)?;
        let bound = if residual == 0.0 {
            bound
        } else {
            bound + roundoff(map, scale)
        };
        points.push(PointResidual {
            point_id: id,
            residual,
            certified_bound: bound,
            y_membership_residual: y_membership_residual(op, &h_only)?,
        });
    }
    let name = match map.direction() {
        Direction::Forward => "H o T = S o H",
        Direction::Backward => "H' o S = T o H'",
    };
    Ok(VerificationReport::from_points(name, points))
}

/// Both inverse identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    /// `H' ∘ H = I`.
    pub backward_after_forward: VerificationReport,
    /// `H ∘ H' = I`.
    pub forward_after_backward: VerificationReport,
}

impl InverseReport {
    pub fn passed(&self) -> bool {
        self.backward_after_forward.passed && self.forward_after_backward.passed
    }
}

/// Checks `H' ∘ H = I` and `H ∘ H' = I` on `samples`.
///
/// Evaluating `H'` at the computed `H(x)` (error `e`) costs
/// `e + ω'(e)` on top of `e'`, with `ω'` the modulus of `h'`; symmetrically
/// for `H ∘ H'` with the modulus `ω` of `h`.
pub fn verify_inverse(
    fwd: &ConjugacyMap,
    bwd: &ConjugacyMap,
    samples: &[StateVector],
    fwd_modulus: &HolderModulus,
    bwd_modulus: &HolderModulus,
) -> Result<InverseReport> {
    if fwd.direction() != Direction::Forward || bwd.direction() != Direction::Backward {
        return Err(Error::InvalidParameter {
            name: "direction",
            reason: "verify_inverse takes a forward and a backward map".into(),
        });
    }
    let (a, b) = (fwd.beta(), bwd.beta());
    if a.sup_bound() != b.sup_bound() || a.lip_bound() != b.lip_bound() || a.label() != b.label() {
        return Err(Error::InvalidParameter {
            name: "bwd",
            reason: "maps were built from different perturbations".into(),
        });
    }
    let op = fwd.op();
    let kind = op.norm_kind();
    let mut after_fwd = Vec::with_capacity(samples.len());
    let mut after_bwd = Vec::with_capacity(samples.len());
    for (id, x) in samples.iter().enumerate() {
        let hx = fwd.eval_homeomorphism(x)?;
        let back = bwd.eval_homeomorphism(&hx.value)?;
        let r = back.value.distance(x, kind)?;
        let e = hx.error_bound;
        let bound = back.error_bound + e + bwd_modulus.eval(e);
        let bound = if r == 0.0 {
            bound
        } else {
            bound + roundoff(fwd, back.value.norm(kind))
        };
        after_fwd.push(PointResidual {
            point_id: id,
            residual: r,
            certified_bound: bound,
            y_membership_residual: y_membership_residual(op, &hx.value.sub(x)?)?,
        });

        let hpx = bwd.eval_homeomorphism(x)?;
        let forth = fwd.eval_homeomorphism(&hpx.value)?;
        let r = forth.value.distance(x, kind)?;
        let e = hpx.error_bound;
        let bound = forth.error_bound + e + fwd_modulus.eval(e);
        let bound = if r == 0.0 {
            bound
        } else {
            bound + roundoff(fwd, forth.value.norm(kind))
        };
        after_bwd.push(PointResidual {
            point_id: id,
            residual: r,
            certified_bound: bound,
            y_membership_residual: y_membership_residual(op, &hpx.value.sub(x)?)?,
        });
    }
    Ok(InverseReport {
        backward_after_forward: VerificationReport::from_points("H' o H = I", after_fwd),
        forward_after_backward: VerificationReport::from_points("H o H' = I", after_bwd),
    })
}
