//! Local linearization near a generalized hyperbolic fixed point, and Hölder
//! certificates for the conjugacies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conjugacy::{
    solve_h, solve_h_prime, ConjugacyMap, Evaluation, HolderModulus, SeriesPolicy,
};
use crate::error::{Error, Result};
use crate::operator::{admissible_eps, GhOperator};
use crate::perturbation::{cutoff, CutoffProfile, MapFn, Perturbation};
use crate::state::StateVector;

/// Largest admissible Hölder exponent,
/// `min(-ln ‖T^{-1}|_N‖ / ln ‖T‖, -ln ‖T|_M‖ / ln ‖T^{-1}‖)` capped at 1.
/// A trivial `M` or `N` drops its term.
pub fn theta_bound(op: &GhOperator) -> Result<f64> {
    let n = op.restriction_norms();
    let m_trivial = op.stable_is_trivial();
    let n_trivial = op.unstable_is_trivial();
    if (!m_trivial && !(n.norm_t_on_m < 1.0)) || (!n_trivial && !(n.norm_tinv_on_n < 1.0)) {
        return Err(Error::NotAdapted {
            norm_t_on_m: n.norm_t_on_m,
            norm_tinv_on_n: n.norm_tinv_on_n,
        });
    }
    let mut theta: f64 = 1.0;
    if !n_trivial && n.norm_t > 1.0 {
        theta = theta.min(-n.norm_tinv_on_n.ln() / n.norm_t.ln());
    }
    if !m_trivial && n.norm_tinv > 1.0 {
        theta = theta.min(-n.norm_t_on_m.ln() / n.norm_tinv.ln());
    }
    Ok(theta)
}

/// `max(‖T|_M‖ ‖T^{-1}‖^θ, ‖T^{-1}|_N‖ ‖T‖^θ)`, which must stay below 1.
pub fn cara_ratio(op: &GhOperator, theta: f64) -> f64 {
    let n = op.restriction_norms();
    let mut r: f64 = 0.0;
    if !op.stable_is_trivial() {
        r = r.max(n.norm_t_on_m * n.norm_tinv.powf(theta));
    }
    if !op.unstable_is_trivial() {
        r = r.max(n.norm_tinv_on_n * n.norm_t.powf(theta));
    }
    r
}

/// Hölder constant `C` of `h'` for a perturbation with `‖β‖_∞, Lip(β) <= ε`:
///
/// `C = 2ε ‖P_M‖ Σ_{k>=0} a^k b^{(k+1)θ} + 2ε ‖P_N‖ Σ_{k>=1} e^k f^{(k-1)θ}`
///
/// with `a = ‖T|_M‖`, `b = ‖T^{-1}‖ / (1 - ‖T^{-1}‖ ε)`, `e = ‖T^{-1}|_N‖`,
/// `f = ‖T‖ + ε`, summed in closed form.
pub fn holder_constant(op: &GhOperator, theta: f64, eps: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("must lie in (0, 1], got {theta}"),
        });
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be finite and non-negative, got {eps}"),
        });
    }
    let n = op.restriction_norms();
    if !(n.norm_tinv * eps < 1.0) {
        return Err(Error::EpsTooLarge {
            ratio: n.norm_tinv * eps,
            which: "|T^-1| eps",
        });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let mut c = 0.0;
    if !op.stable_is_trivial() {
        let b = n.norm_tinv / (1.0 - n.norm_tinv * eps);
        let ratio = n.norm_t_on_m * b.powf(theta);
        if !(ratio < 1.0) {
            return Err(Error::EpsTooLarge {
                ratio,
                which: "|T|_M| (|T^-1| + eps s)^theta",
            });
        }
        c += 2.0 * eps * n.norm_pm * b.powf(theta) / (1.0 - ratio);
    }
    if !op.unstable_is_trivial() {
        let f = n.norm_t + eps;
        let ratio = n.norm_tinv_on_n * f.powf(theta);
        if !(ratio < 1.0) {
            return Err(Error::EpsTooLarge {
                ratio,
                which: "|T^-1|_N| (|T| + eps)^theta",
            });
        }
        c += 2.0 * eps * n.norm_pn * n.norm_tinv_on_n / (1.0 - ratio);
    }
    Ok(c)
}

/// `‖h(x) - h(y)‖ <= constant ‖x - y‖^theta` whenever `‖x - y‖ <= domain_diameter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub theta: f64,
    pub constant: f64,
    pub domain_diameter: f64,
    pub eps: f64,
}

impl HolderCertificate {
    /// Certifies `θ` for perturbations bounded by `eps` on domains of
    /// diameter `domain_diameter < 1`.
    pub fn new(op: &GhOperator, theta: f64, eps: f64, domain_diameter: f64) -> Result<Self> {
        if !(domain_diameter > 0.0 && domain_diameter < 1.0) {
            return Err(Error::InvalidParameter {
                name: "domain_diameter",
                reason: format!("must lie in (0, 1), got {domain_diameter}"),
            });
        }
        let ratio = cara_ratio(op, theta);
        if !(ratio < 1.0) {
            return Err(Error::EpsTooLarge {
                ratio,
                which: "max(|T|_M| |T^-1|^theta, |T^-1|_N| |T|^theta)",
            });
        }
        Ok(HolderCertificate {
            theta,
            constant: holder_constant(op, theta, eps)?,
            domain_diameter,
            eps,
        })
    }

    pub fn modulus(&self, sup_bound: f64) -> HolderModulus {
        HolderModulus {
            constant: self.constant,
            theta: self.theta,
            sup_bound,
        }
    }
}

/// Modulus of continuity for the conjugacies built from `beta`: Hölder at
/// half the admissible exponent when that can be certified, otherwise only
/// the trivial bound `2 ‖h‖_∞`.
pub fn holder_modulus(op: &GhOperator, beta: &Perturbation) -> HolderModulus {
    let sup_bound = op.constants().series_gain() * beta.sup_bound();
    let eps = beta.sup_bound().max(beta.lip_bound());
    let constant = theta_bound(op).ok().and_then(|theta| {
        holder_constant(op, theta / 2.0, eps)
            .ok()
            .map(|c| (theta / 2.0, c))
    });
    match constant {
        Some((theta, constant)) => HolderModulus {
            constant,
            theta,
            sup_bound,
        },
        None => HolderModulus {
            constant: f64::INFINITY,
            theta: 1.0,
            sup_bound,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub theta: f64,
    pub constant: f64,
    /// Largest `‖h(x) - h(x')‖ / ‖x - x'‖^θ`.
    pub max_ratio: f64,
    /// Largest allowance `C + (e(x) + e(x')) / ‖x - x'‖^θ` over the pairs.
    pub max_allowance: f64,
    pub n_pairs: usize,
    pub n_exceeding: usize,
    pub passed: bool,
}

/// Empirical Hölder quotients of `map` over `pairs`, each compared with
/// `C` inflated by the certified evaluation errors.
pub fn empirical_holder(
    map: &ConjugacyMap,
    cert: &HolderCertificate,
    pairs: &[(StateVector, StateVector)],
) -> Result<HolderReport> {
    let kind = map.op().norm_kind();
    let mut max_ratio: f64 = 0.0;
    let mut max_allowance: f64 = 0.0;
    let mut n_exceeding = 0;
    for (x, y) in pairs {
        let dist = x.distance(y, kind)?;
        if dist > cert.domain_diameter {
            return Err(Error::InvalidParameter {
                name: "pairs",
                reason: format!(
                    "pair distance {dist} exceeds the domain diameter {}",
                    cert.domain_diameter
                ),
            });
        }
        if dist == 0.0 {
            continue;
        }
        let hx = map.eval(x)?;
        let hy = map.eval(y)?;
        let scale = dist.powf(cert.theta);
        let ratio = hx.value.distance(&hy.value, kind)? / scale;
        let allowance = cert.constant + (hx.error_bound + hy.error_bound) / scale;
        if !(ratio <= allowance) {
            n_exceeding += 1;
        }
        max_ratio = max_ratio.max(ratio);
        max_allowance = max_allowance.max(allowance);
    }
    Ok(HolderReport {
        theta: cert.theta,
        constant: cert.constant,
        max_ratio,
        max_allowance,
        n_pairs: pairs.len(),
        n_exceeding,
        passed: n_exceeding == 0,
    })
}

/// Certified `r ↦ Lip(α|_{B(0, 2r)})` for the nonlinearity `α = G - T`.
pub type LipschitzOnBall = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A map `F` with fixed point `p` whose derivative there is `dfp`.
#[derive(Clone)]
pub struct LinearizationProblem {
    pub f: MapFn,
    pub p: StateVector,
    pub dfp: GhOperator,
    pub gamma: f64,
    /// Starting cutoff radius; halved until the nonlinearity is small enough.
    pub cutoff_r: f64,
    pub theta: Option<f64>,
    pub alpha_lip: LipschitzOnBall,
    /// Smallest radius tried before giving up.
    pub min_radius: f64,
}

impl std::fmt::Debug for LinearizationProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearizationProblem")
            .field("p", &self.p)
            .field("gamma", &self.gamma)
            .field("cutoff_r", &self.cutoff_r)
            .field("theta", &self.theta)
            .field("min_radius", &self.min_radius)
            .finish()
    }
}

impl LinearizationProblem {
    pub fn new(
        f: MapFn,
        p: StateVector,
        dfp: GhOperator,
        gamma: f64,
        cutoff_r: f64,
        alpha_lip: LipschitzOnBall,
    ) -> Self {
        LinearizationProblem {
            f,
            p,
            dfp,
            gamma,
            cutoff_r,
            theta: None,
            alpha_lip,
            min_radius: 1e-12,
        }
    }
}

/// Output of [`linearize`].
#[derive(Debug)]
pub struct Linearization {
    pub forward: ConjugacyMap,
    pub backward: ConjugacyMap,
    pub p: StateVector,
    /// Radius of the ball around `p` on which the conjugacy holds.
    pub u_radius: f64,
    pub eps: f64,
    pub gamma: f64,
    pub alpha_lip: f64,
    pub cert: HolderCertificate,
}

impl Linearization {
    /// `K(y) = H'(y - p)`, which satisfies `K ∘ F = DF_p ∘ K` for
    /// `‖y - p‖ <= u_radius`.
    pub fn conjugacy(&self, y: &StateVector) -> Result<Evaluation> {
        self.backward.eval_homeomorphism(&y.sub(&self.p)?)
    }

    /// `‖K(F(y)) - DF_p K(y)‖` and its certified bound.
    pub fn residual(&self, f: &MapFn, y: &StateVector) -> Result<(f64, f64)> {
        let op = self.backward.op();
        let kind = op.norm_kind();
        let ky = self.conjugacy(y)?;
        let kfy = self.conjugacy(&f(y))?;
        let t_ky = op.apply(&ky.value)?;
        let r = kfy.value.distance(&t_ky, kind)?;
        let scale = kfy.value.norm(kind).max(t_ky.norm(kind)) + self.p.norm(kind);
        let roundoff = 64.0 * f64::EPSILON * (self.backward.terms() as f64 + 16.0) * (1.0 + scale);
        Ok((
            r,
            kfy.error_bound + op.restriction_norms().norm_t * ky.error_bound + roundoff,
        ))
    }
}

/// Conjugates `F` to `DF_p` near `p`.
///
/// With `G(x) = F(x + p) - p` and `α = G - DF_p`, picks
/// `ε = min(admissible ε, 0.9 / ‖T^{-1}‖)`, halves the radius until
/// `3 Lip(α|_{B(0,2r)}) <= ε`, `2 r Lip <= ε` and `2r < 1`, cuts `α` off to
/// `β`, and solves both conjugacy equations for `S = T + β`.
pub fn linearize(
    problem: &LinearizationProblem,
    policy: &SeriesPolicy,
    picard_tol: f64,
) -> Result<Linearization> {
    let op = &problem.dfp;
    let kind = op.norm_kind();
    op.check_vector(&problem.p)?;
    let defect = (problem.f)(&problem.p).distance(&problem.p, kind)?;
    if !(defect <= 1e-10) {
        return Err(Error::NotFixedPoint { defect });
    }
    if !(problem.cutoff_r > 0.0 && problem.cutoff_r.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "cutoff_r",
            reason: format!("must be positive and finite, got {}", problem.cutoff_r),
        });
    }
    let eps =
        admissible_eps(&op.constants(), problem.gamma)?.min(0.9 / op.restriction_norms().norm_tinv);

    let mut r = problem.cutoff_r;
    let lip = loop {
        let lip = (problem.alpha_lip)(r);
        if !(lip >= 0.0 && lip.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_lip",
                reason: format!("Lipschitz bound at r = {r} is {lip}"),
            });
        }
        if 3.0 * lip <= eps && 2.0 * r * lip <= eps && 2.0 * r < 1.0 {
            break lip;
        }
        r /= 2.0;
        if r < problem.min_radius {
            return Err(Error::CutoffUnderflow {
                r,
                min: problem.min_radius,
            });
        }
    };

    let f = problem.f.clone();
    let p = problem.p.clone();
    let t = op.clone();
    let alpha: MapFn = Arc::new(move |x: &StateVector| {
        let shifted = x.add(&p).expect("backend checked");
        let g = f(&shifted).sub(&p).expect("backend checked");
        g.sub(&t.apply(x).expect("backend checked"))
            .expect("backend checked")
    });
    let beta = cutoff(alpha, lip, CutoffProfile::new(r)?, kind)?;
    let forward = solve_h(op, &beta, problem.gamma, policy, picard_tol)?;
    let backward = solve_h_prime(op, &beta, policy)?;

    let theta = match problem.theta {
        Some(theta) => theta,
        None => theta_bound(op)? / 2.0,
    };
    let cert = HolderCertificate::new(op, theta, eps, 2.0 * r)?;
    Ok(Linearization {
        forward,
        backward,
        p: problem.p.clone(),
        u_radius: r,
        eps,
        gamma: problem.gamma,
        alpha_lip: lip,
        cert,
    })
}
