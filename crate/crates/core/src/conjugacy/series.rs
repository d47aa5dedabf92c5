use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Constants, GhOperator};
use crate::perturbation::{apply_s, s_inverse_rate, solve_s_inverse, Perturbation};
use crate::state::StateVector;

/// Truncation policy for the inverse series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPolicy {
    /// Target for the certified truncation error of one evaluation.
    pub tol: f64,
    /// Hard cap on the number of series terms.
    pub k_cap: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        SeriesPolicy {
            tol: 1e-10,
            k_cap: 10_000,
        }
    }
}

impl SeriesPolicy {
    pub fn new(tol: f64, k_cap: usize) -> Result<Self> {
        let p = SeriesPolicy { tol, k_cap };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(tol: f64) -> Result<Self> {
        SeriesPolicy::new(tol, SeriesPolicy::default().k_cap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive and finite, got {}", self.tol),
            });
        }
        if self.k_cap == 0 {
            return Err(Error::InvalidParameter {
                name: "k_cap",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// `c d A t^{K+1} (1 + t) / (1 - t)`: combined tail of both series when the
/// stable one keeps `k = 0..=K` and the unstable one `k = 1..=K+1`.
pub fn tail_bound(constants: &Constants, amplitude: f64, k: usize) -> f64 {
    let Constants { c, t, d, .. } = *constants;
    if amplitude == 0.0 {
        return 0.0;
    }
    c * d * amplitude * t.powf(k as f64 + 1.0) * (1.0 + t) / (1.0 - t)
}

/// Smallest `K` whose [`tail_bound`] is at most `tol`.
pub fn series_terms(constants: &Constants, amplitude: f64, tol: f64, cap: usize) -> Result<usize> {
    if tail_bound(constants, amplitude, 0) <= tol {
        return Ok(0);
    }
    let lead = tail_bound(constants, amplitude, 0) / constants.t;
    let guess = ((tol / lead).ln() / constants.t.ln()).ceil() - 1.0;
    let mut k = if guess.is_finite() && guess > 0.0 {
        guess as usize
    } else {
        0
    };
    while k > 0 && tail_bound(constants, amplitude, k - 1) <= tol {
        k -= 1;
    }
    while tail_bound(constants, amplitude, k) > tol {
        k += 1;
        if k > cap {
            break;
        }
    }
    if k > cap {
        return Err(Error::SeriesCap { needed: k, cap });
    }
    Ok(k)
}

/// The map `R` whose orbit feeds the inverse series.
pub trait OrbitMap {
    fn step_forward(&self, x: &StateVector) -> Result<StateVector>;
    /// An approximate preimage together with a bound on its distance from the
    /// exact one.
    fn step_inverse(&self, x: &StateVector) -> Result<(StateVector, f64)>;
    /// Lipschitz bound of the exact inverse, used to propagate step errors.
    fn inverse_lipschitz(&self) -> f64;
}

/// `R = T`.
pub struct LinearOrbit<'a>(pub &'a GhOperator);

impl OrbitMap for LinearOrbit<'_> {
    fn step_forward(&self, x: &StateVector) -> Result<StateVector> {
        self.0.apply(x)
    }

    fn step_inverse(&self, x: &StateVector) -> Result<(StateVector, f64)> {
        Ok((self.0.apply_inverse(x)?, 0.0))
    }

    fn inverse_lipschitz(&self) -> f64 {
        self.0.restriction_norms().norm_tinv
    }
}

/// `R = S = T + β`, inverted by Picard iteration.
pub struct PerturbedOrbit<'a> {
    pub op: &'a GhOperator,
    pub beta: &'a Perturbation,
    /// Tolerance handed to each `S^{-1}` solve.
    pub tol: f64,
}

impl OrbitMap for PerturbedOrbit<'_> {
    fn step_forward(&self, x: &StateVector) -> Result<StateVector> {
        apply_s(self.op, self.beta, x)
    }

    fn step_inverse(&self, x: &StateVector) -> Result<(StateVector, f64)> {
        // Iterates cannot settle below the rounding level of the point.
        let floor = 1e-13 * (1.0 + x.norm(self.op.norm_kind()));
        let r = solve_s_inverse(self.op, self.beta, x, self.tol.max(floor))?;
        Ok((r.x, r.error_bound))
    }

    fn inverse_lipschitz(&self) -> f64 {
        let norm_tinv = self.op.restriction_norms().norm_tinv;
        norm_tinv / (1.0 - s_inverse_rate(self.op, self.beta))
    }
}

/// A series value with its certified error.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesValue {
    pub value: StateVector,
    /// Truncation tail plus propagated orbit errors.
    pub error_bound: f64,
    pub tail_bound: f64,
    /// Index `K` of the last stable term.
    pub terms: usize,
}

/// `Ψ^{-1}(α)(x) = Σ_{k>=0} T^k P_M α(R^{-k-1} x) - Σ_{k>=1} T^{-k} P_N α(R^{k-1} x)`,
/// truncated at the smallest `K` whose tail bound is within `policy.tol`.
pub fn psi_inverse_eval(
    op: &GhOperator,
    r: &dyn OrbitMap,
    alpha: &Perturbation,
    x: &StateVector,
    policy: &SeriesPolicy,
) -> Result<SeriesValue> {
    policy.validate()?;
    let k = series_terms(&op.constants(), alpha.sup_bound(), policy.tol, policy.k_cap)?;
    psi_inverse_eval_terms(op, r, alpha, x, k)
}

fn check_orbit_point(v: &StateVector, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Overflow(format!("following the {what} orbit")))
    }
}

/// [`psi_inverse_eval`] with an explicit cutoff `K`.
pub fn psi_inverse_eval_terms(
    op: &GhOperator,
    r: &dyn OrbitMap,
    alpha: &Perturbation,
    x: &StateVector,
    k: usize,
) -> Result<SeriesValue> {
    op.check_vector(x)?;
    let tail = tail_bound(&op.constants(), alpha.sup_bound(), k);
    if alpha.is_trivial() {
        return Ok(SeriesValue {
            value: x.zeros_like(),
            error_bound: 0.0,
            tail_bound: 0.0,
            terms: k,
        });
    }

    let mut value = op.zero_vector();
    let mut propagated = 0.0;

    if !op.stable_is_trivial() {
        // z_j = R^{-j} x with accumulated error e_j, j = 1..=K+1
        let lambda = r.inverse_lipschitz();
        let mut orbit = Vec::with_capacity(k + 1);
        let mut errors = Vec::with_capacity(k + 1);
        let mut z = x.clone();
        let mut e = 0.0;
        for _ in 0..=k {
            let (next, step_err) = r.step_inverse(&z)?;
            check_orbit_point(&next, "backward")?;
            e = step_err + lambda * e;
            z = next;
            orbit.push(z.clone());
            errors.push(e);
        }
        let mut acc = op.project_stable(&alpha.eval(&orbit[k]))?;
        for j in (0..k).rev() {
            acc = op
                .apply(&acc)?
                .add(&op.project_stable(&alpha.eval(&orbit[j]))?)?;
        }
        value = acc;

        if errors.iter().any(|&e| e > 0.0) {
            let weights = stable_power_norms(op, k);
            propagated = weights
                .iter()
                .zip(&errors)
                .map(|(w, e)| w * alpha.lip_bound() * e)
                .sum();
            if !propagated.is_finite() {
                propagated = f64::INFINITY;
            }
        }
    }

    if !op.unstable_is_trivial() {
        // y_j = R^j x, j = 0..=K
        let mut orbit = Vec::with_capacity(k + 1);
        let mut y = x.clone();
        orbit.push(y.clone());
        for _ in 0..k {
            y = r.step_forward(&y)?;
            check_orbit_point(&y, "forward")?;
            orbit.push(y.clone());
        }
        let mut acc = op.zero_vector();
        for j in (0..=k).rev() {
            acc = op.apply_inverse(&op.project_unstable(&alpha.eval(&orbit[j]))?.add(&acc)?)?;
        }
        value = value.sub(&acc)?;
    }

    check_orbit_point(&value, "series")?;
    Ok(SeriesValue {
        value,
        error_bound: tail + propagated,
        tail_bound: tail,
        terms: k,
    })
}

/// `‖T^k P_M‖` for `k = 0..=K`, exact for shifts, upper bounds for matrices.
pub(crate) fn stable_power_norms(op: &GhOperator, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(op.restriction_norms().norm_pm);
    out.extend(op.log_power_norms(k).into_iter().map(|(lm, _)| lm.exp()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{make_builtin, BuiltinPerturbation};
    use crate::state::NormKind;
    use nalgebra::{DMatrix, DVector};

    fn constant(v: Vec<f64>) -> Perturbation {
        make_builtin(
            &BuiltinPerturbation::Constant {
                value: StateVector::dense(v),
            },
            NormKind::Sup,
        )
        .unwrap()
    }

    #[test]
    fn terms_meet_tolerance_minimally() {
        let k = Constants {
            c: 1.0,
            t: 0.5,
            d: 1.0,
            n_max: 1,
        };
        for tol in [1e-3, 1e-8, 1e-12] {
            let n = series_terms(&k, 1.0, tol, 10_000).unwrap();
            assert!(tail_bound(&k, 1.0, n) <= tol);
            assert!(n == 0 || tail_bound(&k, 1.0, n - 1) > tol);
        }
        assert_eq!(series_terms(&k, 0.0, 1e-12, 10).unwrap(), 0);
        assert!(matches!(
            series_terms(&k, 1.0, 1e-300, 10),
            Err(Error::SeriesCap { cap: 10, .. })
        ));
    }

    #[test]
    fn geometric_closed_forms() {
        let op =
            GhOperator::matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 3.0]))).unwrap();
        let policy = SeriesPolicy::with_tol(1e-12).unwrap();
        let alpha = constant(vec![1.0, 1.0]);
        let v = psi_inverse_eval(
            &op,
            &LinearOrbit(&op),
            &alpha,
            &StateVector::dense(vec![0.3, -0.7]),
            &policy,
        )
        .unwrap();
        assert!((v.value.coord(0) - 2.0).abs() <= policy.tol);
        assert!((v.value.coord(1) + 0.5).abs() <= policy.tol);

        let half = GhOperator::matrix(DMatrix::from_element(1, 1, 0.5)).unwrap();
        let v = psi_inverse_eval(
            &half,
            &LinearOrbit(&half),
            &constant(vec![1.0]),
            &StateVector::dense(vec![5.0]),
            &policy,
        )
        .unwrap();
        assert!((v.value.coord(0) - 2.0).abs() <= policy.tol);

        let zero = psi_inverse_eval(
            &op,
            &LinearOrbit(&op),
            &Perturbation::zero(),
            &StateVector::dense(vec![1.0, 1.0]),
            &policy,
        )
        .unwrap();
        assert!(zero.value.is_zero());
    }
}
