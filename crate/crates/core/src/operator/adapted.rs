use crate::error::Result;
use crate::operator::{estimate_constants, Constants, GhOperator};
use crate::state::StateVector;

/// The adapted norm
/// `‖x‖_* = max(sup_n ‖T^n P_M x‖ / t^n, sup_n ‖T^{-n} P_N x‖ / t^n)`.
///
/// Under it `‖T y‖_* <= t ‖y‖_*` on `M` and `‖T^{-1} z‖_* <= t ‖z‖_*` on
/// `N`. Both suprema are attained for `n < n_max`, because beyond that point
/// the power norms are already below `t^n`.
#[derive(Debug, Clone)]
pub struct AdaptedNorm<'a> {
    op: &'a GhOperator,
    constants: Constants,
}

/// Builds the adapted norm of `op` at decay rate `t`.
pub fn adapted_norm(op: &GhOperator, t: f64) -> Result<AdaptedNorm<'_>> {
    let constants = estimate_constants(op, Some(t))?;
    Ok(AdaptedNorm { op, constants })
}

impl AdaptedNorm<'_> {
    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn eval(&self, x: &StateVector) -> Result<f64> {
        let kind = self.op.norm_kind();
        let t = self.constants.t;
        let window = self.constants.n_max.max(1);
        let mut best = 0.0_f64;

        let mut y = self.op.project_stable(x)?;
        let mut z = self.op.project_unstable(x)?;
        let mut scale = 1.0;
        for n in 0..window {
            if n > 0 {
                y = self.op.apply(&y)?;
                z = self.op.apply_inverse(&z)?;
                scale *= t;
            }
            best = best.max(y.norm(kind) / scale).max(z.norm(kind) / scale);
        }
        Ok(best)
    }

    /// Constants `(lower, upper)` with `lower ‖x‖ <= ‖x‖_* <= upper ‖x‖`.
    /// The lower bound comes from `‖x‖ <= ‖P_M x‖ + ‖P_N x‖`, the upper one
    /// from the certified decay `c` and `d = max(‖P_M‖, ‖P_N‖)`.
    pub fn equivalence(&self) -> (f64, f64) {
        (0.5, self.constants.c * self.constants.d)
    }
}
