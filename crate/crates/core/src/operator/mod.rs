//! Generalized hyperbolic operators.
//!
//! A [`GhOperator`] is an invertible operator `T` together with a splitting
//! `X = M ⊕ N` such that `T(M) ⊆ M`, `T^{-1}(N) ⊆ N`, and both `T|_M` and
//! `T^{-1}|_N` have spectral radius below one. Two backends are supported:
//! real matrices (where the splitting is the spectral one, so these are
//! exactly the hyperbolic matrices) and bilateral weighted backward shifts on
//! finitely supported sequences.
//!
//! Every operator carries certified constants `(c, t, d)` with
//! `‖T^n y‖ <= c t^n ‖y‖` on `M`, `‖T^{-n} z‖ <= c t^n ‖z‖` on `N` and
//! `d = max(‖P_M‖, ‖P_N‖)`.

mod adapted;
mod descriptor;
pub mod matrix;
pub mod shift;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use adapted::{adapted_norm, AdaptedNorm};
pub use descriptor::OperatorDescriptor;
pub use matrix::{matrix_norm, MatrixOperator};
pub use shift::{check_shift_criterion, ShiftCriterion, WeightSpec};

use crate::error::{Error, Result};
use crate::state::{NormKind, StateVector};

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-8;
pub const DEFAULT_POWER_CAP: usize = 10_000;

/// Construction options shared by both backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub norm: NormKind,
    /// Decay rate for the constants; `None` picks `(ρ_max + 1) / 2`.
    pub t: Option<f64>,
    /// Largest power examined while certifying `c`.
    pub power_cap: usize,
    /// Eigenvalues with `||λ| - 1|` at most this are rejected.
    pub spectral_tol: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions {
            norm: NormKind::Sup,
            t: None,
            power_cap: DEFAULT_POWER_CAP,
            spectral_tol: DEFAULT_SPECTRAL_TOL,
        }
    }
}

/// Certified decay constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c: f64,
    pub t: f64,
    pub d: f64,
    /// First power at which both decay ratios are at most one.
    pub n_max: usize,
}

impl Constants {
    /// `c d (1 + t) / (1 - t)`, the norm bound of the inverse series operator.
    pub fn series_gain(&self) -> f64 {
        self.c * self.d * (1.0 + self.t) / (1.0 - self.t)
    }
}

/// Norms of `T`, `T^{-1}`, the projections and the two restrictions, in the
/// ambient norm. Restriction norms are upper bounds for the matrix backend
/// (`‖T P_M‖ >= ‖T|_M‖`) and exact for shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictionNorms {
    pub norm_t_on_m: f64,
    pub norm_tinv_on_n: f64,
    pub norm_t: f64,
    pub norm_tinv: f64,
    pub norm_pm: f64,
    pub norm_pn: f64,
}

#[derive(Debug, Clone)]
pub enum Backend {
    Matrix(MatrixOperator),
    Shift(WeightSpec),
}

#[derive(Debug, Clone)]
pub struct GhOperator {
    backend: Backend,
    norm: NormKind,
    constants: Constants,
    norms: RestrictionNorms,
    power_cap: usize,
}

impl GhOperator {
    /// Weighted shift with default options.
    pub fn shift(weights: WeightSpec) -> Result<Self> {
        GhOperator::shift_with(weights, &OperatorOptions::default())
    }

    pub fn shift_with(weights: WeightSpec, opts: &OperatorOptions) -> Result<Self> {
        opts.norm.validate()?;
        let criterion = check_shift_criterion(&weights);
        if let Some((side, margin)) = criterion.violated_side() {
            return Err(Error::CriterionFailed { side, margin });
        }
        let norms = RestrictionNorms {
            norm_t_on_m: weights.log_power_norm_stable(1).exp(),
            norm_tinv_on_n: weights.log_power_norm_unstable_inverse(1).exp(),
            norm_t: weights.sup_abs(),
            norm_tinv: 1.0 / weights.inf_abs(),
            norm_pm: 1.0,
            norm_pn: 1.0,
        };
        GhOperator::finish(Backend::Shift(weights), norms, opts)
    }

    /// Real square matrix with default options.
    pub fn matrix(t: DMatrix<f64>) -> Result<Self> {
        GhOperator::matrix_with(t, &OperatorOptions::default())
    }

    pub fn matrix_with(t: DMatrix<f64>, opts: &OperatorOptions) -> Result<Self> {
        opts.norm.validate()?;
        let m = MatrixOperator::new(t, opts.spectral_tol)?;
        let norm = opts.norm;
        let norms = RestrictionNorms {
            norm_t_on_m: matrix_norm(&(&m.t * &m.p_m), norm),
            norm_tinv_on_n: matrix_norm(&(&m.t_inv * &m.p_n), norm),
            norm_t: matrix_norm(&m.t, norm),
            norm_tinv: matrix_norm(&m.t_inv, norm),
            norm_pm: matrix_norm(&m.p_m, norm),
            norm_pn: matrix_norm(&m.p_n, norm),
        };
        GhOperator::finish(Backend::Matrix(m), norms, opts)
    }

    fn finish(backend: Backend, norms: RestrictionNorms, opts: &OperatorOptions) -> Result<Self> {
        let mut op = GhOperator {
            backend,
            norm: opts.norm,
            constants: Constants {
                c: 1.0,
                t: 0.5,
                d: 1.0,
                n_max: 0,
            },
            norms,
            power_cap: opts.power_cap,
        };
        op.constants = estimate_constants_capped(&op, opts.t, opts.power_cap)?;
        Ok(op)
    }

    /// Same operator with constants re-certified at decay rate `t`.
    pub fn with_t(&self, t: f64) -> Result<Self> {
        let mut op = self.clone();
        op.constants = estimate_constants_capped(self, Some(t), self.power_cap)?;
        Ok(op)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn restriction_norms(&self) -> RestrictionNorms {
        self.norms
    }

    pub fn is_shift(&self) -> bool {
        matches!(self.backend, Backend::Shift(_))
    }

    /// `M = {0}`.
    pub fn stable_is_trivial(&self) -> bool {
        match &self.backend {
            Backend::Matrix(m) => m.stable_dim == 0,
            Backend::Shift(_) => false,
        }
    }

    /// `N = {0}`.
    pub fn unstable_is_trivial(&self) -> bool {
        match &self.backend {
            Backend::Matrix(m) => m.unstable_dim == 0,
            Backend::Shift(_) => false,
        }
    }

    /// `(ρ(T|_M), ρ(T^{-1}|_N))`.
    pub fn spectral_radii(&self) -> (f64, f64) {
        match &self.backend {
            Backend::Matrix(m) => (
                m.stable_spectral_radius(),
                m.unstable_inverse_spectral_radius(),
            ),
            Backend::Shift(w) => (w.left_tail().abs(), 1.0 / w.right_tail().abs()),
        }
    }

    /// A zero vector of the backend's kind.
    pub fn zero_vector(&self) -> StateVector {
        match &self.backend {
            Backend::Matrix(m) => StateVector::Dense(vec![0.0; m.dim()]),
            Backend::Shift(_) => StateVector::sparse([]),
        }
    }

    pub fn check_vector(&self, x: &StateVector) -> Result<()> {
        match (&self.backend, x) {
            (Backend::Matrix(m), StateVector::Dense(v)) => {
                if v.len() == m.dim() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: m.dim(),
                        got: v.len(),
                    })
                }
            }
            (Backend::Shift(_), StateVector::Sparse(_)) => Ok(()),
            (Backend::Matrix(m), other) => Err(Error::BackendMismatch(format!(
                "matrix operator of dimension {} applied to {}",
                m.dim(),
                other.backend_name()
            ))),
            (Backend::Shift(_), other) => Err(Error::BackendMismatch(format!(
                "shift operator applied to {}",
                other.backend_name()
            ))),
        }
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        self.check_vector(x)?;
        Ok(match (&self.backend, x) {
            (Backend::Matrix(m), StateVector::Dense(v)) => StateVector::Dense(m.apply(v)),
            (Backend::Shift(w), StateVector::Sparse(s)) => StateVector::Sparse(w.apply(s)),
            _ => unreachable!(),
        })
    }

    pub fn apply_inverse(&self, y: &StateVector) -> Result<StateVector> {
        self.check_vector(y)?;
        Ok(match (&self.backend, y) {
            (Backend::Matrix(m), StateVector::Dense(v)) => StateVector::Dense(m.apply_inverse(v)),
            (Backend::Shift(w), StateVector::Sparse(s)) => StateVector::Sparse(w.apply_inverse(s)),
            _ => unreachable!(),
        })
    }

    /// `T^k x` for any integer `k`.
    pub fn apply_power(&self, x: &StateVector, k: i64) -> Result<StateVector> {
        let mut v = x.clone();
        for _ in 0..k.unsigned_abs() {
            v = if k > 0 {
                self.apply(&v)?
            } else {
                self.apply_inverse(&v)?
            };
        }
        Ok(v)
    }

    pub fn project_stable(&self, x: &StateVector) -> Result<StateVector> {
        self.check_vector(x)?;
        Ok(match (&self.backend, x) {
            (Backend::Matrix(m), StateVector::Dense(v)) => StateVector::Dense(m.project_stable(v)),
            (Backend::Shift(_), StateVector::Sparse(s)) => {
                StateVector::Sparse(s.restrict(|i| i <= 0))
            }
            _ => unreachable!(),
        })
    }

    pub fn project_unstable(&self, x: &StateVector) -> Result<StateVector> {
        self.check_vector(x)?;
        Ok(match (&self.backend, x) {
            (Backend::Matrix(m), StateVector::Dense(v)) => {
                StateVector::Dense(m.project_unstable(v))
            }
            (Backend::Shift(_), StateVector::Sparse(s)) => {
                StateVector::Sparse(s.restrict(|i| i > 0))
            }
            _ => unreachable!(),
        })
    }

    /// Upper bounds for `(ln ‖(T|_M)^n‖, ln ‖(T^{-1}|_N)^n‖)`, `n = 1..=count`.
    /// Trivial subspaces give `-inf`.
    pub fn log_power_norms(&self, count: usize) -> Vec<(f64, f64)> {
        match &self.backend {
            Backend::Shift(w) => (1..=count as u64)
                .map(|n| {
                    (
                        w.log_power_norm_stable(n),
                        w.log_power_norm_unstable_inverse(n),
                    )
                })
                .collect(),
            Backend::Matrix(m) => {
                let mut out = Vec::with_capacity(count);
                let mut a = m.p_m.clone();
                let mut b = m.p_n.clone();
                for _ in 0..count {
                    a = &m.t * &a;
                    b = &m.t_inv * &b;
                    let la = if m.stable_dim == 0 {
                        f64::NEG_INFINITY
                    } else {
                        matrix_norm(&a, self.norm).ln()
                    };
                    let lb = if m.unstable_dim == 0 {
                        f64::NEG_INFINITY
                    } else {
                        matrix_norm(&b, self.norm).ln()
                    };
                    out.push((la, lb));
                }
                out
            }
        }
    }
}

/// Certifies `(c, t, d)` for `op`.
///
/// With `t` given it must satisfy `max(ρ(T|_M), ρ(T^{-1}|_N)) <= t < 1`;
/// otherwise `t = (ρ_max + 1) / 2`. `c` is the largest ratio
/// `‖T^n|_M‖ / t^n` or `‖T^{-n}|_N‖ / t^n` up to the first power `n_max` at
/// which both ratios are at most one; submultiplicativity extends the bound
/// to every power.
pub fn estimate_constants(op: &GhOperator, t: Option<f64>) -> Result<Constants> {
    estimate_constants_capped(op, t, op.power_cap)
}

fn estimate_constants_capped(op: &GhOperator, t: Option<f64>, cap: usize) -> Result<Constants> {
    let (rho_m, rho_n) = op.spectral_radii();
    let rho = rho_m.max(rho_n);
    let t = match t {
        Some(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "t",
                    reason: format!("decay rate must lie in (0, 1), got {t}"),
                });
            }
            if t < rho {
                return Err(Error::InvalidParameter {
                    name: "t",
                    reason: format!("decay rate {t} is below the spectral radius {rho}"),
                });
            }
            t
        }
        None => (rho + 1.0) / 2.0,
    };
    let d = op.norms.norm_pm.max(op.norms.norm_pn);
    let log_t = t.ln();

    let mut c_log = 0.0_f64; // n = 0: restrictions of the identity
    let mut n_max = None;
    // Powers are produced in batches so the matrix backend can reuse products.
    let mut produced = 0usize;
    let mut batch = 64usize;
    'outer: while produced < cap {
        let count = batch.min(cap - produced);
        let norms = power_norms_from(op, produced, count);
        for (offset, (lm, ln)) in norms.into_iter().enumerate() {
            let n = produced + offset + 1;
            let ratio = lm.max(ln) - n as f64 * log_t;
            if ratio.is_nan() {
                return Err(Error::Overflow(format!("computing power norms at n = {n}")));
            }
            c_log = c_log.max(ratio);
            if ratio <= 1e-12 {
                n_max = Some(n);
                break 'outer;
            }
        }
        produced += count;
        batch *= 2;
    }
    let n_max = n_max.ok_or(Error::NotCertifiable { t, cap })?;
    Ok(Constants {
        c: c_log.exp().max(1.0),
        t,
        d,
        n_max,
    })
}

fn power_norms_from(op: &GhOperator, start: usize, count: usize) -> Vec<(f64, f64)> {
    match &op.backend {
        Backend::Shift(w) => ((start + 1) as u64..=(start + count) as u64)
            .map(|n| {
                (
                    w.log_power_norm_stable(n),
                    w.log_power_norm_unstable_inverse(n),
                )
            })
            .collect(),
        Backend::Matrix(_) => {
            let all = op.log_power_norms(start + count);
            all[start..].to_vec()
        }
    }
}

/// `ε = γ (1 - t) / (c d (1 + t))`: the largest sup-norm and Lipschitz bound
/// for which the conjugacy is certified within distance `γ` of the identity.
pub fn admissible_eps(constants: &Constants, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must lie in (0, 1), got {gamma}"),
        });
    }
    Ok(eps_formula(constants.c, constants.d, constants.t, gamma))
}

pub(crate) fn eps_formula(c: f64, d: f64, t: f64, gamma: f64) -> f64 {
    gamma * (1.0 - t) / (c * d * (1.0 + t))
}
