//! Invertible real matrices with their stable/unstable spectral splitting.
//!
//! The spectral projections are computed with the matrix sign function of the
//! Cayley transform `C = (T - I)^{-1} (T + I)`, which maps eigenvalues inside
//! the unit disc to the open left half-plane and those outside to the right
//! half-plane. This does not need eigenvectors, so defective matrices are
//! handled as well.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::NormKind;

const SIGN_MAX_ITER: usize = 100;
const PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MatrixOperator {
    pub(crate) t: DMatrix<f64>,
    pub(crate) t_inv: DMatrix<f64>,
    pub(crate) p_m: DMatrix<f64>,
    pub(crate) p_n: DMatrix<f64>,
    pub(crate) eigenvalues: Vec<Complex<f64>>,
    pub(crate) stable_dim: usize,
    pub(crate) unstable_dim: usize,
}

impl MatrixOperator {
    /// Splits `t` into its stable and unstable spectral subspaces.
    /// Eigenvalues with `||λ| - 1| <= spectral_tol` are rejected.
    pub fn new(t: DMatrix<f64>, spectral_tol: f64) -> Result<Self> {
        let n = t.nrows();
        if n == 0 || t.ncols() != n {
            return Err(Error::SingularMatrix(format!(
                "matrix is {}x{}",
                t.nrows(),
                t.ncols()
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix(
                "matrix has non-finite entries".into(),
            ));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMatrix("matrix is not invertible".into()))?;

        let eigenvalues: Vec<Complex<f64>> = t.complex_eigenvalues().iter().copied().collect();
        if let Some(bad) = eigenvalues
            .iter()
            .find(|l| (l.norm() - 1.0).abs() <= spectral_tol)
        {
            return Err(Error::NotHyperbolic {
                modulus: bad.norm(),
                tolerance: spectral_tol,
            });
        }
        let stable_dim = eigenvalues.iter().filter(|l| l.norm() < 1.0).count();
        let unstable_dim = n - stable_dim;

        let identity = DMatrix::<f64>::identity(n, n);
        let (p_m, p_n) = if unstable_dim == 0 {
            (identity.clone(), DMatrix::zeros(n, n))
        } else if stable_dim == 0 {
            (DMatrix::zeros(n, n), identity.clone())
        } else {
            let p_n = unstable_projection(&t)?;
            (&identity - &p_n, p_n)
        };

        let op = MatrixOperator {
            t,
            t_inv,
            p_m,
            p_n,
            eigenvalues,
            stable_dim,
            unstable_dim,
        };
        op.check_splitting()?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.t_inv
    }

    pub fn projection_stable(&self) -> &DMatrix<f64> {
        &self.p_m
    }

    pub fn projection_unstable(&self) -> &DMatrix<f64> {
        &self.p_n
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    /// `ρ(T|_M)`, zero when `M = {0}`.
    pub fn stable_spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.norm())
            .filter(|&r| r < 1.0)
            .fold(0.0, f64::max)
    }

    /// `ρ(T^{-1}|_N)`, zero when `N = {0}`.
    pub fn unstable_inverse_spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.norm())
            .filter(|&r| r > 1.0)
            .map(|r| 1.0 / r)
            .fold(0.0, f64::max)
    }

    fn check_splitting(&self) -> Result<()> {
        let n = self.dim();
        let scale = 1.0_f64.max(matrix_norm(&self.t, NormKind::Sup));
        let sum_err = (&self.p_m + &self.p_n - DMatrix::<f64>::identity(n, n)).amax();
        let idem_m = (&self.p_m * &self.p_m - &self.p_m).amax();
        let idem_n = (&self.p_n * &self.p_n - &self.p_n).amax();
        let leak_m = (&self.p_n * &self.t * &self.p_m).amax();
        let leak_n = (&self.p_m * &self.t_inv * &self.p_n).amax();
        let worst = sum_err
            .max(idem_m)
            .max(idem_n)
            .max(leak_m / scale)
            .max(leak_n / scale);
        if worst > PROJECTION_TOL {
            return Err(Error::Splitting(format!(
                "projection residual {worst:e} exceeds {PROJECTION_TOL:e}"
            )));
        }
        let rank = self.p_m.trace();
        if (rank - self.stable_dim as f64).abs() > 1e-6 {
            return Err(Error::Splitting(format!(
                "trace(P_M) = {rank} but {} stable eigenvalues",
                self.stable_dim
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.t, x)
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        mat_vec(&self.t_inv, y)
    }

    pub fn project_stable(&self, x: &[f64]) -> Vec<f64> {
        if self.unstable_dim == 0 {
            return x.to_vec();
        }
        if self.stable_dim == 0 {
            return vec![0.0; x.len()];
        }
        mat_vec(&self.p_m, x)
    }

    pub fn project_unstable(&self, x: &[f64]) -> Vec<f64> {
        if self.stable_dim == 0 {
            return x.to_vec();
        }
        if self.unstable_dim == 0 {
            return vec![0.0; x.len()];
        }
        mat_vec(&self.p_n, x)
    }
}

pub(crate) fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x))
        .iter()
        .copied()
        .collect()
}

/// Operator norm induced by `kind`. Exact for `Sup`, `Lp(1)` and `Lp(2)`;
/// other exponents use the Riesz–Thorin upper bound
/// `‖A‖_1^{1/p} ‖A‖_∞^{1-1/p}`.
pub fn matrix_norm(a: &DMatrix<f64>, kind: NormKind) -> f64 {
    let row_sum = || {
        a.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let col_sum = || {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match kind {
        NormKind::Sup => row_sum(),
        NormKind::Lp(p) if p == 1.0 => col_sum(),
        NormKind::Lp(p) if p == 2.0 => {
            if a.iter().all(|&v| v == 0.0) {
                0.0
            } else {
                a.clone().singular_values().max()
            }
        }
        NormKind::Lp(p) => col_sum().powf(1.0 / p) * row_sum().powf(1.0 - 1.0 / p),
    }
}

/// Spectral projection onto the eigenvalues outside the unit disc.
fn unstable_projection(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let shifted = t - &identity;
    let shifted_inv = shifted
        .try_inverse()
        .ok_or_else(|| Error::Splitting("T - I is singular".into()))?;
    let mut x = shifted_inv * (t + &identity);

    // Newton iteration for sign(C) with determinant scaling.
    let mut converged = false;
    for iter in 0..SIGN_MAX_ITER {
        let x_inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Splitting("sign iteration hit a singular iterate".into()))?;
        let mu = if iter < 10 {
            let det = x.determinant().abs();
            if det.is_finite() && det > 0.0 {
                det.powf(-1.0 / n as f64)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&x * mu + &x_inv / mu) * 0.5;
        let change = (&next - &x).amax();
        let size = next.amax().max(1.0);
        x = next;
        if change <= 1e-14 * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Splitting(
            "matrix sign iteration did not converge".into(),
        ));
    }
    let mut p = (&identity + &x) * 0.5;
    // polish towards the nearest idempotent
    for _ in 0..3 {
        let p2 = &p * &p;
        p = &p2 * 3.0 - &p2 * &p * 2.0;
    }
    Ok(p)
}
