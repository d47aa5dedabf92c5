//! Inverting the linear operator `Ψ(φ) = φ ∘ T - T ∘ φ` on bounded maps.

use std::sync::Arc;

use gh_conjugacy::conjugacy::{psi_apply, psi_inverse_eval, LinearOrbit, SeriesPolicy};
use gh_conjugacy::operator::GhOperator;
use gh_conjugacy::perturbation::{Certification, Perturbation};
use gh_conjugacy::state::{NormKind, StateVector};
use nalgebra::{DMatrix, DVector};

fn main() -> gh_conjugacy::Result<()> {
    let op = GhOperator::matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 3.0])))?;
    let policy = SeriesPolicy::with_tol(1e-12)?;

    let one = Perturbation::new(
        "(1, 1)",
        Arc::new(|_: &StateVector| StateVector::dense(vec![1.0, 1.0])),
        1.0,
        0.0,
        Certification::Analytic,
    )?;
    let v = psi_inverse_eval(
        &op,
        &LinearOrbit(&op),
        &one,
        &StateVector::dense(vec![0.0, 0.0]),
        &policy,
    )?;
    println!(
        "Psi^-1(1, 1) = ({:.12}, {:.12}) with {} terms, error <= {:.1e}",
        v.value.coord(0),
        v.value.coord(1),
        v.terms,
        v.error_bound
    );

    // round trip for a non-constant alpha
    let alpha = Perturbation::new(
        "sin",
        Arc::new(|x: &StateVector| {
            StateVector::dense(vec![0.1 * x.coord(1).sin(), 0.1 * x.coord(0).cos()])
        }),
        0.1,
        0.1,
        Certification::Analytic,
    )?;
    let phi = |x: &StateVector| -> gh_conjugacy::Result<StateVector> {
        Ok(psi_inverse_eval(&op, &LinearOrbit(&op), &alpha, x, &policy)?.value)
    };
    for x in [vec![0.2, -0.4], vec![1.0, 0.5]] {
        let x = StateVector::dense(x);
        let back = psi_apply(&op, |y: &StateVector| op.apply(y), phi, &x)?;
        println!(
            "x = {:?}: |Psi(Psi^-1 alpha)(x) - alpha(x)| = {:.2e}",
            x.as_dense().unwrap(),
            back.distance(&alpha.eval(&x), NormKind::Sup)?
        );
    }
    Ok(())
}
