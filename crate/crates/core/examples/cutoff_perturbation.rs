//! Cutting a local nonlinearity off to a globally small perturbation, and
//! inverting `S = T + β` by fixed-point iteration.

use std::sync::Arc;

use gh_conjugacy::operator::GhOperator;
use gh_conjugacy::perturbation::{apply_s, cutoff, solve_s_inverse, CutoffProfile, MapFn};
use gh_conjugacy::state::{NormKind, StateVector};
use nalgebra::DMatrix;

fn main() -> gh_conjugacy::Result<()> {
    let square: MapFn =
        Arc::new(|x: &StateVector| StateVector::dense(vec![x.coord(0) * x.coord(0)]));
    let r = 0.05;
    // |d/dx x^2| <= 4r on the ball of radius 2r
    let beta = cutoff(
        square.clone(),
        4.0 * r,
        CutoffProfile::new(r)?,
        NormKind::Sup,
    )?;
    println!(
        "cutoff at r = {r}: |beta| <= {:.4}, Lip <= {:.4}",
        beta.sup_bound(),
        beta.lip_bound()
    );
    for x in [0.0, 0.03, 0.05, 0.07, 0.1, 0.5] {
        let v = StateVector::dense(vec![x]);
        println!(
            "  x = {x:<5} x^2 = {:.6} beta = {:.6}",
            square(&v).coord(0),
            beta.eval(&v).coord(0)
        );
    }

    let op = GhOperator::matrix(DMatrix::from_element(1, 1, 2.0))?;
    let y = StateVector::dense(vec![0.3]);
    let inv = solve_s_inverse(&op, &beta, &y, 1e-14)?;
    let back = apply_s(&op, &beta, &inv.x)?;
    println!(
        "S^-1({}) = {:.15} after {} iterations, |S(S^-1 y) - y| = {:.1e}",
        y.coord(0),
        inv.x.coord(0),
        inv.iterations,
        back.distance(&y, NormKind::Sup)?
    );
    Ok(())
}
