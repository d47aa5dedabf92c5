//! Decay constants, the admissible perturbation size and the adapted norm
//! for a non-normal matrix.

use gh_conjugacy::operator::{adapted_norm, admissible_eps, GhOperator, OperatorOptions};
use gh_conjugacy::state::{NormKind, StateVector};
use nalgebra::DMatrix;

fn main() -> gh_conjugacy::Result<()> {
    let t = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 3.0]);
    for norm in [NormKind::Sup, NormKind::Lp(1.0), NormKind::Lp(2.0)] {
        let op = GhOperator::matrix_with(
            t.clone(),
            &OperatorOptions {
                norm,
                ..Default::default()
            },
        )?;
        let k = op.constants();
        let n = op.restriction_norms();
        println!(
            "{norm:?}: c = {:.4} t = {:.4} d = {:.4} (n_max {}), |T| = {:.3}, |T^-1| = {:.3}, eps(0.2) = {:.5}",
            k.c,
            k.t,
            k.d,
            k.n_max,
            n.norm_t,
            n.norm_tinv,
            admissible_eps(&k, 0.2)?
        );
    }

    let op = GhOperator::matrix(t)?;
    let adapted = adapted_norm(&op, op.constants().t)?;
    let (lo, hi) = adapted.equivalence();
    println!("adapted norm within [{lo:.3}, {hi:.3}] times the sup norm");
    let x = StateVector::dense(vec![0.3, -1.0, 0.5]);
    let tx = op.apply(&op.project_stable(&x)?)?;
    println!(
        "stable part contracts: |P_M x|' = {:.4} -> |T P_M x|' = {:.4}",
        adapted.eval(&op.project_stable(&x)?)?,
        adapted.eval(&tx)?
    );
    Ok(())
}
