//! Constant perturbations of `x ↦ x/2` and `x ↦ 2x` have translation
//! conjugacies: `h ≡ 0.2` and `h ≡ -0.1` for `β ≡ 0.1`.

use gh_conjugacy::conjugacy::{eval_H, eval_H_prime, solve_h, solve_h_prime, SeriesPolicy};
use gh_conjugacy::operator::GhOperator;
use gh_conjugacy::perturbation::{make_builtin, BuiltinPerturbation};
use gh_conjugacy::state::{NormKind, StateVector};
use nalgebra::DMatrix;

fn main() -> gh_conjugacy::Result<()> {
    let beta = make_builtin(
        &BuiltinPerturbation::Constant {
            value: StateVector::dense(vec![0.1]),
        },
        NormKind::Sup,
    )?;
    let policy = SeriesPolicy::with_tol(1e-12)?;
    for a in [0.5, 2.0] {
        let op = GhOperator::matrix(DMatrix::from_element(1, 1, a))?;
        let h = solve_h(&op, &beta, 0.9, &policy, 1e-12)?;
        let hp = solve_h_prime(&op, &beta, &policy)?;
        println!("T = {a} x, S = {a} x + 0.1");
        for x in [-1.0, 0.0, 2.5] {
            let x = StateVector::dense(vec![x]);
            let fwd = eval_H(&h, &x)?;
            let bwd = eval_H_prime(&hp, &x)?;
            println!(
                "  x = {:>5}: H(x) = {:.12} (+- {:.1e}), H'(x) = {:.12}",
                x.coord(0),
                fwd.value.coord(0),
                fwd.error_bound,
                bwd.value.coord(0)
            );
        }
    }
    Ok(())
}
