//! Local linearization of `F(x) = x/2 + x^2` at its fixed point 0, and of
//! the same map moved to the fixed point 1.

use std::sync::Arc;

use gh_conjugacy::conjugacy::SeriesPolicy;
use gh_conjugacy::linearize::{linearize, LinearizationProblem};
use gh_conjugacy::operator::GhOperator;
use gh_conjugacy::perturbation::MapFn;
use gh_conjugacy::state::StateVector;
use nalgebra::DMatrix;

fn main() -> gh_conjugacy::Result<()> {
    let policy = SeriesPolicy::with_tol(1e-12)?;
    let dfp = GhOperator::matrix(DMatrix::from_element(1, 1, 0.5))?;
    for p in [0.0, 1.0] {
        let f: MapFn = Arc::new(move |y: &StateVector| {
            let x = y.coord(0) - p;
            StateVector::dense(vec![p + x / 2.0 + x * x])
        });
        let problem = LinearizationProblem::new(
            f.clone(),
            StateVector::dense(vec![p]),
            dfp.clone(),
            0.5,
            0.25,
            Arc::new(|r: f64| 4.0 * r),
        );
        let lin = linearize(&problem, &policy, 1e-12)?;
        println!(
            "p = {p}: U has radius {:.3e}, Lip(alpha) = {:.3e}, theta = {}, C = {:.4}",
            lin.u_radius, lin.alpha_lip, lin.cert.theta, lin.cert.constant
        );
        for s in [-1.0, -0.5, 0.5, 1.0] {
            let y = StateVector::dense(vec![p + s * lin.u_radius]);
            let k = lin.conjugacy(&y)?;
            let (res, bound) = lin.residual(&f, &y)?;
            println!(
                "  y - p = {:+.3e}: K(y) = {:+.6e}, |K(F y) - K(y)/2| = {:.1e} <= {:.1e}",
                y.coord(0) - p,
                k.value.coord(0),
                res,
                bound
            );
        }
    }
    Ok(())
}
