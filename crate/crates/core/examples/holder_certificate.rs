//! Hölder exponent and constant of the conjugacy for a diagonal operator,
//! compared with empirical quotients.

use gh_conjugacy::conjugacy::{solve_h_prime, SeriesPolicy};
use gh_conjugacy::linearize::{
    cara_ratio, empirical_holder, holder_constant, theta_bound, HolderCertificate,
};
use gh_conjugacy::operator::GhOperator;
use gh_conjugacy::perturbation::{make_builtin, BuiltinPerturbation};
use gh_conjugacy::sampling::{SampleSpace, Sampler};
use gh_conjugacy::state::NormKind;
use nalgebra::{DMatrix, DVector};

fn main() -> gh_conjugacy::Result<()> {
    let op = GhOperator::matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
        0.5, 0.25, 3.0,
    ])))?;
    let theta_max = theta_bound(&op)?;
    println!("theta_bound = {theta_max}");
    let eps = 0.01;
    for theta in [0.1, 0.25, 0.4] {
        println!(
            "theta = {theta}: ratio {:.4}, C = {:.6}",
            cara_ratio(&op, theta),
            holder_constant(&op, theta, eps)?
        );
    }

    let beta = make_builtin(
        &BuiltinPerturbation::Saturating {
            amplitude: eps,
            scale: 1.0,
            window: (0, 2),
        },
        NormKind::Sup,
    )?;
    let hp = solve_h_prime(&op, &beta, &SeriesPolicy::with_tol(1e-12)?)?;
    let cert = HolderCertificate::new(&op, theta_max / 2.0, eps, 0.5)?;
    let pairs = Sampler::new(9).close_pairs(SampleSpace::Dense(3), 200, 1.0, 0.5, NormKind::Sup);
    let report = empirical_holder(&hp, &cert, &pairs)?;
    println!(
        "empirical max ratio {:.4} vs C = {:.4} over {} pairs: {}",
        report.max_ratio, report.constant, report.n_pairs, report.passed
    );
    Ok(())
}
