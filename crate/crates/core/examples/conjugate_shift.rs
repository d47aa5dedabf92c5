//! Conjugating a perturbed weighted shift back to the shift, then checking
//! both conjugacy identities and both inverse identities on random
//! sequences.

use gh_conjugacy::conjugacy::{
    solve_h, solve_h_prime, verify_conjugacy, verify_inverse, SeriesPolicy,
};
use gh_conjugacy::linearize::holder_modulus;
use gh_conjugacy::operator::{admissible_eps, GhOperator, WeightSpec};
use gh_conjugacy::perturbation::{make_builtin, BuiltinPerturbation};
use gh_conjugacy::sampling::{SampleSpace, Sampler};
use gh_conjugacy::state::NormKind;

fn main() -> gh_conjugacy::Result<()> {
    let op = GhOperator::shift(WeightSpec::two_sided(0.5, 2.0)?)?.with_t(0.5)?;
    let gamma = 0.2;
    let eps = admissible_eps(&op.constants(), gamma)?;
    let beta = make_builtin(
        &BuiltinPerturbation::Sine {
            amplitude: eps / 2.0,
            frequency: 2.0,
            window: (-3, 3),
        },
        NormKind::Sup,
    )?;
    println!(
        "eps = {eps:.5}, |beta| = {:.5}, Lip = {:.5}",
        beta.sup_bound(),
        beta.lip_bound()
    );

    let policy = SeriesPolicy::with_tol(1e-10)?;
    let h = solve_h(&op, &beta, gamma, &policy, 1e-9)?;
    let hp = solve_h_prime(&op, &beta, &policy)?;
    println!(
        "K = {}, Picard depth {} at rate {:.3}, |h| <= {:.4}",
        h.terms(),
        h.depth(),
        h.contraction_rate(),
        h.sup_bound()
    );

    let samples =
        Sampler::new(1).ball_points(SampleSpace::for_problem(&op, &beta), 40, 1.0, NormKind::Sup);
    let modulus = holder_modulus(&op, &beta);
    let inverse = verify_inverse(&h, &hp, &samples, &modulus, &modulus)?;
    for r in [
        verify_conjugacy(&h, &samples)?,
        verify_conjugacy(&hp, &samples)?,
        inverse.backward_after_forward,
        inverse.forward_after_backward,
    ] {
        println!(
            "{:<16} max residual {:.2e} <= bound {:.2e}: {}",
            r.identity, r.max_residual, r.certified_bound, r.passed
        );
    }
    Ok(())
}
