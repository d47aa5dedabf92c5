use std::sync::Arc;

use gh_conjugacy::conjugacy::{
    psi_apply, psi_inverse_eval, psi_inverse_eval_terms, solve_h, tail_bound, LinearOrbit,
    SeriesPolicy,
};
use gh_conjugacy::linearize::{cara_ratio, linearize, theta_bound, LinearizationProblem};
use gh_conjugacy::operator::{admissible_eps, Constants, GhOperator, OperatorOptions, WeightSpec};
use gh_conjugacy::perturbation::{
    apply_s, cutoff, make_builtin, solve_s_inverse, BuiltinPerturbation, CutoffProfile, MapFn,
    Perturbation,
};
use gh_conjugacy::state::{axpy, NormKind, SparseVec, StateVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sparse_ints() -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-20i64..20, -9i32..=9), 0..12)
        .prop_map(|v| StateVector::sparse(v.into_iter().map(|(i, x)| (i, x as f64))))
}

fn sparse_reals() -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-15i64..15, -2.0f64..2.0), 0..10).prop_map(StateVector::sparse)
}

fn norms() -> impl Strategy<Value = NormKind> {
    prop_oneof![Just(NormKind::Sup), (1.0f64..6.0).prop_map(NormKind::Lp)]
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
}

/// Hyperbolic spectra: one or two contracting and one or two expanding entries.
fn hyperbolic_diag() -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.05f64..0.9, 1..3),
        prop::collection::vec(1.2f64..5.0, 1..3),
    )
        .prop_map(|(mut s, u)| {
            s.extend(u);
            s
        })
}

fn no_stored_zeros(v: &StateVector) -> bool {
    v.as_sparse()
        .is_none_or(|s| s.entries().iter().all(|&(_, x)| x != 0.0))
}

proptest! {
    #[test]
    fn sup_norm_is_smallest(v in sparse_ints(), p in 1.0f64..8.0) {
        prop_assert!(v.norm(NormKind::Sup) <= v.norm(NormKind::Lp(p)) * (1.0 + 1e-12));
    }

    #[test]
    fn axpy_prunes_and_obeys_triangle(x in sparse_reals(), y in sparse_reals(), a in -3.0f64..3.0, kind in norms()) {
        let z = axpy(a, &x, &y).unwrap();
        prop_assert!(no_stored_zeros(&z));
        prop_assert!(z.norm(kind) <= a.abs() * x.norm(kind) + y.norm(kind) + 1e-12);
        // exact cancellation leaves nothing behind
        prop_assert!(axpy(-1.0, &x, &x).unwrap().is_zero());
        prop_assert!(no_stored_zeros(&axpy(-1.0, &x, &x).unwrap()));
    }

    #[test]
    fn sparse_json_round_trip(x in sparse_reals()) {
        let text = serde_json::to_string(&x).unwrap();
        let back: StateVector = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn shift_splitting_is_exact(x in sparse_reals(), left in 0.1f64..0.95, right in 1.05f64..6.0,
                                core in prop::collection::vec(0.2f64..4.0, 0..4)) {
        let op = GhOperator::shift(WeightSpec::new(-1, core, left, right).unwrap()).unwrap();
        let pm_x = op.project_stable(&x).unwrap();
        let pn_x = op.project_unstable(&x).unwrap();
        prop_assert!(op.project_unstable(&op.apply(&pm_x).unwrap()).unwrap().is_zero());
        prop_assert!(op.project_stable(&op.apply_inverse(&pn_x).unwrap()).unwrap().is_zero());
        prop_assert_eq!(pm_x.add(&pn_x).unwrap(), x.clone());
        let back = op.apply_inverse(&op.apply(&x).unwrap()).unwrap();
        prop_assert!(back.distance(&x, NormKind::Sup).unwrap() <= 1e-12 * (1.0 + x.norm(NormKind::Sup)));
    }

    #[test]
    fn matrix_splitting_and_decay(spectrum in hyperbolic_diag(), seed in prop::collection::vec(-0.4f64..0.4, 16),
                                  x in prop::collection::vec(-1.0f64..1.0, 4)) {
        let n = spectrum.len();
        // conjugate by a perturbation of the identity to get a non-normal matrix
        let q = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + seed[i * 4 + j]);
        prop_assume!(q.determinant().abs() > 0.2);
        let t = &q * diag(&spectrum) * q.clone().try_inverse().unwrap();
        let op = GhOperator::matrix(t).unwrap();
        let x = StateVector::dense(x[..n].to_vec());
        let pm_x = op.project_stable(&x).unwrap();
        let pn_x = op.project_unstable(&x).unwrap();
        let scale = 1.0 + x.norm(NormKind::Sup);
        prop_assert!(op.project_unstable(&op.apply(&pm_x).unwrap()).unwrap().norm(NormKind::Sup) <= 1e-10 * scale);
        prop_assert!(op.project_stable(&op.apply_inverse(&pn_x).unwrap()).unwrap().norm(NormKind::Sup) <= 1e-10 * scale);

        let k = op.constants();
        let (mut y, mut z) = (pm_x.clone(), pn_x.clone());
        // re-project so that rounding does not feed the other subspace
        for power in 1..=2 * k.n_max {
            y = op.project_stable(&op.apply(&y).unwrap()).unwrap();
            z = op.project_unstable(&op.apply_inverse(&z).unwrap()).unwrap();
            let bound = k.c * k.t.powi(power as i32);
            prop_assert!(y.norm(NormKind::Sup) <= bound * pm_x.norm(NormKind::Sup) * (1.0 + 1e-9) + 1e-14);
            prop_assert!(z.norm(NormKind::Sup) <= bound * pn_x.norm(NormKind::Sup) * (1.0 + 1e-9) + 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eps_is_monotone(c in 1.0f64..100.0, d in 1.0f64..20.0, t in 0.01f64..0.98, g in 0.01f64..0.98,
                       f in 1.001f64..3.0, s in 0.01f64..0.99) {
        let k = |c: f64, d: f64, t: f64| Constants { c, t, d, n_max: 1 };
        let base = admissible_eps(&k(c, d, t), g).unwrap();
        prop_assert!(base > 0.0);
        prop_assert!(admissible_eps(&k(c * f, d, t), g).unwrap() < base);
        prop_assert!(admissible_eps(&k(c, d * f, t), g).unwrap() < base);
        prop_assert!(admissible_eps(&k(c, d, t + (0.99 - t) * s), g).unwrap() < base);
        prop_assert!(admissible_eps(&k(c, d, t), g + (0.99 - g) * s).unwrap() > base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn admissible_eps_makes_picard_contract(left in 0.1f64..0.8, right in 1.3f64..5.0, gamma in 0.05f64..0.5) {
        let op = GhOperator::shift(WeightSpec::two_sided(left, right).unwrap()).unwrap();
        let eps = admissible_eps(&op.constants(), gamma).unwrap();
        let beta = make_builtin(&BuiltinPerturbation::Sine { amplitude: eps, frequency: 1.0, window: (-1, 1) },
                                NormKind::Sup).unwrap();
        let h = solve_h(&op, &beta, gamma, &SeriesPolicy::default(), 1e-6).unwrap();
        prop_assert!(h.contraction_rate() <= gamma * (1.0 + 1e-12));
        prop_assert!(h.sup_bound() <= gamma * (1.0 + 1e-12));
    }

    #[test]
    fn cutoff_matches_inside_and_vanishes_outside(r in 0.01f64..0.3, a in -2.0f64..2.0,
                                                  x in prop::collection::vec(-1.0f64..1.0, 2)) {
        let square: MapFn = Arc::new(move |v: &StateVector| {
            StateVector::dense(v.as_dense().unwrap().iter().map(|u| a * u * u).collect::<Vec<_>>())
        });
        let lip = 4.0 * a.abs() * r;
        let beta = cutoff(square.clone(), lip, CutoffProfile::new(r).unwrap(), NormKind::Sup).unwrap();
        let x = StateVector::dense(x);
        let n = x.norm(NormKind::Sup);
        let inside = x.scale(r / n.max(1e-300) * 0.999);
        prop_assert_eq!(beta.eval(&inside), square(&inside));
        let outside = x.scale(2.0 * r / n.max(1e-300) * 1.001);
        prop_assert!(beta.eval(&outside).is_zero());
        prop_assert!(beta.sup_bound() <= 2.0 * r * lip * (1.0 + 1e-12));
        prop_assert!(beta.lip_bound() <= 3.0 * lip * (1.0 + 1e-12));
    }

    #[test]
    fn s_inverse_round_trip(y in sparse_reals(), amp in 0.0f64..0.2, tol in 1e-13f64..1e-6) {
        let op = GhOperator::shift(WeightSpec::two_sided(0.5, 2.0).unwrap()).unwrap();
        let beta = make_builtin(&BuiltinPerturbation::Sine { amplitude: amp, frequency: 1.0, window: (-3, 3) },
                                NormKind::Sup).unwrap();
        let inv = solve_s_inverse(&op, &beta, &y, tol).unwrap();
        let back = apply_s(&op, &beta, &inv.x).unwrap();
        prop_assert!(back.distance(&y, NormKind::Sup).unwrap() <= tol);
    }

    #[test]
    fn psi_round_trip(a in -1.0f64..1.0, w in 0.1f64..3.0, constant in any::<bool>(),
                      pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 20)) {
        let op = GhOperator::matrix(diag(&[0.5, 3.0])).unwrap();
        let tol = 1e-10;
        let policy = SeriesPolicy::with_tol(tol).unwrap();
        let alpha = if constant {
            make_builtin(&BuiltinPerturbation::Constant { value: StateVector::dense(vec![a, -a]) }, NormKind::Sup)
        } else {
            make_builtin(&BuiltinPerturbation::Sine { amplitude: a, frequency: w, window: (0, 1) }, NormKind::Sup)
        }.unwrap();
        let phi = |x: &StateVector| Ok(psi_inverse_eval(&op, &LinearOrbit(&op), &alpha, x, &policy)?.value);
        for (u, v) in pts {
            let x = StateVector::dense(vec![u, v]);
            let back = psi_apply(&op, |y: &StateVector| op.apply(y), phi, &x).unwrap();
            prop_assert!(back.distance(&alpha.eval(&x), NormKind::Sup).unwrap() <= 2.0 * tol);
        }
    }

    #[test]
    fn doubling_the_cutoff_stays_within_the_tail(k in 1usize..25, x in sparse_reals(), a in 0.01f64..1.0) {
        let op = GhOperator::shift(WeightSpec::two_sided(0.5, 2.0).unwrap()).unwrap();
        let alpha = make_builtin(&BuiltinPerturbation::Saturating { amplitude: a, scale: 2.0, window: (-4, 4) },
                                 NormKind::Sup).unwrap();
        let one = psi_inverse_eval_terms(&op, &LinearOrbit(&op), &alpha, &x, k).unwrap();
        let two = psi_inverse_eval_terms(&op, &LinearOrbit(&op), &alpha, &x, 2 * k).unwrap();
        let bound = tail_bound(&op.constants(), alpha.sup_bound(), k);
        prop_assert!(one.value.distance(&two.value, NormKind::Sup).unwrap() <= bound);
    }

    #[test]
    fn theta_bound_for_diagonals(spectrum in hyperbolic_diag(), s in 0.1f64..10.0) {
        let op = GhOperator::matrix(diag(&spectrum)).unwrap();
        let theta = theta_bound(&op).unwrap();
        let a = spectrum.iter().cloned().filter(|v| *v < 1.0).fold(0.0, f64::max);
        let lo = spectrum.iter().cloned().filter(|v| *v < 1.0).fold(f64::INFINITY, f64::min);
        let e = 1.0 / spectrum.iter().cloned().filter(|v| *v > 1.0).fold(f64::INFINITY, f64::min);
        let hi = spectrum.iter().cloned().fold(0.0, f64::max);
        let oracle = (a.ln() / lo.ln()).min(e.ln() / (-hi.ln())).min(1.0);
        prop_assert!((theta - oracle).abs() <= 1e-12, "{} vs {}", theta, oracle);
        prop_assert!(cara_ratio(&op, 0.999 * theta) < 1.0);

        // rescaling the coordinates by a common factor leaves every norm ratio alone
        let scaled = DMatrix::from_diagonal_element(spectrum.len(), spectrum.len(), s) * diag(&spectrum)
            * DMatrix::from_diagonal_element(spectrum.len(), spectrum.len(), 1.0 / s);
        let rescaled = GhOperator::matrix_with(scaled, &OperatorOptions::default()).unwrap();
        prop_assert!((theta_bound(&rescaled).unwrap() - theta).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linearization_residuals_within_bounds(a in -3.0f64..3.0, cubic in any::<bool>(), lambda in 0.2f64..0.8,
                                             mu in 1.5f64..4.0, seed in any::<u64>()) {
        let op = GhOperator::matrix(diag(&[lambda, mu])).unwrap();
        let k: i32 = if cubic { 3 } else { 2 };
        let f: MapFn = Arc::new(move |y: &StateVector| {
            let v = y.as_dense().unwrap();
            StateVector::dense(vec![lambda * v[0] + a * v[1].powi(k), mu * v[1] + a * v[0].powi(k)])
        });
        let lip: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
            Arc::new(move |r: f64| k as f64 * a.abs() * (2.0 * r).powi(k - 1));
        let problem = LinearizationProblem::new(f.clone(), StateVector::dense(vec![0.0, 0.0]), op.clone(), 0.5, 0.25, lip);
        let lin = linearize(&problem, &SeriesPolicy::with_tol(1e-11).unwrap(), 1e-10).unwrap();
        let mut sampler = gh_conjugacy::sampling::Sampler::new(seed);
        for _ in 0..10 {
            let y = sampler.ball_point(gh_conjugacy::sampling::SampleSpace::Dense(2), lin.u_radius, NormKind::Sup);
            let (res, bound) = lin.residual(&f, &y).unwrap();
            prop_assert!(res <= bound, "{} > {}", res, bound);
        }
    }
}

#[test]
fn sparse_from_pairs_never_stores_zero() {
    let v = SparseVec::from_pairs([(3, 0.0), (1, 2.0), (1, -2.0), (-4, 1.0)]);
    assert_eq!(v.entries(), &[(-4, 1.0)]);
    let p = Perturbation::zero();
    assert!(p.is_trivial());
}
