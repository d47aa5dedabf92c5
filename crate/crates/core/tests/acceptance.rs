//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use gh_conjugacy::conjugacy::{
    eval_H, psi_apply, psi_inverse_eval, psi_inverse_eval_terms, solve_h, solve_h_prime,
    tail_bound, verify_conjugacy, verify_inverse, LinearOrbit, SeriesPolicy,
};
use gh_conjugacy::linearize::{
    empirical_holder, holder_constant, holder_modulus, linearize, theta_bound, HolderCertificate,
    Linearization, LinearizationProblem, LipschitzOnBall,
};
use gh_conjugacy::operator::{
    admissible_eps, check_shift_criterion, Constants, GhOperator, WeightSpec,
};
use gh_conjugacy::perturbation::{
    make_builtin, BuiltinPerturbation, Certification, MapFn, Perturbation,
};
use gh_conjugacy::sampling::{SampleSpace, Sampler};
use gh_conjugacy::state::{NormKind, StateVector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn one_d(a: f64) -> GhOperator {
    GhOperator::matrix(DMatrix::from_element(1, 1, a)).unwrap()
}

fn diag(v: &[f64]) -> GhOperator {
    GhOperator::matrix(DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))).unwrap()
}

fn shift_half_two() -> GhOperator {
    GhOperator::shift(WeightSpec::two_sided(0.5, 2.0).unwrap())
        .unwrap()
        .with_t(0.5)
        .unwrap()
}

fn sine(amplitude: f64, frequency: f64, window: (i64, i64)) -> Perturbation {
    make_builtin(
        &BuiltinPerturbation::Sine {
            amplitude,
            frequency,
            window,
        },
        NormKind::Sup,
    )
    .unwrap()
}

fn constant_dense(v: Vec<f64>) -> Perturbation {
    make_builtin(
        &BuiltinPerturbation::Constant {
            value: StateVector::dense(v),
        },
        NormKind::Sup,
    )
    .unwrap()
}

fn closed_form_conjugacies() -> Outcome {
    let beta = constant_dense(vec![0.1]);
    let policy = SeriesPolicy::with_tol(1e-12).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for (a, shift) in [(0.5, 0.2), (2.0, -0.1)] {
        let op = one_d(a);
        let h = solve_h(&op, &beta, 0.9, &policy, 1e-12).map_err(e)?;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-10.0..10.0);
            let v = eval_H(&h, &StateVector::dense(vec![x])).map_err(e)?;
            let err = (v.value.coord(0) - (x + shift)).abs();
            worst = worst.max(err);
            ensure(err <= 1e-10, || {
                format!(
                    "T = {a}x: H({x}) = {}, want {}",
                    v.value.coord(0),
                    x + shift
                )
            })?;
        }
    }
    Ok(format!("max deviation {worst:.1e} over 200 points"))
}

fn psi_inversion() -> Outcome {
    let op = diag(&[0.5, 3.0]);
    let tol = 1e-10;
    let policy = SeriesPolicy::with_tol(tol).map_err(e)?;
    let ones = constant_dense(vec![1.0, 1.0]);
    let v = psi_inverse_eval(
        &op,
        &LinearOrbit(&op),
        &ones,
        &StateVector::dense(vec![0.3, -0.7]),
        &policy,
    )
    .map_err(e)?;
    let (a, b) = (v.value.coord(0), v.value.coord(1));
    ensure((a - 2.0).abs() <= tol && (b + 0.5).abs() <= tol, || {
        format!("Psi^-1(1,1) = ({a}, {b})")
    })?;

    let alpha = Perturbation::new(
        "mixed",
        Arc::new(|x: &StateVector| {
            StateVector::dense(vec![
                0.3 * (2.0 * x.coord(1)).sin(),
                0.2 * (x.coord(0) - x.coord(1)).cos(),
            ])
        }),
        0.3,
        0.6,
        Certification::Analytic,
    )
    .map_err(e)?;
    let phi =
        |x: &StateVector| Ok(psi_inverse_eval(&op, &LinearOrbit(&op), &alpha, x, &policy)?.value);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let x = StateVector::dense(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        let back = psi_apply(&op, |y: &StateVector| op.apply(y), phi, &x).map_err(e)?;
        let err = back.distance(&alpha.eval(&x), NormKind::Sup).map_err(e)?;
        worst = worst.max(err);
        ensure(err <= 2.0 * tol, || {
            format!("round trip error {err:.3e} at {x:?}")
        })?;
    }
    Ok(format!(
        "(2, -1/2) within {tol:.0e}; round trip max {worst:.1e} <= {:.0e}",
        2.0 * tol
    ))
}

fn gamma_bound() -> Outcome {
    let op = shift_half_two();
    let gamma = 0.2;
    let eps = admissible_eps(&op.constants(), gamma).map_err(e)?;
    let beta = sine(eps, 1.0, (-3, 3));
    let h = solve_h(
        &op,
        &beta,
        gamma,
        &SeriesPolicy::with_tol(1e-10).map_err(e)?,
        1e-9,
    )
    .map_err(e)?;
    let samples = Sampler::new(3).ball_points(
        SampleSpace::for_problem(&op, &beta),
        1000,
        2.0,
        NormKind::Sup,
    );
    let mut worst: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    for x in &samples {
        let v = h.eval(x).map_err(e)?;
        let n = v.value.norm(NormKind::Sup);
        worst = worst.max(n);
        worst_err = worst_err.max(v.error_bound);
        ensure(n <= gamma + v.error_bound, || {
            format!("|h(x)| = {n} exceeds {gamma} + {}", v.error_bound)
        })?;
        ensure(v.value.coord(1).abs() <= 1e-10 * 2.0, || {
            format!("h(x)_1 = {}", v.value.coord(1))
        })?;
    }
    Ok(format!(
        "eps = {eps:.5}; max |h(x)| = {worst:.4} <= 0.2 + {worst_err:.1e} at 1000 points"
    ))
}

fn identities() -> Outcome {
    let op = shift_half_two();
    let eps = admissible_eps(&op.constants(), 0.2).map_err(e)?;
    let policy = SeriesPolicy::with_tol(1e-10).map_err(e)?;
    let mut summary = Vec::new();
    for (label, beta) in [
        ("sine", sine(eps / 2.0, 2.0, (-3, 3))),
        ("zero", Perturbation::zero()),
    ] {
        let h = solve_h(&op, &beta, 0.2, &policy, 1e-9).map_err(e)?;
        let hp = solve_h_prime(&op, &beta, &policy).map_err(e)?;
        let space = SampleSpace::for_problem(&op, &sine(eps, 1.0, (-3, 3)));
        let samples = Sampler::new(4).ball_points(space, 500, 1.0, NormKind::Sup);
        let modulus = holder_modulus(&op, &beta);
        let inverse = verify_inverse(&h, &hp, &samples, &modulus, &modulus).map_err(e)?;
        let reports = [
            verify_conjugacy(&h, &samples).map_err(e)?,
            verify_conjugacy(&hp, &samples).map_err(e)?,
            inverse.backward_after_forward,
            inverse.forward_after_backward,
        ];
        for r in &reports {
            ensure(r.n_samples == 500 && r.passed, || {
                format!(
                    "{label}: {} residual {:.3e} vs bound {:.3e}",
                    r.identity, r.max_residual, r.certified_bound
                )
            })?;
            if beta.is_trivial() {
                ensure(r.max_residual == 0.0, || {
                    format!("beta = 0: {} residual {}", r.identity, r.max_residual)
                })?;
            }
        }
        let worst = reports.iter().map(|r| r.max_residual).fold(0.0, f64::max);
        summary.push(format!("{label}: max residual {worst:.1e}"));
    }
    Ok(format!(
        "4 identities x 500 samples within certified bounds; {}",
        summary.join(", ")
    ))
}

fn y_membership() -> Outcome {
    let op = shift_half_two();
    let tol = 1e-10;
    let eps = admissible_eps(&op.constants(), 0.2).map_err(e)?;
    let beta = sine(eps / 2.0, 2.0, (-3, 3));
    let policy = SeriesPolicy::with_tol(tol).map_err(e)?;
    let h = solve_h(&op, &beta, 0.2, &policy, 1e-9).map_err(e)?;
    let hp = solve_h_prime(&op, &beta, &policy).map_err(e)?;
    let limit = tol * op.restriction_norms().norm_t;
    let samples = Sampler::new(5).ball_points(
        SampleSpace::for_problem(&op, &beta),
        300,
        1.0,
        NormKind::Sup,
    );
    let mut worst: f64 = 0.0;
    for x in &samples {
        for map in [&h, &hp] {
            let v = map.eval(x).map_err(e)?;
            worst = worst.max(v.value.coord(1).abs());
            ensure(v.value.coord(1).abs() <= limit, || {
                format!("h(x)_1 = {}", v.value.coord(1))
            })?;
        }
    }
    Ok(format!(
        "max |h(x)_1| = {worst:.1e} <= {limit:.0e} at 600 evaluations"
    ))
}

fn truncation() -> Outcome {
    let shift = shift_half_two();
    let matrix = diag(&[0.5, 0.25, 3.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_ratio: f64 = 0.0;
    for (op, alpha, space) in [
        (
            &shift,
            sine(0.4, 1.5, (-2, 2)),
            SampleSpace::Sparse { lo: -6, hi: 6 },
        ),
        (&matrix, sine(0.4, 1.5, (0, 2)), SampleSpace::Dense(3)),
    ] {
        let mut sampler = Sampler::new(rng.gen());
        for k in [3usize, 8, 15] {
            let bound = tail_bound(&op.constants(), alpha.sup_bound(), k);
            for _ in 0..50 {
                let x = sampler.ball_point(space, 2.0, NormKind::Sup);
                let a = psi_inverse_eval_terms(op, &LinearOrbit(op), &alpha, &x, k).map_err(e)?;
                let b =
                    psi_inverse_eval_terms(op, &LinearOrbit(op), &alpha, &x, 2 * k).map_err(e)?;
                let d = a.value.distance(&b.value, NormKind::Sup).map_err(e)?;
                worst_ratio = worst_ratio.max(d / bound);
                ensure(d <= bound, || {
                    format!("K = {k}: change {d:.3e} exceeds tail {bound:.3e}")
                })?;
            }
        }
    }
    Ok(format!(
        "300 points; largest change / tail bound = {worst_ratio:.3}"
    ))
}

/// `sup_k ∏_{j=0}^{n} |w_{-k-j}|` over `0 <= k <= 500`, in logs.
fn log_sup_left(w: &WeightSpec, n: i64) -> f64 {
    (0..=500)
        .map(|k| (0..=n).map(|j| w.weight(-k - j).abs().ln()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `inf_k ∏_{j=0}^{n} |w_{k+j}|` over `1 <= k <= 500`, in logs.
fn log_inf_right(w: &WeightSpec, n: i64) -> f64 {
    (1..=500)
        .map(|k| (0..=n).map(|j| w.weight(k + j).abs().ln()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn shift_criterion() -> Outcome {
    let corpus: Vec<WeightSpec> = vec![
        WeightSpec::two_sided(0.5, 2.0),
        WeightSpec::two_sided(-0.5, -2.0),
        WeightSpec::two_sided(0.9, 1.1),
        WeightSpec::two_sided(0.1, 10.0),
        WeightSpec::constant_tails(1.0 / 3.0, 3.0, 5),
        WeightSpec::constant_tails(0.5, 2.0, -7),
        WeightSpec::new(-1, vec![3.0, 0.25], 0.5, 2.0),
        WeightSpec::new(-3, vec![5.0, 5.0, 5.0, 0.01], 0.8, 1.25),
        WeightSpec::new(2, vec![0.1, 0.2, 40.0], 0.6, 1.5),
        WeightSpec::new(
            -10,
            (0..20).map(|i| 0.5 + 0.2 * i as f64).collect(),
            0.7,
            4.0,
        ),
        WeightSpec::two_sided(1.0, 1.0),
        WeightSpec::two_sided(2.0, 2.0),
        WeightSpec::two_sided(0.5, 0.5),
        WeightSpec::two_sided(3.0, 3.0),
        WeightSpec::two_sided(1.5, 0.5),
        WeightSpec::two_sided(0.5, 1.0),
        WeightSpec::two_sided(1.0, 2.0),
        WeightSpec::new(-2, vec![0.01, 0.01], 1.2, 2.0),
        WeightSpec::new(0, vec![100.0], 0.9, 0.95),
        WeightSpec::new(-5, vec![2.0, -3.0, 0.5, 7.0, -0.2], -0.75, -1.5),
    ]
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(e)?;
    let n = 200;
    let (mut positives, mut worst) = (0, 0.0f64);
    for (i, w) in corpus.iter().enumerate() {
        let left = (log_sup_left(w, n + 1) - log_sup_left(w, n)).exp();
        let right = (log_inf_right(w, n + 1) - log_inf_right(w, n)).exp();
        let holds = left < 1.0 && right > 1.0;
        let c = check_shift_criterion(w);
        let dev = (c.left_margin - left)
            .abs()
            .max((c.right_margin - right).abs());
        worst = worst.max(dev);
        ensure(c.holds == holds && dev <= 1e-6, || {
            format!(
                "spec {i}: got ({}, {}, {}) want ({left}, {right}, {holds})",
                c.left_margin, c.right_margin, c.holds
            )
        })?;
        positives += holds as usize;
    }
    Ok(format!(
        "{} specs ({positives} hyperbolic), max margin deviation {worst:.1e}",
        corpus.len()
    ))
}

fn holder_certification() -> Outcome {
    let op = diag(&[0.5, 0.25, 3.0]);
    // |T|_M| = 1/2, |T^-1| = 4, |T^-1|_N| = 1/3, |T| = 3 in the sup norm
    let oracle = (2.0f64.ln() / 4.0f64.ln())
        .min(3.0f64.ln() / 3.0f64.ln())
        .min(1.0);
    let theta_max = theta_bound(&op).map_err(e)?;
    ensure(
        (theta_max - oracle).abs() <= 1e-12 && (oracle - 0.5).abs() <= 1e-15,
        || format!("theta_bound = {theta_max}, oracle {oracle}"),
    )?;

    let theta = theta_max / 2.0;
    let mut worst_c: f64 = 0.0;
    for eps in [0.001, 0.01, 0.05] {
        let b = 4.0 + eps * 16.0 / (1.0 - 4.0 * eps);
        let f = 3.0 + eps;
        let mut sum = 0.0;
        for k in 0..200 {
            sum += 2.0 * eps * 0.5f64.powi(k) * b.powf((k as f64 + 1.0) * theta);
        }
        for k in 1..200 {
            sum += 2.0 * eps * (1.0f64 / 3.0).powi(k) * f.powf((k as f64 - 1.0) * theta);
        }
        let c = holder_constant(&op, theta, eps).map_err(e)?;
        worst_c = worst_c.max((c - sum).abs());
        ensure((c - sum).abs() <= 1e-9, || {
            format!("eps = {eps}: C = {c}, partial sum {sum}")
        })?;
    }

    let eps = 0.02;
    let beta = make_builtin(
        &BuiltinPerturbation::Saturating {
            amplitude: eps,
            scale: 1.0,
            window: (0, 2),
        },
        NormKind::Sup,
    )
    .map_err(e)?;
    let hp = solve_h_prime(&op, &beta, &SeriesPolicy::with_tol(1e-12).map_err(e)?).map_err(e)?;
    let diameter = 0.9;
    let cert = HolderCertificate::new(&op, theta, eps, diameter).map_err(e)?;
    let pairs =
        Sampler::new(8).close_pairs(SampleSpace::Dense(3), 1000, 1.0, diameter, NormKind::Sup);
    let report = empirical_holder(&hp, &cert, &pairs).map_err(e)?;
    ensure(report.passed && report.n_pairs == 1000, || {
        format!(
            "{} of {} pairs exceed C = {}",
            report.n_exceeding, report.n_pairs, report.constant
        )
    })?;
    Ok(format!(
        "theta_bound = {theta_max}; |C - partial sum| <= {worst_c:.1e}; max ratio {:.4} <= C = {:.4} over 1000 pairs",
        report.max_ratio, report.constant
    ))
}

fn run_linearization(
    f: MapFn,
    p: f64,
    alpha_lip: LipschitzOnBall,
) -> Result<Linearization, String> {
    let problem = LinearizationProblem::new(
        f,
        StateVector::dense(vec![p]),
        one_d(0.5),
        0.5,
        0.25,
        alpha_lip,
    );
    linearize(&problem, &SeriesPolicy::with_tol(1e-12).map_err(e)?, 1e-12).map_err(e)
}

fn linearization() -> Outcome {
    let quad0: MapFn = Arc::new(|y: &StateVector| {
        let x = y.coord(0);
        StateVector::dense(vec![x / 2.0 + x * x])
    });
    let quad1: MapFn = Arc::new(|y: &StateVector| {
        let x = y.coord(0) - 1.0;
        StateVector::dense(vec![1.0 + x / 2.0 + x * x])
    });
    let affine0: MapFn = Arc::new(|y: &StateVector| StateVector::dense(vec![y.coord(0) / 2.0]));
    let affine1: MapFn =
        Arc::new(|y: &StateVector| StateVector::dense(vec![y.coord(0) / 2.0 + 0.5]));
    let quad_lip: LipschitzOnBall = Arc::new(|r: f64| 4.0 * r);
    let zero_lip: LipschitzOnBall = Arc::new(|_| 0.0);

    let mut notes = Vec::new();
    for (name, (f0, l0), (f1, l1)) in [
        ("x/2 + x^2", (&quad0, &quad_lip), (&quad1, &quad_lip)),
        ("x/2 + 1/2", (&affine0, &zero_lip), (&affine1, &zero_lip)),
    ] {
        let lin0 = run_linearization(f0.clone(), 0.0, l0.clone())?;
        let lin1 = run_linearization(f1.clone(), 1.0, l1.clone())?;
        ensure(lin0.u_radius == lin1.u_radius, || {
            format!("{name}: radii differ")
        })?;
        let mut sampler = Sampler::new(9);
        let (mut worst_res, mut worst_shift) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let x = sampler.ball_point(SampleSpace::Dense(1), lin0.u_radius, NormKind::Sup);
            let y = StateVector::dense(vec![1.0 + x.coord(0)]);
            for (lin, f, z) in [(&lin0, f0, &x), (&lin1, f1, &y)] {
                let (res, bound) = lin.residual(f, z).map_err(e)?;
                worst_res = worst_res.max(res);
                ensure(res <= bound, || {
                    format!("{name}: residual {res:.3e} > bound {bound:.3e} at {z:?}")
                })?;
            }
            let k0 = lin0.conjugacy(&x).map_err(e)?.value.coord(0);
            let k1 = lin1.conjugacy(&y).map_err(e)?.value.coord(0);
            worst_shift = worst_shift.max((k1 - k0).abs());
            ensure((k1 - k0).abs() <= 1e-10, || {
                format!("{name}: K_1(p + x) = {k1}, K_0(x) = {k0}")
            })?;
        }
        notes.push(format!(
            "{name}: r = {:.2e}, residual {worst_res:.1e}, shift {worst_shift:.1e}",
            lin0.u_radius
        ));
    }
    Ok(notes.join("; "))
}

fn eps_formula() -> Outcome {
    let k = |c: f64, d: f64, t: f64| Constants { c, t, d, n_max: 1 };
    let v = admissible_eps(&k(1.0, 1.0, 0.5), 0.9).map_err(e)?;
    ensure(v == 0.3, || format!("admissible_eps = {v:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let (c, d) = (rng.gen_range(1.0..50.0), rng.gen_range(1.0..10.0));
        let (t, g) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
        let base = admissible_eps(&k(c, d, t), g).map_err(e)?;
        let mut up = |x: f64, hi: f64| x + (hi - x) * rng.gen_range(0.01..1.0);
        let (c2, d2, t2, g2) = (c * 1.5, d * 1.5, up(t, 0.999), up(g, 0.999));
        let larger_c = admissible_eps(&k(c2, d, t), g).map_err(e)?;
        let larger_d = admissible_eps(&k(c, d2, t), g).map_err(e)?;
        let larger_t = admissible_eps(&k(c, d, t2), g).map_err(e)?;
        let larger_g = admissible_eps(&k(c, d, t), g2).map_err(e)?;
        ensure(
            larger_c < base && larger_d < base && larger_t < base && larger_g > base,
            || format!("not monotone at c={c}, d={d}, t={t}, gamma={g}"),
        )?;
    }
    Ok(format!(
        "eps(1, 1, 1/2, 0.9) = {v}; monotone at 1000 tuples"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [Criterion; 10] = [
        ("closed-form conjugacies", closed_form_conjugacies),
        ("inverse series", psi_inversion),
        ("distance to the identity", gamma_bound),
        ("conjugacy and inverse identities", identities),
        ("Y-membership", y_membership),
        ("truncation certificate", truncation),
        ("shift criterion", shift_criterion),
        ("Hölder certificate", holder_certification),
        ("linearization", linearization),
        ("eps formula", eps_formula),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
