//! JSON-configured runs behind the `gh-conjugacy` binary.
//!
//! A run reads a [`RunConfig`], writes `<prefix>.report.json` and (for the
//! sampling commands) `<prefix>.samples.csv`, and maps the outcome to an exit
//! code: 0 when every certified check passes, 1 when a residual exceeds its
//! certified bound, 2 on invalid input or a failed precondition.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conjugacy::{
    solve_h, solve_h_prime, verify_conjugacy, verify_inverse, y_membership_residual, SeriesPolicy,
    VerificationReport,
};
use crate::error::{Error, Result};
use crate::linearize::{
    empirical_holder, holder_modulus, linearize, theta_bound, HolderCertificate,
    LinearizationProblem,
};
use crate::operator::{
    adapted_norm, admissible_eps, check_shift_criterion, Backend, GhOperator, OperatorDescriptor,
    OperatorOptions, DEFAULT_POWER_CAP, DEFAULT_SPECTRAL_TOL,
};
use crate::perturbation::{make_builtin, BuiltinPerturbation, MapFn, Perturbation};
use crate::sampling::{SampleSpace, Sampler};
use crate::state::{NormKind, StateVector};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GhCheck,
    Constants,
    Conjugate,
    Linearize,
    HolderProbe,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GhCheck => "gh-check",
            Command::Constants => "constants",
            Command::Conjugate => "conjugate",
            Command::Linearize => "linearize",
            Command::HolderProbe => "holder-probe",
        }
    }
}

/// Coordinatewise nonlinearity `x ↦ a x_i^2` or `x ↦ a x_i^3`, applied on
/// `window` (all coordinates of dense vectors when omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Quadratic {
        coefficient: f64,
        #[serde(default)]
        window: Option<(i64, i64)>,
    },
    Cubic {
        coefficient: f64,
        #[serde(default)]
        window: Option<(i64, i64)>,
    },
}

impl Nonlinearity {
    fn parts(&self) -> (u32, f64, Option<(i64, i64)>) {
        match *self {
            Nonlinearity::Quadratic {
                coefficient,
                window,
            } => (2, coefficient, window),
            Nonlinearity::Cubic {
                coefficient,
                window,
            } => (3, coefficient, window),
        }
    }

    /// The map `x ↦ a x_i^k` on the window.
    pub fn map(&self) -> MapFn {
        let (k, a, window) = self.parts();
        let inside = move |i: i64| window.is_none_or(|(lo, hi)| i >= lo && i <= hi);
        Arc::new(move |x: &StateVector| match x {
            StateVector::Dense(v) => StateVector::dense(
                v.iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        if inside(i as i64) {
                            a * xi.powi(k as i32)
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<_>>(),
            ),
            StateVector::Sparse(s) => StateVector::sparse(
                s.entries()
                    .iter()
                    .filter(|(i, _)| inside(*i))
                    .map(|&(i, xi)| (i, a * xi.powi(k as i32)))
                    .collect::<Vec<_>>(),
            ),
        })
    }

    /// Certified Lipschitz constant on the ball of radius `2r`: the
    /// derivative is diagonal with entries `k a x_i^{k-1}`, and
    /// `|x_i| <= ‖x‖` in every `ℓ^p` norm.
    pub fn lip_on_ball(&self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        let (k, a, _) = self.parts();
        Arc::new(move |r: f64| k as f64 * a.abs() * (2.0 * r).powi(k as i32 - 1))
    }
}

/// A JSON run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    pub operator: OperatorDescriptor,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub perturbation: Option<BuiltinPerturbation>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub picard_tol: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Nonlinearity for `linearize`.
    #[serde(default)]
    pub nonlinearity: Option<Nonlinearity>,
    /// Fixed point for `linearize` (origin when omitted).
    #[serde(default)]
    pub fixed_point: Option<StateVector>,
    #[serde(default)]
    pub cutoff_r: Option<f64>,
    /// Radius of the sampling ball.
    #[serde(default)]
    pub radius: Option<f64>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

/// Line (1-based) of the first occurrence of `"key"` in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

fn config_error(text: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match line_of_key(text, key) {
        Some(line) => Error::Config(format!("line {line}: `{key}`: {msg}")),
        None => Error::Config(format!("`{key}`: {msg}")),
    }
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct Run {
    pub command: Command,
    pub config: RunConfig,
    pub out: PathBuf,
    pub samples: usize,
    pub seed: u64,
    text: String,
}

impl Run {
    /// Parses `text`; parse errors carry serde's line and column.
    pub fn parse(command: Command, text: &str, overrides: &Overrides) -> Result<Run> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(c) = config.command {
            if c != command {
                return Err(config_error(
                    text,
                    "command",
                    format!(
                        "config is for `{}` but `{}` was requested",
                        c.name(),
                        command.name()
                    ),
                ));
            }
        }
        let out = overrides
            .out
            .clone()
            .or_else(|| config.output.clone())
            .ok_or_else(|| Error::Config("no output prefix: pass --out or set `output`".into()))?;
        let run = Run {
            command,
            samples: overrides
                .samples
                .or(config.samples)
                .unwrap_or(DEFAULT_SAMPLES),
            seed: overrides.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
            config,
            out,
            text: text.to_string(),
        };
        run.validate()?;
        Ok(run)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let text = &self.text;
        c.norm
            .validate()
            .map_err(|e| config_error(text, "norm", e))?;
        if let Some(g) = c.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(config_error(
                    text,
                    "gamma",
                    format!("must lie in (0, 1), got {g}"),
                ));
            }
        }
        for (key, v) in [
            ("tol", c.tol),
            ("picard_tol", c.picard_tol),
            ("cutoff_r", c.cutoff_r),
            ("radius", c.radius),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_error(
                        text,
                        key,
                        format!("must be positive and finite, got {v}"),
                    ));
                }
            }
        }
        if let Some(theta) = c.theta {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(config_error(
                    text,
                    "theta",
                    format!("must lie in (0, 1], got {theta}"),
                ));
            }
        }
        let needs_gamma = matches!(self.command, Command::Conjugate | Command::Linearize);
        if needs_gamma && c.gamma.is_none() {
            return Err(config_error(
                text,
                "gamma",
                format!("required by `{}`", self.command.name()),
            ));
        }
        if matches!(self.command, Command::Conjugate | Command::HolderProbe)
            && c.perturbation.is_none()
        {
            return Err(config_error(
                text,
                "perturbation",
                format!("required by `{}`", self.command.name()),
            ));
        }
        if self.command == Command::Linearize && c.nonlinearity.is_none() {
            return Err(config_error(
                text,
                "nonlinearity",
                "required by `linearize`",
            ));
        }
        if self.samples == 0
            && matches!(
                self.command,
                Command::Conjugate | Command::Linearize | Command::HolderProbe
            )
        {
            return Err(Error::Config("`samples` must be at least 1".into()));
        }
        Ok(())
    }

    fn options(&self) -> OperatorOptions {
        OperatorOptions {
            norm: self.config.norm,
            t: self.config.t,
            power_cap: DEFAULT_POWER_CAP,
            spectral_tol: DEFAULT_SPECTRAL_TOL,
        }
    }

    fn operator(&self) -> Result<GhOperator> {
        self.config
            .operator
            .build(&self.options())
            .map_err(|e| config_error(&self.text, "operator", e))
    }

    fn perturbation(&self) -> Result<Perturbation> {
        match &self.config.perturbation {
            Some(p) => make_builtin(p, self.config.norm)
                .map_err(|e| config_error(&self.text, "perturbation", e)),
            None => Ok(Perturbation::zero()),
        }
    }

    fn policy(&self) -> Result<SeriesPolicy> {
        SeriesPolicy::with_tol(self.config.tol.unwrap_or(1e-10))
    }

    fn picard_tol(&self) -> f64 {
        self.config.picard_tol.unwrap_or(1e-9)
    }

    fn radius(&self) -> f64 {
        self.config.radius.unwrap_or(1.0)
    }

    fn sample_space(&self, op: &GhOperator, beta: &Perturbation) -> SampleSpace {
        SampleSpace::for_problem(op, beta)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub point_id: usize,
    pub residual: f64,
    pub certified_bound: f64,
    pub y_membership_residual: f64,
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: serde_json::Value,
    pub rows: Option<Vec<SampleRow>>,
    pub passed: bool,
}

fn report_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>.report.json` and, when present, `<prefix>.samples.csv`.
pub fn write_outputs(prefix: &Path, outcome: &Outcome) -> Result<()> {
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut json = serde_json::to_string_pretty(&outcome.report)?;
    json.push('\n');
    fs::write(report_path(prefix, ".report.json"), json)?;
    if let Some(rows) = &outcome.rows {
        let mut w = csv::Writer::from_path(report_path(prefix, ".samples.csv"))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn worst_rows(reports: &[&VerificationReport], y: &[f64]) -> Vec<SampleRow> {
    let n = reports.first().map_or(0, |r| r.per_point.len());
    (0..n)
        .map(|i| {
            let mut best = &reports[0].per_point[i];
            let ratio = |p: &crate::conjugacy::PointResidual| {
                if p.residual == 0.0 {
                    0.0
                } else {
                    p.residual / p.certified_bound
                }
            };
            for r in &reports[1..] {
                if ratio(&r.per_point[i]) > ratio(best) {
                    best = &r.per_point[i];
                }
            }
            SampleRow {
                point_id: i,
                residual: best.residual,
                certified_bound: best.certified_bound,
                y_membership_residual: y[i],
            }
        })
        .collect()
}

fn gh_check(run: &Run) -> Result<Outcome> {
    let desc = &run.config.operator;
    let report = match desc {
        OperatorDescriptor::Shift { .. } => {
            let weights = desc
                .weights()
                .map_err(|e| config_error(&run.text, "operator", e))?;
            let criterion = check_shift_criterion(&weights);
            serde_json::json!({
                "command": "gh-check",
                "backend": "shift",
                "holds": criterion.holds,
                "left_margin": criterion.left_margin,
                "right_margin": criterion.right_margin,
            })
        }
        OperatorDescriptor::Matrix { .. } => match run.operator() {
            Ok(op) => {
                let (rho_m, rho_n) = op.spectral_radii();
                let moduli: Vec<f64> = match op.backend() {
                    Backend::Matrix(m) => m.eigenvalues().iter().map(|l| l.norm()).collect(),
                    Backend::Shift(_) => Vec::new(),
                };
                serde_json::json!({
                    "command": "gh-check",
                    "backend": "matrix",
                    "holds": true,
                    "eigenvalue_moduli": moduli,
                    "stable_spectral_radius": rho_m,
                    "unstable_inverse_spectral_radius": rho_n,
                })
            }
            Err(e) => serde_json::json!({
                "command": "gh-check",
                "backend": "matrix",
                "holds": false,
                "reason": e.to_string(),
            }),
        },
    };
    let holds = report["holds"].as_bool().unwrap_or(false);
    Ok(Outcome {
        report,
        rows: None,
        passed: holds,
    })
}

fn constants(run: &Run) -> Result<Outcome> {
    let op = run.operator()?;
    let k = op.constants();
    let eps = match run.config.gamma {
        Some(g) => Some(admissible_eps(&k, g)?),
        None => None,
    };
    let report = serde_json::json!({
        "command": "constants",
        "c": k.c,
        "t": k.t,
        "d": k.d,
        "n_max": k.n_max,
        "gamma": run.config.gamma,
        "eps": eps,
        "series_gain": k.series_gain(),
        "norms": op.restriction_norms(),
        "spectral_radii": op.spectral_radii(),
        "adapted_norm_equivalence": adapted_norm(&op, k.t)?.equivalence(),
    });
    Ok(Outcome {
        report,
        rows: None,
        passed: true,
    })
}

fn conjugate(run: &Run) -> Result<Outcome> {
    let op = run.operator()?;
    let beta = run.perturbation()?;
    let gamma = run.config.gamma.expect("validated");
    let policy = run.policy()?;
    let fwd = solve_h(&op, &beta, gamma, &policy, run.picard_tol())?;
    let bwd = solve_h_prime(&op, &beta, &policy)?;
    let space = run.sample_space(&op, &beta);
    let samples =
        Sampler::new(run.seed).ball_points(space, run.samples, run.radius(), op.norm_kind());

    let forward = verify_conjugacy(&fwd, &samples)?;
    let backward = verify_conjugacy(&bwd, &samples)?;
    let modulus = holder_modulus(&op, &beta);
    let inverse = verify_inverse(&fwd, &bwd, &samples, &modulus, &modulus)?;
    let mut max_h: f64 = 0.0;
    let mut max_h_err: f64 = 0.0;
    let mut y = Vec::with_capacity(samples.len());
    for x in &samples {
        let h = fwd.eval(x)?;
        let hp = bwd.eval(x)?;
        max_h = max_h.max(h.value.norm(op.norm_kind()));
        max_h_err = max_h_err.max(h.error_bound);
        y.push(y_membership_residual(&op, &h.value)?.max(y_membership_residual(&op, &hp.value)?));
    }
    let passed = forward.passed && backward.passed && inverse.passed();
    let rows = worst_rows(
        &[
            &forward,
            &backward,
            &inverse.backward_after_forward,
            &inverse.forward_after_backward,
        ],
        &y,
    );
    let k = op.constants();
    let report = serde_json::json!({
        "command": "conjugate",
        "n_samples": samples.len(),
        "seed": run.seed,
        "gamma": gamma,
        "eps": admissible_eps(&k, gamma)?,
        "constants": k,
        "beta": {"label": beta.label(), "sup_bound": beta.sup_bound(), "lip_bound": beta.lip_bound()},
        "series_terms": fwd.terms(),
        "picard_depth": fwd.depth(),
        "contraction_rate": fwd.contraction_rate(),
        "h_sup_bound": fwd.sup_bound(),
        "max_h_norm": max_h,
        "max_h_error": max_h_err,
        "modulus": modulus,
        "conjugacy": forward,
        "backward_conjugacy": backward,
        "inverse": inverse,
        "passed": passed,
    });
    Ok(Outcome {
        report,
        rows: Some(rows),
        passed,
    })
}

fn linearize_cmd(run: &Run) -> Result<Outcome> {
    let op = run.operator()?;
    let nonlinearity = run.config.nonlinearity.clone().expect("validated");
    let p = run
        .config
        .fixed_point
        .clone()
        .unwrap_or_else(|| op.zero_vector());
    op.check_vector(&p)
        .map_err(|e| config_error(&run.text, "fixed_point", e))?;
    let n = nonlinearity.map();
    let (t, pp) = (op.clone(), p.clone());
    // F(y) = p + T(y - p) + N(y - p)
    let f: MapFn = Arc::new(move |y: &StateVector| {
        let x = y.sub(&pp).expect("backend checked");
        pp.add(&t.apply(&x).expect("backend checked"))
            .and_then(|v| v.add(&n(&x)))
            .expect("backend checked")
    });
    let gamma = run.config.gamma.expect("validated");
    let mut problem = LinearizationProblem::new(
        f.clone(),
        p.clone(),
        op.clone(),
        gamma,
        run.config.cutoff_r.unwrap_or(0.25),
        nonlinearity.lip_on_ball(),
    );
    problem.theta = run.config.theta;
    let lin = linearize(&problem, &run.policy()?, run.picard_tol())?;

    let space = match op.backend() {
        Backend::Matrix(m) => SampleSpace::Dense(m.dim()),
        Backend::Shift(_) => {
            let (lo, hi) = match nonlinearity {
                Nonlinearity::Quadratic { window, .. } | Nonlinearity::Cubic { window, .. } => {
                    window.unwrap_or((0, 0))
                }
            };
            SampleSpace::Sparse {
                lo: lo - crate::sampling::WINDOW_SLACK,
                hi: hi + crate::sampling::WINDOW_SLACK,
            }
        }
    };
    let mut sampler = Sampler::new(run.seed);
    let mut rows = Vec::with_capacity(run.samples);
    for id in 0..run.samples {
        let y = p.add(&sampler.ball_point(space, lin.u_radius, op.norm_kind()))?;
        let (residual, bound) = lin.residual(&f, &y)?;
        let ky = lin.backward.eval(&y.sub(&p)?)?;
        rows.push(SampleRow {
            point_id: id,
            residual,
            certified_bound: bound,
            y_membership_residual: y_membership_residual(&op, &ky.value)?,
        });
    }
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let max_bound = rows.iter().map(|r| r.certified_bound).fold(0.0, f64::max);
    let n_exceeding = rows
        .iter()
        .filter(|r| !(r.residual <= r.certified_bound))
        .count();
    let passed = n_exceeding == 0;
    let report = serde_json::json!({
        "command": "linearize",
        "u_radius": lin.u_radius,
        "theta": lin.cert.theta,
        "C": lin.cert.constant,
        "eps": lin.eps,
        "gamma": lin.gamma,
        "alpha_lip": lin.alpha_lip,
        "residual_stats": {
            "max_residual": max_residual,
            "certified_bound": max_bound,
            "n_samples": rows.len(),
            "n_exceeding": n_exceeding,
        },
        "passed": passed,
    });
    Ok(Outcome {
        report,
        rows: Some(rows),
        passed,
    })
}

fn holder_probe(run: &Run) -> Result<Outcome> {
    let op = run.operator()?;
    let beta = run.perturbation()?;
    let bwd = solve_h_prime(&op, &beta, &run.policy()?)?;
    let theta = match run.config.theta {
        Some(t) => t,
        None => theta_bound(&op)? / 2.0,
    };
    let eps = beta.sup_bound().max(beta.lip_bound());
    let diameter = 0.5;
    let cert = HolderCertificate::new(&op, theta, eps, diameter)?;
    let space = run.sample_space(&op, &beta);
    let pairs = Sampler::new(run.seed).close_pairs(
        space,
        run.samples,
        run.radius(),
        diameter,
        op.norm_kind(),
    );
    let report_h = empirical_holder(&bwd, &cert, &pairs)?;

    let kind = op.norm_kind();
    let mut rows = Vec::with_capacity(pairs.len());
    for (id, (x, y)) in pairs.iter().enumerate() {
        let hx = bwd.eval(x)?;
        let hy = bwd.eval(y)?;
        let scale = x.distance(y, kind)?.powf(theta);
        rows.push(SampleRow {
            point_id: id,
            residual: hx.value.distance(&hy.value, kind)? / scale,
            certified_bound: cert.constant + (hx.error_bound + hy.error_bound) / scale,
            y_membership_residual: y_membership_residual(&op, &hx.value)?,
        });
    }
    let passed = report_h.passed;
    let report = serde_json::json!({
        "command": "holder-probe",
        "theta_bound": theta_bound(&op)?,
        "certificate": cert,
        "empirical": report_h,
        "passed": passed,
    });
    Ok(Outcome {
        report,
        rows: Some(rows),
        passed,
    })
}

/// Executes a parsed run without writing anything.
pub fn execute(run: &Run) -> Result<Outcome> {
    match run.command {
        Command::GhCheck => gh_check(run),
        Command::Constants => constants(run),
        Command::Conjugate => conjugate(run),
        Command::Linearize => linearize_cmd(run),
        Command::HolderProbe => holder_probe(run),
    }
}

/// Reads the config, runs the command, writes the outputs and returns the
/// exit code. Diagnostics go to stderr.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> i32 {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return EXIT_INVALID;
        }
    };
    let parsed = match Run::parse(command, &text, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return EXIT_INVALID;
        }
    };
    match execute(&parsed) {
        Ok(outcome) => {
            if let Err(e) = write_outputs(&parsed.out, &outcome) {
                eprintln!("error: writing outputs: {e}");
                return EXIT_INVALID;
            }
            match (command, outcome.passed) {
                (_, true) => EXIT_PASS,
                (Command::GhCheck, false) => EXIT_INVALID,
                (_, false) => EXIT_RESIDUAL,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
