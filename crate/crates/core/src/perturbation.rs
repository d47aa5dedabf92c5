//! Bounded Lipschitz perturbations `β` with certified `‖β‖_∞` and `Lip(β)`
//! bounds, the radial cutoff that globalizes a local nonlinearity, and the
//! Picard solver for `S^{-1}` where `S = T + β`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::GhOperator;
use crate::state::{NormKind, StateVector};

pub type MapFn = Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>;

pub const DEFAULT_PICARD_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Analytic,
    /// Bounds estimated from `n_samples` random pairs; not a certificate.
    Sampled {
        n_samples: usize,
    },
}

/// A bounded Lipschitz map with bounds `‖β‖_∞ <= sup_bound` and
/// `Lip(β) <= lip_bound` in the ambient norm.
#[derive(Clone)]
pub struct Perturbation {
    map: MapFn,
    sup_bound: f64,
    lip_bound: f64,
    certification: Certification,
    window: Option<(i64, i64)>,
    label: String,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("label", &self.label)
            .field("sup_bound", &self.sup_bound)
            .field("lip_bound", &self.lip_bound)
            .field("certification", &self.certification)
            .field("window", &self.window)
            .finish()
    }
}

impl Perturbation {
    pub fn new(
        label: impl Into<String>,
        map: MapFn,
        sup_bound: f64,
        lip_bound: f64,
        certification: Certification,
    ) -> Result<Self> {
        for (name, v) in [("sup_bound", sup_bound), ("lip_bound", lip_bound)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        Ok(Perturbation {
            map,
            sup_bound,
            lip_bound,
            certification,
            window: None,
            label: label.into(),
        })
    }

    pub fn zero() -> Self {
        Perturbation {
            map: Arc::new(|x: &StateVector| x.zeros_like()),
            sup_bound: 0.0,
            lip_bound: 0.0,
            certification: Certification::Analytic,
            window: None,
            label: "zero".into(),
        }
    }

    /// Declares the index window that contains the support of every output.
    pub fn with_window(mut self, window: (i64, i64)) -> Self {
        self.window = Some(window);
        self
    }

    pub fn eval(&self, x: &StateVector) -> StateVector {
        (self.map)(x)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn certification(&self) -> Certification {
        self.certification
    }

    pub fn window(&self) -> Option<(i64, i64)> {
        self.window
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn map_fn(&self) -> MapFn {
        self.map.clone()
    }

    /// `x ↦ -β(x)`, same bounds.
    pub fn negated(&self) -> Perturbation {
        let inner = self.map.clone();
        Perturbation {
            map: Arc::new(move |x: &StateVector| inner(x).scale(-1.0)),
            label: format!("-({})", self.label),
            ..self.clone()
        }
    }

    /// `true` when the map is the zero map by construction.
    pub fn is_trivial(&self) -> bool {
        self.sup_bound == 0.0
    }

    /// Largest `‖β(x)‖` and `‖β(x) - β(x')‖ / ‖x - x'‖` over the given points
    /// and consecutive pairs of them.
    pub fn sampled_bounds(&self, points: &[StateVector], norm: NormKind) -> Result<(f64, f64)> {
        let mut sup: f64 = 0.0;
        let mut lip: f64 = 0.0;
        let values: Vec<StateVector> = points.iter().map(|p| self.eval(p)).collect();
        for v in &values {
            sup = sup.max(v.norm(norm));
        }
        for i in 1..points.len() {
            let dx = points[i].distance(&points[i - 1], norm)?;
            if dx > 0.0 {
                lip = lip.max(values[i].distance(&values[i - 1], norm)? / dx);
            }
        }
        Ok((sup, lip))
    }
}

/// Built-in perturbations, configurable from JSON:
///
/// ```json
/// {"kind": "sine", "amplitude": 0.05, "frequency": 2.0, "window": [-2, 2]}
/// {"kind": "saturating", "amplitude": 0.05, "scale": 1.0, "window": [0, 1]}
/// {"kind": "constant", "value": [0.1, 0.0]}
/// {"kind": "zero"}
/// ```
///
/// Window indices are coordinate positions for dense vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinPerturbation {
    Zero,
    Constant {
        value: StateVector,
    },
    Sine {
        amplitude: f64,
        frequency: f64,
        window: (i64, i64),
    },
    Saturating {
        amplitude: f64,
        scale: f64,
        window: (i64, i64),
    },
}

fn window_len(window: (i64, i64)) -> Result<usize> {
    if window.1 < window.0 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("empty window [{}, {}]", window.0, window.1),
        });
    }
    Ok((window.1 - window.0 + 1) as usize)
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {v}"),
        })
    }
}

/// Applies `f` to each coordinate whose index lies in `window`; the output is
/// supported in the window.
fn windowed(window: (i64, i64), f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> MapFn {
    Arc::new(move |x: &StateVector| match x {
        StateVector::Dense(v) => StateVector::Dense(
            v.iter()
                .enumerate()
                .map(|(i, &xi)| {
                    let i = i as i64;
                    if i >= window.0 && i <= window.1 {
                        f(xi)
                    } else {
                        0.0
                    }
                })
                .collect(),
        ),
        StateVector::Sparse(s) => {
            StateVector::sparse((window.0..=window.1).map(|i| (i, f(s.get(i)))))
        }
    })
}

/// Builds a built-in perturbation with bounds certified in `norm`.
pub fn make_builtin(kind: &BuiltinPerturbation, norm: NormKind) -> Result<Perturbation> {
    norm.validate()?;
    match kind {
        BuiltinPerturbation::Zero => Ok(Perturbation::zero()),
        BuiltinPerturbation::Constant { value } => {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "value",
                    reason: "constant perturbation must be finite".into(),
                });
            }
            let b = value.clone();
            let window = b.as_sparse().and_then(|s| s.support_bounds());
            let mut p = Perturbation::new(
                "constant",
                Arc::new(move |_: &StateVector| b.clone()),
                value.norm(norm),
                0.0,
                Certification::Analytic,
            )?;
            p.window = window;
            Ok(p)
        }
        &BuiltinPerturbation::Sine {
            amplitude,
            frequency,
            window,
        } => {
            check_finite("amplitude", amplitude)?;
            check_finite("frequency", frequency)?;
            let n = window_len(window)?;
            let (a, w) = (amplitude, frequency);
            let p = Perturbation::new(
                format!("sine(a={a}, w={w})"),
                windowed(window, move |x| a * (w * x).sin()),
                norm.of_constant_block(a, n),
                (a * w).abs(),
                Certification::Analytic,
            )?;
            Ok(p.with_window(window))
        }
        &BuiltinPerturbation::Saturating {
            amplitude,
            scale,
            window,
        } => {
            check_finite("amplitude", amplitude)?;
            check_finite("scale", scale)?;
            let n = window_len(window)?;
            let (a, s) = (amplitude, scale);
            let p = Perturbation::new(
                format!("saturating(a={a}, s={s})"),
                windowed(window, move |x| a * (s * x).tanh()),
                norm.of_constant_block(a, n),
                (a * s).abs(),
                Certification::Analytic,
            )?;
            Ok(p.with_window(window))
        }
    }
}

/// Radial cutoff profile: `χ(s) = 1` for `s <= r`, `0` for `s >= 2r`,
/// affine in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    r: f64,
}

impl CutoffProfile {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("cutoff radius must be positive and finite, got {r}"),
            });
        }
        Ok(CutoffProfile { r })
    }

    pub fn inner_radius(&self) -> f64 {
        self.r
    }

    pub fn outer_radius(&self) -> f64 {
        2.0 * self.r
    }

    pub fn chi(&self, s: f64) -> f64 {
        if s <= self.r {
            1.0
        } else if s >= 2.0 * self.r {
            0.0
        } else {
            2.0 - s / self.r
        }
    }
}

/// `β(x) = χ(‖x‖) α(x)`.
///
/// With `α(0) = 0` and `Lip(α|_{B(0, 2r)}) <= L` this gives
/// `‖β‖_∞ <= 2 r L`, `Lip(β) <= L + 2 r L / r = 3 L`, and `β = α` on the
/// ball of radius `r`.
pub fn cutoff(
    alpha: MapFn,
    alpha_lip_on_ball: f64,
    profile: CutoffProfile,
    norm: NormKind,
) -> Result<Perturbation> {
    if !(alpha_lip_on_ball >= 0.0 && alpha_lip_on_ball.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha_lip_on_ball",
            reason: format!("must be finite and non-negative, got {alpha_lip_on_ball}"),
        });
    }
    let r = profile.inner_radius();
    let map: MapFn = Arc::new(move |x: &StateVector| {
        let chi = profile.chi(x.norm(norm));
        if chi == 0.0 {
            x.zeros_like()
        } else if chi == 1.0 {
            alpha(x)
        } else {
            alpha(x).scale(chi)
        }
    });
    Perturbation::new(
        format!("cutoff(r={r})"),
        map,
        2.0 * r * alpha_lip_on_ball,
        3.0 * alpha_lip_on_ball,
        Certification::Analytic,
    )
}

/// Largest difference quotient of `f` over `pairs`; an estimate, not a bound.
pub fn estimate_lipschitz(
    f: &MapFn,
    pairs: &[(StateVector, StateVector)],
    norm: NormKind,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (x, y) in pairs {
        let dx = x.distance(y, norm)?;
        if dx > 0.0 {
            best = best.max(f(x).distance(&f(y), norm)? / dx);
        }
    }
    Ok(best)
}

/// `S x = T x + β(x)`.
pub fn apply_s(op: &GhOperator, beta: &Perturbation, x: &StateVector) -> Result<StateVector> {
    op.apply(x)?.add(&beta.eval(x))
}

/// Result of [`solve_s_inverse`].
#[derive(Debug, Clone)]
pub struct SInverse {
    pub x: StateVector,
    /// A-posteriori bound on `‖x - S^{-1} y‖`.
    pub error_bound: f64,
    /// Bound on `‖S x - y‖`.
    pub residual_bound: f64,
    pub iterations: usize,
}

/// `q = Lip(β) ‖T^{-1}‖`, the contraction factor of the `S^{-1}` iteration.
pub fn s_inverse_rate(op: &GhOperator, beta: &Perturbation) -> f64 {
    beta.lip_bound() * op.restriction_norms().norm_tinv
}

/// Solves `T x + β(x) = y` by the Picard iteration
/// `x_{k+1} = T^{-1}(y - β(x_k))`, `x_0 = T^{-1} y`.
///
/// Stops once `q/(1-q) ‖x_{k+1} - x_k‖ <= tol` (distance to the true
/// solution) and `Lip(β) ‖x_{k+1} - x_k‖ <= tol` (residual, since
/// `S x_{k+1} - y = β(x_{k+1}) - β(x_k)`).
pub fn solve_s_inverse(
    op: &GhOperator,
    beta: &Perturbation,
    y: &StateVector,
    tol: f64,
) -> Result<SInverse> {
    solve_s_inverse_capped(op, beta, y, tol, DEFAULT_PICARD_CAP)
}

pub fn solve_s_inverse_capped(
    op: &GhOperator,
    beta: &Perturbation,
    y: &StateVector,
    tol: f64,
    cap: usize,
) -> Result<SInverse> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let q = s_inverse_rate(op, beta);
    if !(q < 1.0) {
        return Err(Error::ContractionViolated(format!(
            "Lip(beta) * |T^-1| = {} * {} = {q} must be < 1 to invert S = T + beta",
            beta.lip_bound(),
            op.restriction_norms().norm_tinv
        )));
    }
    let norm = op.norm_kind();
    let gain = (q / (1.0 - q)).max(beta.lip_bound());
    let mut x = op.apply_inverse(y)?;
    let mut last = f64::INFINITY;
    for k in 1..=cap {
        let next = op.apply_inverse(&y.sub(&beta.eval(&x))?)?;
        let step = next.distance(&x, norm)?;
        x = next;
        if !step.is_finite() {
            return Err(Error::Overflow("inverting S".into()));
        }
        if gain * step <= tol {
            return Ok(SInverse {
                x,
                error_bound: q / (1.0 - q) * step,
                residual_bound: beta.lip_bound() * step,
                iterations: k,
            });
        }
        last = step;
    }
    Err(Error::IterationCap {
        cap,
        last_increment: last,
    })
}
