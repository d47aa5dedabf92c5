//! Deterministic sample points for verification runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::{Backend, GhOperator};
use crate::perturbation::Perturbation;
use crate::state::{NormKind, StateVector};

/// Extra indices on each side of a perturbation window for sparse samples.
pub const WINDOW_SLACK: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSpace {
    Dense(usize),
    /// Indices `lo..=hi`.
    Sparse {
        lo: i64,
        hi: i64,
    },
}

impl SampleSpace {
    /// Dense vectors of the operator's dimension, or sparse vectors on the
    /// perturbation window widened by [`WINDOW_SLACK`].
    pub fn for_problem(op: &GhOperator, beta: &Perturbation) -> Self {
        match op.backend() {
            Backend::Matrix(m) => SampleSpace::Dense(m.dim()),
            Backend::Shift(_) => {
                let (lo, hi) = beta.window().unwrap_or((0, 0));
                SampleSpace::Sparse {
                    lo: lo - WINDOW_SLACK,
                    hi: hi + WINDOW_SLACK,
                }
            }
        }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn raw(&mut self, space: SampleSpace) -> StateVector {
        match space {
            SampleSpace::Dense(n) => StateVector::dense(
                (0..n)
                    .map(|_| self.rng.gen_range(-1.0..=1.0))
                    .collect::<Vec<_>>(),
            ),
            SampleSpace::Sparse { lo, hi } => StateVector::sparse(
                (lo..=hi)
                    .map(|i| (i, self.rng.gen_range(-1.0..=1.0)))
                    .collect::<Vec<_>>(),
            ),
        }
    }

    /// A point with `‖x‖ <= radius`: a random direction scaled to a uniform
    /// fraction of the radius.
    pub fn ball_point(&mut self, space: SampleSpace, radius: f64, norm: NormKind) -> StateVector {
        let v = self.raw(space);
        let n = v.norm(norm);
        if n == 0.0 {
            return v;
        }
        let s: f64 = self.rng.gen_range(0.0..=1.0);
        v.scale(radius * s / n)
    }

    pub fn ball_points(
        &mut self,
        space: SampleSpace,
        count: usize,
        radius: f64,
        norm: NormKind,
    ) -> Vec<StateVector> {
        (0..count)
            .map(|_| self.ball_point(space, radius, norm))
            .collect()
    }

    /// Pairs `(x, x')` with `‖x‖ <= radius` and `0 < ‖x - x'‖ <= max_distance`.
    pub fn close_pairs(
        &mut self,
        space: SampleSpace,
        count: usize,
        radius: f64,
        max_distance: f64,
        norm: NormKind,
    ) -> Vec<(StateVector, StateVector)> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = self.ball_point(space, radius, norm);
            let d = self.ball_point(space, max_distance, norm);
            if d.norm(norm) == 0.0 {
                continue;
            }
            let y = x.add(&d).expect("same sample space");
            out.push((x, y));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let space = SampleSpace::Sparse { lo: -3, hi: 4 };
        let a = Sampler::new(42).ball_points(space, 50, 1.0, NormKind::Sup);
        let b = Sampler::new(42).ball_points(space, 50, 1.0, NormKind::Sup);
        assert_eq!(a, b);
        for p in &a {
            assert!(p.norm(NormKind::Sup) <= 1.0 + 1e-15);
            let (lo, hi) = p.as_sparse().unwrap().support_bounds().unwrap();
            assert!(lo >= -3 && hi <= 4);
        }
        let pairs =
            Sampler::new(1).close_pairs(SampleSpace::Dense(3), 20, 1.0, 0.5, NormKind::Lp(2.0));
        for (x, y) in &pairs {
            let d = x.distance(y, NormKind::Lp(2.0)).unwrap();
            assert!(d > 0.0 && d <= 0.5 + 1e-15);
        }
    }
}
