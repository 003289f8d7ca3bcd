use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChartError, Stencil};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Sample points, finite-difference stencil and the seed that produced them.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    points: Vec<Vec<f64>>,
    stencil: Stencil,
    seed: u64,
    radius: f64,
}

impl SamplePlan {
    pub const DEFAULT_SEED: u64 = 0x7715_7012;
    pub const DEFAULT_SAMPLES: usize = 50;
    pub const DEFAULT_RADIUS: f64 = 1.5;

    /// Shifted Halton points in the ball `|x| <= radius`.
    pub fn halton(dim: usize, count: usize, seed: u64) -> Result<Self, ChartError> {
        Self::halton_in_ball(dim, count, seed, Self::DEFAULT_RADIUS)
    }

    pub fn halton_in_ball(
        dim: usize,
        count: usize,
        seed: u64,
        radius: f64,
    ) -> Result<Self, ChartError> {
        if count == 0 {
            return Err(ChartError::EmptyPlan);
        }
        if dim == 0 || dim > PRIMES.len() {
            return Err(ChartError::PointDimension {
                expected: PRIMES.len(),
                got: dim,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
        let mut points = Vec::with_capacity(count);
        let mut i = 1u64;
        while points.len() < count {
            let x: Vec<f64> = (0..dim)
                .map(|d| {
                    let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                    radius * (2.0 * u - 1.0)
                })
                .collect();
            i += 1;
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius {
                points.push(x);
            }
        }
        Ok(Self {
            points,
            stencil: Stencil::default(),
            seed,
            radius,
        })
    }

    /// Explicit points, validated against the default radius.
    pub fn from_points(points: Vec<Vec<f64>>, stencil: Stencil) -> Result<Self, ChartError> {
        if points.is_empty() {
            return Err(ChartError::EmptyPlan);
        }
        let radius = Self::DEFAULT_RADIUS;
        for (index, p) in points.iter().enumerate() {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                return Err(ChartError::OutsideBall {
                    index,
                    norm,
                    radius,
                });
            }
        }
        Ok(Self {
            points,
            stencil,
            seed: 0,
            radius,
        })
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    /// The first `count` points.
    pub fn truncated(&self, count: usize) -> Self {
        let mut out = self.clone();
        out.points.truncate(count.max(1));
        out
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_points_stay_in_the_ball_and_are_reproducible() {
        let a = SamplePlan::halton(6, 50, 3).unwrap();
        let b = SamplePlan::halton(6, 50, 3).unwrap();
        let c = SamplePlan::halton(6, 50, 4).unwrap();
        assert_eq!(a.points(), b.points());
        assert_ne!(a.points(), c.points());
        assert!(a
            .points()
            .iter()
            .all(|p| p.iter().map(|v| v * v).sum::<f64>() <= 2.25));
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(4, 2), 0.125);
    }

    #[test]
    fn explicit_points_are_validated() {
        let err = SamplePlan::from_points(vec![vec![2.0, 0.0]], Stencil::default()).unwrap_err();
        assert!(matches!(err, ChartError::OutsideBall { index: 0, .. }));
        assert_eq!(
            SamplePlan::from_points(vec![], Stencil::default()).unwrap_err(),
            ChartError::EmptyPlan
        );
    }
}
