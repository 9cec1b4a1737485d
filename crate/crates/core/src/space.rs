//! Axis-aligned box spaces for observations and actions.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

use crate::{Error, Result};

/// A closed box `[low_i, high_i]` per component. Degenerate components
/// (`low_i == high_i`) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl BoxSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() {
            return Err(Error::config("box space must have at least one component"));
        }
        if low.len() != high.len() {
            return Err(Error::DimensionMismatch { expected: low.len(), got: high.len() });
        }
        for (i, (&lo, &hi)) in low.iter().zip(&high).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!("box bounds must be finite (component {i})")));
            }
            if lo > hi {
                return Err(Error::config(format!(
                    "box requires low <= high, got [{lo}, {hi}] at component {i}"
                )));
            }
        }
        Ok(BoxSpace { low, high })
    }

    /// One-dimensional box.
    pub fn scalar(low: f64, high: f64) -> Result<Self> {
        Self::new(alloc::vec![low], alloc::vec![high])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    /// Width of component `i`.
    pub fn width(&self, i: usize) -> f64 {
        self.high[i] - self.low[i]
    }

    /// Largest component width; used to scale default noise levels.
    pub fn max_width(&self) -> f64 {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// True when `x` has the right dimension and every component lies inside
    /// the closed box. Non-finite components are never contained.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(&v, (&lo, &hi))| v.is_finite() && lo <= v && v <= hi)
    }

    /// Componentwise clamp of `x` into the box.
    pub fn clip(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect())
    }

    /// In-place variant of [`clip`](Self::clip).
    pub fn clip_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.low.iter().zip(&self.high)) {
            *v = v.clamp(lo, hi);
        }
        Ok(())
    }

    /// Uniform sample from the box. Degenerate components return their bound.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(&lo, &hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_inverted_bounds() {
        let err = BoxSpace::scalar(1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn rejects_non_finite_bounds() {
        assert!(BoxSpace::scalar(0.0, f64::INFINITY).is_err());
        assert!(BoxSpace::scalar(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn clip_reports_dimension_mismatch() {
        let space = BoxSpace::new(alloc::vec![0.0, 0.0], alloc::vec![1.0, 2.0]).unwrap();
        let err = space.clip(&[0.5]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn degenerate_component_is_allowed_and_sampled_exactly() {
        let space = BoxSpace::scalar(0.0, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        assert_eq!(space.sample_uniform(&mut rng), alloc::vec![0.0]);
        assert!(space.contains(&[0.0]));
        assert!(!space.contains(&[1e-12]));
    }

    proptest! {
        #[test]
        fn clip_lands_inside_and_is_idempotent(
            lo in -10.0f64..10.0,
            span in 0.0f64..10.0,
            x in proptest::collection::vec(-1e6f64..1e6, 1..5),
        ) {
            let dims = x.len();
            let space = BoxSpace::new(
                alloc::vec![lo; dims],
                alloc::vec![lo + span; dims],
            ).unwrap();
            let clipped = space.clip(&x).unwrap();
            prop_assert!(space.contains(&clipped));
            prop_assert_eq!(space.clip(&clipped).unwrap(), clipped.clone());
        }

        #[test]
        fn uniform_samples_stay_inside(seed in 0u64..1000) {
            let space = BoxSpace::new(alloc::vec![-2.0, 0.0], alloc::vec![3.0, 0.5]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let s = space.sample_uniform(&mut rng);
                prop_assert!(space.contains(&s));
            }
        }
    }
}
