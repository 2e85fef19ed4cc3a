//! Per-frame building blocks: static AU score, relative change and direction
//! between consecutive feature vectors, and the windowed mean of their product.

use std::collections::VecDeque;

use super::EngineError;
use crate::model::{AuProfile, FeatureSet, PerFeature, AU_LEVEL_MAX};

/// Sum of `exp(level)` over the profile AUs. `au_levels` must list the
/// profile's AUs in the profile's (ascending) order.
pub fn static_score(au_levels: &[f64], profile: &AuProfile) -> Result<f64, EngineError> {
    if au_levels.len() != profile.len() {
        return Err(EngineError::Shape {
            expected: profile.len(),
            found: au_levels.len(),
        });
    }
    let mut total = 0.0;
    for (&au, &level) in profile.au_ids.iter().zip(au_levels) {
        if !(0.0..=AU_LEVEL_MAX).contains(&level) {
            return Err(EngineError::Domain { au, level });
        }
        total += level.exp();
    }
    Ok(total)
}

/// Unbiased sample variance over the components of `v` (two-pass).
/// Callers guarantee `v.len() >= 2`.
pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn check_shapes(prev: &[f64], next: &[f64]) -> Result<(), EngineError> {
    if prev.len() != next.len() {
        return Err(EngineError::Shape {
            expected: prev.len(),
            found: next.len(),
        });
    }
    Ok(())
}

/// Variance of the element-wise difference relative to the summed variances
/// of the two vectors; 0 when both vectors have zero variance.
pub fn relative_change(prev: &[f64], next: &[f64]) -> Result<f64, EngineError> {
    check_shapes(prev, next)?;
    if prev.len() < 2 {
        return Err(EngineError::Degenerate { len: prev.len() });
    }
    let spread = sample_variance(prev) + sample_variance(next);
    if spread == 0.0 {
        return Ok(0.0);
    }
    let diff: Vec<f64> = next.iter().zip(prev).map(|(b, a)| b - a).collect();
    Ok(sample_variance(&diff) / spread)
}

/// +1 when the summed displacement `next - prev` is non-negative, else -1.
pub fn direction_sign(prev: &[f64], next: &[f64]) -> Result<i8, EngineError> {
    check_shapes(prev, next)?;
    let displacement: f64 = next.iter().zip(prev).map(|(b, a)| b - a).sum();
    Ok(if displacement >= 0.0 { 1 } else { -1 })
}

/// Ring buffer over the last `capacity` products. The mean is recomputed
/// from the buffered values (oldest first) on every push, so it matches a
/// from-scratch mean over the same slice bit for bit.
#[derive(Debug, Clone)]
pub struct MovingWindow {
    capacity: usize,
    values: VecDeque<f64>,
}

impl MovingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        Self {
            capacity,
            values: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, value: f64) -> f64 {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(value);
        self.mean()
    }

    /// Mean of the buffered values; 0 while empty.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Streaming dynamics for one sequence: one trailing window per feature set.
#[derive(Debug, Clone)]
pub struct DynamicsState {
    windows: PerFeature<MovingWindow>,
}

impl DynamicsState {
    pub fn new(window: usize) -> Self {
        Self {
            windows: PerFeature(std::array::from_fn(|_| MovingWindow::new(window))),
        }
    }

    /// Appends a product `P = direction * relative_change` and returns the
    /// feature set's current windowed mean.
    pub fn push_product(&mut self, fs: FeatureSet, product: f64) -> f64 {
        self.windows[fs].push(product)
    }

    pub fn mean(&self, fs: FeatureSet) -> f64 {
        self.windows[fs].mean()
    }

    pub fn buffered(&self, fs: FeatureSet) -> usize {
        self.windows[fs].len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn static_score_examples() {
        assert_eq!(static_score(&[0.0; 6], &AuProfile::pain()).unwrap(), 6.0);
        let single = AuProfile::new("brow", [4]).unwrap();
        assert_eq!(static_score(&[5.0], &single).unwrap(), 5f64.exp());
        let s = static_score(&[5.0, 0.0, 0.0, 0.0, 0.0, 0.0], &AuProfile::pain()).unwrap();
        assert!((s - 153.413_159_102_576_6).abs() < 1e-12);
    }

    #[test]
    fn static_score_domain_and_shape() {
        let p = AuProfile::pain();
        assert!(matches!(
            static_score(&[0.0, 5.5, 0.0, 0.0, 0.0, 0.0], &p),
            Err(EngineError::Domain { au: 6, .. })
        ));
        assert!(matches!(static_score(&[0.0; 5], &p), Err(EngineError::Shape { .. })));
        assert!(static_score(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], &p).is_err());
    }

    #[test]
    fn relative_change_examples() {
        assert_eq!(relative_change(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(relative_change(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(relative_change(&[0.0, 0.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(relative_change(&[1.0], &[2.0]), Err(EngineError::Degenerate { len: 1 })));
        assert!(matches!(relative_change(&[1.0, 2.0], &[2.0]), Err(EngineError::Shape { .. })));
    }

    #[test]
    fn direction_examples() {
        assert_eq!(direction_sign(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 1);
        assert_eq!(direction_sign(&[3.0], &[1.0]).unwrap(), -1);
        assert_eq!(direction_sign(&[0.5, 7.0], &[0.5, 7.0]).unwrap(), 1);
        assert!(direction_sign(&[1.0], &[]).is_err());
    }

    #[test]
    fn window_examples() {
        let mut w = MovingWindow::new(3);
        w.push(1.0);
        w.push(-1.0);
        assert!((w.push(0.5) - 1.0 / 6.0).abs() < 1e-15);

        let mut w = MovingWindow::new(3);
        assert_eq!(w.push(2.0), 2.0);

        let mut w = MovingWindow::new(2);
        w.push(1.0);
        w.push(1.0);
        assert_eq!(w.push(-1.0), 0.0);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn state_keeps_sets_apart() {
        let mut st = DynamicsState::new(2);
        st.push_product(FeatureSet::L, 4.0);
        assert_eq!(st.push_product(FeatureSet::I, 1.0), 1.0);
        assert_eq!(st.mean(FeatureSet::L), 4.0);
        assert_eq!(st.mean(FeatureSet::Gl), 0.0);
        assert_eq!(st.buffered(FeatureSet::Ho), 0);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn static_score_is_strictly_monotone(levels in prop::collection::vec(0.0f64..4.9, 6), idx in 0usize..6, bump in 0.01f64..0.1) {
            let p = AuProfile::pain();
            let base = static_score(&levels, &p).unwrap();
            let mut raised = levels.clone();
            raised[idx] += bump;
            prop_assert!(static_score(&raised, &p).unwrap() > base);
        }

        #[test]
        fn relative_change_is_symmetric_and_non_negative((a, b) in vec_pair()) {
            let ab = relative_change(&a, &b).unwrap();
            let ba = relative_change(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        }

        #[test]
        fn constant_shift_has_no_relative_change(a in prop::collection::vec(-100.0f64..100.0, 2..40), c in -50i32..50) {
            let shifted: Vec<f64> = a.iter().map(|x| x + f64::from(c)).collect();
            prop_assert!(relative_change(&a, &shifted).unwrap() <= 1e-12);
        }

        #[test]
        fn direction_is_antisymmetric((a, b) in vec_pair()) {
            let forward: f64 = b.iter().zip(&a).map(|(x, y)| x - y).sum();
            let backward: f64 = a.iter().zip(&b).map(|(x, y)| x - y).sum();
            prop_assume!(forward != 0.0 && backward != 0.0);
            prop_assert_eq!(direction_sign(&a, &b).unwrap(), -direction_sign(&b, &a).unwrap());
        }
    }
}
