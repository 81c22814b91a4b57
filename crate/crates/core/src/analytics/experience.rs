use crate::error::{Error, Result};

/// Linearly decaying weights over the past, skipping the latest two periods.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceIndex {
    pub t: usize,
    /// `weights[j]` is `w(t, j + 2)`.
    pub weights: Vec<f64>,
    pub value: f64,
}

/// `w(t, k) = (t - k) / sum_{k=2}^{t-1} (t - k)` for `k = 2..t-1`.
pub fn experience_weights(t: usize) -> Result<Vec<f64>> {
    if t < 4 {
        return Err(Error::InsufficientHistory(t));
    }
    let total = ((t - 2) * (t - 1) / 2) as f64;
    Ok((2..t).map(|k| (t - k) as f64 / total).collect())
}

/// Weighted share of past periods spent unemployed. `unemployed[j]` is the
/// indicator for period `j + 1`.
pub fn experience_index(unemployed: &[bool], t: usize) -> Result<f64> {
    Ok(ExperienceIndex::compute(unemployed, t)?.value)
}

impl ExperienceIndex {
    pub fn compute(unemployed: &[bool], t: usize) -> Result<Self> {
        let weights = experience_weights(t)?;
        if unemployed.len() < t - 2 {
            return Err(Error::InsufficientHistory(unemployed.len()));
        }
        let value = weights
            .iter()
            .enumerate()
            .filter(|&(j, _)| unemployed[t - (j + 2) - 1])
            .map(|(_, w)| w)
            .sum::<f64>()
            .min(1.0);
        Ok(ExperienceIndex { t, weights, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(experience_weights(4).unwrap(), vec![2.0 / 3.0, 1.0 / 3.0]);
        let w5 = experience_weights(5).unwrap();
        for (a, b) in w5.iter().zip([3.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(experience_weights(3), Err(Error::InsufficientHistory(3))));
    }

    #[test]
    fn index_edges() {
        assert_eq!(experience_index(&[true; 10], 10).unwrap(), 1.0);
        assert_eq!(experience_index(&[false; 10], 10).unwrap(), 0.0);
        // Only period t - 2 = 2 unemployed.
        let v = experience_index(&[false, true, false, false], 4).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        // The two latest periods carry no weight.
        assert_eq!(experience_index(&[false, false, true, true], 4).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn weights_normalized_and_decreasing(t in 4usize..400) {
            let w = experience_weights(t).unwrap();
            prop_assert_eq!(w.len(), t - 2);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.windows(2).all(|p| p[0] > p[1] && p[1] > 0.0));
        }

        #[test]
        fn index_is_monotone(hist in prop::collection::vec(any::<bool>(), 4..60), flip in 0usize..60) {
            let t = hist.len();
            let base = experience_index(&hist, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            let mut more = hist.clone();
            more[flip % t] = true;
            prop_assert!(experience_index(&more, t).unwrap() >= base);
        }
    }
}
