use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pass/fail label from the raters' 1-5 scores: pass iff the mean score is at least 3.
pub fn binarize_labels(rater_scores: &[i64]) -> Result<u8> {
    if rater_scores.is_empty() {
        return Err(Error::Malformed("no rater scores".into()));
    }
    if let Some(&bad) = rater_scores.iter().find(|s| !(1..=5).contains(*s)) {
        return Err(Error::InvalidScore(bad));
    }
    // mean >= 3  <=>  sum >= 3n, kept in integers
    let sum: i64 = rater_scores.iter().sum();
    Ok(u8::from(sum >= 3 * rater_scores.len() as i64))
}

/// Per-class loss weights inversely proportional to class frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    /// Indexed by label: `weights[0]` for fail, `weights[1]` for pass.
    pub weights: [f64; 2],
}

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights { weights: [1.0, 1.0] }
    }

    pub fn get(&self, label: u8) -> f64 {
        self.weights[usize::from(label)]
    }
}

/// `weight[c] = N / (2 * count[c])`.
pub fn class_weights(labels: &[u8]) -> Result<ClassWeights> {
    let mut counts = [0usize; 2];
    for &label in labels {
        match label {
            0 | 1 => counts[usize::from(label)] += 1,
            other => return Err(Error::Malformed(format!("label {other} is not binary"))),
        }
    }
    if counts.contains(&0) {
        return Err(Error::DegenerateLabels(format!(
            "class weights need both classes, got counts {counts:?}"
        )));
    }
    let n = labels.len() as f64;
    Ok(ClassWeights {
        weights: counts.map(|c| n / (2.0 * c as f64)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binarization_threshold() {
        assert_eq!(binarize_labels(&[3]).unwrap(), 1);
        assert_eq!(binarize_labels(&[5]).unwrap(), 1);
        assert_eq!(binarize_labels(&[2]).unwrap(), 0);
        assert_eq!(binarize_labels(&[1]).unwrap(), 0);
        assert_eq!(binarize_labels(&[2, 3]).unwrap(), 0);
        assert_eq!(binarize_labels(&[2, 4]).unwrap(), 1);
    }

    #[test]
    fn binarization_rejects_bad_scores() {
        assert!(matches!(binarize_labels(&[0]), Err(Error::InvalidScore(0))));
        assert!(matches!(binarize_labels(&[3, 6]), Err(Error::InvalidScore(6))));
        assert!(binarize_labels(&[]).is_err());
    }

    fn labels(neg: usize, pos: usize) -> Vec<u8> {
        std::iter::repeat_n(0, neg).chain(std::iter::repeat_n(1, pos)).collect()
    }

    #[test]
    fn balanced_weights() {
        assert_eq!(class_weights(&labels(5, 5)).unwrap().weights, [1.0, 1.0]);
    }

    #[test]
    fn imbalanced_weights() {
        let w = class_weights(&labels(15, 5)).unwrap();
        assert!((w.weights[0] - 20.0 / 30.0).abs() < 1e-12);
        assert!((w.weights[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn references_prevalence_weight() {
        // 269 articles at ~13.5% positives
        let pos = 36;
        let w = class_weights(&labels(269 - pos, pos)).unwrap();
        assert!((3.6..=3.8).contains(&w.weights[1]), "{}", w.weights[1]);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(class_weights(&labels(4, 0)), Err(Error::DegenerateLabels(_))));
    }

    proptest! {
        #[test]
        fn weighted_counts_are_equal(neg in 1usize..500, pos in 1usize..500) {
            let w = class_weights(&labels(neg, pos)).unwrap();
            let a = w.weights[0] * neg as f64;
            let b = w.weights[1] * pos as f64;
            let n = (neg + pos) as f64;
            prop_assert!(((a - b) / a).abs() < 1e-9);
            prop_assert!(((a + b - n) / n).abs() < 1e-9);
        }
    }
}
