use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, Metrics};
use crate::error::{Error, Result};

/// Confidence reported at full coverage: the floor of a binary argmax.
pub const FULL_COVERAGE_THRESHOLD: f64 = 0.5;

/// A scored prediction for selective evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub predicted: u8,
    pub truth: u8,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub coverage: f64,
    pub threshold: f64,
    /// `None` when nothing clears the threshold.
    pub metrics: Option<Metrics>,
    pub n_covered: usize,
    pub n_abstained: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: usize,
    pub rows: Vec<CoverageRow>,
}

/// Nearest-rank threshold for keeping a `coverage` share of `sorted` (ascending)
/// confidences under a `>=` rule.
fn threshold(sorted: &[f64], coverage: f64) -> f64 {
    let n = sorted.len();
    let abstain = (((1.0 - coverage) * n as f64) + 1e-9).floor() as usize;
    if abstain == 0 {
        FULL_COVERAGE_THRESHOLD
    } else {
        sorted[abstain.min(n - 1)]
    }
}

/// Metrics on the predictions confident enough for each coverage level.
pub fn coverage_analysis(predictions: &[Scored], levels: &[f64]) -> Result<CoverageReport> {
    for p in predictions {
        if !(0.5..=1.0).contains(&p.confidence) {
            return Err(Error::InvalidProbability(p.confidence));
        }
    }
    for &c in levels {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidConfig(format!("coverage level {c} outside (0, 1]")));
        }
    }
    let mut sorted: Vec<f64> = predictions.iter().map(|p| p.confidence).collect();
    sorted.sort_by(f64::total_cmp);
    let rows = levels
        .iter()
        .map(|&coverage| {
            let threshold = if sorted.is_empty() {
                FULL_COVERAGE_THRESHOLD
            } else {
                threshold(&sorted, coverage)
            };
            let kept = predictions.iter().filter(|p| p.confidence >= threshold);
            let counts = ConfusionCounts::from_pairs(kept.map(|p| (p.predicted, p.truth)));
            let n_covered = counts.total();
            CoverageRow {
                coverage,
                threshold,
                metrics: (n_covered > 0).then(|| counts.metrics()),
                n_covered,
                n_abstained: predictions.len() - n_covered,
            }
        })
        .collect();
    Ok(CoverageReport {
        total: predictions.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::metrics;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scored(conf: &[f64]) -> Vec<Scored> {
        conf.iter()
            .enumerate()
            .map(|(i, &c)| Scored { predicted: (i % 2) as u8, truth: (i % 3 == 0) as u8, confidence: c })
            .collect()
    }

    #[test]
    fn full_coverage_keeps_everything() {
        let p = scored(&[0.55, 0.9, 0.61, 0.77]);
        let r = coverage_analysis(&p, &[1.0]).unwrap();
        let row = &r.rows[0];
        assert_eq!((row.threshold, row.n_covered, row.n_abstained), (0.5, 4, 0));
        let pairs: Vec<_> = p.iter().map(|s| (s.predicted, s.truth)).collect();
        assert_eq!(row.metrics, Some(metrics(&pairs)));
    }

    #[test]
    fn eighty_percent_of_ten() {
        let conf = [0.91, 0.52, 0.66, 0.73, 0.58, 0.99, 0.81, 0.6, 0.7, 0.95];
        let r = coverage_analysis(&scored(&conf), &[0.8]).unwrap();
        // Sorted: 0.52 0.58 | 0.6 ...; two lowest abstain.
        assert_eq!(r.rows[0].threshold, 0.6);
        assert_eq!((r.rows[0].n_covered, r.rows[0].n_abstained), (8, 2));
    }

    #[test]
    fn equal_confidences_are_all_kept() {
        let p = scored(&[0.7; 9]);
        let r = coverage_analysis(&p, &[0.2, 0.5, 0.8, 1.0]).unwrap();
        for row in &r.rows {
            assert_eq!(row.n_covered, 9);
        }
        assert_eq!(r.rows[0].threshold, 0.7);
    }

    #[test]
    fn empty_input_gives_undefined_rows() {
        let r = coverage_analysis(&[], &[0.8, 1.0]).unwrap();
        assert!(r.rows.iter().all(|row| row.metrics.is_none() && row.n_covered == 0));
    }

    #[test]
    fn rejects_bad_levels_and_confidences() {
        assert!(coverage_analysis(&scored(&[0.6]), &[0.0]).is_err());
        assert!(coverage_analysis(&scored(&[0.6]), &[1.2]).is_err());
        assert!(coverage_analysis(&scored(&[1.6]), &[1.0]).is_err());
    }

    #[test]
    fn calibrated_predictions_gain_accuracy_when_abstaining() {
        let mut better = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<Scored> = (0..200)
                .map(|_| {
                    let confidence = rng.gen_range(0.5..1.0);
                    let truth = u8::from(rng.gen_bool(0.5));
                    let correct = rng.gen_bool(confidence);
                    Scored { predicted: if correct { truth } else { 1 - truth }, truth, confidence }
                })
                .collect();
            let r = coverage_analysis(&p, &[0.8, 1.0]).unwrap();
            let acc = |i: usize| r.rows[i].metrics.unwrap().accuracy;
            if acc(0) >= acc(1) {
                better += 1;
            }
        }
        assert!(better >= 95, "{better}");
    }

    proptest! {
        #[test]
        fn thresholds_monotone_and_coverage_met(
            conf in prop::collection::vec(0.5f64..=1.0, 1..60),
            mut levels in prop::collection::vec(0.01f64..=1.0, 1..8),
        ) {
            levels.sort_by(f64::total_cmp);
            let r = coverage_analysis(&scored(&conf), &levels).unwrap();
            let n = conf.len() as f64;
            for w in r.rows.windows(2) {
                prop_assert!(w[1].threshold <= w[0].threshold);
            }
            for row in &r.rows {
                prop_assert!(row.n_covered as f64 / n >= row.coverage - 1.0 / n);
                prop_assert_eq!(row.n_covered + row.n_abstained, conf.len());
            }
        }
    }
}
