use serde::{Deserialize, Serialize};

/// Binary confusion counts with class 1 as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    /// Counts `(predicted, true)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (u8, u8)>>(pairs: I) -> Self {
        let mut c = ConfusionCounts::default();
        for (pred, truth) in pairs {
            match (pred != 0, truth != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1_pos = ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_);
        let f1_neg = ratio(2 * self.tn, 2 * self.tn + self.fn_ + self.fp);
        Metrics {
            precision,
            recall,
            accuracy: ratio(self.tp + self.tn, self.total()),
            f1_macro: (f1_pos + f1_neg) / 2.0,
        }
    }
}

/// `0/0` is 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Positive-class precision.
    pub precision: f64,
    /// Positive-class recall.
    pub recall: f64,
    pub accuracy: f64,
    /// Mean of the two per-class F1 scores.
    pub f1_macro: f64,
}

/// Metrics over `(predicted, true)` label pairs.
pub fn metrics(pairs: &[(u8, u8)]) -> Metrics {
    ConfusionCounts::from_pairs(pairs.iter().copied()).metrics()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions() {
        let m = metrics(&[(1, 1), (0, 0), (1, 1)]);
        assert_eq!(m, Metrics { precision: 1.0, recall: 1.0, accuracy: 1.0, f1_macro: 1.0 });
    }

    #[test]
    fn constant_positive_on_balanced_data() {
        let m = metrics(&[(1, 1), (1, 0), (1, 1), (1, 0)]);
        assert_eq!(m.accuracy, 0.5);
        assert!((m.f1_macro - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((m.precision, m.recall), (0.5, 1.0));
    }

    #[test]
    fn absent_positive_class() {
        let m = metrics(&[(0, 0), (0, 0), (0, 0)]);
        assert_eq!((m.accuracy, m.f1_macro, m.precision, m.recall), (1.0, 0.5, 0.0, 0.0));
    }

    /// Independent oracle: per-class scores straight from the definitions.
    fn brute_force(pairs: &[(u8, u8)]) -> Metrics {
        let count = |f: &dyn Fn(u8, u8) -> bool| pairs.iter().filter(|&&(p, t)| f(p, t)).count() as f64;
        let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
        let mut f1 = Vec::new();
        let mut prec = [0.0; 2];
        let mut rec = [0.0; 2];
        for c in 0..2u8 {
            let hit = count(&|p, t| p == c && t == c);
            let predicted = count(&|p, _| p == c);
            let actual = count(&|_, t| t == c);
            prec[c as usize] = div(hit, predicted);
            rec[c as usize] = div(hit, actual);
            f1.push(div(2.0 * hit, predicted + actual));
        }
        Metrics {
            precision: prec[1],
            recall: rec[1],
            accuracy: div(count(&|p, t| p == t), pairs.len() as f64),
            f1_macro: (f1[0] + f1[1]) / 2.0,
        }
    }

    #[test]
    fn matches_brute_force_on_random_label_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = rng.gen_range(1..40);
            let bias = rng.gen_range(0.0..1.0);
            let pairs: Vec<(u8, u8)> = (0..n)
                .map(|_| (u8::from(rng.gen_bool(bias)), u8::from(rng.gen_bool(0.5))))
                .collect();
            assert_eq!(metrics(&pairs), brute_force(&pairs), "{pairs:?}");
        }
    }

    #[test]
    fn counts_total() {
        let c = ConfusionCounts::from_pairs([(1, 1), (1, 0), (0, 1), (0, 0), (0, 0)]);
        assert_eq!((c.tp, c.fp, c.fn_, c.tn, c.total()), (1, 1, 1, 2, 5));
        assert_eq!(serde_json::to_value(c).unwrap()["fn"], 1);
    }
}
