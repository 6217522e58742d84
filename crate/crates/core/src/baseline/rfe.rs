use serde::{Deserialize, Serialize};

use super::forest::{rf_predict, rf_train, ForestConfig};
use crate::corpus::class_weights;
use crate::error::{Error, Result};
use crate::evaluation::metrics;

/// Train and test row indices of one cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeRound {
    pub features: Vec<usize>,
    pub mean_f1_macro: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Best feature set, ascending column indices.
    pub selected: Vec<usize>,
    pub rounds: Vec<RfeRound>,
}

fn project(row: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&f| row[f]).collect()
}

/// Mean test F1-macro and mean importances (per entry of `features`) across folds.
fn evaluate(x: &[Vec<f64>], y: &[u8], folds: &[IndexFold], features: &[usize], config: &ForestConfig, seed: u64) -> Result<(f64, Vec<f64>)> {
    let mut f1 = 0.0;
    let mut importances = vec![0.0; features.len()];
    for fold in folds {
        let tx: Vec<Vec<f64>> = fold.train.iter().map(|&i| project(&x[i], features)).collect();
        let ty: Vec<u8> = fold.train.iter().map(|&i| y[i]).collect();
        let model = rf_train(&tx, &ty, class_weights(&ty)?, config, seed)?;
        let mut pairs = Vec::with_capacity(fold.test.len());
        for &i in &fold.test {
            pairs.push((rf_predict(&model, &project(&x[i], features))?.0, y[i]));
        }
        f1 += metrics(&pairs).f1_macro;
        for (a, b) in importances.iter_mut().zip(&model.importances) {
            *a += b;
        }
    }
    let k = folds.len() as f64;
    importances.iter_mut().for_each(|v| *v /= k);
    Ok((f1 / k, importances))
}

/// Recursive feature elimination scored by cross-validated F1-macro.
///
/// Each round drops the least important tenth of the remaining features (at
/// least one; lower column index first among equals) until one is left. The
/// best-scoring set wins, with ties going to the smaller set.
pub fn rfe_cv(x: &[Vec<f64>], y: &[u8], folds: &[IndexFold], config: &ForestConfig, seed: u64) -> Result<RfeResult> {
    let width = x.first().map_or(0, Vec::len);
    if width < 2 {
        return Err(Error::InvalidConfig(format!("feature elimination needs at least 2 features, got {width}")));
    }
    if folds.is_empty() {
        return Err(Error::InvalidConfig("feature elimination needs at least one fold".into()));
    }
    let mut features: Vec<usize> = (0..width).collect();
    let mut rounds = Vec::new();
    loop {
        let (score, importances) = evaluate(x, y, folds, &features, config, seed)?;
        rounds.push(RfeRound { features: features.clone(), mean_f1_macro: score });
        if features.len() == 1 {
            break;
        }
        let drop = (features.len() / 10).max(1);
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| importances[a].total_cmp(&importances[b]).then(features[a].cmp(&features[b])));
        let mut removed: Vec<usize> = order[..drop].to_vec();
        removed.sort_unstable();
        for k in removed.into_iter().rev() {
            features.remove(k);
        }
    }
    let mut best = &rounds[0];
    for round in &rounds[1..] {
        if round.mean_f1_macro >= best.mean_f1_macro {
            best = round;
        }
    }
    Ok(RfeResult { selected: best.features.clone(), rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_folds(n: usize) -> Vec<IndexFold> {
        let even: Vec<usize> = (0..n).filter(|i| i % 4 < 2).collect();
        let odd: Vec<usize> = (0..n).filter(|i| i % 4 >= 2).collect();
        vec![
            IndexFold { train: even.clone(), test: odd.clone() },
            IndexFold { train: odd, test: even },
        ]
    }

    fn small() -> ForestConfig {
        ForestConfig { n_trees: 15, ..Default::default() }
    }

    #[test]
    fn informative_feature_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
        let x: Vec<Vec<f64>> = y
            .iter()
            .map(|&l| {
                let mut row: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
                row[6] = f64::from(l) * 2.0 + rng.gen::<f64>();
                row
            })
            .collect();
        let r = rfe_cv(&x, &y, &two_folds(60), &small(), 0).unwrap();
        assert!(r.selected.contains(&6), "{:?}", r.selected);
        assert_eq!(r.rounds.last().unwrap().features, vec![6]);
        assert_eq!(r.rounds[0].features.len(), 10);
    }

    #[test]
    fn identical_features_give_a_deterministic_singleton() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let x: Vec<Vec<f64>> = y.iter().map(|&l| vec![f64::from(l); 3]).collect();
        let a = rfe_cv(&x, &y, &two_folds(20), &small(), 1).unwrap();
        let b = rfe_cv(&x, &y, &two_folds(20), &small(), 1).unwrap();
        assert_eq!(a, b);
        // all sets score 1.0, so the smallest wins
        assert_eq!(a.selected.len(), 1);
    }

    #[test]
    fn two_features_take_two_rounds() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let x: Vec<Vec<f64>> = y.iter().enumerate().map(|(i, &l)| vec![f64::from(l), i as f64]).collect();
        let r = rfe_cv(&x, &y, &two_folds(20), &small(), 0).unwrap();
        assert_eq!(r.rounds.len(), 2);
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn needs_two_features_and_a_fold() {
        let y = vec![0, 1, 0, 1];
        let one: Vec<Vec<f64>> = y.iter().map(|&l| vec![f64::from(l)]).collect();
        assert!(rfe_cv(&one, &y, &two_folds(4), &small(), 0).is_err());
        let two: Vec<Vec<f64>> = y.iter().map(|&l| vec![f64::from(l), 0.0]).collect();
        assert!(rfe_cv(&two, &y, &[], &small(), 0).is_err());
    }
}
