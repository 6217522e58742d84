use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Criterion, Document};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub criterion: Criterion,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Assigns each item to one of `k` folds, stratified by label.
///
/// Items of each class are shuffled with the seed and dealt round-robin; the
/// second class continues where the first one stopped so fold sizes differ by
/// at most one. Returns the fold index of every input item.
pub fn stratify(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![usize::MAX; labels.len()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::StratificationInfeasible {
                label: class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % k;
            next += 1;
        }
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Malformed(format!("label {bad} is not binary")));
    }
    Ok(assignment)
}

/// Stratified k-fold plan for one criterion.
pub fn stratified_folds(
    documents: &[Document],
    criterion: Criterion,
    k: usize,
    seed: u64,
) -> Result<FoldPlan> {
    let mut seen = HashSet::new();
    for doc in documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::Malformed(format!("duplicate document id {}", doc.id)));
        }
    }
    let labels: Vec<u8> = documents.iter().map(|d| d.label(criterion)).collect();
    let assignment = stratify(&labels, k, seed)?;
    let folds = (0..k)
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) =
                documents.iter().zip(&assignment).partition(|(_, &a)| a == f);
            Fold {
                train: train.into_iter().map(|(d, _)| d.id.clone()).collect(),
                test: test.into_iter().map(|(d, _)| d.id.clone()).collect(),
            }
        })
        .collect();
    Ok(FoldPlan {
        criterion,
        seed,
        folds,
    })
}

/// Splits indices into (kept, held out) with `fraction` of each class held out.
///
/// Every class with at least two members contributes at least one held-out item.
pub fn stratified_holdout(labels: &[u8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let mut take = (fraction * members.len() as f64).round() as usize;
        if take == 0 && members.len() >= 2 {
            take = 1;
        }
        held.extend_from_slice(&members[..take.min(members.len())]);
    }
    held.sort_unstable();
    let held_set: HashSet<usize> = held.iter().copied().collect();
    let kept = (0..labels.len()).filter(|i| !held_set.contains(i)).collect();
    (kept, held)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Topic;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn docs(labels: &[u8]) -> Vec<Document> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let labels = Criterion::ALL.into_iter().map(|c| (c, l)).collect();
                Document::new(
                    format!("d{i}"),
                    Topic::Other,
                    vec![vec!["x".into()]],
                    labels,
                    BTreeMap::new(),
                )
                .unwrap()
            })
            .collect()
    }

    fn check_plan(plan: &FoldPlan, documents: &[Document]) {
        let all: HashSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
        let mut tested = HashSet::new();
        for fold in &plan.folds {
            let train: HashSet<&str> = fold.train.iter().map(String::as_str).collect();
            let test: HashSet<&str> = fold.test.iter().map(String::as_str).collect();
            assert!(train.is_disjoint(&test));
            assert_eq!(train.union(&test).copied().collect::<HashSet<_>>(), all);
            for id in &fold.test {
                assert!(tested.insert(id.clone()), "{id} tested twice");
            }
        }
        assert_eq!(tested.len(), documents.len());
    }

    #[test]
    fn balanced_ten_docs() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let d = docs(&labels);
        let plan = stratified_folds(&d, Criterion::Q4, 5, 3).unwrap();
        check_plan(&plan, &d);
        for fold in &plan.folds {
            let pos = fold.test.iter().filter(|id| {
                let i: usize = id[1..].parse().unwrap();
                labels[i] == 1
            });
            assert_eq!(fold.test.len(), 2);
            assert_eq!(pos.count(), 1);
        }
    }

    #[test]
    fn corpus_scale_fold_sizes() {
        let labels: Vec<u8> = (0..269).map(|i| u8::from(i % 7 == 0)).collect();
        let d = docs(&labels);
        let plan = stratified_folds(&d, Criterion::Q5, 5, 11).unwrap();
        check_plan(&plan, &d);
        let mut sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![53, 54, 54, 54, 54]);
    }

    #[test]
    fn seven_of_twenty_positive() {
        // Exhaustive over seeds: every fold gets 1 or 2 of the 7 positives.
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i < 7)).collect();
        for seed in 0..50 {
            let assignment = stratify(&labels, 5, seed).unwrap();
            for f in 0..5 {
                let pos = (0..20).filter(|&i| assignment[i] == f && labels[i] == 1).count();
                assert!((1..=2).contains(&pos), "seed {seed} fold {f}: {pos}");
            }
        }
    }

    #[test]
    fn infeasible_when_class_too_small() {
        let labels = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        assert!(matches!(
            stratify(&labels, 5, 0),
            Err(Error::StratificationInfeasible { label: 1, count: 4, k: 5 })
        ));
        assert!(stratify(&labels, 1, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        assert_eq!(stratify(&labels, 4, 9).unwrap(), stratify(&labels, 4, 9).unwrap());
        assert_ne!(stratify(&labels, 4, 9).unwrap(), stratify(&labels, 4, 10).unwrap());
    }

    #[test]
    fn holdout_keeps_both_classes() {
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i < 3)).collect();
        let (kept, held) = stratified_holdout(&labels, 0.1, 1);
        assert_eq!(kept.len() + held.len(), 30);
        assert!(held.iter().any(|&i| labels[i] == 1));
        assert!(held.iter().any(|&i| labels[i] == 0));
    }

    proptest! {
        #[test]
        fn partition_and_stratification(
            labels in prop::collection::vec(0u8..2, 10..200),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let pos = labels.iter().filter(|&&l| l == 1).count();
            let neg = labels.len() - pos;
            prop_assume!(pos >= k && neg >= k);
            let assignment = stratify(&labels, k, seed).unwrap();
            let n = labels.len() as f64;
            for f in 0..k {
                let size = assignment.iter().filter(|&&a| a == f).count();
                let fold_pos = (0..labels.len()).filter(|&i| assignment[i] == f && labels[i] == 1).count();
                let share = pos as f64 * size as f64 / n;
                prop_assert!((fold_pos as f64 - share).abs() <= 1.0 + 1e-9);
                prop_assert!(size >= labels.len() / k && size <= labels.len() / k + 1);
            }
        }
    }
}
