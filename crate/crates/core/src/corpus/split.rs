use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, StageLabel};

/// Disjoint train/test partition of a corpus, both sides in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    Ratio(f64),
    #[error("corpus of {0} record(s) is too small to split")]
    TooSmall(usize),
}

/// Partition `corpus` into train and test sets, `ratio` being the test share.
///
/// The total test size is `round(ratio * N)`, clamped so both sides are
/// non-empty. In stratified mode every stage receives `floor(ratio * n_stage)`
/// test records and the remainder is handed out by largest fractional part
/// (ties in legislative order), so each stratum is within one record of exact
/// proportionality.
pub fn split(corpus: &Corpus, ratio: f64, seed: u64, stratified: bool) -> Result<SplitIndices, SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::Ratio(ratio));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(SplitError::TooSmall(n));
    }
    let n_test = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut is_test = vec![false; n];
    if stratified {
        let mut strata: BTreeMap<StageLabel, Vec<usize>> = BTreeMap::new();
        for (i, r) in corpus.records().iter().enumerate() {
            strata.entry(r.stage).or_default().push(i);
        }
        let mut quotas: Vec<(StageLabel, usize, f64)> = strata
            .iter()
            .map(|(&stage, members)| {
                let exact = ratio * members.len() as f64;
                (stage, exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let assigned: usize = quotas.iter().map(|q| q.1).sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        // stable sort keeps legislative order among equal remainders
        order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2));
        let mut extra = n_test.saturating_sub(assigned);
        for &k in order.iter().cycle().take(order.len() * 2) {
            if extra == 0 {
                break;
            }
            let size = strata[&quotas[k].0].len();
            if quotas[k].1 < size {
                quotas[k].1 += 1;
                extra -= 1;
            }
        }
        for (stage, quota, _) in quotas {
            let mut members = strata[&stage].clone();
            members.shuffle(&mut rng);
            for &i in members.iter().take(quota) {
                is_test[i] = true;
            }
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        for &i in all.iter().take(n_test) {
            is_test[i] = true;
        }
    }

    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (record, &test) in corpus.records().iter().zip(&is_test) {
        if test {
            test_ids.push(record.id.clone());
        } else {
            train_ids.push(record.id.clone());
        }
    }
    Ok(SplitIndices {
        train_ids,
        test_ids,
        seed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PolicyRecord;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus_with(stages: &[(StageLabel, usize)]) -> Corpus {
        let mut records = Vec::new();
        for &(stage, count) in stages {
            for _ in 0..count {
                records.push(PolicyRecord {
                    id: format!("p{}", records.len()),
                    title: String::new(),
                    body: "text".into(),
                    stage,
                    month: 1,
                    year: 2020,
                    rapporteurs: vec![],
                    spotlight: None,
                    procedure_type: None,
                    procedure_year: None,
                    legislative: false,
                    sidecar_scores: Default::default(),
                });
            }
        }
        Corpus::new(records).unwrap()
    }

    #[test]
    fn stratified_ten_and_ten() {
        let corpus = corpus_with(&[(StageLabel::Tabled, 10), (StageLabel::Announced, 10)]);
        let s = split(&corpus, 0.2, 42, true).unwrap();
        let test: HashSet<&str> = s.test_ids.iter().map(String::as_str).collect();
        let count = |stage| {
            corpus
                .records()
                .iter()
                .filter(|r| r.stage == stage && test.contains(r.id.as_str()))
                .count()
        };
        assert_eq!(count(StageLabel::Tabled), 2);
        assert_eq!(count(StageLabel::Announced), 2);
    }

    #[test]
    fn sizes_and_determinism() {
        let corpus = corpus_with(&[
            (StageLabel::Withdrawn, 3),
            (StageLabel::Blocked, 4),
            (StageLabel::Announced, 30),
            (StageLabel::Tabled, 41),
            (StageLabel::CloseToAdoption, 27),
            (StageLabel::AdoptedCompleted, 60),
        ]);
        assert_eq!(corpus.len(), 165);
        for stratified in [true, false] {
            let a = split(&corpus, 0.2, 42, stratified).unwrap();
            assert_eq!((a.train_ids.len(), a.test_ids.len()), (132, 33));
            assert_eq!(a, split(&corpus, 0.2, 42, stratified).unwrap());
        }
    }

    #[test]
    fn rejects_bad_input() {
        let corpus = corpus_with(&[(StageLabel::Tabled, 1)]);
        assert_eq!(split(&corpus, 0.2, 0, true), Err(SplitError::TooSmall(1)));
        let corpus = corpus_with(&[(StageLabel::Tabled, 5)]);
        assert_eq!(split(&corpus, 1.0, 0, true), Err(SplitError::Ratio(1.0)));
        assert_eq!(split(&corpus, 0.0, 0, false), Err(SplitError::Ratio(0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn partition_property(seed in any::<u64>(), ratio in 0.01f64..0.99, stratified in any::<bool>(),
                              a in 0usize..8, b in 1usize..12, c in 0usize..15) {
            let corpus = corpus_with(&[(StageLabel::Blocked, a), (StageLabel::Tabled, b), (StageLabel::AdoptedCompleted, c + 1)]);
            let s = split(&corpus, ratio, seed, stratified).unwrap();
            let train: HashSet<&String> = s.train_ids.iter().collect();
            let test: HashSet<&String> = s.test_ids.iter().collect();
            prop_assert!(train.is_disjoint(&test));
            prop_assert_eq!(train.len() + test.len(), corpus.len());
            prop_assert!(!train.is_empty() && !test.is_empty());
            let expected = ((ratio * corpus.len() as f64).round() as usize).clamp(1, corpus.len() - 1);
            prop_assert!((test.len() as i64 - expected as i64).abs() <= 1);
            if stratified {
                for stage in StageLabel::ALL {
                    let members: Vec<&PolicyRecord> = corpus.records().iter().filter(|r| r.stage == stage).collect();
                    let in_test = members.iter().filter(|r| test.contains(&r.id)).count() as f64;
                    prop_assert!((in_test - ratio * members.len() as f64).abs() < 1.0 + 1e-9);
                }
            }
        }
    }
}
