//! Speaker-disjoint k-fold cross-validation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::manifest::ManifestRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{speakers} speakers cannot fill {k} folds")]
    TooFewSpeakers { speakers: usize, k: usize },
}

/// Row indices for one fold. `val` holds every row of the held-out speakers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Groups rows by `groups[i]`, shuffles the distinct groups with `seed` and
/// deals them round-robin into `k` folds.
pub fn kfold_by_group<S: AsRef<str>>(groups: &[S], k: usize, seed: u64) -> Result<Vec<Fold>, FoldError> {
    if k < 2 {
        return Err(FoldError::InvalidK(k));
    }
    let mut rows: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        rows.entry(g.as_ref()).or_default().push(i);
    }
    if rows.len() < k {
        return Err(FoldError::TooFewSpeakers { speakers: rows.len(), k });
    }
    let mut speakers: Vec<&str> = rows.keys().copied().collect();
    speakers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut fold_of = vec![0usize; groups.len()];
    for (i, s) in speakers.iter().enumerate() {
        for &r in &rows[s] {
            fold_of[r] = i % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&r| fold_of[r] == f);
            Fold { train, val }
        })
        .collect())
}

/// Folds over manifest rows, grouped by speaker.
pub fn kfold_split(records: &[ManifestRecord], k: usize, seed: u64) -> Result<Vec<Fold>, FoldError> {
    let groups: Vec<&str> = records.iter().map(|r| r.speaker_id.as_str()).collect();
    kfold_by_group(&groups, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn groups(n_speakers: usize, per: usize) -> Vec<String> {
        (0..n_speakers).flat_map(|s| std::iter::repeat_n(format!("spk{s}"), per)).collect()
    }

    #[test]
    fn folds_partition_rows_and_are_speaker_disjoint() {
        let g = groups(7, 4);
        let folds = kfold_by_group(&g, 3, 11).unwrap();
        assert_eq!(folds.len(), 3);
        let mut seen = vec![0; g.len()];
        for f in &folds {
            assert_eq!(f.train.len() + f.val.len(), g.len());
            let val_spk: HashSet<&str> = f.val.iter().map(|&i| g[i].as_str()).collect();
            assert!(f.train.iter().all(|&i| !val_spk.contains(g[i].as_str())));
            for &i in &f.val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn seed_controls_assignment() {
        let g = groups(10, 2);
        assert_eq!(kfold_by_group(&g, 5, 3).unwrap(), kfold_by_group(&g, 5, 3).unwrap());
        let a: Vec<_> = (0..8).map(|s| kfold_by_group(&g, 5, s).unwrap()).collect();
        assert!(a.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn errors() {
        let g = groups(3, 2);
        assert_eq!(kfold_by_group(&g, 4, 0), Err(FoldError::TooFewSpeakers { speakers: 3, k: 4 }));
        assert_eq!(kfold_by_group(&g, 1, 0), Err(FoldError::InvalidK(1)));
    }
}
