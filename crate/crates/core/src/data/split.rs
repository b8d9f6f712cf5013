use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

pub const RANDOM_MIN: usize = 10;
pub const SCAFFOLD_MIN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Random,
    Scaffold,
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMethod::Random => "random",
            SplitMethod::Scaffold => "scaffold",
        })
    }
}

impl FromStr for SplitMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(SplitMethod::Random),
            "scaffold" => Ok(SplitMethod::Scaffold),
            _ => Err(format!("unknown split method '{s}' (expected random or scaffold)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub method: SplitMethod,
    pub seed: u64,
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// On-disk form of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub method: SplitMethod,
    pub seed: u64,
    pub fractions: [f64; 3],
    pub indices: SplitIndices,
    pub checksum: String,
}

fn check_fractions(f: [f64; 3]) -> Result<(), DataError> {
    if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(DataError::InvalidFractions(format!("{f:?} has a negative or non-finite entry")));
    }
    let s: f64 = f.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidFractions(format!("{f:?} sums to {s}")));
    }
    Ok(())
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the three parts partition `0..n`.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.valid).chain(&self.test) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// True when no key is shared by two parts.
    pub fn is_scaffold_disjoint(&self, keys: &[String]) -> bool {
        let sets: Vec<HashSet<&str>> = [&self.train, &self.valid, &self.test]
            .iter()
            .map(|part| part.iter().map(|&i| keys[i].as_str()).collect())
            .collect();
        sets[0].is_disjoint(&sets[1]) && sets[0].is_disjoint(&sets[2]) && sets[1].is_disjoint(&sets[2])
    }

    pub fn manifest(&self, checksum: &str) -> SplitManifest {
        SplitManifest {
            method: self.method,
            seed: self.seed,
            fractions: self.fractions,
            indices: SplitIndices {
                train: self.train.clone(),
                valid: self.valid.clone(),
                test: self.test.clone(),
            },
            checksum: checksum.to_string(),
        }
    }

    pub fn from_manifest(m: &SplitManifest) -> DatasetSplit {
        DatasetSplit {
            train: m.indices.train.clone(),
            valid: m.indices.valid.clone(),
            test: m.indices.test.clone(),
            method: m.method,
            seed: m.seed,
            fractions: m.fractions,
        }
    }
}

pub fn random_split(dataset: &Dataset, seed: u64, fractions: [f64; 3]) -> Result<DatasetSplit, DataError> {
    random_split_n(dataset.len(), seed, fractions)
}

/// Seeded shuffle of `0..n`; valid and test take `floor(f * n)` each and
/// train takes the remainder.
pub fn random_split_n(n: usize, seed: u64, fractions: [f64; 3]) -> Result<DatasetSplit, DataError> {
    check_fractions(fractions)?;
    if n < RANDOM_MIN {
        return Err(DataError::TooSmall { n, min: RANDOM_MIN });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the small epsilon keeps 0.1 * 10 at 1 rather than 0.99999
    let n_valid = (fractions[1] * n as f64 + 1e-9).floor() as usize;
    let n_test = (fractions[2] * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_valid - n_test;
    Ok(DatasetSplit {
        train: idx[..n_train].to_vec(),
        valid: idx[n_train..n_train + n_valid].to_vec(),
        test: idx[n_train + n_valid..].to_vec(),
        method: SplitMethod::Random,
        seed,
        fractions,
    })
}

pub fn scaffold_split(dataset: &Dataset, seed: u64, fractions: [f64; 3]) -> Result<DatasetSplit, DataError> {
    scaffold_split_keys(&dataset.scaffold_keys(), seed, fractions)
}

/// Groups indices by key, then places groups largest first (ties by key)
/// into whichever part is furthest below its target size. The seed is
/// recorded but does not affect the result.
pub fn scaffold_split_keys(keys: &[String], seed: u64, fractions: [f64; 3]) -> Result<DatasetSplit, DataError> {
    check_fractions(fractions)?;
    let n = keys.len();
    if n < SCAFFOLD_MIN {
        return Err(DataError::TooSmall { n, min: SCAFFOLD_MIN });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    let mut groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));

    let target: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (_, members) in groups {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (p, part) in parts.iter().enumerate() {
            let deficit = target[p] - part.len() as f64;
            if deficit > best_deficit {
                best = p;
                best_deficit = deficit;
            }
        }
        parts[best].extend(members);
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, valid, test] = parts;
    if (valid.is_empty() && fractions[1] > 0.0) || (test.is_empty() && fractions[2] > 0.0) {
        log::warn!(
            "scaffold split is degenerate: sizes ({}, {}, {})",
            train.len(),
            valid.len(),
            test.len()
        );
    }
    Ok(DatasetSplit {
        train,
        valid,
        test,
        method: SplitMethod::Scaffold,
        seed,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv_bytes;
    use crate::model::TaskType;
    use proptest::prelude::*;

    const EIGHT_ONE_ONE: [f64; 3] = [0.8, 0.1, 0.1];

    #[test]
    fn random_sizes() {
        assert_eq!(random_split_n(10, 0, EIGHT_ONE_ONE).unwrap().sizes(), (8, 1, 1));
        assert_eq!(random_split_n(101, 0, EIGHT_ONE_ONE).unwrap().sizes(), (81, 10, 10));
        assert_eq!(random_split_n(300, 3, EIGHT_ONE_ONE).unwrap().sizes(), (240, 30, 30));
        assert!(matches!(random_split_n(9, 0, EIGHT_ONE_ONE), Err(DataError::TooSmall { n: 9, .. })));
        assert!(matches!(random_split_n(20, 0, [0.5, 0.1, 0.1]), Err(DataError::InvalidFractions(_))));
    }

    #[test]
    fn random_is_seeded() {
        let a = random_split_n(50, 7, EIGHT_ONE_ONE).unwrap();
        let b = random_split_n(50, 7, EIGHT_ONE_ONE).unwrap();
        let c = random_split_n(50, 8, EIGHT_ONE_ONE).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
        assert!(a.is_partition(50));
    }

    fn dataset(smiles: &[&str]) -> Dataset {
        let mut csv = String::from("smiles,y\n");
        for s in smiles {
            csv.push_str(&format!("{s},1\n"));
        }
        load_csv_bytes(csv.as_bytes(), "smiles", None, TaskType::Regression).unwrap()
    }

    #[test]
    fn scaffold_groups_shared_rings() {
        let ds = dataset(&["c1ccccc1", "Cc1ccccc1", "C1CCCCC1"]);
        let split = scaffold_split(&ds, 0, EIGHT_ONE_ONE).unwrap();
        let together = [&split.train, &split.valid, &split.test]
            .iter()
            .any(|p| p.contains(&0) && p.contains(&1));
        assert!(together);
        assert!(split.is_partition(3));
        assert!(split.is_scaffold_disjoint(&ds.scaffold_keys()));
    }

    #[test]
    fn single_scaffold_goes_to_train() {
        let ds = dataset(&["c1ccccc1", "Cc1ccccc1", "CCc1ccccc1", "Oc1ccccc1"]);
        let split = scaffold_split(&ds, 0, EIGHT_ONE_ONE).unwrap();
        assert_eq!(split.sizes(), (4, 0, 0));
    }

    #[test]
    fn scaffold_fills_toward_targets() {
        // ten singleton groups with 8:1:1 should reproduce the random sizes
        let keys: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
        let split = scaffold_split_keys(&keys, 0, EIGHT_ONE_ONE).unwrap();
        assert_eq!(split.sizes(), (8, 1, 1));
    }

    #[test]
    fn manifest_round_trip() {
        let split = random_split_n(12, 4, EIGHT_ONE_ONE).unwrap();
        let m = split.manifest("abc");
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"method\":\"random\""));
        let back: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(DatasetSplit::from_manifest(&back), split);
    }

    proptest! {
        #[test]
        fn random_split_partitions(n in 10usize..400, seed in any::<u64>()) {
            let s = random_split_n(n, seed, EIGHT_ONE_ONE).unwrap();
            prop_assert!(s.is_partition(n));
            prop_assert_eq!(s.valid.len(), n / 10);
        }

        #[test]
        fn scaffold_split_is_disjoint_partition(keys in prop::collection::vec(0u8..40, 3..300)) {
            let keys: Vec<String> = keys.iter().map(|k| format!("{k:02}")).collect();
            let s = scaffold_split_keys(&keys, 0, EIGHT_ONE_ONE).unwrap();
            prop_assert!(s.is_partition(keys.len()));
            prop_assert!(s.is_scaffold_disjoint(&keys));
        }
    }
}
