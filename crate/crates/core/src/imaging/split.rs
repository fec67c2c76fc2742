use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetManifest;
use crate::error::{Error, Result};

/// Target frame fractions for train / val / test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(field, format!("ratio must be nonnegative, got {v}")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("ratios", format!("must sum to 1, got {sum}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: DatasetManifest,
    pub val: DatasetManifest,
    pub test: DatasetManifest,
}

/// Seeded Fisher–Yates permutation of `0..n`.
pub(crate) fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        order.swap(i, j);
    }
    order
}

/// Partitions frames by patient so no patient spans two splits.
///
/// Patients (sorted by id) are permuted with a seeded Fisher–Yates shuffle
/// and poured into train, then val, then test: a split stops receiving
/// patients once its frame count reaches `ratio · total`. Test takes the
/// remainder. Records keep their input order within each split.
pub fn patient_wise_split(manifest: &DatasetManifest, ratios: SplitRatios, seed: u64) -> Result<Splits> {
    ratios.validate()?;
    if manifest.is_empty() {
        return Err(Error::Empty("manifest has no records"));
    }
    let mut by_patient: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &manifest.records {
        *by_patient.entry(r.patient_id.as_str()).or_default() += 1;
    }
    let patients: Vec<(&str, usize)> = by_patient.into_iter().collect();
    let total = manifest.len() as f64;
    let targets = ratios.as_array().map(|r| r * total - 1e-9);

    let mut assigned: [HashSet<&str>; 3] = Default::default();
    let mut filled = [0usize; 3];
    let mut split = 0;
    for idx in seeded_permutation(patients.len(), seed) {
        while split < 2 && filled[split] as f64 >= targets[split] {
            split += 1;
        }
        let (pid, count) = patients[idx];
        assigned[split].insert(pid);
        filled[split] += count;
    }

    let subset = |which: usize, suffix: &str| {
        let mut m = DatasetManifest::new(
            format!("{}-{suffix}", manifest.name),
            manifest
                .records
                .iter()
                .filter(|r| assigned[which].contains(r.patient_id.as_str()))
                .cloned()
                .collect(),
        );
        m.seed_note = Some(format!("patient-wise split, seed {seed}"));
        m.config_hash = manifest.config_hash.clone();
        m.root = manifest.root.clone();
        m
    };
    Ok(Splits {
        train: subset(0, "train"),
        val: subset(1, "val"),
        test: subset(2, "test"),
    })
}
