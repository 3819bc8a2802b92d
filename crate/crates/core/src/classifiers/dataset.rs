use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Label};

/// Which feature columns a model sees: mean velocities only, or velocities
/// plus entropy and entropy rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Velocity,
    All,
}

impl FeatureSet {
    pub const ALL_NAMES: [&'static str; 4] = ["vx", "vy", "entropy", "entropy_rate"];

    pub fn columns(self) -> &'static [usize] {
        match self {
            FeatureSet::Velocity => &[0, 1],
            FeatureSet::All => &[0, 1, 2, 3],
        }
    }

    pub fn names(self) -> Vec<String> {
        self.columns()
            .iter()
            .map(|&c| Self::ALL_NAMES[c].to_string())
            .collect()
    }

    pub fn dim(self) -> usize {
        self.columns().len()
    }

    pub fn select(self, fv: &FeatureVector) -> Vec<f64> {
        let v = fv.values();
        self.columns().iter().map(|&c| v[c]).collect()
    }

    pub fn from_dim(dim: usize) -> Option<Self> {
        match dim {
            2 => Some(FeatureSet::Velocity),
            4 => Some(FeatureSet::All),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "velocity" | "vel" => Ok(FeatureSet::Velocity),
            "all" => Ok(FeatureSet::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown feature set `{other}` (expected velocity or all)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSet::Velocity => "velocity",
            FeatureSet::All => "all",
        })
    }
}

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<Label>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        let dim = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dataset(format!(
                    "row {i} has {} features, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite value")));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            dim,
            data,
            labels,
            feature_names,
        })
    }

    /// Builds a dataset from labelled feature vectors; unlabelled rows are an
    /// error.
    pub fn from_features(rows: &[FeatureVector], set: FeatureSet) -> Result<Self> {
        let labels = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.label
                    .ok_or_else(|| Error::Dataset(format!("row {i} has no label")))
            })
            .collect::<Result<Vec<_>>>()?;
        let data = rows.iter().map(|r| set.select(r)).collect();
        Self::new(set.names(), data, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let slip = self.labels.iter().filter(|l| l.is_slip()).count();
        [self.len() - slip, slip]
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let [stable, slip] = self.class_counts();
        if stable == 0 || slip == 0 {
            return Err(Error::Dataset(format!(
                "fitting needs both classes (stable = {stable}, slip = {slip})"
            )));
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        LabeledDataset {
            dim: self.dim,
            data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps only the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<LabeledDataset> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.dim) {
            return Err(Error::Dataset(format!(
                "column {c} out of range for {} features",
                self.dim
            )));
        }
        let rows = self
            .rows()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect();
        LabeledDataset::new(
            cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            rows,
            self.labels.clone(),
        )
    }

    /// Scales one column by a constant.
    pub fn scale_column(&mut self, col: usize, factor: f64) {
        for r in self.data.chunks_exact_mut(self.dim) {
            r[col] *= factor;
        }
    }
}

fn class_indices(labels: &[Label]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.as_u8() as usize].push(i);
    }
    by_class
}

/// Stratified hold-out split; returns sorted `(train, test)` indices.
pub fn stratified_split(
    labels: &[Label],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut idx in class_indices(labels) {
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold assignment. Returns the sorted held-out indices of each
/// fold; class members are shuffled then dealt round-robin.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if labels.len() < folds {
        return Err(Error::Dataset(format!(
            "{} rows cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0usize;
    for mut idx in class_indices(labels) {
        idx.shuffle(&mut rng);
        for i in idx {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n0: usize, n1: usize) -> Vec<Label> {
        let mut v = vec![Label::Stable; n0];
        v.extend(vec![Label::Slip; n1]);
        v
    }

    #[test]
    fn split_is_stratified_and_reproducible() {
        let l = labels(700, 300);
        let (train, test) = stratified_split(&l, 0.2, 42).unwrap();
        assert_eq!(train.len() + test.len(), 1000);
        assert_eq!(test.iter().filter(|&&i| l[i].is_slip()).count(), 60);
        assert_eq!(stratified_split(&l, 0.2, 42).unwrap().1, test);
        assert_ne!(stratified_split(&l, 0.2, 43).unwrap().1, test);
    }

    #[test]
    fn folds_partition_rows() {
        let l = labels(53, 47);
        let folds = stratified_folds(&l, 5, 1).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            let slip = f.iter().filter(|&&i| l[i].is_slip()).count();
            assert!((9..=10).contains(&slip));
            assert_eq!(f.len(), 20);
        }
        assert!(stratified_folds(&l, 1, 0).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![Label::Slip]).is_err());
        assert!(LabeledDataset::new(vec!["a".into()], vec![vec![f64::NAN]], vec![Label::Slip]).is_err());
        let d = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![Label::Slip, Label::Slip],
        )
        .unwrap();
        assert!(d.require_both_classes().is_err());
        let s = d.select_columns(&[1]).unwrap();
        assert_eq!(s.row(1), &[4.0]);
        assert_eq!(d.rows().count(), 2);
    }

    #[test]
    fn feature_set_selection() {
        let fv = FeatureVector {
            t: 0.0,
            vx: 1.0,
            vy: 2.0,
            entropy: 3.0,
            entropy_rate: 4.0,
            label: Some(Label::Slip),
        };
        assert_eq!(FeatureSet::Velocity.select(&fv), vec![1.0, 2.0]);
        assert_eq!(FeatureSet::All.select(&fv), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!("all".parse::<FeatureSet>().unwrap(), FeatureSet::All);
        let unlabeled = FeatureVector { label: None, ..fv };
        assert!(LabeledDataset::from_features(&[unlabeled], FeatureSet::All).is_err());
    }
}
