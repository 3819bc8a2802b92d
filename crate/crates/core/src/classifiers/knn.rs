use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::features::Label;

/// Standardised training rows kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub dim: usize,
    pub points: Vec<f64>,
    pub labels: Vec<u8>,
}

impl KnnParams {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the k nearest rows, nearest first, equal distances by
    /// lower row index.
    pub fn neighbours(&self, z: &[f64]) -> Vec<usize> {
        let k = self.k.min(self.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            // Insert after any equal distances so earlier rows stay ahead.
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    /// `(label, fraction of slip votes)`.
    pub fn vote(&self, z: &[f64]) -> (Label, f64) {
        let nb = self.neighbours(z);
        let slip = nb.iter().filter(|&&i| self.labels[i] == 1).count();
        let label = Label::from(slip * 2 > nb.len());
        (label, slip as f64 / nb.len() as f64)
    }
}

pub fn fit_knn(data: &LabeledDataset, k: usize) -> Result<(Standardizer, KnnParams)> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::Dataset(format!(
            "k = {k} needs at least {k} training rows, got {}",
            data.len()
        )));
    }
    let s = Standardizer::fit(data)?;
    let points = s.transform_all(data);
    Ok((
        s,
        KnnParams {
            k,
            dim: data.dim(),
            points,
            labels: data.labels().iter().map(|l| l.as_u8()).collect(),
        },
    ))
}

/// Label of a raw (unstandardised) query.
pub fn predict_knn(s: &Standardizer, p: &KnnParams, x: &[f64]) -> Result<Label> {
    if x.len() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            got: x.len(),
        });
    }
    Ok(p.vote(&s.transform(x)).0)
}
