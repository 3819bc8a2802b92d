use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::dataset::stratified_folds;
use super::model::{fit, HyperValue, Hyperparams, ModelKind};
use super::LabeledDataset;
use crate::error::{Error, Result};

/// Axis name to candidate values. Points are enumerated in lexicographic
/// order of the axis names with the last axis varying fastest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrid {
    pub axes: BTreeMap<String, Vec<HyperValue>>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(mut self, name: &str, values: impl IntoIterator<Item = f64>) -> Self {
        self.axes.insert(
            name.to_string(),
            values.into_iter().map(HyperValue::Number).collect(),
        );
        self
    }

    pub fn axis_values(mut self, name: &str, values: Vec<HyperValue>) -> Self {
        self.axes.insert(name.to_string(), values);
        self
    }

    /// Default search lattice per model kind.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lr => Self::new().axis("c", [0.01, 0.1, 1.0, 10.0]),
            ModelKind::Svm => Self::new()
                .axis("c", [0.1, 1.0, 10.0])
                .axis_values(
                    "gamma",
                    vec![
                        HyperValue::Text("scale".into()),
                        HyperValue::Number(0.1),
                        HyperValue::Number(1.0),
                    ],
                ),
            ModelKind::Knn => Self::new().axis("k", [1.0, 3.0, 5.0, 7.0]),
            ModelKind::Rf => Self::new().axis("trees", [50.0, 100.0]).axis_values(
                "max_features",
                vec![HyperValue::Text("sqrt".into()), HyperValue::Text("all".into())],
            ),
        }
    }

    pub fn points(&self) -> Vec<Hyperparams> {
        let mut out = vec![Hyperparams::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub params: Hyperparams,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: Hyperparams,
    pub best_accuracy: f64,
    pub table: Vec<CvRow>,
}

fn evaluate(
    kind: ModelKind,
    params: &Hyperparams,
    data: &LabeledDataset,
    folds: &[Vec<usize>],
    seed: u64,
) -> CvRow {
    let n = data.len();
    let mut fold_accuracy = Vec::with_capacity(folds.len());
    let mut note = None;
    for held in folds {
        let mut is_test = vec![false; n];
        held.iter().for_each(|&i| is_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let result = fit(kind, &data.subset(&train), params, seed).and_then(|m| {
            let test = data.subset(held);
            let pred = m.predict_dataset(&test)?;
            let correct = pred.iter().zip(test.labels()).filter(|(p, l)| p == l).count();
            Ok(correct as f64 / held.len() as f64)
        });
        match result {
            Ok(a) => fold_accuracy.push(a),
            Err(e) => {
                fold_accuracy.push(0.0);
                note.get_or_insert_with(|| format!("fit failed: {e}"));
            }
        }
    }
    let mean_accuracy = if note.is_some() {
        0.0
    } else {
        fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64
    };
    CvRow {
        params: params.clone(),
        fold_accuracy,
        mean_accuracy,
        note,
    }
}

/// Stratified k-fold accuracy at every grid point. Points run in parallel;
/// each uses the same folds and model seed, so the table is independent of
/// scheduling. The best point is the first maximum in grid order.
pub fn grid_search(
    kind: ModelKind,
    grid: &ParamGrid,
    data: &LabeledDataset,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    let points = grid.points();
    if grid.axes.is_empty() || grid.axes.values().any(|v| v.is_empty()) {
        return Err(Error::InvalidParameter("grid is empty".into()));
    }
    let assignment = stratified_folds(data.labels(), folds, seed)?;
    let table: Vec<CvRow> = points
        .par_iter()
        .map(|p| evaluate(kind, p, data, &assignment, seed))
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_accuracy > table[best].mean_accuracy {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best: table[best].params.clone(),
        best_accuracy: table[best].mean_accuracy,
        table,
    })
}

/// CSV with one column per axis, one per fold, the mean and a note.
pub fn write_cv_table(result: &GridSearchResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let axes: Vec<String> = result
        .table
        .first()
        .map(|r| r.params.keys().cloned().collect())
        .unwrap_or_default();
    let folds = result.table.first().map_or(0, |r| r.fold_accuracy.len());
    let mut header = axes.clone();
    header.extend((1..=folds).map(|k| format!("fold_{k}")));
    header.extend(["mean_accuracy".to_string(), "note".to_string()]);
    w.write_record(&header)?;
    for row in &result.table {
        let mut rec: Vec<String> = axes.iter().map(|a| row.params[a].to_string()).collect();
        rec.extend(row.fold_accuracy.iter().map(|a| a.to_string()));
        rec.push(row.mean_accuracy.to_string());
        rec.push(row.note.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
