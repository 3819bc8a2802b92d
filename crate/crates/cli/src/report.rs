//! Classifier comparison report: one row per (feature set, classifier).

use std::io::Write;

use anyhow::Result;
use tactslip_core::{FeatureSet, Metrics, ModelKind};

pub const REPORT_HEADER: [&str; 10] = [
    "features",
    "classifier",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "stable_accuracy",
    "slip_accuracy",
    "test_rows",
    "fit_seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub features: FeatureSet,
    pub kind: ModelKind,
    pub metrics: Metrics,
    pub fit_seconds: f64,
}

impl EvalRow {
    /// Recall of each class, `(stable, slip)`.
    pub fn per_class(&self) -> (f64, f64) {
        let c = &self.metrics.confusion;
        let rate = |hit: usize, miss: usize| {
            if hit + miss == 0 {
                1.0
            } else {
                hit as f64 / (hit + miss) as f64
            }
        };
        (rate(c.tn, c.fp), rate(c.tp, c.fn_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub protocol: String,
    pub rows: Vec<EvalRow>,
}

/// Percentage with two decimals.
pub fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl EvalReport {
    pub fn row(&self, features: FeatureSet, kind: ModelKind) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.features == features && r.kind == kind)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            let m = &r.metrics;
            let (stable, slip) = r.per_class();
            w.write_record([
                r.features.to_string(),
                r.kind.display_name().to_string(),
                pct(m.accuracy),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                pct(stable),
                pct(slip),
                m.confusion.total().to_string(),
                format!("{:.3}", r.fit_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text table, one block per feature set.
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.protocol);
        let mut last: Option<FeatureSet> = None;
        for r in &self.rows {
            if last != Some(r.features) {
                out.push_str(&format!(
                    "\nfeatures: {}\n{:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
                    r.features, "", "Accuracy", "Precision", "Recall", "F1", "Stable", "Slip"
                ));
                last = Some(r.features);
            }
            let m = &r.metrics;
            let (stable, slip) = r.per_class();
            out.push_str(&format!(
                "{:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
                r.kind.display_name(),
                pct(m.accuracy),
                pct(m.precision),
                pct(m.recall),
                pct(m.f1),
                pct(stable),
                pct(slip)
            ));
        }
        out
    }
}
