use std::io::{Read, Write};

use super::{FeatureVector, Label};
use crate::error::{Error, Result};

pub const FEATURE_CSV_HEADER: [&str; 6] = ["t", "vx", "vy", "entropy", "entropy_rate", "label"];

/// Writes the feature interchange CSV. The label column is empty for
/// unlabelled rows.
pub fn write_feature_csv<W: Write>(writer: W, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURE_CSV_HEADER)?;
    for r in rows {
        let label = r.label.map(|l| l.as_u8().to_string()).unwrap_or_default();
        w.write_record([
            r.t.to_string(),
            r.vx.to_string(),
            r.vy.to_string(),
            r.entropy.to_string(),
            r.entropy_rate.to_string(),
            label,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(FEATURE_CSV_HEADER) {
        return Err(Error::Dataset(format!(
            "feature CSV header must be `{}`, got `{}`",
            FEATURE_CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec[c].parse::<f64>().map_err(|e| {
                    Error::Dataset(format!("row {}: {}: {e}", i + 2, FEATURE_CSV_HEADER[c]))
                })
            };
            let label = match &rec[5] {
                "" => None,
                s => Some(Label::from_u8(s.parse().map_err(|e| {
                    Error::Dataset(format!("row {}: label: {e}", i + 2))
                })?)?),
            };
            Ok(FeatureVector {
                t: num(0)?,
                vx: num(1)?,
                vy: num(2)?,
                entropy: num(3)?,
                entropy_rate: num(4)?,
                label,
            })
        })
        .collect()
}
