use std::io::{Read, Write};

use super::{MarkerSet, Point};
use crate::error::{Error, Result};

/// Reads a marker stream with header `t,idx,x,y`: one row per marker per
/// frame, rows of a frame contiguous, `idx` covering `0..n` exactly once.
pub fn read_marker_csv<R: Read>(reader: R) -> Result<Vec<MarkerSet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["t", "idx", "x", "y"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Dataset(format!(
            "marker CSV header must be `t,idx,x,y`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut frames: Vec<(f64, Vec<Option<Point>>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| {
                Error::Dataset(format!("row {}: column {}: {e}", line + 2, expected[i]))
            })
        };
        let t = field(0)?;
        let idx: usize = rec[1]
            .parse()
            .map_err(|e| Error::Dataset(format!("row {}: idx: {e}", line + 2)))?;
        let p = Point::new(field(2)?, field(3)?);
        if frames.last().map_or(true, |(ft, _)| *ft != t) {
            frames.push((t, Vec::new()));
        }
        let slots = &mut frames.last_mut().unwrap().1;
        if slots.len() <= idx {
            slots.resize(idx + 1, None);
        }
        if slots[idx].replace(p).is_some() {
            return Err(Error::Dataset(format!(
                "row {}: duplicate idx {idx} at t = {t}",
                line + 2
            )));
        }
    }
    frames
        .into_iter()
        .map(|(t, slots)| {
            let positions = slots
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    p.ok_or_else(|| Error::Dataset(format!("missing idx {i} at t = {t}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MarkerSet::new(t, positions))
        })
        .collect()
}

pub fn write_marker_csv<W: Write>(writer: W, frames: &[MarkerSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "idx", "x", "y"])?;
    for f in frames {
        let t = f.timestamp.to_string();
        for (i, p) in f.positions.iter().enumerate() {
            w.write_record([t.as_str(), &i.to_string(), &p.x.to_string(), &p.y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
