//! Feature-table ingestion with header sniffing.
//!
//! Interchange CSVs written by `gen` load directly. Other tables are mapped
//! column by column: headers are lower-cased and stripped of spaces, dashes,
//! underscores and dots, then matched against the alias lists below. Label
//! cells accept `0`/`1`, `true`/`false`, `slip`/`stable` and `nonslip`.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use tactslip_core::features::{read_feature_csv, FEATURE_CSV_HEADER};
use tactslip_core::{FeatureVector, Label};

pub const T_ALIASES: &[&str] = &["t", "time", "timestamp", "times", "frame"];
pub const VX_ALIASES: &[&str] = &["vx", "meanvx", "velocityx", "velx", "vbarx", "avgvx"];
pub const VY_ALIASES: &[&str] = &["vy", "meanvy", "velocityy", "vely", "vbary", "avgvy"];
pub const ENTROPY_ALIASES: &[&str] = &["entropy", "e", "h", "shannonentropy", "ent"];
pub const RATE_ALIASES: &[&str] = &[
    "entropyrate",
    "dedt",
    "dentropy",
    "entropyderivative",
    "entropychange",
    "de",
    "rate",
];
pub const LABEL_ALIASES: &[&str] = &["label", "slip", "class", "target", "y", "isslip", "state"];

/// Where each feature came from in the source table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub t: Option<String>,
    pub vx: String,
    pub vy: String,
    pub entropy: Option<String>,
    pub entropy_rate: Option<String>,
    pub label: String,
}

impl ColumnMapping {
    pub fn has_entropy(&self) -> bool {
        self.entropy.is_some() && self.entropy_rate.is_some()
    }

    pub fn describe(&self) -> String {
        let opt = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
        format!(
            "t <- {}, vx <- {}, vy <- {}, entropy <- {}, entropy_rate <- {}, label <- {}",
            opt(&self.t),
            self.vx,
            self.vy,
            opt(&self.entropy),
            opt(&self.entropy_rate),
            self.label
        )
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    /// Missing entropy columns are NaN.
    pub rows: Vec<FeatureVector>,
    pub mapping: ColumnMapping,
}

fn normalize(h: &str) -> String {
    h.trim_start_matches('\u{feff}')
        .chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-' | '.' | '(' | ')' | '/'))
        .flat_map(char::to_lowercase)
        .collect()
}

fn find(headers: &[String], aliases: &[&str]) -> Option<usize> {
    aliases
        .iter()
        .find_map(|a| headers.iter().position(|h| normalize(h) == *a))
}

pub fn parse_label(cell: &str) -> Option<Label> {
    if let Ok(v) = cell.trim().parse::<f64>() {
        return match v {
            1.0 => Some(Label::Slip),
            0.0 => Some(Label::Stable),
            _ => None,
        };
    }
    match normalize(cell).as_str() {
        "true" | "slip" | "slipping" | "yes" => Some(Label::Slip),
        "false" | "stable" | "nonslip" | "noslip" | "no" | "static" => Some(Label::Stable),
        _ => None,
    }
}

/// Column mapping for a header row; fails when velocities or labels are
/// missing.
pub fn sniff_header(headers: &[String]) -> Result<ColumnMapping> {
    let take = |aliases: &[&str]| find(headers, aliases).map(|i| headers[i].clone());
    let need = |aliases: &[&str], what: &str| {
        take(aliases).ok_or_else(|| {
            anyhow!(
                "no {what} column among `{}` (accepted: {})",
                headers.join(","),
                aliases.join(", ")
            )
        })
    };
    Ok(ColumnMapping {
        t: take(T_ALIASES),
        vx: need(VX_ALIASES, "x-velocity")?,
        vy: need(VY_ALIASES, "y-velocity")?,
        entropy: take(ENTROPY_ALIASES),
        entropy_rate: take(RATE_ALIASES),
        label: need(LABEL_ALIASES, "label")?,
    })
}

pub fn ingest_reader<R: Read>(reader: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mapping = sniff_header(&headers)?;
    let col = |name: &str| headers.iter().position(|h| h == name).expect("mapped column");
    let (ci, cx, cy, cl) = (
        mapping.t.as_deref().map(col),
        col(&mapping.vx),
        col(&mapping.vy),
        col(&mapping.label),
    );
    let ce = mapping.entropy.as_deref().map(col);
    let cr = mapping.entropy_rate.as_deref().map(col);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .with_context(|| format!("line {line}: `{}` is not a number", s))
        };
        let label_cell = rec.get(cl).unwrap_or("");
        let label = parse_label(label_cell)
            .ok_or_else(|| anyhow!("line {line}: unrecognised label `{label_cell}`"))?;
        rows.push(FeatureVector {
            t: match ci {
                Some(c) => num(c)?,
                None => i as f64,
            },
            vx: num(cx)?,
            vy: num(cy)?,
            entropy: ce.map(num).transpose()?.unwrap_or(f64::NAN),
            entropy_rate: cr.map(num).transpose()?.unwrap_or(f64::NAN),
            label: Some(label),
        });
    }
    if rows.is_empty() {
        bail!("dataset has no rows");
    }
    Ok(Ingested { rows, mapping })
}

/// Loads a feature table, using the strict interchange reader when the
/// header matches it exactly.
pub fn ingest_path(path: &Path) -> Result<Ingested> {
    let mut text = String::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_string(&mut text)
        .with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    let exact = first.split(',').map(str::trim).eq(FEATURE_CSV_HEADER);
    if exact {
        let rows = read_feature_csv(text.as_bytes())
            .with_context(|| format!("parsing {}", path.display()))?;
        if rows.iter().any(|r| r.label.is_none()) {
            bail!("{}: every row needs a label", path.display());
        }
        let mapping = sniff_header(&FEATURE_CSV_HEADER.map(String::from))?;
        return Ok(Ingested { rows, mapping });
    }
    ingest_reader(text.as_bytes()).with_context(|| format!("parsing {}", path.display()))
}
