use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPISODE_LOG_HEADER: [&str; 10] = [
    "t",
    "vx",
    "vy",
    "entropy",
    "entropy_rate",
    "slip",
    "score",
    "force_cmd",
    "phase",
    "latency_ms",
];

/// One processed frame. `force_cmd` is empty when no controller ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub entropy: f64,
    pub entropy_rate: f64,
    pub slip: bool,
    pub score: f64,
    pub force_cmd: Option<f64>,
    pub phase: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub records: Vec<LogRecord>,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    /// Copy with latencies zeroed; timing is the one field that legitimately
    /// differs between identical replays.
    pub fn without_latency(&self) -> EpisodeLog {
        EpisodeLog {
            records: self
                .records
                .iter()
                .map(|r| LogRecord {
                    latency_ms: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn latency_stats(&self) -> Option<LatencyStats> {
        if self.records.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.records.iter().map(|r| r.latency_ms).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        // Nearest-rank percentile.
        let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
        Some(LatencyStats {
            count: n,
            mean_ms: v.iter().sum::<f64>() / n as f64,
            p99_ms: v[rank - 1],
            max_ms: v[n - 1],
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(EPISODE_LOG_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.vx.to_string(),
                r.vy.to_string(),
                r.entropy.to_string(),
                r.entropy_rate.to_string(),
                (r.slip as u8).to_string(),
                r.score.to_string(),
                r.force_cmd.map(|f| f.to_string()).unwrap_or_default(),
                r.phase.clone(),
                r.latency_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != EPISODE_LOG_HEADER {
            return Err(Error::InvalidParameter(format!(
                "episode log header must be `{}`",
                EPISODE_LOG_HEADER.join(",")
            )));
        }
        let num = |s: &str, line: usize| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidParameter(format!("line {line}: bad number `{s}`")))
        };
        let mut records = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let slip = match &rec[5] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "line {line}: slip must be 0 or 1, got `{other}`"
                    )))
                }
            };
            records.push(LogRecord {
                t: num(&rec[0], line)?,
                vx: num(&rec[1], line)?,
                vy: num(&rec[2], line)?,
                entropy: num(&rec[3], line)?,
                entropy_rate: num(&rec[4], line)?,
                slip,
                score: num(&rec[6], line)?,
                force_cmd: if rec[7].is_empty() { None } else { Some(num(&rec[7], line)?) },
                phase: rec[8].to_string(),
                latency_ms: num(&rec[9], line)?,
            });
        }
        Ok(Self { records })
    }
}
