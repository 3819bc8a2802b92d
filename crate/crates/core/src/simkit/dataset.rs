use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::KvConfig;
use super::episode::{generate_episode, Episode};
use super::scenario::{Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::features::{FeatureStream, FeatureVector, HistogramSpec};
use crate::markerflow::{displacement_field, Correspondence};

/// Mix of scenario families and the ranges object parameters are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub episodes: BTreeMap<ScenarioKind, usize>,
    pub duration: f64,
    pub frequency: f64,
    pub noise_max: f64,
    /// Share of episodes generated without any position noise.
    pub zero_noise_fraction: f64,
    pub mu_range: (f64, f64),
    pub mass_range: (f64, f64),
    pub stiffness_range: (f64, f64),
    pub histogram: HistogramSpec,
    pub target_slip_fraction: f64,
    pub balance_tolerance: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let episodes = [
            (ScenarioKind::NoContact, 5),
            (ScenarioKind::StableGrasp, 10),
            (ScenarioKind::TransSlipX, 42),
            (ScenarioKind::TransSlipY, 42),
            (ScenarioKind::RotSlip, 24),
            (ScenarioKind::AccelNoSlip, 12),
            (ScenarioKind::ContactLoss, 6),
        ]
        .into_iter()
        .collect();
        Self {
            seed: 42,
            episodes,
            duration: 4.0,
            frequency: crate::DEFAULT_FREQUENCY,
            noise_max: 0.08,
            zero_noise_fraction: 0.1,
            mu_range: (0.3, 1.0),
            mass_range: (0.2, 1.0),
            stiffness_range: (0.7, 1.4),
            histogram: HistogramSpec::default(),
            target_slip_fraction: 0.5,
            balance_tolerance: 0.1,
        }
    }
}

fn range(c: &mut KvConfig, key: &str, slot: &mut (f64, f64)) -> Result<()> {
    c.set(&format!("{key}_min"), &mut slot.0)?;
    c.set(&format!("{key}_max"), &mut slot.1)
}

impl DatasetConfig {
    /// Reads a flat key-value config over the defaults. Keys: `seed`,
    /// `duration`, `frequency`, `noise_max`, `zero_noise_fraction`,
    /// `mu_min`/`mu_max`, `mass_min`/`mass_max`,
    /// `stiffness_min`/`stiffness_max`, `bins`, `max_magnitude`,
    /// `target_slip_fraction`, `balance_tolerance` and `episodes.<KIND>`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = KvConfig::parse(text)?;
        let mut cfg = Self::default();
        c.set("seed", &mut cfg.seed)?;
        c.set("duration", &mut cfg.duration)?;
        c.set("frequency", &mut cfg.frequency)?;
        c.set("noise_max", &mut cfg.noise_max)?;
        c.set("zero_noise_fraction", &mut cfg.zero_noise_fraction)?;
        range(&mut c, "mu", &mut cfg.mu_range)?;
        range(&mut c, "mass", &mut cfg.mass_range)?;
        range(&mut c, "stiffness", &mut cfg.stiffness_range)?;
        c.set("bins", &mut cfg.histogram.bins)?;
        c.set("max_magnitude", &mut cfg.histogram.max)?;
        c.set("target_slip_fraction", &mut cfg.target_slip_fraction)?;
        c.set("balance_tolerance", &mut cfg.balance_tolerance)?;
        for (kind, count) in c.take_prefixed("episodes.") {
            let kind: ScenarioKind = kind.parse()?;
            let count = count
                .parse()
                .map_err(|_| Error::Config(format!("episodes.{kind}: cannot parse `{count}`")))?;
            cfg.episodes.insert(kind, count);
        }
        c.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.histogram.validate()?;
        let has = |slip: bool| {
            self.episodes
                .iter()
                .any(|(k, &c)| c > 0 && k.has_slip() == slip)
        };
        if !has(true) || !has(false) {
            return Err(Error::Config(
                "the mix needs at least one slip and one non-slip scenario".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("mu", self.mu_range),
            ("mass", self.mass_range),
            ("stiffness", self.stiffness_range),
        ] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        if !(self.noise_max >= 0.0) || !(0.0..=1.0).contains(&self.zero_noise_fraction) {
            return Err(Error::Config("noise settings out of range".into()));
        }
        if !(self.duration > 0.0 && self.frequency > 0.0) {
            return Err(Error::Config("duration and frequency must be positive".into()));
        }
        Ok(())
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.values().sum()
    }

    /// Scenario and seed of every episode, in generation order.
    pub fn plan(&self) -> Vec<(Scenario, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let mut out = Vec::with_capacity(self.episode_count());
        for (&kind, &count) in &self.episodes {
            for j in 0..count {
                let noise = if rng.random_bool(self.zero_noise_fraction) {
                    0.0
                } else {
                    draw(&mut rng, (0.0, self.noise_max))
                };
                let s = Scenario {
                    kind,
                    duration: self.duration,
                    noise_sigma: noise,
                    mass: draw(&mut rng, self.mass_range),
                    mu: draw(&mut rng, self.mu_range),
                    stiffness: draw(&mut rng, self.stiffness_range),
                    frequency: self.frequency,
                    // Alternate directions so slip carries no net sign.
                    reverse: Some(j % 2 == 1),
                };
                out.push((s, rng.random()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindStats {
    pub episodes: usize,
    pub rows: usize,
    pub slip_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub episodes: usize,
    pub rows: usize,
    pub slip_rows: usize,
    pub stable_rows: usize,
    pub slip_fraction: f64,
    pub within_tolerance: bool,
    pub per_kind: BTreeMap<ScenarioKind, KindStats>,
}

/// Runs the displacement and feature pipeline over an episode against its
/// calibration frame; one row per frame after the first.
pub fn episode_features(ep: &Episode, spec: &HistogramSpec) -> Result<Vec<FeatureVector>> {
    let corr = Correspondence::identity(ep.reference.len());
    let mut stream = FeatureStream::new(ep.scenario.frequency, *spec)?;
    let mut out = Vec::with_capacity(ep.len().saturating_sub(1));
    for (frame, label) in ep.frames.iter().zip(&ep.labels) {
        let field = displacement_field(&ep.reference, frame, &corr, None)?;
        if let Some(fv) = stream.push(field, Some(*label))? {
            out.push(fv);
        }
    }
    Ok(out)
}

/// Generates every planned episode (in parallel, output in plan order) and
/// flattens their feature rows.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<(Vec<FeatureVector>, DatasetStats)> {
    cfg.validate()?;
    let plan = cfg.plan();
    let per_episode: Vec<(ScenarioKind, Vec<FeatureVector>)> = plan
        .par_iter()
        .map(|(s, seed)| {
            let ep = generate_episode(s, *seed)?;
            Ok((s.kind, episode_features(&ep, &cfg.histogram)?))
        })
        .collect::<Result<_>>()?;
    let mut per_kind: BTreeMap<ScenarioKind, KindStats> = BTreeMap::new();
    let mut rows = Vec::new();
    for (kind, r) in per_episode {
        let k = per_kind.entry(kind).or_default();
        k.episodes += 1;
        k.rows += r.len();
        k.slip_rows += r.iter().filter(|v| v.label.is_some_and(|l| l.is_slip())).count();
        rows.extend(r);
    }
    let slip_rows: usize = per_kind.values().map(|k| k.slip_rows).sum();
    let stable_rows = rows.len() - slip_rows;
    if slip_rows == 0 || stable_rows == 0 {
        return Err(Error::Dataset(format!(
            "generated data holds a single label ({slip_rows} slip, {stable_rows} stable rows)"
        )));
    }
    let slip_fraction = slip_rows as f64 / rows.len() as f64;
    let stats = DatasetStats {
        episodes: plan.len(),
        rows: rows.len(),
        slip_rows,
        stable_rows,
        slip_fraction,
        within_tolerance: (slip_fraction - cfg.target_slip_fraction).abs() <= cfg.balance_tolerance,
        per_kind,
    };
    Ok((rows, stats))
}
