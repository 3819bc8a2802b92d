use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use tactslip_core::classifiers::{
    fit, grid_search, stratified_folds, stratified_split, write_cv_table, GridSearchResult,
    HyperValue, Hyperparams, ParamGrid,
};
use tactslip_core::detector::{
    run_demo, DemoConfig, DemoRun, Detector, DetectorConfig, EpisodeLog, GripController,
    GripParams, LogRecord,
};
use tactslip_core::features::write_feature_csv;
use tactslip_core::markerflow::{
    detect_markers, read_marker_csv, read_pgm_dir, write_marker_csv, DetectParams, MarkerTracker,
};
use tactslip_core::simkit::{
    generate_dataset, generate_episode, DatasetConfig, DatasetStats, GelGrid, KvConfig,
};
use tactslip_core::{
    compute_metrics, Error, FeatureSet, FeatureVector, Label, LabeledDataset, MarkerSet,
    ModelKind, TrainedModel,
};

use crate::ingest::ingest_path;
use crate::report::{EvalReport, EvalRow};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn dataset_config(config: Option<&Path>, seed: Option<u64>) -> Result<DatasetConfig> {
    let mut cfg = match config {
        Some(p) => DatasetConfig::from_kv(&read_text(p)?)
            .with_context(|| format!("in config {}", p.display()))?,
        None => DatasetConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Per-episode marker streams and ground-truth labels.
    pub markers_dir: Option<PathBuf>,
}

pub fn cmd_gen(o: &GenOptions) -> Result<DatasetStats> {
    let cfg = dataset_config(o.config.as_deref(), o.seed)?;
    let (rows, stats) = generate_dataset(&cfg)?;
    let mut w = create(&o.out)?;
    write_feature_csv(&mut w, &rows)?;
    w.flush()?;
    if let Some(dir) = &o.markers_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut w = create(&dir.join("reference.csv"))?;
        write_marker_csv(&mut w, &[GelGrid::default().rest(0.0)])?;
        w.flush()?;
        for (i, (scenario, seed)) in cfg.plan().iter().enumerate() {
            let ep = generate_episode(scenario, *seed)?;
            let stem = format!("episode_{i:04}_{}", scenario.kind);
            let mut w = create(&dir.join(format!("{stem}.csv")))?;
            write_marker_csv(&mut w, &ep.frames)?;
            w.flush()?;
            let mut w = csv::Writer::from_writer(create(&dir.join(format!("{stem}.labels.csv")))?);
            w.write_record(["t", "label"])?;
            for (f, l) in ep.frames.iter().zip(&ep.labels) {
                w.write_record([f.timestamp.to_string(), l.as_u8().to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(stats)
}

/// `true`/`false`, a number, or free text.
pub fn parse_hyper_value(s: &str) -> HyperValue {
    match s.trim() {
        "true" => HyperValue::Bool(true),
        "false" => HyperValue::Bool(false),
        t => t
            .parse::<f64>()
            .map(HyperValue::Number)
            .unwrap_or_else(|_| HyperValue::Text(t.to_string())),
    }
}

/// Merges `key = value` lines from a config file with `key=value` flags;
/// flags win.
pub fn collect_hyperparams(config: Option<&Path>, params: &[String]) -> Result<Hyperparams> {
    let mut h = Hyperparams::new();
    if let Some(p) = config {
        let entries = tactslip_core::simkit::parse_kv(&read_text(p)?)
            .with_context(|| format!("in config {}", p.display()))?;
        for (k, v) in entries {
            h.insert(k, parse_hyper_value(&v));
        }
    }
    for kv in params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--param expects key=value, got `{kv}`"))?;
        h.insert(k.trim().to_string(), parse_hyper_value(v));
    }
    Ok(h)
}

/// Feature rows from a CSV, or a synthetic dataset (default or from a
/// scenario config) for `seed`.
pub fn load_rows(
    data: Option<&Path>,
    config: Option<&Path>,
    seed: u64,
) -> Result<(Vec<FeatureVector>, bool)> {
    match data {
        Some(p) => {
            let got = ingest_path(p)?;
            let has_entropy = got.mapping.has_entropy();
            Ok((got.rows, has_entropy))
        }
        None => {
            let cfg = dataset_config(config, Some(seed))?;
            Ok((generate_dataset(&cfg)?.0, true))
        }
    }
}

fn dataset(rows: &[FeatureVector], has_entropy: bool, set: FeatureSet) -> Result<LabeledDataset> {
    if set == FeatureSet::All && !has_entropy {
        bail!("the dataset has no entropy columns; use --features velocity");
    }
    Ok(LabeledDataset::from_features(rows, set)?)
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub kind: ModelKind,
    pub features: FeatureSet,
    pub out: PathBuf,
    /// Runs a cross-validated grid search and writes its table here.
    pub grid: Option<PathBuf>,
    pub folds: usize,
    pub params: Vec<String>,
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: TrainedModel,
    pub rows: usize,
    pub train_accuracy: f64,
    pub grid: Option<GridSearchResult>,
}

pub fn cmd_train(o: &TrainOptions) -> Result<TrainSummary> {
    let (rows, has_entropy) = load_rows(o.data.as_deref(), None, o.seed)?;
    let data = dataset(&rows, has_entropy, o.features)?;
    let fixed = collect_hyperparams(o.config.as_deref(), &o.params)?;
    let (hyper, grid) = match &o.grid {
        None => (fixed, None),
        Some(path) => {
            let mut g = ParamGrid::default_for(o.kind);
            for (k, v) in &fixed {
                g.axes.insert(k.clone(), vec![v.clone()]);
            }
            let result = grid_search(o.kind, &g, &data, o.folds, o.seed)?;
            write_cv_table(&result, path)?;
            (result.best.clone(), Some(result))
        }
    };
    let model = fit(o.kind, &data, &hyper, o.seed)?;
    let pred = model.predict_dataset(&data)?;
    let train_accuracy = compute_metrics(&pred, data.labels())?.accuracy;
    model.save(&o.out)?;
    Ok(TrainSummary {
        model,
        rows: data.len(),
        train_accuracy,
        grid,
    })
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub test_fraction: f64,
    /// k-fold cross-validation instead of a single split.
    pub folds: Option<usize>,
    pub kinds: Vec<ModelKind>,
    pub feature_sets: Vec<FeatureSet>,
    /// Scores a saved model on every row instead of training.
    pub model_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Scenario config for the synthetic dataset when `data` is absent.
    pub config: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            data: None,
            seed: 42,
            test_fraction: 0.2,
            folds: None,
            kinds: ModelKind::ALL.to_vec(),
            feature_sets: vec![FeatureSet::Velocity, FeatureSet::All],
            model_file: None,
            out: None,
            config: None,
        }
    }
}

fn fit_and_score(
    kind: ModelKind,
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<Vec<Label>> {
    let model = fit(kind, train, &Hyperparams::new(), seed)?;
    Ok(model.predict_dataset(test)?)
}

pub fn cmd_eval(o: &EvalOptions) -> Result<EvalReport> {
    let (rows, has_entropy) = load_rows(o.data.as_deref(), o.config.as_deref(), o.seed)?;
    let report = if let Some(path) = &o.model_file {
        let model = TrainedModel::load(path)?;
        let set = model
            .feature_set()
            .ok_or_else(|| anyhow!("{}: unsupported feature layout", path.display()))?;
        let data = dataset(&rows, has_entropy, set)?;
        let pred = model.predict_dataset(&data)?;
        EvalReport {
            protocol: format!("saved model {} on all {} rows", path.display(), data.len()),
            rows: vec![EvalRow {
                features: set,
                kind: model.kind,
                metrics: compute_metrics(&pred, data.labels())?,
                fit_seconds: 0.0,
            }],
        }
    } else {
        let labels: Vec<Label> = rows.iter().map(|r| r.label.unwrap_or(Label::Stable)).collect();
        let protocol = match o.folds {
            Some(k) => format!("{k}-fold stratified cross-validation, seed {}, {} rows", o.seed, rows.len()),
            None => format!(
                "stratified {:.0}/{:.0} split, seed {}, {} rows",
                100.0 * (1.0 - o.test_fraction),
                100.0 * o.test_fraction,
                o.seed,
                rows.len()
            ),
        };
        let mut out = Vec::new();
        for &set in &o.feature_sets {
            let data = dataset(&rows, has_entropy, set)?;
            for &kind in &o.kinds {
                let start = Instant::now();
                let (pred, truth) = match o.folds {
                    None => {
                        let (tr, te) = stratified_split(&labels, o.test_fraction, o.seed)?;
                        let test = data.subset(&te);
                        (fit_and_score(kind, &data.subset(&tr), &test, o.seed)?, test.labels().to_vec())
                    }
                    Some(k) => {
                        let folds = stratified_folds(&labels, k, o.seed)?;
                        let (mut pred, mut truth) = (Vec::new(), Vec::new());
                        for held in &folds {
                            let mut mask = vec![false; data.len()];
                            held.iter().for_each(|&i| mask[i] = true);
                            let tr: Vec<usize> = (0..data.len()).filter(|&i| !mask[i]).collect();
                            let test = data.subset(held);
                            pred.extend(fit_and_score(kind, &data.subset(&tr), &test, o.seed)?);
                            truth.extend_from_slice(test.labels());
                        }
                        (pred, truth)
                    }
                };
                out.push(EvalRow {
                    features: set,
                    kind,
                    metrics: compute_metrics(&pred, &truth)?,
                    fit_seconds: start.elapsed().as_secs_f64(),
                });
            }
        }
        EvalReport { protocol, rows: out }
    };
    if let Some(path) = &o.out {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(report)
}

/// Detector, controller and frame-extraction settings for `detect`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectSettings {
    pub detector: DetectorConfig,
    pub extraction: DetectParams,
    pub grip: GripParams,
    pub initial_force: f64,
}

impl Default for DetectSettings {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            extraction: DetectParams::default(),
            grip: GripParams::default(),
            initial_force: 5.0,
        }
    }
}

impl DetectSettings {
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = KvConfig::parse(text)?;
        let mut s = Self::default();
        let d = &mut s.detector;
        c.set("frequency", &mut d.frequency)?;
        c.set("debounce", &mut d.debounce)?;
        c.set("contact_threshold", &mut d.contact_threshold)?;
        c.set("contact_window", &mut d.contact_window)?;
        c.set("min_markers", &mut d.min_markers)?;
        c.set("count_tolerance", &mut d.count_tolerance)?;
        c.set("recalibrate", &mut d.recalibrate)?;
        c.set("rest_threshold", &mut d.rest_threshold)?;
        c.set("rest_frames", &mut d.rest_frames)?;
        c.set("bins", &mut d.histogram.bins)?;
        c.set("max_magnitude", &mut d.histogram.max)?;
        c.set("threshold", &mut s.extraction.threshold)?;
        c.set("min_area", &mut s.extraction.min_area)?;
        c.set("initial_force", &mut s.initial_force)?;
        c.set("delta_f", &mut s.grip.delta_f)?;
        c.set("f_min", &mut s.grip.f_min)?;
        c.set("f_max", &mut s.grip.f_max)?;
        c.set("hold_window", &mut s.grip.hold_window)?;
        c.finish()?;
        s.detector.validate()?;
        s.grip.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub model: PathBuf,
    /// Marker CSV, `-` for standard input, or a directory of PGM frames.
    pub input: String,
    /// Marker CSV whose first frame is the undeformed reference.
    pub reference: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Also run the grip controller and log its force command.
    pub control: bool,
}

/// Marker frames from a CSV file, standard input, or a PGM directory.
pub fn load_marker_stream(input: &str, settings: &DetectSettings) -> Result<Vec<MarkerSet>> {
    if input == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        return Ok(read_marker_csv(text.as_bytes())?);
    }
    let path = Path::new(input);
    if path.is_dir() {
        let frames = read_pgm_dir(path, settings.detector.frequency)?;
        if frames.is_empty() {
            bail!("{input}: no .pgm frames");
        }
        let mut tracker = MarkerTracker::new(settings.detector.min_markers);
        let mut out = Vec::with_capacity(frames.len());
        for f in &frames {
            if let Some(m) = tracker.update(&detect_markers(f, &settings.extraction)?) {
                out.push(m);
            }
        }
        return Ok(out);
    }
    let file = File::open(path).with_context(|| format!("opening {input}"))?;
    Ok(read_marker_csv(io::BufReader::new(file)).with_context(|| format!("parsing {input}"))?)
}

#[derive(Debug, Clone)]
pub struct DetectRun {
    pub log: EpisodeLog,
    /// Frames where the controller was saturated while slip persisted. The
    /// stream is open loop, so the command stays at `f_max`.
    pub grasp_failures: usize,
}

pub fn detect_stream(
    model: TrainedModel,
    frames: &[MarkerSet],
    reference: Option<MarkerSet>,
    settings: &DetectSettings,
    control: bool,
) -> Result<DetectRun> {
    let mut det = Detector::new(model, settings.detector)?;
    if let Some(r) = reference {
        det = det.with_reference(r)?;
    }
    let mut ctl = if control {
        Some(GripController::new(settings.grip, settings.initial_force)?)
    } else {
        None
    };
    let mut log = EpisodeLog::default();
    let mut grasp_failures = 0;
    for f in frames {
        let out = det.ingest_frame(f)?;
        let force_cmd = match ctl.as_mut().map(|c| c.step(&out)) {
            None => None,
            Some(Ok(cmd)) => Some(cmd.target_force),
            Some(Err(Error::GraspFailure { force })) => {
                grasp_failures += 1;
                Some(force)
            }
            Some(Err(e)) => return Err(e.into()),
        };
        log.push(LogRecord {
            t: out.t,
            vx: out.features.vx,
            vy: out.features.vy,
            entropy: out.features.entropy,
            entropy_rate: out.features.entropy_rate,
            slip: out.slip,
            score: out.score,
            force_cmd,
            phase: out.phase.as_str().to_string(),
            latency_ms: out.latency_ms,
        });
    }
    Ok(DetectRun { log, grasp_failures })
}

pub fn cmd_detect(o: &DetectOptions) -> Result<DetectRun> {
    let settings = match &o.config {
        Some(p) => DetectSettings::from_kv(&read_text(p)?)
            .with_context(|| format!("in config {}", p.display()))?,
        None => DetectSettings::default(),
    };
    let model = TrainedModel::load(&o.model)
        .with_context(|| format!("loading model {}", o.model.display()))?;
    let reference = match &o.reference {
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let frames = read_marker_csv(io::BufReader::new(file))?;
            Some(frames.into_iter().next().ok_or_else(|| anyhow!("{}: empty", p.display()))?)
        }
        None => None,
    };
    let frames = load_marker_stream(&o.input, &settings)?;
    let run = detect_stream(model, &frames, reference, &settings, o.control)?;
    match &o.out {
        Some(p) => {
            let mut w = create(p)?;
            run.log.write_csv(&mut w)?;
            w.flush()?;
        }
        None => run.log.write_csv(io::stdout().lock())?,
    }
    Ok(run)
}

#[derive(Debug, Clone, Default)]
pub struct DemoOptions {
    /// Trained model; defaults to a random forest on the default dataset.
    pub model: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Phase report as JSON.
    pub report: Option<PathBuf>,
}

/// Random forest on all features of the default synthetic dataset.
pub fn default_model() -> Result<TrainedModel> {
    let (rows, _) = generate_dataset(&DatasetConfig::default())?;
    let data = LabeledDataset::from_features(&rows, FeatureSet::All)?;
    Ok(fit(ModelKind::Rf, &data, &Hyperparams::new(), 42)?)
}

pub fn cmd_demo(o: &DemoOptions) -> Result<DemoRun> {
    let mut cfg = match &o.config {
        Some(p) => DemoConfig::from_kv(&read_text(p)?)
            .with_context(|| format!("in config {}", p.display()))?,
        None => DemoConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    let model = match &o.model {
        Some(p) => TrainedModel::load(p).with_context(|| format!("loading model {}", p.display()))?,
        None => default_model()?,
    };
    let run = run_demo(&model, &cfg).map_err(|e| match e {
        Error::GraspFailure { .. } => anyhow!("demo aborted: {e}"),
        other => other.into(),
    })?;
    if let Some(p) = &o.out {
        let mut w = create(p)?;
        run.log.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &o.report {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &run.report)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(run)
}
