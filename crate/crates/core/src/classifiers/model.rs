use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::{fit_random_forest, ForestConfig, ForestParams, MaxFeatures};
use super::knn::{fit_knn, KnnParams};
use super::logistic::{fit_logistic, LogisticParams};
use super::svm::{fit_svm_rbf, SvmParams};
use super::{FeatureSet, LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::features::Label;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Svm,
    Knn,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lr, ModelKind::Svm, ModelKind::Knn, ModelKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
            ModelKind::Knn => "knn",
            ModelKind::Rf => "rf",
        }
    }

    /// Report label, e.g. `RF`.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Svm => "SVM",
            ModelKind::Knn => "KNN",
            ModelKind::Rf => "RF",
        }
    }

    /// Hyperparameters used when none are given.
    pub fn default_hyperparams(self) -> Hyperparams {
        let mut h = Hyperparams::new();
        match self {
            ModelKind::Lr => {
                h.insert("c".into(), HyperValue::Number(0.1));
            }
            ModelKind::Svm => {
                h.insert("c".into(), HyperValue::Number(1.0));
                h.insert("gamma".into(), HyperValue::Text("scale".into()));
            }
            ModelKind::Knn => {
                h.insert("k".into(), HyperValue::Number(1.0));
            }
            ModelKind::Rf => {
                h.insert("trees".into(), HyperValue::Number(100.0));
                h.insert("max_features".into(), HyperValue::Text("sqrt".into()));
                h.insert("bootstrap".into(), HyperValue::Bool(true));
                h.insert("min_samples_split".into(), HyperValue::Number(2.0));
            }
        }
        h
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Lr => &["c", "penalty"],
            ModelKind::Svm => &["c", "gamma", "gamma_rule", "kernel"],
            ModelKind::Knn => &["k", "metric"],
            ModelKind::Rf => &[
                "trees",
                "max_features",
                "bootstrap",
                "min_samples_split",
                "max_depth",
                "seed",
            ],
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ModelKind::Lr),
            "svm" => Ok(ModelKind::Svm),
            "knn" => Ok(ModelKind::Knn),
            "rf" | "forest" => Ok(ModelKind::Rf),
            other => Err(Error::InvalidParameter(format!(
                "unknown model `{other}` (expected lr, svm, knn or rf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl std::fmt::Display for HyperValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HyperValue::Bool(b) => write!(f, "{b}"),
            HyperValue::Number(v) => write!(f, "{v}"),
            HyperValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Hyperparams = BTreeMap<String, HyperValue>;

fn number(h: &Hyperparams, key: &str) -> Result<Option<f64>> {
    match h.get(key) {
        None => Ok(None),
        Some(HyperValue::Number(v)) => Ok(Some(*v)),
        Some(other) => Err(Error::InvalidParameter(format!(
            "`{key}` must be numeric, got `{other}`"
        ))),
    }
}

fn count(h: &Hyperparams, key: &str) -> Result<Option<usize>> {
    match number(h, key)? {
        None => Ok(None),
        Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
        Some(v) => Err(Error::InvalidParameter(format!(
            "`{key}` must be a non-negative integer, got {v}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    Logistic(LogisticParams),
    Svm(SvmParams),
    Knn(KnnParams),
    Forest(ForestParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability (LR), signed margin (SVM) or slip vote fraction (KNN, RF).
    pub score: f64,
}

/// A fitted classifier; immutable, so concurrent predictions are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct StandardizerRecord {
    features: Vec<String>,
    mean: Vec<f64>,
    stddev: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kind: ModelKind,
    hyperparams: Hyperparams,
    standardizer: StandardizerRecord,
    parameters: serde_json::Value,
}

/// Fits `kind` with `hyperparams` layered over the defaults. `seed` drives
/// every random choice (only the forest uses one).
pub fn fit(kind: ModelKind, data: &LabeledDataset, hyperparams: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if let Some(k) = hyperparams
        .keys()
        .find(|k| !kind.allowed_keys().contains(&k.as_str()))
    {
        return Err(Error::InvalidParameter(format!(
            "`{k}` is not a hyperparameter of {}",
            kind.display_name()
        )));
    }
    let mut h = kind.default_hyperparams();
    h.extend(hyperparams.iter().map(|(k, v)| (k.clone(), v.clone())));
    let (standardizer, params) = match kind {
        ModelKind::Lr => {
            let c = number(&h, "c")?.unwrap_or(0.1);
            h.insert(
                "penalty".into(),
                HyperValue::Text("l2, loss += |theta_nonbias|^2 / (2 c N)".into()),
            );
            let (s, p) = fit_logistic(data, c)?;
            (s, ModelParams::Logistic(p))
        }
        ModelKind::Svm => {
            let c = number(&h, "c")?.unwrap_or(1.0);
            let gamma = match h.get("gamma") {
                Some(HyperValue::Number(g)) => Some(*g),
                Some(HyperValue::Text(t)) if t == "scale" => None,
                None => None,
                Some(other) => {
                    return Err(Error::InvalidParameter(format!(
                        "gamma must be a number or `scale`, got `{other}`"
                    )))
                }
            };
            let (s, p) = fit_svm_rbf(data, c, gamma)?;
            if gamma.is_none() {
                h.insert("gamma_rule".into(), HyperValue::Text("1 / (d * var)".into()));
            }
            h.insert("gamma".into(), HyperValue::Number(p.gamma));
            h.insert("kernel".into(), HyperValue::Text("rbf".into()));
            (s, ModelParams::Svm(p))
        }
        ModelKind::Knn => {
            let k = count(&h, "k")?.unwrap_or(1);
            h.insert("metric".into(), HyperValue::Text("euclidean".into()));
            let (s, p) = fit_knn(data, k)?;
            (s, ModelParams::Knn(p))
        }
        ModelKind::Rf => {
            let max_features = match h.get("max_features") {
                Some(HyperValue::Text(t)) if t == "sqrt" => MaxFeatures::Sqrt,
                Some(HyperValue::Text(t)) if t == "all" => MaxFeatures::All,
                Some(HyperValue::Number(_)) => MaxFeatures::Count(count(&h, "max_features")?.unwrap_or(1)),
                None => MaxFeatures::Sqrt,
                Some(other) => {
                    return Err(Error::InvalidParameter(format!(
                        "max_features must be sqrt, all or a count, got `{other}`"
                    )))
                }
            };
            let bootstrap = match h.get("bootstrap") {
                Some(HyperValue::Bool(b)) => *b,
                Some(HyperValue::Number(v)) => *v != 0.0,
                None => true,
                Some(other) => {
                    return Err(Error::InvalidParameter(format!(
                        "bootstrap must be a boolean, got `{other}`"
                    )))
                }
            };
            let seed = count(&h, "seed")?.map(|s| s as u64).unwrap_or(seed);
            h.insert("seed".into(), HyperValue::Number(seed as f64));
            let cfg = ForestConfig {
                trees: count(&h, "trees")?.unwrap_or(100),
                max_features,
                bootstrap,
                min_samples_split: count(&h, "min_samples_split")?.unwrap_or(2),
                max_depth: count(&h, "max_depth")?,
                seed,
            };
            let (s, p) = fit_random_forest(data, &cfg)?;
            (s, ModelParams::Forest(p))
        }
    };
    Ok(TrainedModel {
        kind,
        hyperparams: h,
        feature_names: data.feature_names().to_vec(),
        standardizer,
        params,
    })
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn feature_set(&self) -> Option<FeatureSet> {
        [FeatureSet::Velocity, FeatureSet::All]
            .into_iter()
            .find(|s| s.names() == self.feature_names)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.dim() == 0 {
            return Err(Error::Model("model has no features".into()));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let z = self.standardizer.transform(x);
        let (label, score) = match &self.params {
            ModelParams::Logistic(p) => {
                let prob = p.probability(&z);
                (Label::from(prob > 0.5), prob)
            }
            ModelParams::Svm(p) => {
                let m = p.decision(&z);
                (Label::from(m > 0.0), m)
            }
            ModelParams::Knn(p) => p.vote(&z),
            ModelParams::Forest(p) => p.vote(&z),
        };
        Ok(Prediction { label, score })
    }

    pub fn predict_batch<R: AsRef<[f64]>>(&self, xs: &[R]) -> Result<Vec<Prediction>> {
        xs.iter().map(|x| self.predict(x.as_ref())).collect()
    }

    pub fn predict_dataset(&self, data: &LabeledDataset) -> Result<Vec<Label>> {
        data.rows().map(|r| self.predict(r).map(|p| p.label)).collect()
    }

    /// Per-tree votes; `None` for non-forest models.
    pub fn tree_votes(&self, x: &[f64]) -> Option<Vec<u8>> {
        match &self.params {
            ModelParams::Forest(p) => Some(p.votes(&self.standardizer.transform(x))),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            kind: self.kind,
            hyperparams: self.hyperparams.clone(),
            standardizer: StandardizerRecord {
                features: self.feature_names.clone(),
                mean: self.standardizer.mean.clone(),
                stddev: self.standardizer.stddev.clone(),
            },
            parameters: serde_json::to_value(&self.params)?,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::Model(format!(
                "unsupported model file version {} (expected {MODEL_FILE_VERSION})",
                file.version
            )));
        }
        let p = file.parameters;
        let params = match file.kind {
            ModelKind::Lr => ModelParams::Logistic(serde_json::from_value(p)?),
            ModelKind::Svm => ModelParams::Svm(serde_json::from_value(p)?),
            ModelKind::Knn => ModelParams::Knn(serde_json::from_value(p)?),
            ModelKind::Rf => ModelParams::Forest(serde_json::from_value(p)?),
        };
        let st = file.standardizer;
        if st.mean.len() != st.stddev.len() || st.mean.len() != st.features.len() {
            return Err(Error::Model("standardizer lengths disagree".into()));
        }
        Ok(TrainedModel {
            kind: file.kind,
            hyperparams: file.hyperparams,
            feature_names: st.features,
            standardizer: Standardizer {
                mean: st.mean,
                stddev: st.stddev,
            },
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
