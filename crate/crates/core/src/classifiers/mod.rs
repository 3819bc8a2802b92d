//! Binary slip classifiers written from scratch: L2-regularised logistic
//! regression, an RBF-kernel SVM trained by SMO, k-nearest neighbours and a
//! random forest of CART trees. Every model standardises its inputs with
//! statistics from its own training data.

mod dataset;
mod forest;
mod grid;
mod knn;
mod logistic;
mod metrics;
mod model;
mod standardize;
mod svm;

pub use dataset::{stratified_folds, stratified_split, FeatureSet, LabeledDataset};
pub use forest::{
    fit_random_forest, DecisionTree, ForestConfig, ForestParams, MaxFeatures, Node, TreeConfig,
};
pub use grid::{grid_search, write_cv_table, CvRow, GridSearchResult, ParamGrid};
pub use knn::{fit_knn, predict_knn, KnnParams};
pub use logistic::{
    fit_logistic, logistic_objective, sigmoid, train_logistic, LogisticConfig, LogisticFit,
    LogisticParams,
};
pub use metrics::{compute_metrics, compute_metrics_with, Averaging, Confusion, Metrics};
pub use model::{fit, HyperValue, Hyperparams, ModelKind, ModelParams, Prediction, TrainedModel};
pub use standardize::Standardizer;
pub use svm::{fit_svm_rbf, rbf_kernel, scale_gamma, solve_smo, SmoConfig, SmoSolution, SvmParams};
