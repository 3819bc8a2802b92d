//! Entropy of the displacement-magnitude histogram, its rate of change, and
//! the four-dimensional feature vector `(vx, vy, entropy, entropy_rate)`.

mod csv_io;
mod entropy;
mod histogram;
mod vector;

pub use csv_io::{read_feature_csv, write_feature_csv, FEATURE_CSV_HEADER};
pub use entropy::{entropy, entropy_rate};
pub use histogram::{magnitude_histogram, Histogram, HistogramSpec};
pub use vector::{build_feature_vector, FeatureStream, FeatureVector, Label};
