//! Evaluation: Huber errors, significance tests, loss-curve normalization,
//! intrinsic dimension and reconstruction similarity.

mod curve;
mod loss;
mod similarity;
mod ttest;

pub use curve::{
    intrinsic_dimension, normalize_curve, CurvePoint, Dimension, LossCurve, ThresholdRule,
};
pub use loss::{error_distribution, huber, huber_derivative, ErrorDistribution, DEFAULT_DELTA};
pub use similarity::{cosine_similarity, reconstruction_similarity, Similarity};
pub use ttest::{t_test, SignificanceBand, TTestResult, TTestVariant};
