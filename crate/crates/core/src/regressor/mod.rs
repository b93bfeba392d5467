//! Regression heads: random forest (default) and a small MLP.

pub mod forest;
pub mod mlp;

pub use forest::{
    forest_fit, forest_predict, ForestConfig, ForestModel, MaxFeatures, Node, RegressionTree,
};
pub use mlp::{mlp_fit, mlp_gradient_check, mlp_predict, MlpConfig, MlpModel, MlpTrainReport};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::RngSeed;

/// Which head a sweep fits on each feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorSpec {
    Forest(ForestConfig),
    Mlp(MlpConfig),
}

impl RegressorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RegressorSpec::Forest(_) => "forest",
            RegressorSpec::Mlp(_) => "mlp",
        }
    }

    pub fn with_seed(&self, seed: RngSeed) -> Self {
        match self {
            RegressorSpec::Forest(c) => RegressorSpec::Forest(ForestConfig { seed, ..c.clone() }),
            RegressorSpec::Mlp(c) => RegressorSpec::Mlp(MlpConfig { seed, ..c.clone() }),
        }
    }

    /// Fits on train (the MLP also early-stops on val) and predicts `test`.
    pub fn fit_predict(
        &self,
        train: (ArrayView2<f64>, &[f64]),
        val: (ArrayView2<f64>, &[f64]),
        test: ArrayView2<f64>,
    ) -> Result<Vec<f64>> {
        match self {
            RegressorSpec::Forest(cfg) => {
                let m = forest_fit(train.0, train.1, cfg)?;
                forest_predict(&m, test)
            }
            RegressorSpec::Mlp(cfg) => {
                let (m, _) = mlp_fit(train.0, train.1, val.0, val.1, cfg)?;
                mlp_predict(&m, test)
            }
        }
    }
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec::Forest(ForestConfig::default())
    }
}
