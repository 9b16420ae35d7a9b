use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, NetworkSpec};

/// Plain MLP description used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub weight_norm: bool,
    #[serde(default)]
    pub batch_norm: bool,
}

impl MlpConfig {
    pub fn spec(&self, input_dim: usize, output_dim: usize) -> NetworkSpec {
        NetworkSpec::mlp(input_dim, &self.hidden, self.activation, output_dim, self.weight_norm, self.batch_norm)
    }

    /// 100-100 LeakyReLU(0.2) with weight norm.
    pub fn gmm_potential() -> Self {
        Self { hidden: vec![100, 100], activation: Activation::LeakyRelu { slope: 0.2 }, weight_norm: true, batch_norm: false }
    }

    /// 50-50 ReLU with batch norm.
    pub fn gmm_generator() -> Self {
        Self { hidden: vec![50, 50], activation: Activation::Relu, weight_norm: false, batch_norm: true }
    }
}
