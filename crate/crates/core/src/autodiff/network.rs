use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Softplus,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Softplus => (-x.abs()).exp().ln_1p() + x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        units: usize,
        #[serde(default)]
        weight_norm: bool,
    },
    Activation {
        activation: Activation,
    },
    BatchNorm,
}

/// Ordered layer list defining a feed-forward network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let spec = Self { input_dim, layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Dense stack: each hidden width is followed by an optional batch norm
    /// and the activation; the output layer is linear.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        output_dim: usize,
        weight_norm: bool,
        batch_norm: bool,
    ) -> Self {
        let mut layers = Vec::new();
        for &units in hidden {
            layers.push(Layer::Dense { units, weight_norm });
            if batch_norm {
                layers.push(Layer::BatchNorm);
            }
            layers.push(Layer::Activation { activation });
        }
        layers.push(Layer::Dense { units: output_dim, weight_norm });
        Self { input_dim, layers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("network input width must be positive"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Dense { units: 0, .. } = layer {
                return Err(Error::invalid(format!("layer {i}: dense width must be positive")));
            }
        }
        Ok(())
    }

    /// Width of each layer's output, in order.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = self.input_dim;
        self.layers
            .iter()
            .map(|l| {
                if let Layer::Dense { units, .. } = l {
                    w = *units;
                }
                w
            })
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.widths().last().copied().unwrap_or(self.input_dim)
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::BatchNorm))
    }

    /// Fresh parameters: weight-normed layers get `g = 1` and
    /// `v ~ N(0, 1/fan_in)`; raw layers get `W ~ N(0, 1/fan_in)`; biases zero.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamSet> {
        self.validate()?;
        let mut params = ParamSet::new();
        let mut fan_in = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Dense { units, weight_norm } => {
                    let std = (1.0 / fan_in as f64).sqrt();
                    let mut w = vec![0.0; units * fan_in];
                    rng::fill_normal(rng, &mut w);
                    w.iter_mut().for_each(|v| *v *= std);
                    let w = Tensor::matrix(units, fan_in, w);
                    if weight_norm {
                        params.insert(param_name(i, "direction"), w);
                        params.insert(param_name(i, "scale"), Tensor::filled(&[units], 1.0));
                    } else {
                        params.insert(param_name(i, "weight"), w);
                    }
                    params.insert(param_name(i, "bias"), Tensor::zeros(&[units]));
                    fan_in = units;
                }
                Layer::BatchNorm => {
                    params.insert(param_name(i, "gamma"), Tensor::filled(&[fan_in], 1.0));
                    params.insert(param_name(i, "beta"), Tensor::zeros(&[fan_in]));
                    params.insert(param_name(i, "running_mean"), Tensor::zeros(&[fan_in]));
                    params.insert(param_name(i, "running_var"), Tensor::filled(&[fan_in], 1.0));
                }
                Layer::Activation { .. } => {}
            }
        }
        Ok(params)
    }

    /// Check that `params` holds every tensor this spec needs, with the right shapes.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let mut fan_in = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Dense { units, weight_norm } => {
                    if weight_norm {
                        let v = params.require(&param_name(i, "direction"))?;
                        v.expect_shape("weight-norm direction", &[units, fan_in])?;
                        params.require(&param_name(i, "scale"))?.expect_shape("weight-norm scale", &[units])?;
                        if v.row_iter().any(|r| r.iter().all(|&x| x == 0.0)) {
                            return Err(Error::invalid(format!("layer {i}: zero weight-norm direction")));
                        }
                    } else {
                        params.require(&param_name(i, "weight"))?.expect_shape("dense weight", &[units, fan_in])?;
                    }
                    params.require(&param_name(i, "bias"))?.expect_shape("dense bias", &[units])?;
                    fan_in = units;
                }
                Layer::BatchNorm => {
                    for n in ["gamma", "beta", "running_mean", "running_var"] {
                        params.require(&param_name(i, n))?.expect_shape("batch norm", &[fan_in])?;
                    }
                }
                Layer::Activation { .. } => {}
            }
        }
        Ok(())
    }
}

pub(crate) fn param_name(layer: usize, kind: &str) -> String {
    format!("layer{layer:02}.{kind}")
}

/// Running statistics are state, not trainable parameters.
pub(crate) fn is_buffer(name: &str) -> bool {
    name.ends_with(".running_mean") || name.ends_with(".running_var")
}
