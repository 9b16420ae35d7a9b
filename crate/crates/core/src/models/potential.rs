use crate::autodiff::{backward, forward, input_grad, logsumexp, softmax, Mode, NetworkSpec, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labeled observation; classes are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Potential network. With `K = 1` the single output is `u_θ(x)`; with
/// `K > 1` the outputs are class potentials `u_θ(x, y)` and the marginal
/// potential is their log-sum-exp.
///
/// Batch-norm layers, if any, always use running statistics here.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialNet {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    num_outputs: usize,
}

impl PotentialNet {
    pub fn new(spec: NetworkSpec, params: ParamSet) -> Result<Self> {
        spec.validate()?;
        spec.check_params(&params)?;
        let num_outputs = spec.output_dim();
        Ok(Self { spec, params, num_outputs })
    }

    pub fn init<R: rand::Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let params = spec.init_params(rng)?;
        Self::new(spec, params)
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn batch(&self, xs: &Tensor) -> Result<Tensor> {
        let d = self.input_dim();
        if xs.shape().len() == 1 && xs.len() == d {
            return Ok(Tensor::row(xs.data()));
        }
        xs.expect_cols("potential input", d)?;
        Ok(xs.clone())
    }

    fn require_classes(&self) -> Result<()> {
        if self.num_outputs < 2 {
            return Err(Error::invalid("class potentials need a network with K >= 2 outputs"));
        }
        Ok(())
    }

    /// Raw head outputs, `(n, K)`.
    pub fn heads(&self, xs: &Tensor) -> Result<Tensor> {
        Ok(forward(&self.spec, &self.params, &self.batch(xs)?, Mode::Eval)?.0)
    }

    /// Marginal potential of each row.
    pub fn potentials(&self, xs: &Tensor) -> Result<Vec<f64>> {
        let heads = self.heads(xs)?;
        heads_to_potentials(&heads)
    }

    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        Ok(self.potentials(&Tensor::row(x))?[0])
    }

    pub fn class_potentials(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_classes()?;
        Ok(self.heads(&Tensor::row(x))?.into_data())
    }

    /// `p_θ(y | x)`: softmax of the class potentials.
    pub fn classifier_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.class_potentials(x)?))
    }

    /// Most probable class of each row.
    pub fn predict(&self, xs: &Tensor) -> Result<Vec<usize>> {
        self.require_classes()?;
        let heads = self.heads(xs)?;
        Ok(heads
            .row_iter()
            .map(|r| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0)
            .collect())
    }

    /// Marginal potentials and `∂u_θ(x)/∂x` for each row.
    pub fn potentials_and_grad_x(&self, xs: &Tensor) -> Result<(Vec<f64>, Tensor)> {
        let (heads, graph) = forward(&self.spec, &self.params, &self.batch(xs)?, Mode::Eval)?;
        let u = heads_to_potentials(&heads)?;
        let seed = marginal_seed(&heads, None);
        Ok((u, input_grad(&graph, &seed)?))
    }

    pub fn grad_potential_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.potentials_and_grad_x(&Tensor::row(x))?.1.into_data())
    }

    /// `∂u_θ(x, y)/∂x` for a per-row class.
    pub fn class_grad_x(&self, xs: &Tensor, classes: &[usize]) -> Result<Tensor> {
        self.require_classes()?;
        let xs = self.batch(xs)?;
        if classes.len() != xs.rows() {
            return Err(Error::invalid("one class per row required"));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= self.num_outputs) {
            return Err(Error::invalid(format!("class {bad} out of range for K = {}", self.num_outputs)));
        }
        let (heads, graph) = forward(&self.spec, &self.params, &xs, Mode::Eval)?;
        let mut seed = Tensor::zeros(heads.shape());
        for (i, &c) in classes.iter().enumerate() {
            seed.row_slice_mut(i)[c] = 1.0;
        }
        input_grad(&graph, &seed)
    }

    /// Head outputs plus `∂/∂θ Σ_ij seed_ij · heads_ij`, with the seed built
    /// from the heads by `make_seed`.
    pub fn heads_with_param_grad<F>(&self, xs: &Tensor, make_seed: F) -> Result<(Tensor, ParamSet)>
    where
        F: FnOnce(&Tensor) -> Result<Tensor>,
    {
        let (heads, graph) = forward(&self.spec, &self.params, &self.batch(xs)?, Mode::Eval)?;
        let seed = make_seed(&heads)?;
        let (grads, _) = backward(&graph, &seed)?;
        Ok((heads, grads))
    }
}

/// Marginal potentials from head outputs.
pub(crate) fn heads_to_potentials(heads: &Tensor) -> Result<Vec<f64>> {
    if heads.cols() == 1 {
        return Ok(heads.data().to_vec());
    }
    heads.row_iter().map(logsumexp).collect()
}

/// Seed that backpropagates `Σ_i w_i u_θ(x_i)` through the heads
/// (`w_i = 1` when `weights` is `None`).
pub(crate) fn marginal_seed(heads: &Tensor, weights: Option<&[f64]>) -> Tensor {
    let k = heads.cols();
    let mut seed = Tensor::zeros(heads.shape());
    for (i, r) in heads.row_iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let out = seed.row_slice_mut(i);
        if k == 1 {
            out[0] = w;
        } else {
            for (o, p) in out.iter_mut().zip(softmax(r)) {
                *o = w * p;
            }
        }
    }
    seed
}
