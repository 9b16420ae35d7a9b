use crate::autodiff::{softmax, ParamSet};
use crate::error::{Error, Result};
use crate::models::{heads_to_potentials, marginal_seed, PotentialNet};
use crate::tensor::Tensor;

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn require_classes(heads: &Tensor) -> Result<()> {
    if heads.cols() < 2 {
        return Err(Error::invalid("this loss needs a potential with K >= 2 outputs"));
    }
    Ok(())
}

/// Mean predictive entropy and its head seed. For one row,
/// `∂H/∂z_k = −p_k (log p_k + H)`.
pub(crate) fn confidence_seed(heads: &Tensor) -> Result<(f64, Tensor)> {
    require_classes(heads)?;
    let n = heads.rows() as f64;
    let mut seed = Tensor::zeros(heads.shape());
    let mut total = 0.0;
    for (i, z) in heads.row_iter().enumerate() {
        let lp = log_softmax(z);
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        let h: f64 = -p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
        total += h;
        for ((s, pk), lk) in seed.row_slice_mut(i).iter_mut().zip(&p).zip(&lp) {
            *s = -pk * (lk + h) / n;
        }
    }
    Ok((total / n, seed))
}

/// Mean squared marginal potential and its head seed.
pub(crate) fn control_seed(heads: &Tensor) -> Result<(f64, Tensor)> {
    let u = heads_to_potentials(heads)?;
    let n = u.len() as f64;
    let w: Vec<f64> = u.iter().map(|v| 2.0 * v / n).collect();
    Ok((u.iter().map(|v| v * v).sum::<f64>() / n, marginal_seed(heads, Some(&w))))
}

/// Mean `log p_θ(y | x)` and its head seed `(onehot(y) − p) / m`.
pub(crate) fn supervised_seed(heads: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    require_classes(heads)?;
    if labels.len() != heads.rows() {
        return Err(Error::invalid("one label per labeled example required"));
    }
    let m = heads.rows() as f64;
    let mut seed = Tensor::zeros(heads.shape());
    let mut total = 0.0;
    for (i, (z, &y)) in heads.row_iter().zip(labels).enumerate() {
        if y >= z.len() {
            return Err(Error::invalid(format!("label {y} out of range for K = {}", z.len())));
        }
        total += log_softmax(z)[y];
        for (k, (s, p)) in seed.row_slice_mut(i).iter_mut().zip(softmax(z)).enumerate() {
            *s = (f64::from(u8::from(k == y)) - p) / m;
        }
    }
    Ok((total / m, seed))
}

/// Mean entropy of `p_θ(y | x̃)` over the batch, with its θ-gradient.
pub fn confidence_loss(pot: &PotentialNet, xs: &Tensor) -> Result<(f64, ParamSet)> {
    let mut loss = 0.0;
    let (_, grads) = pot.heads_with_param_grad(xs, |heads| {
        let (l, s) = confidence_seed(heads)?;
        loss = l;
        Ok(s)
    })?;
    Ok((loss, grads))
}

/// Mean of `u_θ(x̃)²` over the batch, with its θ-gradient.
pub fn potential_control_loss(pot: &PotentialNet, xs: &Tensor) -> Result<(f64, ParamSet)> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput("potential control batch"));
    }
    let mut loss = 0.0;
    let (_, grads) = pot.heads_with_param_grad(xs, |heads| {
        let (l, s) = control_seed(heads)?;
        loss = l;
        Ok(s)
    })?;
    Ok((loss, grads))
}

/// Mean `log p_θ(y | x)` over labeled examples, with its θ-gradient.
pub fn supervised_log_likelihood(pot: &PotentialNet, xs: &Tensor, labels: &[usize]) -> Result<(f64, ParamSet)> {
    let mut ll = 0.0;
    let (_, grads) = pot.heads_with_param_grad(xs, |heads| {
        let (l, s) = supervised_seed(heads, labels)?;
        ll = l;
        Ok(s)
    })?;
    Ok((ll, grads))
}
