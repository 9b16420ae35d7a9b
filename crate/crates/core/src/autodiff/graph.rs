use super::network::{is_buffer, param_name, BN_EPS, BN_MOMENTUM};
use super::{Activation, Layer, NetworkSpec, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_at_b_acc, Tensor};

/// Batch-norm statistics source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Minibatch statistics; the graph records them for a running-stat update.
    Train,
    /// Running statistics; rows are evaluated independently.
    Eval,
}

#[derive(Clone, Debug)]
enum Op {
    Dense {
        /// Effective weight `(out, in)`.
        weight: Tensor,
        /// Direction, scale and row norms when the layer is weight-normed.
        weight_norm: Option<(Tensor, Vec<f64>, Vec<f64>)>,
    },
    Activation(Activation),
    BatchNorm {
        gamma: Vec<f64>,
        inv_std: Vec<f64>,
        xhat: Tensor,
        /// Minibatch mean and unbiased variance (train mode only).
        batch_stats: Option<(Vec<f64>, Vec<f64>)>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    layer: usize,
    /// Index into `Graph::values` of this node's operand.
    operand: usize,
    op: Op,
}

/// One recorded forward evaluation. `values[0]` is the input and
/// `values[i + 1]` the output of `nodes[i]`.
#[derive(Clone, Debug)]
pub struct Graph {
    mode: Mode,
    values: Vec<Tensor>,
    nodes: Vec<Node>,
}

impl Graph {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn input(&self) -> &Tensor {
        &self.values[0]
    }

    pub fn output(&self) -> &Tensor {
        self.values.last().expect("graph always holds its input")
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Fold this graph's minibatch statistics into the running statistics
    /// held by `params`. No-op for eval-mode graphs.
    pub fn commit_running_stats(&self, params: &mut ParamSet) -> Result<()> {
        for node in &self.nodes {
            if let Op::BatchNorm { batch_stats: Some((mean, var)), .. } = &node.op {
                let rm = params.require_mut(&param_name(node.layer, "running_mean"))?;
                for (r, m) in rm.data_mut().iter_mut().zip(mean) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
                }
                let rv = params.require_mut(&param_name(node.layer, "running_var"))?;
                for (r, v) in rv.data_mut().iter_mut().zip(var) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.nodes.len() + 1 {
            return Err(Error::invalid("graph values and nodes are out of step"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.operand > i {
                return Err(Error::invalid(format!("graph node {i} reads a later value")));
            }
        }
        Ok(())
    }
}

fn as_batch(input: &Tensor, width: usize) -> Result<Tensor> {
    match input.shape() {
        [d] if *d == width => Ok(Tensor::matrix(1, width, input.data().to_vec())),
        [_, d] if *d == width => Ok(input.clone()),
        s => Err(Error::ShapeMismatch { context: "forward input", expected: vec![input.rows(), width], actual: s.to_vec() }),
    }
}

/// Evaluate `spec` on a `(batch, input_dim)` input (a bare vector is
/// treated as a batch of one).
pub fn forward(spec: &NetworkSpec, params: &ParamSet, input: &Tensor, mode: Mode) -> Result<(Tensor, Graph)> {
    spec.check_params(params)?;
    let x0 = as_batch(input, spec.input_dim)?;
    x0.ensure_finite("network input")?;
    let n = x0.rows();
    let mut values = vec![x0];
    let mut nodes = Vec::with_capacity(spec.layers.len());

    for (li, layer) in spec.layers.iter().enumerate() {
        let x = values.last().expect("non-empty");
        let width = x.cols();
        let (out, op) = match *layer {
            Layer::Dense { units, weight_norm } => {
                let bias = params.require(&param_name(li, "bias"))?;
                let (weight, wn) = if weight_norm {
                    let v = params.require(&param_name(li, "direction"))?;
                    let g = params.require(&param_name(li, "scale"))?;
                    let mut w = v.clone();
                    let mut norms = Vec::with_capacity(units);
                    for j in 0..units {
                        let norm = v.row_slice(j).iter().map(|a| a * a).sum::<f64>().sqrt();
                        let s = g.data()[j] / norm;
                        w.row_slice_mut(j).iter_mut().for_each(|a| *a *= s);
                        norms.push(norm);
                    }
                    (w, Some((v.clone(), g.data().to_vec(), norms)))
                } else {
                    (params.require(&param_name(li, "weight"))?.clone(), None)
                };
                let mut y = vec![0.0; n * units];
                matmul(x.data(), weight.data(), &mut y, n, width, units, true);
                for row in y.chunks_exact_mut(units) {
                    for (a, b) in row.iter_mut().zip(bias.data()) {
                        *a += b;
                    }
                }
                (Tensor::matrix(n, units, y), Op::Dense { weight, weight_norm: wn })
            }
            Layer::Activation { activation } => (x.map(|v| activation.apply(v)), Op::Activation(activation)),
            Layer::BatchNorm => {
                let gamma = params.require(&param_name(li, "gamma"))?.data().to_vec();
                let beta = params.require(&param_name(li, "beta"))?.data();
                let (mean, var, batch_stats) = match mode {
                    Mode::Train => {
                        let mut mean = vec![0.0; width];
                        for r in x.row_iter() {
                            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
                        }
                        mean.iter_mut().for_each(|m| *m /= n as f64);
                        let mut var = vec![0.0; width];
                        for r in x.row_iter() {
                            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                                *s += (v - m) * (v - m);
                            }
                        }
                        let biased: Vec<f64> = var.iter().map(|s| s / n as f64).collect();
                        let unbiased: Vec<f64> =
                            if n > 1 { var.iter().map(|s| s / (n - 1) as f64).collect() } else { biased.clone() };
                        (mean.clone(), biased, Some((mean, unbiased)))
                    }
                    Mode::Eval => (
                        params.require(&param_name(li, "running_mean"))?.data().to_vec(),
                        params.require(&param_name(li, "running_var"))?.data().to_vec(),
                        None,
                    ),
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                let mut xhat = x.clone();
                let mut y = x.clone();
                for i in 0..n {
                    let xr = xhat.row_slice_mut(i);
                    for j in 0..width {
                        xr[j] = (xr[j] - mean[j]) * inv_std[j];
                    }
                    let yr = y.row_slice_mut(i);
                    for j in 0..width {
                        yr[j] = gamma[j] * xr[j] + beta[j];
                    }
                }
                (y, Op::BatchNorm { gamma, inv_std, xhat, batch_stats })
            }
        };
        out.ensure_finite(&format!("activation of layer {li}"))?;
        nodes.push(Node { layer: li, operand: values.len() - 1, op });
        values.push(out);
    }

    let output = values.last().expect("non-empty").clone();
    Ok((output, Graph { mode, values, nodes }))
}

/// Gradients of `sum(seed ⊙ output)` with respect to the trainable
/// parameters and to the input. The graph is left untouched.
pub fn backward(graph: &Graph, output_seed: &Tensor) -> Result<(ParamSet, Tensor)> {
    let (params, input) = backward_impl(graph, output_seed, true)?;
    Ok((params.expect("requested"), input))
}

/// Input gradient only; skips all parameter-gradient work.
pub fn input_grad(graph: &Graph, output_seed: &Tensor) -> Result<Tensor> {
    Ok(backward_impl(graph, output_seed, false)?.1)
}

fn backward_impl(graph: &Graph, seed: &Tensor, want_params: bool) -> Result<(Option<ParamSet>, Tensor)> {
    graph.validate()?;
    let out = graph.output();
    let seed = if seed.shape() == out.shape() {
        seed.clone()
    } else if seed.len() == out.len() && out.rows() == 1 {
        Tensor::matrix(1, out.cols(), seed.data().to_vec())
    } else {
        return Err(Error::ShapeMismatch {
            context: "backward seed",
            expected: out.shape().to_vec(),
            actual: seed.shape().to_vec(),
        });
    };
    let mut grads = want_params.then(ParamSet::new);
    let mut grad = seed;
    let n = out.rows();

    for (idx, node) in graph.nodes.iter().enumerate().rev() {
        let x = &graph.values[node.operand];
        let y = &graph.values[idx + 1];
        let in_w = x.cols();
        let li = node.layer;
        grad = match &node.op {
            Op::Dense { weight, weight_norm } => {
                let out_w = grad.cols();
                if let Some(g) = grads.as_mut() {
                    let mut dw = vec![0.0; out_w * in_w];
                    matmul_at_b_acc(grad.data(), x.data(), &mut dw, n, out_w, in_w);
                    let mut db = vec![0.0; out_w];
                    for r in grad.row_iter() {
                        db.iter_mut().zip(r).for_each(|(d, v)| *d += v);
                    }
                    g.insert(param_name(li, "bias"), Tensor::vector(db));
                    match weight_norm {
                        None => {
                            g.insert(param_name(li, "weight"), Tensor::matrix(out_w, in_w, dw));
                        }
                        Some((v, scale, norms)) => {
                            let mut dv = vec![0.0; out_w * in_w];
                            let mut dg = vec![0.0; out_w];
                            for j in 0..out_w {
                                let vr = v.row_slice(j);
                                let dwr = &dw[j * in_w..(j + 1) * in_w];
                                let norm = norms[j];
                                let gj = dwr.iter().zip(vr).map(|(a, b)| a * b).sum::<f64>() / norm;
                                dg[j] = gj;
                                let s = scale[j] / norm;
                                for k in 0..in_w {
                                    dv[j * in_w + k] = s * (dwr[k] - gj * vr[k] / norm);
                                }
                            }
                            g.insert(param_name(li, "direction"), Tensor::matrix(out_w, in_w, dv));
                            g.insert(param_name(li, "scale"), Tensor::vector(dg));
                        }
                    }
                }
                let mut dx = vec![0.0; n * in_w];
                matmul(grad.data(), weight.data(), &mut dx, n, out_w, in_w, false);
                Tensor::matrix(n, in_w, dx)
            }
            Op::Activation(act) => {
                let mut g = grad;
                for ((d, &xv), &yv) in g.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                    *d *= act.derivative(xv, yv);
                }
                g
            }
            Op::BatchNorm { gamma, inv_std, xhat, batch_stats } => {
                let w = in_w;
                let mut dgamma = vec![0.0; w];
                let mut dbeta = vec![0.0; w];
                for (gr, xr) in grad.row_iter().zip(xhat.row_iter()) {
                    for j in 0..w {
                        dgamma[j] += gr[j] * xr[j];
                        dbeta[j] += gr[j];
                    }
                }
                let mut dx = grad.clone();
                if batch_stats.is_some() {
                    // dx = inv_std/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat)), dxhat = gamma*dy
                    let nf = n as f64;
                    for i in 0..n {
                        let xr = xhat.row_slice(i);
                        let dr = dx.row_slice_mut(i);
                        for j in 0..w {
                            let dxhat = dr[j] * gamma[j];
                            let sum_dxhat = dbeta[j] * gamma[j];
                            let sum_dxhat_xhat = dgamma[j] * gamma[j];
                            dr[j] = inv_std[j] / nf * (nf * dxhat - sum_dxhat - xr[j] * sum_dxhat_xhat);
                        }
                    }
                } else {
                    for i in 0..n {
                        let dr = dx.row_slice_mut(i);
                        for j in 0..w {
                            dr[j] *= gamma[j] * inv_std[j];
                        }
                    }
                }
                if let Some(g) = grads.as_mut() {
                    g.insert(param_name(li, "gamma"), Tensor::vector(dgamma));
                    g.insert(param_name(li, "beta"), Tensor::vector(dbeta));
                }
                dx
            }
        };
    }
    if let Some(g) = &grads {
        debug_assert!(g.names().all(|n| !is_buffer(n)));
    }
    Ok((grads, grad))
}
