use crate::error::{Error, Result};
use crate::models::{GeneratorNet, PotentialNet};
use crate::rng::ChainRng;
use crate::targets::GaussianJointBenchmark;
use crate::tensor::Tensor;

/// A pair `(p(x), q(x, h))` whose joint target is `p(x) q(h | x)`.
/// All methods act row-wise on batches of chains.
pub trait LatentTarget: Sync {
    fn obs_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;

    /// One ancestral draw `(x, h)` from `q` per stream.
    fn ancestral(&self, rngs: &mut [ChainRng]) -> Result<(Tensor, Tensor)>;

    /// `∂/∂x log p(x)`, or of the class-`y` potential when labels are given.
    fn grad_log_p(&self, xs: &Tensor, labels: Option<&[usize]>) -> Result<Tensor>;

    /// `(∂/∂x, ∂/∂h) log q(x, h)`.
    fn grad_log_q(&self, xs: &Tensor, hs: &Tensor) -> Result<(Tensor, Tensor)>;

    fn grad_x_log_q(&self, xs: &Tensor, hs: &Tensor) -> Result<Tensor> {
        Ok(self.grad_log_q(xs, hs)?.0)
    }

    /// Exact `∂/∂(x, h) log[p(x) q(h | x)]`, when tractable.
    fn exact_grad(&self, _xs: &Tensor, _hs: &Tensor, _labels: Option<&[usize]>) -> Result<(Tensor, Tensor)> {
        Err(Error::invalid("exact gradients are not available for this target"))
    }
}

/// Potential network plus auxiliary generator.
#[derive(Clone, Copy, Debug)]
pub struct NrfTarget<'a> {
    pub pot: &'a PotentialNet,
    pub gen: &'a GeneratorNet,
}

impl<'a> NrfTarget<'a> {
    pub fn new(pot: &'a PotentialNet, gen: &'a GeneratorNet) -> Result<Self> {
        if pot.input_dim() != gen.obs_dim() {
            return Err(Error::ShapeMismatch {
                context: "potential input vs generator output",
                expected: vec![pot.input_dim()],
                actual: vec![gen.obs_dim()],
            });
        }
        Ok(Self { pot, gen })
    }
}

impl LatentTarget for NrfTarget<'_> {
    fn obs_dim(&self) -> usize {
        self.gen.obs_dim()
    }

    fn latent_dim(&self) -> usize {
        self.gen.latent_dim()
    }

    fn ancestral(&self, rngs: &mut [ChainRng]) -> Result<(Tensor, Tensor)> {
        let (h, x) = self.gen.ancestral_batch(rngs)?;
        Ok((x, h))
    }

    fn grad_log_p(&self, xs: &Tensor, labels: Option<&[usize]>) -> Result<Tensor> {
        match labels {
            Some(l) => self.pot.class_grad_x(xs, l),
            None => Ok(self.pot.potentials_and_grad_x(xs)?.1),
        }
    }

    fn grad_log_q(&self, xs: &Tensor, hs: &Tensor) -> Result<(Tensor, Tensor)> {
        self.gen.grad_log_q_joint_batch(xs, hs)
    }

    fn grad_x_log_q(&self, xs: &Tensor, hs: &Tensor) -> Result<Tensor> {
        self.gen.grad_x_log_q_joint_batch(xs, hs)
    }
}

fn split(z: &Tensor, d: usize) -> (Tensor, Tensor) {
    let n = z.rows();
    let mut x = Vec::with_capacity(n * d);
    let mut h = Vec::with_capacity(n * d);
    for r in z.row_iter() {
        x.extend_from_slice(&r[..d]);
        h.extend_from_slice(&r[d..]);
    }
    (Tensor::matrix(n, d, x), Tensor::matrix(n, d, h))
}

fn join(xs: &Tensor, hs: &Tensor) -> Tensor {
    let n = xs.rows();
    let mut z = Vec::with_capacity(n * (xs.cols() + hs.cols()));
    for i in 0..n {
        z.extend_from_slice(xs.row_slice(i));
        z.extend_from_slice(hs.row_slice(i));
    }
    Tensor::matrix(n, xs.cols() + hs.cols(), z)
}

fn no_labels(labels: Option<&[usize]>) -> Result<()> {
    if labels.is_some() {
        return Err(Error::invalid("the Gaussian benchmark has no class potentials"));
    }
    Ok(())
}

impl LatentTarget for GaussianJointBenchmark {
    fn obs_dim(&self) -> usize {
        self.dim()
    }

    fn latent_dim(&self) -> usize {
        self.dim()
    }

    fn ancestral(&self, rngs: &mut [ChainRng]) -> Result<(Tensor, Tensor)> {
        let d = self.dim();
        let mut z = Vec::with_capacity(rngs.len() * 2 * d);
        for r in rngs.iter_mut() {
            z.extend(self.q_joint.sample(r));
        }
        Ok(split(&Tensor::matrix(rngs.len(), 2 * d, z), d))
    }

    fn grad_log_p(&self, xs: &Tensor, labels: Option<&[usize]>) -> Result<Tensor> {
        no_labels(labels)?;
        self.p_x.grad_log_density_batch(xs)
    }

    fn grad_log_q(&self, xs: &Tensor, hs: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok(split(&self.q_joint.grad_log_density_batch(&join(xs, hs))?, self.dim()))
    }

    fn exact_grad(&self, xs: &Tensor, hs: &Tensor, labels: Option<&[usize]>) -> Result<(Tensor, Tensor)> {
        no_labels(labels)?;
        Ok(split(&self.pi.grad_log_density_batch(&join(xs, hs))?, self.dim()))
    }
}
