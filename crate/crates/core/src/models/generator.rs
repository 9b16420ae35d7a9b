use std::f64::consts::PI;

use crate::autodiff::{backward, forward, input_grad, Graph, Mode, NetworkSpec, ParamSet};
use crate::error::{Error, Result};
use crate::rng::{self, ChainRng};
use crate::tensor::Tensor;

/// Latent-variable generator: `h ~ N(0, I)`, `x = g_φ(h) + σ ε`.
///
/// Sampling and density evaluation run the network in eval mode; only
/// [`GeneratorNet::param_grad`] with [`Mode::Train`] uses minibatch statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    sigma: f64,
}

impl GeneratorNet {
    pub fn new(spec: NetworkSpec, params: ParamSet, sigma: f64) -> Result<Self> {
        spec.validate()?;
        spec.check_params(&params)?;
        check_sigma(sigma)?;
        Ok(Self { spec, params, sigma })
    }

    pub fn init<R: rand::Rng + ?Sized>(spec: NetworkSpec, sigma: f64, rng: &mut R) -> Result<Self> {
        let params = spec.init_params(rng)?;
        Self::new(spec, params, sigma)
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        check_sigma(sigma)?;
        self.sigma = sigma;
        Ok(())
    }

    fn check_pair(&self, xs: &Tensor, hs: &Tensor) -> Result<()> {
        xs.expect_cols("generator observation", self.obs_dim())?;
        hs.expect_cols("generator latent", self.latent_dim())?;
        if xs.rows() != hs.rows() {
            return Err(Error::ShapeMismatch {
                context: "generator (x, h) batch",
                expected: vec![xs.rows()],
                actual: vec![hs.rows()],
            });
        }
        Ok(())
    }

    /// Noise-free decode `g_φ(h)` of each row.
    pub fn decode(&self, hs: &Tensor) -> Result<Tensor> {
        hs.expect_cols("generator latent", self.latent_dim())?;
        Ok(forward(&self.spec, &self.params, hs, Mode::Eval)?.0)
    }

    /// One ancestral draw `(h, x)`.
    pub fn ancestral_sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut h = vec![0.0; self.latent_dim()];
        rng::fill_normal(rng, &mut h);
        let mut x = self.decode(&Tensor::row(&h))?.into_data();
        for v in &mut x {
            *v += self.sigma * rng::normal(rng);
        }
        Ok((h, x))
    }

    /// One ancestral draw per stream; identical to calling
    /// [`GeneratorNet::ancestral_sample`] on each stream in turn.
    pub fn ancestral_batch(&self, rngs: &mut [ChainRng]) -> Result<(Tensor, Tensor)> {
        if rngs.is_empty() {
            return Err(Error::EmptyInput("ancestral_batch"));
        }
        let dh = self.latent_dim();
        let mut h = vec![0.0; rngs.len() * dh];
        for (r, chunk) in rngs.iter_mut().zip(h.chunks_exact_mut(dh)) {
            rng::fill_normal(r, chunk);
        }
        let h = Tensor::matrix(rngs.len(), dh, h);
        let mut x = self.decode(&h)?;
        for (i, r) in rngs.iter_mut().enumerate() {
            for v in x.row_slice_mut(i) {
                *v += self.sigma * rng::normal(r);
            }
        }
        Ok((h, x))
    }

    /// `log q_φ(x, h)` of each row, with all normalizing constants.
    pub fn log_q_joint_batch(&self, xs: &Tensor, hs: &Tensor) -> Result<Vec<f64>> {
        self.check_pair(xs, hs)?;
        let g = self.decode(hs)?;
        let dx = self.obs_dim() as f64;
        let dh = self.latent_dim() as f64;
        let s2 = self.sigma * self.sigma;
        let c = -0.5 * dx * (2.0 * PI * s2).ln() - 0.5 * dh * (2.0 * PI).ln();
        Ok((0..xs.rows())
            .map(|i| {
                let r2: f64 = xs.row_slice(i).iter().zip(g.row_slice(i)).map(|(a, b)| (a - b) * (a - b)).sum();
                let h2: f64 = hs.row_slice(i).iter().map(|v| v * v).sum();
                c - r2 / (2.0 * s2) - 0.5 * h2
            })
            .collect())
    }

    pub fn log_q_joint(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        Ok(self.log_q_joint_batch(&Tensor::row(x), &Tensor::row(h))?[0])
    }

    /// `(∂/∂x, ∂/∂h) log q_φ(x, h)` for each row.
    pub fn grad_log_q_joint_batch(&self, xs: &Tensor, hs: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_pair(xs, hs)?;
        let (g, graph) = forward(&self.spec, &self.params, hs, Mode::Eval)?;
        let s2 = self.sigma * self.sigma;
        // residual / σ²
        let mut scaled = xs.clone();
        scaled.axpy(-1.0, &g);
        scaled.scale(1.0 / s2);
        let mut gh = input_grad(&graph, &scaled)?;
        gh.axpy(-1.0, hs);
        scaled.scale(-1.0);
        Ok((scaled, gh))
    }

    pub fn grad_log_q_joint(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (gx, gh) = self.grad_log_q_joint_batch(&Tensor::row(x), &Tensor::row(h))?;
        Ok((gx.into_data(), gh.into_data()))
    }

    /// `∂/∂x log q_φ(x, h) = −(x − g_φ(h))/σ²`; forward pass only.
    pub fn grad_x_log_q_joint_batch(&self, xs: &Tensor, hs: &Tensor) -> Result<Tensor> {
        self.check_pair(xs, hs)?;
        let g = self.decode(hs)?;
        let mut out = g;
        out.axpy(-1.0, xs);
        out.scale(1.0 / (self.sigma * self.sigma));
        Ok(out)
    }

    /// Mean over rows of `∇_φ log q_φ(x, h)`, plus the graph so the caller
    /// can commit batch-norm statistics for a train-mode pass.
    pub fn param_grad(&self, xs: &Tensor, hs: &Tensor, mode: Mode) -> Result<(ParamSet, Graph)> {
        self.check_pair(xs, hs)?;
        let (g, graph) = forward(&self.spec, &self.params, hs, mode)?;
        let mut seed = xs.clone();
        seed.axpy(-1.0, &g);
        seed.scale(1.0 / (self.sigma * self.sigma * xs.rows() as f64));
        let (grads, _) = backward(&graph, &seed)?;
        Ok((grads, graph))
    }

    /// `∇_φ log q_φ(x, h)` for one pair (batch-norm layers in train mode).
    pub fn grad_log_q_joint_params(&self, x: &[f64], h: &[f64]) -> Result<ParamSet> {
        Ok(self.param_grad(&Tensor::row(x), &Tensor::row(h), Mode::Train)?.0)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("generator sigma must be finite and positive, got {sigma}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff, Activation, Layer};

    fn linear_gen(a: &[f64], c: &[f64], dh: usize, sigma: f64) -> GeneratorNet {
        let dx = c.len();
        let spec = NetworkSpec::new(dh, vec![Layer::Dense { units: dx, weight_norm: false }]).unwrap();
        let mut p = ParamSet::new();
        p.insert("layer00.weight".into(), Tensor::matrix(dx, dh, a.to_vec()));
        p.insert("layer00.bias".into(), Tensor::vector(c.to_vec()));
        GeneratorNet::new(spec, p, sigma).unwrap()
    }

    fn mlp_gen(seed: u64) -> GeneratorNet {
        let spec = NetworkSpec::mlp(2, &[5, 4], Activation::Tanh, 3, true, false);
        GeneratorNet::init(spec, 0.7, &mut rng::stream(seed, 0, 0)).unwrap()
    }

    #[test]
    fn log_q_constants() {
        let g = linear_gen(&[0.0], &[0.0], 1, 1.0);
        let l0 = g.log_q_joint(&[0.0], &[0.0]).unwrap();
        assert!((l0 + (2.0 * PI).ln()).abs() < 1e-12);
        assert!((g.log_q_joint(&[1.0], &[0.0]).unwrap() - (l0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn log_q_equals_sum_of_gaussian_log_densities() {
        let g = mlp_gen(5);
        let h = [0.3, -0.4];
        let x = [1.0, 0.2, -0.3];
        let mean = g.decode(&Tensor::row(&h)).unwrap().into_data();
        let log_n = |v: &[f64], m: &[f64], s: f64| -> f64 {
            v.iter().zip(m).map(|(a, b)| -0.5 * ((a - b) / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln()).sum()
        };
        let expected = log_n(&h, &[0.0, 0.0], 1.0) + log_n(&x, &mean, 0.7);
        assert!((g.log_q_joint(&x, &h).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_limit_returns_bias() {
        let g = linear_gen(&[0.0, 0.0], &[2.5], 2, 1e-300);
        let mut r = rng::stream(1, 0, 0);
        let (_, x) = g.ancestral_sample(&mut r).unwrap();
        assert_eq!(x, vec![2.5]);
    }

    #[test]
    fn ancestral_batch_matches_single_draws() {
        let g = mlp_gen(2);
        let mut streams: Vec<_> = (0..4).map(|i| rng::stream(3, 1, i)).collect();
        let (hb, xb) = g.ancestral_batch(&mut streams).unwrap();
        for i in 0..4 {
            let (h, x) = g.ancestral_sample(&mut rng::stream(3, 1, i as u64)).unwrap();
            assert_eq!(hb.row_slice(i), &h[..]);
            for (a, b) in xb.row_slice(i).iter().zip(&x) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grads_match_finite_differences() {
        let g = mlp_gen(7);
        let x = vec![0.5, -1.0, 0.25];
        let h = vec![-0.3, 0.9];
        let (gx, gh) = g.grad_log_q_joint(&x, &h).unwrap();
        let fdx = finite_diff(|t| g.log_q_joint(t.data(), &h), &Tensor::vector(x.clone()), 1e-5).unwrap();
        let fdh = finite_diff(|t| g.log_q_joint(&x, t.data()), &Tensor::vector(h.clone()), 1e-5).unwrap();
        for (a, b) in gx.iter().chain(&gh).zip(fdx.data().iter().chain(fdh.data())) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3), "{a} vs {b}");
        }
        let cheap = g.grad_x_log_q_joint_batch(&Tensor::row(&x), &Tensor::row(&h)).unwrap();
        assert_eq!(cheap.data(), &gx[..]);
    }

    #[test]
    fn grad_at_reconstruction_and_origin() {
        let g = linear_gen(&[1.0, 2.0, -1.0, 0.5], &[0.1, 0.2], 2, 0.5);
        let h = [0.0, 0.0];
        let x = [1.1, -0.8];
        let (gx, gh) = g.grad_log_q_joint(&x, &h).unwrap();
        // J^T (x - g)/σ² with g = c at h = 0
        let r = [(1.1 - 0.1) / 0.25, (-0.8 - 0.2) / 0.25];
        assert!((gh[0] - (1.0 * r[0] - 1.0 * r[1])).abs() < 1e-12);
        assert!((gh[1] - (2.0 * r[0] + 0.5 * r[1])).abs() < 1e-12);
        assert!((gx[0] + r[0]).abs() < 1e-12);

        let h = [0.4, -0.2];
        let xg = g.decode(&Tensor::row(&h)).unwrap().into_data();
        let (gx, _) = g.grad_log_q_joint(&xg, &h).unwrap();
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn param_grads() {
        let g = mlp_gen(11);
        let h = vec![0.2, 0.1];
        let xg = g.decode(&Tensor::row(&h)).unwrap().into_data();
        let zero = g.grad_log_q_joint_params(&xg, &h).unwrap();
        assert!(zero.max_abs() == 0.0);

        let x = vec![0.9, -0.1, 0.4];
        let grads = g.grad_log_q_joint_params(&x, &h).unwrap();
        let last_bias = grads.get("layer04.bias").unwrap();
        for ((b, xv), gv) in last_bias.data().iter().zip(&x).zip(&xg) {
            assert!((b - (xv - gv) / 0.49).abs() < 1e-12);
        }
        for (name, t) in g.params.iter() {
            let fd = finite_diff(
                |p| {
                    let mut g2 = g.clone();
                    *g2.params.get_mut(name).unwrap() = p.clone();
                    g2.log_q_joint(&x, &h)
                },
                t,
                1e-5,
            )
            .unwrap();
            let an = grads.get(name).unwrap();
            let err = an.data().iter().zip(fd.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-6 * fd.norm().max(1e-9), "{name}: {err}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = mlp_gen(1);
        assert!(g.log_q_joint(&[0.0; 2], &[0.0; 2]).is_err());
        assert!(g.grad_log_q_joint(&[0.0; 3], &[0.0; 3]).is_err());
        assert!(GeneratorNet::new(g.spec.clone(), g.params.clone(), 0.0).is_err());
    }
}
