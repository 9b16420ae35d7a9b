use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{self, Tensor};

/// Ridge added to empirical covariances before factorizing.
pub const EMPIRICAL_RIDGE: f64 = 1e-8;

/// Multivariate normal with cached Cholesky factor and precision.
#[derive(Clone, Debug)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    precision: DMatrix<f64>,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::EmptyInput("gaussian mean"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::ShapeMismatch {
                context: "gaussian covariance",
                expected: vec![d, d],
                actual: vec![cov.nrows(), cov.ncols()],
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotSpd("covariance is not symmetric"));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotSpd("covariance"))?;
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self { mean, cov, chol, precision })
    }

    pub fn from_slices(mean: &[f64], cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::ShapeMismatch { context: "gaussian covariance", expected: vec![d * d], actual: vec![cov.len()] });
        }
        Self::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, cov))
    }

    /// Maximum-likelihood fit (1/N covariance) plus [`EMPIRICAL_RIDGE`].
    pub fn empirical(samples: &Tensor) -> Result<Self> {
        let (n, d) = (samples.rows(), samples.cols());
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput("empirical gaussian"));
        }
        let x = DMatrix::from_row_slice(n, d, samples.data());
        let mean = x.row_mean().transpose();
        let mut centered = x;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut cov = centered.transpose() * &centered / n as f64;
        for i in 0..d {
            cov[(i, i)] += EMPIRICAL_RIDGE;
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch { context: "gaussian point", expected: vec![self.dim()], actual: vec![x.len()] });
        }
        Ok(())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let r = DVector::from_column_slice(x) - &self.mean;
        let maha = r.dot(&self.chol.solve(&r));
        Ok(-0.5 * (maha + self.log_det() + self.dim() as f64 * (2.0 * PI).ln()))
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let r = DVector::from_column_slice(x) - &self.mean;
        Ok((-(&self.precision * r)).as_slice().to_vec())
    }

    /// Row-wise `−Λ(z − μ)` for a batch.
    pub fn grad_log_density_batch(&self, zs: &Tensor) -> Result<Tensor> {
        zs.expect_cols("gaussian batch", self.dim())?;
        let d = self.dim();
        let mut centered = zs.clone();
        for row in centered.data_mut().chunks_exact_mut(d) {
            for (v, m) in row.iter_mut().zip(self.mean.iter()) {
                *v = m - *v;
            }
        }
        // precision is symmetric, so its column-major storage is also row-major
        let mut out = vec![0.0; zs.rows() * d];
        tensor::matmul(centered.data(), self.precision.as_slice(), &mut out, zs.rows(), d, d, false);
        Ok(Tensor::matrix(zs.rows(), d, out))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        rng::fill_normal(rng, &mut e);
        (&self.mean + self.chol.l_dirty().lower_triangle() * DVector::from_vec(e)).as_slice().to_vec()
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Tensor {
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            data.extend(self.sample(rng));
        }
        Tensor::matrix(n, self.dim(), data)
    }
}

/// `KL(p ‖ q)` between two Gaussians, via Cholesky solves against `Σ_q`.
pub fn kl_gaussians(p: &GaussianDist, q: &GaussianDist) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::ShapeMismatch { context: "kl_gaussians", expected: vec![q.dim()], actual: vec![p.dim()] });
    }
    let k = p.dim() as f64;
    let trace = q.chol.solve(&p.cov).trace();
    let dm = &q.mean - &p.mean;
    let maha = dm.dot(&q.chol.solve(&dm));
    Ok(0.5 * (trace + maha - k + q.log_det() - p.log_det()))
}

/// Random SPD matrix `A Aᵀ + d I`, rescaled to unit mean diagonal.
///
/// Eigenvalues of `A Aᵀ` for a square Gaussian `A` concentrate in
/// `[0, 4d]`, so the condition number stays near 5.
pub fn random_spd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng::normal(rng));
    let mut s = &a * a.transpose() + DMatrix::identity(dim, dim) * dim as f64;
    let avg = s.trace() / dim as f64;
    s /= avg;
    // exact symmetry after rounding
    (&s + s.transpose()) * 0.5
}

/// Gaussian stand-in for `p_θ(x)` and `q_φ(x, h)` with the joint target
/// `π(x, h) = p(x) q(h | x)` in closed form.
#[derive(Clone, Debug)]
pub struct GaussianJointBenchmark {
    pub p_x: GaussianDist,
    pub q_joint: GaussianDist,
    pub pi: GaussianDist,
    /// `E_q[h | x] = cond_offset + cond_map · x`.
    pub cond_map: DMatrix<f64>,
    pub cond_offset: DVector<f64>,
    pub cond: GaussianDist,
}

impl GaussianJointBenchmark {
    pub fn new(p_x: GaussianDist, q_joint: GaussianDist) -> Result<Self> {
        let d = p_x.dim();
        if q_joint.dim() != 2 * d {
            return Err(Error::ShapeMismatch {
                context: "benchmark q_joint",
                expected: vec![2 * d],
                actual: vec![q_joint.dim()],
            });
        }
        let s = q_joint.cov();
        let sxx = s.view((0, 0), (d, d)).into_owned();
        let shx = s.view((d, 0), (d, d)).into_owned();
        let shh = s.view((d, d), (d, d)).into_owned();
        let sxx_chol = Cholesky::new(sxx).ok_or(Error::NotSpd("q_joint x block"))?;
        // A = Σ_hx Σ_xx⁻¹ computed as (Σ_xx⁻¹ Σ_xh)ᵀ
        let cond_map = sxx_chol.solve(&shx.transpose()).transpose();
        let cond_cov = &shh - &cond_map * shx.transpose();
        let cond_cov = (&cond_cov + cond_cov.transpose()) * 0.5;
        let mx = q_joint.mean().rows(0, d).into_owned();
        let mh = q_joint.mean().rows(d, d).into_owned();
        let cond_offset = &mh - &cond_map * &mx;
        let cond = GaussianDist::new(DVector::zeros(d), cond_cov.clone())?;

        let sp = p_x.cov();
        let mut pi_cov = DMatrix::zeros(2 * d, 2 * d);
        let cross = &cond_map * sp;
        pi_cov.view_mut((0, 0), (d, d)).copy_from(sp);
        pi_cov.view_mut((d, 0), (d, d)).copy_from(&cross);
        pi_cov.view_mut((0, d), (d, d)).copy_from(&cross.transpose());
        let hh = &cross * cond_map.transpose() + cond_cov;
        pi_cov.view_mut((d, d), (d, d)).copy_from(&((&hh + hh.transpose()) * 0.5));
        let mut pi_mean = DVector::zeros(2 * d);
        pi_mean.rows_mut(0, d).copy_from(p_x.mean());
        pi_mean.rows_mut(d, d).copy_from(&(&cond_offset + &cond_map * p_x.mean()));
        let pi = GaussianDist::new(pi_mean, pi_cov)?;
        Ok(Self { p_x, q_joint, pi, cond_map, cond_offset, cond })
    }

    pub fn dim(&self) -> usize {
        self.p_x.dim()
    }

    /// Draw from `q(h | x)`.
    pub fn sample_h_given_x<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let mean = &self.cond_offset + &self.cond_map * DVector::from_column_slice(x);
        let e = self.cond.sample(rng);
        mean.iter().zip(&e).map(|(m, v)| m + v).collect()
    }

    /// Draw `(x, h)` from the target by `x ~ p`, `h ~ q(h | x)`.
    pub fn sample_target<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let x = self.p_x.sample(rng);
        let h = self.sample_h_given_x(&x, rng);
        x.into_iter().chain(h).collect()
    }
}

/// Random benchmark of dimension `d`: `p(x)` and `q(x, h)` get independent
/// random covariances times `scale`, and `p`'s mean is drawn from
/// `N(0, scale I)`.
pub fn benchmark_target<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> Result<GaussianJointBenchmark> {
    if d == 0 {
        return Err(Error::EmptyInput("benchmark_target"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("benchmark scale must be positive, got {scale}")));
    }
    let mut mean = vec![0.0; d];
    rng::fill_normal(rng, &mut mean);
    mean.iter_mut().for_each(|m| *m *= scale.sqrt());
    let p_x = GaussianDist::new(DVector::from_vec(mean), random_spd(d, rng) * scale)?;
    let q_joint = GaussianDist::new(DVector::zeros(2 * d), random_spd(2 * d, rng) * scale)?;
    GaussianJointBenchmark::new(p_x, q_joint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(m: f64, v: f64) -> GaussianDist {
        GaussianDist::from_slices(&[m], &[v]).unwrap()
    }

    #[test]
    fn kl_closed_forms() {
        assert!(kl_gaussians(&g1(0.0, 1.0), &g1(0.0, 1.0)).unwrap().abs() < 1e-10);
        assert!((kl_gaussians(&g1(0.0, 1.0), &g1(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-12);
        let want = 0.5 * (2.0 - 1.0 + 0.5f64.ln());
        assert!((kl_gaussians(&g1(0.0, 2.0), &g1(0.0, 1.0)).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.1534).abs() < 1e-4);
        assert!(kl_gaussians(&g1(0.0, 1.0), &GaussianDist::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn rejects_non_spd() {
        assert!(GaussianDist::from_slices(&[0.0, 0.0], &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(GaussianDist::from_slices(&[0.0, 0.0], &[1.0, 0.1, 0.2, 1.0]).is_err());
        assert!(GaussianDist::from_slices(&[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn log_density_and_gradient() {
        let g = GaussianDist::from_slices(&[1.0, -1.0], &[2.0, 0.5, 0.5, 1.0]).unwrap();
        // independent formula via determinant and explicit inverse
        let det: f64 = 2.0 * 1.0 - 0.25;
        let inv = [1.0 / det, -0.5 / det, -0.5 / det, 2.0 / det];
        let x = [0.3, 0.4];
        let r = [x[0] - 1.0, x[1] + 1.0];
        let q = r[0] * (inv[0] * r[0] + inv[1] * r[1]) + r[1] * (inv[2] * r[0] + inv[3] * r[1]);
        let want = -0.5 * q - 0.5 * det.ln() - (2.0 * PI).ln();
        assert!((g.log_density(&x).unwrap() - want).abs() < 1e-12);
        let grad = g.grad_log_density(&x).unwrap();
        assert!((grad[0] + inv[0] * r[0] + inv[1] * r[1]).abs() < 1e-12);
        let batch = g.grad_log_density_batch(&Tensor::from_rows(&[x, [1.0, -1.0]]).unwrap()).unwrap();
        assert!((batch.row_slice(0)[1] - grad[1]).abs() < 1e-12);
        assert!(batch.row_slice(1).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn random_spd_properties() {
        let mut r = rng::stream(4, 0, 0);
        let one = random_spd(1, &mut r);
        assert!((one[(0, 0)] - 1.0).abs() < 1e-12);
        let s = random_spd(6, &mut r);
        assert_eq!(s, s.transpose());
        assert!((s.trace() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn independent_unit_blocks_give_standard_target() {
        let p = g1(0.0, 1.0);
        let q = GaussianDist::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = GaussianJointBenchmark::new(p, q).unwrap();
        assert!(b.pi.mean().amax() == 0.0);
        assert!((b.pi.cov() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn target_gradient_vanishes_at_mean() {
        let b = benchmark_target(3, 2.0, &mut rng::stream(9, 0, 0)).unwrap();
        let m = b.pi.mean().as_slice().to_vec();
        assert!(b.pi.grad_log_density(&m).unwrap().iter().all(|v| v.abs() < 1e-12));
    }
}
