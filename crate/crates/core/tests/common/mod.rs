#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nrf::autodiff::{Activation, Layer, NetworkSpec, ParamSet};
use nrf::models::{GeneratorNet, PotentialNet};
use nrf::rng::{self, ChainRng};
use nrf::Tensor;

/// `x = W h + b + σ ε` as a one-layer network. `w` is row-major `obs × latent`.
pub fn linear_generator(w: &[f64], b: &[f64], latent: usize, sigma: f64) -> GeneratorNet {
    let obs = b.len();
    assert_eq!(w.len(), obs * latent);
    let spec = NetworkSpec::new(latent, vec![Layer::Dense { units: obs, weight_norm: false }]).unwrap();
    let mut p = ParamSet::new();
    p.insert("layer00.weight".into(), Tensor::matrix(obs, latent, w.to_vec()));
    p.insert("layer00.bias".into(), Tensor::vector(b.to_vec()));
    GeneratorNet::new(spec, p, sigma).unwrap()
}

/// Closed-form `q(h | x)` for the linear generator: `(mean, covariance)`.
pub fn linear_posterior(w: &[f64], b: &[f64], latent: usize, sigma: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let obs = b.len();
    let wm = DMatrix::from_row_slice(obs, latent, w);
    let s2 = sigma * sigma;
    let prec = DMatrix::identity(latent, latent) + wm.transpose() * &wm / s2;
    let cov = prec.try_inverse().unwrap();
    let resid = DVector::from_column_slice(x) - DVector::from_column_slice(b);
    let mean = &cov * wm.transpose() * resid / s2;
    (mean, cov)
}

/// Marginal `q(x) = N(b, W Wᵀ + σ² I)`: gradient of its log density at `x`.
pub fn linear_marginal_grad(w: &[f64], b: &[f64], latent: usize, sigma: f64, x: &[f64]) -> DVector<f64> {
    let obs = b.len();
    let wm = DMatrix::from_row_slice(obs, latent, w);
    let cov = &wm * wm.transpose() + DMatrix::identity(obs, obs) * sigma * sigma;
    let resid = DVector::from_column_slice(x) - DVector::from_column_slice(b);
    -(cov.try_inverse().unwrap() * resid)
}

/// Draws from `N(mean, cov)` via Cholesky.
pub fn gaussian_draw(mean: &DVector<f64>, cov: &DMatrix<f64>, r: &mut ChainRng) -> DVector<f64> {
    let l = cov.clone().cholesky().unwrap().l();
    let mut z = vec![0.0; mean.len()];
    rng::fill_normal(r, &mut z);
    mean + l * DVector::from_vec(z)
}

pub fn small_potential(k: usize, seed: u64) -> PotentialNet {
    let spec = NetworkSpec::mlp(2, &[16, 16], Activation::LeakyRelu { slope: 0.2 }, k, true, false);
    PotentialNet::init(spec, &mut rng::stream(seed, 0, 0)).unwrap()
}

pub fn small_generator(latent: usize, seed: u64) -> GeneratorNet {
    let spec = NetworkSpec::mlp(latent, &[16], Activation::Relu, 2, false, true);
    GeneratorNet::init(spec, 0.5, &mut rng::stream(seed, 0, 1)).unwrap()
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn nrf_cli(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_nrf")).args(args).output().expect("spawn nrf")
}

/// Runs the CLI and panics with its stderr on a non-zero exit.
pub fn nrf_ok(args: &[&str]) {
    let out = nrf_cli(args);
    assert!(out.status.success(), "nrf {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

/// Small-budget configs for the training subcommands, written into `dir`.
pub fn write_small_configs(dir: &std::path::Path) {
    std::fs::write(
        dir.join("unsup.toml"),
        "data_points = 200\n[train]\nbatch_size = 40\n[coverage]\nreps = 2\nsamples_per_rep = 50\ndump_samples = 20\n",
    )
    .unwrap();
    std::fs::write(dir.join("ssl.toml"), "unlabeled = 100\nheldout = 60\n[train]\nbatch_size = 40\n[grid]\nresolution = 8\n")
        .unwrap();
    std::fs::write(
        dir.join("anomaly.toml"),
        "[data]\nkind = \"synthetic\"\ntrain_points = 200\ntest_normal = 80\ntest_anomalies = 20\n[train]\nbatch_size = 40\n",
    )
    .unwrap();
}

pub fn read_csv_rows(path: &std::path::Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}
