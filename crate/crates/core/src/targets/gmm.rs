use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::logsumexp;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Isotropic, equally weighted 2-D Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    means: Vec<[f64; 2]>,
    sigma: f64,
    /// Class label of each component (ring index for ring layouts).
    classes: Vec<usize>,
}

/// Points drawn from a mixture, with the component and class of each.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmSample {
    pub points: Tensor,
    pub components: Vec<usize>,
    pub classes: Vec<usize>,
}

impl GmmSpec {
    pub fn new(means: Vec<[f64; 2]>, sigma: f64, classes: Option<Vec<usize>>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyInput("gmm means"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("gmm sigma must be finite and non-negative, got {sigma}")));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gmm mean".into()));
        }
        let classes = classes.unwrap_or_else(|| vec![0; means.len()]);
        if classes.len() != means.len() {
            return Err(Error::ShapeMismatch {
                context: "gmm classes",
                expected: vec![means.len()],
                actual: vec![classes.len()],
            });
        }
        Ok(Self { means, sigma, classes })
    }

    pub fn means(&self) -> &[[f64; 2]] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn num_components(&self) -> usize {
        self.means.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().max().map_or(0, |m| m + 1)
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![1.0 / self.means.len() as f64; self.means.len()]
    }

    /// Components whose class is in `keep`, relabelled in order of first appearance.
    pub fn subset_classes(&self, keep: &[usize]) -> Result<Self> {
        let idx: Vec<usize> = (0..self.means.len()).filter(|&i| keep.contains(&self.classes[i])).collect();
        let means = idx.iter().map(|&i| self.means[i]).collect();
        let classes = idx.iter().map(|&i| keep.iter().position(|&c| c == self.classes[i]).unwrap()).collect();
        Self::new(means, self.sigma, Some(classes))
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.means.iter().enumerate() {
            for b in &self.means[i + 1..] {
                best = best.min(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        best
    }
}

/// Means on concentric rings, `per_ring` at equal angles on each; odd rings
/// are rotated by half a spacing. Each ring is its own class.
pub fn gmm_rings(rings: usize, per_ring: usize, radii: &[f64], sigma: f64) -> Result<GmmSpec> {
    if radii.len() != rings {
        return Err(Error::ShapeMismatch { context: "gmm_rings radii", expected: vec![rings], actual: vec![radii.len()] });
    }
    if per_ring == 0 || rings == 0 {
        return Err(Error::EmptyInput("gmm_rings"));
    }
    let step = 2.0 * PI / per_ring as f64;
    let mut means = Vec::with_capacity(rings * per_ring);
    let mut classes = Vec::with_capacity(rings * per_ring);
    for (i, &r) in radii.iter().enumerate() {
        let offset = if i % 2 == 1 { step / 2.0 } else { 0.0 };
        for k in 0..per_ring {
            let a = k as f64 * step + offset;
            means.push([r * a.cos(), r * a.sin()]);
            classes.push(i);
        }
    }
    GmmSpec::new(means, sigma, Some(classes))
}

/// Four rings of eight modes at radii 1..4, σ = 0.1.
pub fn gmm32() -> GmmSpec {
    gmm_rings(4, 8, &[1.0, 2.0, 3.0, 4.0], 0.1).expect("valid preset")
}

/// Two rings of eight modes at radii 1 and 2, σ = 0.1; the inner ring is class 0.
pub fn gmm16_ssl() -> GmmSpec {
    gmm_rings(2, 8, &[1.0, 2.0], 0.1).expect("valid preset")
}

pub fn gmm_sample<R: Rng + ?Sized>(spec: &GmmSpec, n: usize, rng: &mut R) -> Result<GmmSample> {
    if n == 0 {
        return Err(Error::EmptyInput("gmm_sample"));
    }
    let mut data = Vec::with_capacity(2 * n);
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..spec.means.len());
        let m = spec.means[c];
        data.push(m[0] + spec.sigma * rng::normal(rng));
        data.push(m[1] + spec.sigma * rng::normal(rng));
        components.push(c);
    }
    let classes = components.iter().map(|&c| spec.classes[c]).collect();
    Ok(GmmSample { points: Tensor::matrix(n, 2, data), components, classes })
}

pub fn gmm_log_density(spec: &GmmSpec, x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::ShapeMismatch { context: "gmm_log_density", expected: vec![2], actual: vec![x.len()] });
    }
    let s2 = spec.sigma * spec.sigma;
    let lw = -(spec.means.len() as f64).ln();
    let terms: Vec<f64> = spec
        .means
        .iter()
        .map(|m| lw - ((x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2)) / (2.0 * s2) - (2.0 * PI * s2).ln())
        .collect();
    logsumexp(&terms)
}
