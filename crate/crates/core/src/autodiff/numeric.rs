use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `log Σ exp(v_i)`, max-shifted.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput("logsumexp"));
    }
    if v.len() == 1 {
        return Ok(v[0]);
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    Ok(m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
}

/// Max-shifted softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Central-difference gradient of a scalar function, componentwise.
pub fn finite_diff<F>(mut f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("finite_diff evaluation at component {i}")));
        }
        grad.data_mut()[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_cases() {
        assert!((logsumexp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(logsumexp(&[1000.0, 1000.0]).unwrap(), 1000.0 + 2f64.ln());
        assert_eq!(logsumexp(&[-3.2]).unwrap(), -3.2);
        assert!(matches!(logsumexp(&[]), Err(Error::EmptyInput(_))));
        assert!((logsumexp(&[1.0, 2.0, 3.0]).unwrap() - 3.40760596444438).abs() < 1e-12);
    }

    #[test]
    fn softmax_does_not_overflow() {
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let q = softmax(&[1.0, 0.0]);
        assert!((q[0] - 0.7311).abs() < 1e-4 && (q[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn finite_diff_cases() {
        let sq = |t: &Tensor| Ok(t.data().iter().map(|v| v * v).sum());
        let g = finite_diff(sq, &Tensor::vector(vec![1.0, 2.0]), 1e-5).unwrap();
        assert!((g.data()[0] - 2.0).abs() < 1e-8 && (g.data()[1] - 4.0).abs() < 1e-8);

        let g = finite_diff(|_| Ok(3.0), &Tensor::vector(vec![1.0, 2.0]), 1e-5).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0]);

        let lse = |t: &Tensor| logsumexp(t.data());
        let g = finite_diff(lse, &Tensor::vector(vec![0.0, 0.0]), 1e-5).unwrap();
        assert!((g.data()[0] - 0.5).abs() < 1e-8 && (g.data()[1] - 0.5).abs() < 1e-8);

        assert!(finite_diff(|_| Ok(f64::NAN), &Tensor::vector(vec![0.0]), 1e-5).is_err());
    }
}
