use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named tensors for one network. Ordered by name so iteration is deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: String, t: Tensor) -> Option<Tensor> {
        self.entries.insert(name, t)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.entries.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn require_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries.get_mut(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet { entries: self.entries.iter().map(|(k, v)| (k.clone(), Tensor::zeros(v.shape()))).collect() }
    }

    /// `self += alpha * other`, entry by entry.
    pub fn add_scaled(&mut self, alpha: f64, other: &ParamSet) -> Result<()> {
        for (name, t) in other.iter() {
            let dst = self.require_mut(name)?;
            dst.expect_shape("ParamSet::add_scaled", t.shape())?;
            dst.axpy(alpha, t);
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.entries.values_mut().for_each(|t| t.scale(alpha));
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, t| m.max(t.max_abs()))
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }
}

impl FromIterator<(String, Tensor)> for ParamSet {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        ParamSet { entries: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_scaled_requires_matching_entries() {
        let mut a: ParamSet = [("w".to_string(), Tensor::vector(vec![1.0, 2.0]))].into_iter().collect();
        let b = a.clone();
        a.add_scaled(2.0, &b).unwrap();
        assert_eq!(a.get("w").unwrap().data(), &[3.0, 6.0]);
        let c: ParamSet = [("x".to_string(), Tensor::vector(vec![1.0]))].into_iter().collect();
        assert!(matches!(a.add_scaled(1.0, &c), Err(Error::MissingParam(_))));
    }
}
