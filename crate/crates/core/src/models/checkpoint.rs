use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeneratorNet, PotentialNet};
use crate::autodiff::{NetworkSpec, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One parameter tensor as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// JSON checkpoint for a single model.
///
/// Floats are written in shortest round-trip decimal form (never more than
/// 17 significant digits), so save/load reproduces every bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub spec: NetworkSpec,
    pub num_outputs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub params: Vec<ParamRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Potential,
    Generator,
}

fn records(params: &ParamSet) -> Vec<ParamRecord> {
    params.iter().map(|(n, t)| ParamRecord { name: n.clone(), shape: t.shape().to_vec(), data: t.data().to_vec() }).collect()
}

fn param_set(records: &[ParamRecord]) -> Result<ParamSet> {
    let mut p = ParamSet::new();
    for r in records {
        if p.insert(r.name.clone(), Tensor::new(r.shape.clone(), r.data.clone())?).is_some() {
            return Err(Error::invalid(format!("duplicate parameter `{}` in checkpoint", r.name)));
        }
    }
    Ok(p)
}

impl Checkpoint {
    pub fn from_potential(net: &PotentialNet) -> Self {
        Self {
            kind: ModelKind::Potential,
            spec: net.spec.clone(),
            num_outputs: net.num_outputs(),
            sigma: None,
            params: records(&net.params),
        }
    }

    pub fn from_generator(net: &GeneratorNet) -> Self {
        Self {
            kind: ModelKind::Generator,
            spec: net.spec.clone(),
            num_outputs: net.obs_dim(),
            sigma: Some(net.sigma()),
            params: records(&net.params),
        }
    }

    pub fn into_potential(self) -> Result<PotentialNet> {
        if self.kind != ModelKind::Potential {
            return Err(Error::invalid("checkpoint does not hold a potential network"));
        }
        let net = PotentialNet::new(self.spec, param_set(&self.params)?)?;
        if net.num_outputs() != self.num_outputs {
            return Err(Error::invalid("checkpoint num_outputs disagrees with its network spec"));
        }
        Ok(net)
    }

    pub fn into_generator(self) -> Result<GeneratorNet> {
        if self.kind != ModelKind::Generator {
            return Err(Error::invalid("checkpoint does not hold a generator network"));
        }
        let sigma = self.sigma.ok_or_else(|| Error::invalid("generator checkpoint lacks sigma"))?;
        GeneratorNet::new(self.spec, param_set(&self.params)?, sigma)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| with_path(e, path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| with_path(e, path))?)
    }
}

fn with_path(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn potential_and_generator_round_trip() {
        let spec = NetworkSpec::mlp(2, &[7], Activation::LeakyRelu { slope: 0.2 }, 2, true, false);
        let pot = PotentialNet::init(spec, &mut rng::stream(1, 0, 0)).unwrap();
        let back = Checkpoint::from_json(&Checkpoint::from_potential(&pot).to_json().unwrap()).unwrap().into_potential().unwrap();
        assert_eq!(back, pot);

        let gspec = NetworkSpec::mlp(2, &[5], Activation::Relu, 2, false, true);
        let gen = GeneratorNet::init(gspec, 0.3, &mut rng::stream(2, 0, 0)).unwrap();
        let ck = Checkpoint::from_generator(&gen);
        assert!(ck.clone().into_potential().is_err());
        assert_eq!(Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().into_generator().unwrap(), gen);
    }

    #[test]
    fn rejects_corrupt_documents() {
        assert!(Checkpoint::from_json("{").is_err());
        assert!(Checkpoint::from_json(
            r#"{"kind":"potential","spec":{"input_dim":1,"layers":[]},"num_outputs":1,"params":[],"extra":1}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn floats_survive_decimal_round_trip(v in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..40)) {
            let rec = ParamRecord { name: "w".into(), shape: vec![v.len()], data: v.clone() };
            let s = serde_json::to_string(&rec).unwrap();
            let back: ParamRecord = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
