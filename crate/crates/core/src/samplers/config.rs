use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Sgld,
    Sghmc,
    LdExact,
    HmcExact,
    Coopnet,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] =
        [SamplerKind::LdExact, SamplerKind::HmcExact, SamplerKind::Sgld, SamplerKind::Sghmc, SamplerKind::Coopnet];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Sgld => "sgld",
            SamplerKind::Sghmc => "sghmc",
            SamplerKind::LdExact => "ld_exact",
            SamplerKind::HmcExact => "hmc_exact",
            SamplerKind::Coopnet => "coopnet",
        }
    }

    pub fn uses_momentum(self) -> bool {
        matches!(self, SamplerKind::Sghmc | SamplerKind::HmcExact)
    }

    pub fn uses_exact_gradient(self) -> bool {
        matches!(self, SamplerKind::LdExact | SamplerKind::HmcExact)
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown sampler `{s}`")))
    }
}

/// Step sizes `δ_t`, `t = 0, 1, …`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant {
        delta: f64,
    },
    /// `δ_t = (a (1 + t/b))^(-c)`
    Decay {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl StepSchedule {
    pub fn step_size(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { delta } => delta,
            StepSchedule::Decay { a, b, c } => step_size(t, a, b, c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant { delta } => delta.is_finite() && delta > 0.0,
            StepSchedule::Decay { a, b, c } => [a, b, c].iter().all(|v| v.is_finite() && *v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("step schedule parameters must be positive: {self:?}")))
        }
    }
}

pub fn step_size(t: usize, a: f64, b: f64, c: f64) -> f64 {
    (a * (1.0 + t as f64 / b)).powf(-c)
}

fn default_beta() -> f64 {
    0.1
}
fn default_inner() -> usize {
    1
}
fn default_coop() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Revision steps `L`, counted in joint iterations.
    pub steps: usize,
    pub schedule: StepSchedule,
    /// SGHMC friction.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Inner Langevin steps refreshing `h*`.
    #[serde(default = "default_inner")]
    pub inner_steps: usize,
    /// Inner step size; the current `δ_t` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<f64>,
    #[serde(default = "default_coop")]
    pub coop_lx: usize,
    #[serde(default = "default_coop")]
    pub coop_lh: usize,
    /// Divergence resets tolerated per call before giving up; defaults to
    /// the number of chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_resets: Option<usize>,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, steps: usize, schedule: StepSchedule) -> Self {
        Self {
            kind,
            steps,
            schedule,
            beta: default_beta(),
            inner_steps: default_inner(),
            delta_star: None,
            coop_lx: default_coop(),
            coop_lh: default_coop(),
            max_resets: None,
        }
    }

    pub fn sgld(steps: usize, delta: f64) -> Self {
        Self::new(SamplerKind::Sgld, steps, StepSchedule::Constant { delta })
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if let Some(d) = self.delta_star {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!("delta_star must be non-negative, got {d}")));
            }
        }
        if self.kind == SamplerKind::Coopnet && self.coop_lx == 0 {
            return Err(Error::Config("coop_lx must be at least 1".into()));
        }
        Ok(())
    }
}
