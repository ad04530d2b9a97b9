use serde::{Deserialize, Serialize};

use crate::cartpole::{family_member, CartPoleEnv, CartPoleParams};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::navsim::{NavConfig, NavEnv, RobotProfile};

/// How robot embeddings are produced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// z-network over a learned scalar input.
    #[default]
    LearnedZ,
    /// Constant z per robot, evenly spaced over `[−1, 1]`.
    FixedZ,
    /// z is always zero.
    NoZ,
    /// z-network over the robot's normalised dynamics descriptor.
    InformedZ,
    /// As `InformedZ`, with a reduced descriptor.
    SemiInformedZ,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LearnedZ,
        Method::FixedZ,
        Method::NoZ,
        Method::InformedZ,
        Method::SemiInformedZ,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LearnedZ => "learned_z",
            Method::FixedZ => "fixed_z",
            Method::NoZ => "no_z",
            Method::InformedZ => "informed_z",
            Method::SemiInformedZ => "semi_informed_z",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }

    /// Whether the method trains a z-network.
    pub fn has_network(&self) -> bool {
        matches!(self, Method::LearnedZ | Method::InformedZ | Method::SemiInformedZ)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Cartpole { params: CartPoleParams },
    Nav { profile: RobotProfile, config: NavConfig },
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn Env>> {
        Ok(match self {
            EnvSpec::Cartpole { params } => Box::new(CartPoleEnv::new(*params)?),
            EnvSpec::Nav { profile, config } => Box::new(NavEnv::new(profile.clone(), config.clone())?),
        })
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            EnvSpec::Cartpole { .. } => 5,
            EnvSpec::Nav { config, .. } => config.obs_dim(),
        }
    }

    pub fn act_dim(&self) -> usize {
        match self {
            EnvSpec::Cartpole { .. } => 1,
            EnvSpec::Nav { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub name: String,
    pub env: EnvSpec,
}

impl RobotSpec {
    /// A member of the built-in cart-pole family (`cp1` … `cp5`).
    pub fn cartpole(name: &str) -> Result<Self> {
        let params = family_member(name).ok_or_else(|| Error::Config(format!("unknown cart-pole `{name}`")))?;
        Ok(Self { name: name.to_ascii_lowercase(), env: EnvSpec::Cartpole { params } })
    }

    /// A built-in navigation profile.
    pub fn nav(name: &str, config: NavConfig) -> Result<Self> {
        let profile = RobotProfile::builtin(name).ok_or_else(|| Error::Config(format!("unknown robot `{name}`")))?;
        Ok(Self { name: profile.name.clone(), env: EnvSpec::Nav { profile, config } })
    }

    /// Resolves a built-in robot of the same kind as `like`.
    pub fn builtin_like(name: &str, like: &EnvSpec) -> Result<Self> {
        match like {
            EnvSpec::Cartpole { .. } => Self::cartpole(name),
            EnvSpec::Nav { config, .. } => Self::nav(name, config.clone()),
        }
    }
}
