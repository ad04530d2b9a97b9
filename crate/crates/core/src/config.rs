//! Experiment configuration stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapt::{FinetuneConfig, SearchConfig};
use crate::cartpole::{family_member, CartPoleParams};
use crate::error::{Error, Result};
use crate::multirobot::{EnvSpec, RobotSpec, TrainConfig};
use crate::navsim::{NavConfig, RobotProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Cartpole,
    Navsim,
}

/// A cart-pole defined in the config file rather than the built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCartPole {
    pub name: String,
    pub mass: f64,
    pub pole_length: f64,
    pub pole_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Training robots, by name.
    pub robots: Vec<String>,
    /// Held-out robots used by adaptation and evaluation commands.
    pub test_robots: Vec<String>,
    pub out_dir: String,
    /// Greedy episodes per evaluation command.
    pub eval_episodes: usize,
    pub train: TrainConfig,
    pub nav: NavConfig,
    pub search: SearchConfig,
    pub finetune: FinetuneConfig,
    /// Extra cart-poles, `[[cartpoles]]` tables.
    pub cartpoles: Vec<NamedCartPole>,
    /// Extra legged profiles, `[[profiles]]` tables.
    pub profiles: Vec<RobotProfile>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Cartpole,
            robots: vec!["cp1".into(), "cp2".into(), "cp3".into()],
            test_robots: vec!["cp4".into(), "cp5".into()],
            out_dir: "runs".into(),
            eval_episodes: 10,
            train: TrainConfig::default(),
            nav: NavConfig::default(),
            search: SearchConfig::default(),
            finetune: FinetuneConfig::default(),
            cartpoles: Vec::new(),
            profiles: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates TOML text. Syntax and type errors carry the
    /// line and column of the offending entry.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hash_text(&self.to_toml()?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::Config("at least one training robot is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        self.train.validate()?;
        if self.env == EnvKind::Navsim {
            self.nav.validate()?;
        }
        for c in &self.cartpoles {
            CartPoleParams::new(c.mass, c.pole_length, c.pole_offset)
                .map_err(|e| Error::Config(format!("cart-pole `{}`: {e}", c.name)))?;
        }
        for p in &self.profiles {
            p.validate().map_err(|e| Error::Config(format!("profile `{}`: {e}", p.name)))?;
        }
        for name in self.robots.iter().chain(&self.test_robots) {
            self.robot(name)?;
        }
        Ok(())
    }

    /// Resolves a robot name against the config's own tables, then the
    /// built-in set for the configured environment.
    pub fn robot(&self, name: &str) -> Result<RobotSpec> {
        let key = name.to_ascii_lowercase();
        match self.env {
            EnvKind::Cartpole => {
                if let Some(c) = self.cartpoles.iter().find(|c| c.name.eq_ignore_ascii_case(&key)) {
                    let params = CartPoleParams::new(c.mass, c.pole_length, c.pole_offset)?;
                    return Ok(RobotSpec { name: key, env: EnvSpec::Cartpole { params } });
                }
                if family_member(&key).is_some() {
                    return RobotSpec::cartpole(&key);
                }
            }
            EnvKind::Navsim => {
                if let Some(p) = self.profiles.iter().find(|p| p.name.eq_ignore_ascii_case(&key)) {
                    return Ok(RobotSpec { name: key, env: EnvSpec::Nav { profile: p.clone(), config: self.nav.clone() } });
                }
                if RobotProfile::builtin(&key).is_some() {
                    return RobotSpec::nav(&key, self.nav.clone());
                }
            }
        }
        Err(Error::Config(format!("robot `{name}` is not defined for env {:?}", self.env)))
    }

    pub fn training_robots(&self) -> Result<Vec<RobotSpec>> {
        self.robots.iter().map(|n| self.robot(n)).collect()
    }
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("robots = [\"cp2\"]\n[train]\ntotal_steps = 500\n").unwrap();
        assert_eq!(cfg.robots, vec!["cp2"]);
        assert_eq!(cfg.train.total_steps, 500);
        assert_eq!(cfg.train.sac.discount, 0.99);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::from_toml_str("robots = [\"cp1\"]\n\n[train]\ntotal_steps = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = ExperimentConfig::from_toml_str("robotz = []\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn unknown_robot_and_bad_method_rejected() {
        assert!(ExperimentConfig::from_toml_str("robots = [\"cp9\"]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[train]\nmethod = \"magic_z\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[train]\ntotal_steps = 0\n").is_err());
    }

    #[test]
    fn custom_robots_resolve() {
        let text = "robots = [\"heavy\"]\ntest_robots = []\n[[cartpoles]]\nname = \"heavy\"\nmass = 3.0\npole_length = 1.0\npole_offset = 0.05\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let r = cfg.robot("heavy").unwrap();
        assert!(matches!(r.env, EnvSpec::Cartpole { params } if params.mass == 3.0));
        let nav = ExperimentConfig::from_toml_str("env = \"navsim\"\nrobots = [\"a1\", \"daisy\"]\ntest_robots = [\"laikago\"]\n").unwrap();
        assert_eq!(nav.training_robots().unwrap()[1].name, "daisy");
        assert!(nav.robot("cp1").is_err());
    }
}
