use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::multirobot::RobotSpec;
use crate::sac::SacNets;

use super::evaluate::evaluate;
use super::metrics::Metrics;

pub const MATRIX_EPISODES: usize = 50;

/// A trained single-robot policy together with the embedding it acts under.
pub struct TrainedPolicy<'a> {
    pub name: String,
    pub nets: &'a SacNets,
    pub z: f64,
}

/// Zero-shot transfer results: `metrics[i][j]` drives robot `j` with the
/// policy trained on robot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub metrics: Vec<Vec<Metrics>>,
}

impl TransferMatrix {
    pub fn success(&self, i: usize, j: usize) -> f64 {
        self.metrics[i][j].success_rate
    }

    /// Mean success where the policy and robot names match.
    pub fn mean_diagonal(&self) -> f64 {
        let vals: Vec<f64> = self.pairs().filter(|&(i, j)| self.train[i] == self.test[j]).map(|(i, j)| self.success(i, j)).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let vals: Vec<f64> = self.pairs().filter(|&(i, j)| self.train[i] != self.test[j]).map(|(i, j)| self.success(i, j)).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.train.len()).flat_map(move |i| (0..self.test.len()).map(move |j| (i, j)))
    }

    /// `train_robot,test_robot,success_rate,spl,mean_return`, one row per pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_robot,test_robot,success_rate,spl,mean_return\n");
        for (i, j) in self.pairs() {
            let m = &self.metrics[i][j];
            let _ = writeln!(out, "{},{},{},{},{}", self.train[i], self.test[j], m.success_rate, m.spl, m.mean_return);
        }
        out
    }
}

/// Evaluates every policy on every robot with `episodes` greedy episodes.
/// Each cell uses the same episode streams, so all policies face the same
/// worlds on a given robot.
pub fn cross_robot_matrix(
    policies: &[TrainedPolicy<'_>],
    robots: &[RobotSpec],
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<TransferMatrix> {
    if policies.is_empty() || robots.is_empty() {
        return Err(Error::Config("transfer matrix needs policies and robots".into()));
    }
    let metrics = policies
        .iter()
        .map(|p| {
            robots
                .iter()
                .map(|r| evaluate(p.nets, r, p.z, episodes, true, seed, workers).map(|e| e.metrics))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMatrix {
        train: policies.iter().map(|p| p.name.clone()).collect(),
        test: robots.iter().map(|r| r.name.clone()).collect(),
        metrics,
    })
}
