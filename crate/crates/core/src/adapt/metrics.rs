use serde::{Deserialize, Serialize};

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Distance travelled `p` (m).
    pub path_length: f64,
    /// Shortest path `l` from the start (m).
    pub shortest_path: f64,
    pub steps: usize,
    pub ret: f64,
}

impl EpisodeResult {
    /// `S·l / max(p, l)`; zero on failure or when `l` is not positive.
    pub fn spl_term(&self) -> f64 {
        if !self.success || !(self.shortest_path > 0.0) {
            return 0.0;
        }
        self.shortest_path / self.path_length.max(self.shortest_path)
    }
}

/// Success weighted by inverse path length, averaged over episodes.
pub fn spl(results: &[EpisodeResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().map(EpisodeResult::spl_term).sum::<f64>() / results.len() as f64
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Aggregate of a set of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub spl: f64,
    pub mean_return: f64,
    pub std_return: f64,
}

impl Metrics {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let returns: Vec<f64> = results.iter().map(|r| r.ret).collect();
        let (mean_return, std_return) = mean_std(&returns);
        let successes = results.iter().filter(|r| r.success).count();
        Self {
            episodes: results.len(),
            success_rate: successes as f64 / results.len().max(1) as f64,
            spl: spl(results),
            mean_return,
            std_return,
        }
    }
}
