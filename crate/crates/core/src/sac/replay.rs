use ndarray::Array2;
use rand::Rng;

use crate::diffnet::Mat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub act: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Episode ended after this step (failure, success or time limit).
    pub done: bool,
    /// Ended in a state with no future value; bootstrapping stops.
    pub terminal: bool,
    pub robot_id: usize,
    /// Embedding the behaviour policy acted with.
    pub z: f64,
}

impl Transition {
    pub fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.z.is_finite()
            && self.obs.iter().chain(&self.act).chain(&self.next_obs).all(|v| v.is_finite())
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: Vec::new(), capacity, inserted: 0 })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes since creation, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    /// Appends `t`, overwriting the oldest entry once full. Non-finite
    /// transitions are rejected.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition with non-finite entries".into()));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = t;
        }
        self.inserted += 1;
        Ok(())
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if self.items.is_empty() {
            return Err(Error::Contract("sampling from an empty replay buffer".into()));
        }
        let idx = self.sample_indices(n, rng);
        Batch::from_transitions(idx.iter().map(|&i| &self.items[i]))
    }
}

/// Row-stacked transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Mat,
    pub act: Mat,
    /// n×1
    pub reward: Mat,
    pub next_obs: Mat,
    /// n×1; 0 where the transition was terminal.
    pub not_terminal: Mat,
    pub robot: Vec<usize>,
    pub stored_z: Vec<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Result<Self> {
        let items: Vec<&Transition> = items.into_iter().collect();
        let first = items
            .first()
            .ok_or_else(|| Error::Contract("empty batch".into()))?;
        let (od, ad) = (first.obs.len(), first.act.len());
        let n = items.len();
        let mut obs = Array2::zeros((n, od));
        let mut next_obs = Array2::zeros((n, od));
        let mut act = Array2::zeros((n, ad));
        let mut reward = Array2::zeros((n, 1));
        let mut not_terminal = Array2::zeros((n, 1));
        let mut robot = Vec::with_capacity(n);
        let mut stored_z = Vec::with_capacity(n);
        for (i, t) in items.iter().enumerate() {
            if t.obs.len() != od || t.next_obs.len() != od || t.act.len() != ad {
                return Err(Error::Shape("transitions in a batch disagree on dimensions".into()));
            }
            for j in 0..od {
                obs[[i, j]] = t.obs[j];
                next_obs[[i, j]] = t.next_obs[j];
            }
            for j in 0..ad {
                act[[i, j]] = t.act[j];
            }
            reward[[i, 0]] = t.reward;
            not_terminal[[i, 0]] = if t.terminal { 0.0 } else { 1.0 };
            robot.push(t.robot_id);
            stored_z.push(t.z);
        }
        Ok(Self { obs, act, reward, next_obs, not_terminal, robot, stored_z })
    }

    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks batches in order.
    pub fn concat(parts: &[Batch]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let stack = |f: fn(&Batch) -> &Mat| -> Result<Mat> {
            let views: Vec<_> = parts.iter().map(|b| f(b).view()).collect();
            ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
        };
        Ok(Self {
            obs: stack(|b| &b.obs)?,
            act: stack(|b| &b.act)?,
            reward: stack(|b| &b.reward)?,
            next_obs: stack(|b| &b.next_obs)?,
            not_terminal: stack(|b| &b.not_terminal)?,
            robot: parts.iter().flat_map(|b| b.robot.iter().copied()).collect(),
            stored_z: parts.iter().flat_map(|b| b.stored_z.iter().copied()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            obs: vec![i as f64, 0.0],
            act: vec![0.5],
            reward: i as f64,
            next_obs: vec![i as f64 + 1.0, 0.0],
            done: i % 2 == 0,
            terminal: i % 4 == 0,
            robot_id: 0,
            z: 0.1,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(t(i)).unwrap();
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.inserted(), 5);
        let rewards: Vec<f64> = b.items().iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut b = ReplayBuffer::new(3).unwrap();
        let mut bad = t(1);
        bad.next_obs[1] = f64::NAN;
        assert!(b.push(bad).is_err());
        assert!(b.is_empty());
    }

    #[test]
    fn batch_layout_and_mask() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..4 {
            b.push(t(i)).unwrap();
        }
        let batch = Batch::from_transitions(b.items()).unwrap();
        assert_eq!(batch.obs.dim(), (4, 2));
        assert_eq!(batch.not_terminal.column(0).to_vec(), vec![0.0, 1.0, 1.0, 1.0]);
        let both = Batch::concat(&[batch.clone(), batch]).unwrap();
        assert_eq!(both.len(), 8);
        assert_eq!(both.reward[[5, 0]], 1.0);
    }

    #[test]
    fn sample_is_reproducible() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..50 {
            b.push(t(i)).unwrap();
        }
        let a = b.sample(16, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let c = b.sample(16, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, c);
        assert!(ReplayBuffer::new(5).unwrap().sample(1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
