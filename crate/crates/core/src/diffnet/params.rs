use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Named, fixed-shape arrays of trainable values.
///
/// Every collection carries a process-unique id so a [`Tape`](super::Tape)
/// can route gradients back to the collection a leaf was read from. Cloning
/// produces an independent collection with a new id.
#[derive(Debug)]
pub struct ParamCollection {
    id: u64,
    names: Vec<String>,
    values: Vec<Mat>,
    version: u64,
}

impl Clone for ParamCollection {
    fn clone(&self) -> Self {
        Self {
            id: fresh_id(),
            names: self.names.clone(),
            values: self.values.clone(),
            version: self.version,
        }
    }
}

impl Default for ParamCollection {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamCollection {
    pub fn new() -> Self {
        Self {
            id: fresh_id(),
            names: Vec::new(),
            values: Vec::new(),
            version: 0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds a new entry and returns its index. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Mat) -> Result<usize> {
        let name = name.into();
        if self.names.iter().any(|n| *n == name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial value of `{name}`")));
        }
        self.names.push(name);
        self.values.push(value);
        Ok(self.values.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, idx: usize) -> &Mat {
        &self.values[idx]
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(|v| v.dim()).collect()
    }

    /// Replaces the value of an entry; the shape must not change.
    pub fn set(&mut self, idx: usize, value: Mat) -> Result<()> {
        if value.dim() != self.values[idx].dim() {
            return Err(Error::Shape(format!(
                "`{}` is {:?}, got {:?}",
                self.names[idx],
                self.values[idx].dim(),
                value.dim()
            )));
        }
        self.values[idx] = value;
        self.version += 1;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Mat] {
        self.version += 1;
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Same names and shapes, in the same order.
    pub fn congruent(&self, other: &ParamCollection) -> bool {
        self.names == other.names && self.shapes() == other.shapes()
    }

    /// Copies values from `other` (which must be congruent) into `self`.
    pub fn copy_from(&mut self, other: &ParamCollection) -> Result<()> {
        if !self.congruent(other) {
            return Err(Error::Shape("copy between incongruent collections".into()));
        }
        for (dst, src) in self.values_mut().iter_mut().zip(&other.values) {
            dst.assign(src);
        }
        Ok(())
    }

    /// `self ← (1 − rate)·self + rate·source`, elementwise, evaluated as
    /// `self + rate·(source − self)` so equal entries stay bit-identical.
    pub fn polyak_from(&mut self, source: &ParamCollection, rate: f64) -> Result<()> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Contract(format!("polyak rate {rate} outside (0, 1]")));
        }
        if !self.congruent(source) {
            return Err(Error::Shape("polyak between incongruent collections".into()));
        }
        for (dst, src) in self.values_mut().iter_mut().zip(&source.values) {
            if rate == 1.0 {
                dst.assign(src);
            } else {
                dst.zip_mut_with(src, |d, &s| *d += rate * (s - *d));
            }
        }
        Ok(())
    }

    /// Bitwise equality of every value.
    pub fn bit_eq(&self, other: &ParamCollection) -> bool {
        self.congruent(other)
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    /// Flattened view of all scalars in entry order.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }
}

/// Gradients congruent to one [`ParamCollection`].
#[derive(Debug, Clone)]
pub struct ParamGrads(pub Vec<Mat>);

impl ParamGrads {
    pub fn zeros_like(params: &ParamCollection) -> Self {
        Self(params.values().iter().map(|v| Mat::zeros(v.dim())).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.0 {
            g.mapv_inplace(|x| x * k);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| v.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamCollection::new();
        p.insert("w", array![[1.0]]).unwrap();
        assert!(p.insert("w", array![[2.0]]).is_err());
    }

    #[test]
    fn shapes_are_immutable() {
        let mut p = ParamCollection::new();
        let i = p.insert("w", Mat::zeros((2, 3))).unwrap();
        assert!(p.set(i, Mat::zeros((3, 2))).is_err());
        assert!(p.set(i, Mat::ones((2, 3))).is_ok());
    }

    #[test]
    fn clone_gets_new_id() {
        let p = ParamCollection::new();
        let q = p.clone();
        assert_ne!(p.id(), q.id());
    }

    #[test]
    fn polyak_one_copies_and_small_rate_blends() {
        let mut target = ParamCollection::new();
        target.insert("w", array![[0.0]]).unwrap();
        let mut online = ParamCollection::new();
        online.insert("w", array![[1.0]]).unwrap();
        let mut t2 = target.clone();
        t2.polyak_from(&online, 1.0).unwrap();
        assert_eq!(t2.value(0)[[0, 0]], 1.0);
        target.polyak_from(&online, 0.005).unwrap();
        assert!((target.value(0)[[0, 0]] - 0.005).abs() < 1e-15);
        assert!(target.polyak_from(&online, 0.0).is_err());
    }
}
