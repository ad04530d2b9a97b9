use ndarray::Array2;
use rand::Rng;

use crate::diffnet::{Activation, AdamConfig, AdamState, Mlp, ParamCollection, Tape, Var};
use crate::error::{Error, Result};

pub const Z_HIDDEN: usize = 100;

/// Per-robot embedding network `z = g_ψ(input)`: three tanh-bounded layers
/// from a (learned or fixed) input vector to a scalar in `(−1, 1)`.
#[derive(Debug, Clone)]
pub struct ZNetwork {
    pub mlp: Mlp,
    /// Network weights, plus an `input` row when the input is learned.
    pub params: ParamCollection,
    /// Fixed input when the network is dynamics-informed.
    pub fixed_input: Option<Vec<f64>>,
}

impl ZNetwork {
    fn build<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Result<(Mlp, ParamCollection)> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config("z-network sizes must be positive".into()));
        }
        let mlp = Mlp::new(vec![input_dim, hidden, hidden, 1], Activation::Relu, Activation::Tanh).with_prefix("g");
        let mut params = ParamCollection::new();
        mlp.init_params(&mut params, rng)?;
        Ok((mlp, params))
    }

    /// Scalar learned input drawn from `U[0, 1)`.
    pub fn learned<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Result<Self> {
        let (mlp, mut params) = Self::build(1, hidden, rng)?;
        let x: f64 = rng.random_range(0.0..1.0);
        params.insert("input", Array2::from_elem((1, 1), x))?;
        Ok(Self { mlp, params, fixed_input: None })
    }

    /// Network over a fixed descriptor of the robot's dynamics.
    pub fn informed<R: Rng + ?Sized>(input: Vec<f64>, hidden: usize, rng: &mut R) -> Result<Self> {
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("informed z input".into()));
        }
        let (mlp, params) = Self::build(input.len(), hidden, rng)?;
        Ok(Self { mlp, params, fixed_input: Some(input) })
    }

    pub fn input(&self) -> Vec<f64> {
        match &self.fixed_input {
            Some(v) => v.clone(),
            None => self.params.get("input").map(|m| m.iter().copied().collect()).unwrap_or_default(),
        }
    }

    /// Current embedding, evaluated without a tape.
    pub fn value(&self) -> Result<f64> {
        Ok(self.mlp.infer(&self.params, &self.input())?[0])
    }
}

/// Records `z` (1×1) on `tape`, tracking ψ and the learned input.
pub fn z_forward(znet: &ZNetwork, tape: &mut Tape) -> Result<Var> {
    let input = match &znet.fixed_input {
        Some(v) => tape.constant(Array2::from_shape_vec((1, v.len()), v.clone()).expect("row")),
        None => {
            let idx = znet
                .params
                .index_of("input")
                .ok_or_else(|| Error::Config("learned z-network lacks an input".into()))?;
            tape.param(&znet.params, idx)
        }
    };
    znet.mlp.forward(&znet.params, input, tape)
}

/// How a robot's embedding is produced.
#[derive(Debug, Clone)]
pub enum Embedding {
    Network { net: ZNetwork, opt: AdamState },
    Constant(f64),
}

impl Embedding {
    pub fn network(net: ZNetwork, lr: f64) -> Self {
        let opt = AdamState::new(&net.params, AdamConfig::with_lr(lr));
        Embedding::Network { net, opt }
    }

    pub fn value(&self) -> Result<f64> {
        match self {
            Embedding::Network { net, .. } => net.value(),
            Embedding::Constant(z) => Ok(*z),
        }
    }

    pub fn params(&self) -> Option<&ParamCollection> {
        match self {
            Embedding::Network { net, .. } => Some(&net.params),
            Embedding::Constant(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_and_input_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut z = ZNetwork::learned(8, &mut rng).unwrap();
        for i in 0..z.params.len() {
            let shape = z.params.value(i).dim();
            z.params.set(i, Array2::zeros(shape)).unwrap();
        }
        assert_eq!(z.value().unwrap(), 0.0);
    }

    #[test]
    fn output_is_bounded_and_input_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut z = ZNetwork::learned(Z_HIDDEN, &mut rng).unwrap();
            let x = z.input()[0];
            assert!((0.0..1.0).contains(&x));
            let idx = z.params.index_of("g2.w").unwrap();
            let big = z.params.value(idx).mapv(|w| w * 1e3);
            z.params.set(idx, big).unwrap();
            let v = z.value().unwrap();
            assert!(v.abs() <= 1.0);
        }
    }

    #[test]
    fn tape_matches_inference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = ZNetwork::informed(vec![0.2, -0.4, 1.0], 16, &mut rng).unwrap();
        let mut tape = Tape::new();
        let v = z_forward(&z, &mut tape).unwrap();
        assert!((tape.scalar(v) - z.value().unwrap()).abs() < 1e-14);
    }
}
