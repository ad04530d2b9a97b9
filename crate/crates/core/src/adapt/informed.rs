use crate::multirobot::{EnvSpec, Method};

/// Raw dynamics descriptor of a robot.
///
/// Cart-poles give `(mass, pole_length, pole_offset)`; legged profiles give
/// `(mass, leg_length, num_legs)`. The semi-informed variant keeps the first
/// and last entries.
pub fn informed_raw(spec: &EnvSpec, semi: bool) -> Vec<f64> {
    let full = match spec {
        EnvSpec::Cartpole { params } => vec![params.mass, params.pole_length, params.pole_offset],
        EnvSpec::Nav { profile, .. } => vec![profile.mass, profile.leg_length, profile.num_legs as f64],
    };
    if semi { vec![full[0], full[2]] } else { full }
}

/// Maps each dimension so the training set's min and max land on −1 and +1.
/// Dimensions that are constant over the training set map to 0.
pub fn normalize_descriptor(raw: &[f64], training: &[Vec<f64>]) -> Vec<f64> {
    raw.iter()
        .enumerate()
        .map(|(d, &v)| {
            let lo = training.iter().map(|t| t[d]).fold(f64::INFINITY, f64::min);
            let hi = training.iter().map(|t| t[d]).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 }
        })
        .collect()
}

/// Normalised z-network input for `spec` under an informed method, relative
/// to the training robots. `None` for methods without a descriptor.
pub fn informed_z_input(spec: &EnvSpec, training: &[EnvSpec], method: Method) -> Option<Vec<f64>> {
    let semi = match method {
        Method::InformedZ => false,
        Method::SemiInformedZ => true,
        _ => return None,
    };
    let train: Vec<Vec<f64>> = training.iter().map(|s| informed_raw(s, semi)).collect();
    Some(normalize_descriptor(&informed_raw(spec, semi), &train))
}
