pub const COLLISION_PENALTY: f64 = 1.0;
pub const FALL_PENALTY: f64 = 5.0;
pub const SUCCESS_REWARD: f64 = 10.0;

/// Shaped navigation reward: geodesic progress plus event terms.
pub fn compute_reward(
    d_geo_prev: f64,
    d_geo_cur: f64,
    collided: bool,
    fell: bool,
    succeeded: bool,
    k_geo: f64,
) -> f64 {
    let mut r = k_geo * (d_geo_prev - d_geo_cur);
    if collided {
        r -= COLLISION_PENALTY;
    }
    if fell {
        r -= FALL_PENALTY;
    }
    if succeeded {
        r += SUCCESS_REWARD;
    }
    r
}
