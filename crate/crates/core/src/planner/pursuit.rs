use crate::navsim::body::{wrap_angle, BodyState};
use crate::navsim::profile::RobotProfile;

/// Pure-pursuit follower gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurePursuit {
    /// Arc length ahead of the closest path point to steer at (m).
    pub lookahead: f64,
    /// Yaw-rate command per radian of heading error.
    pub gain: f64,
}

impl Default for PurePursuit {
    fn default() -> Self {
        Self { lookahead: 0.5, gain: 2.0 }
    }
}

impl PurePursuit {
    /// Point `lookahead` metres along `path` past its closest point to `pos`.
    pub fn lookahead_point(&self, path: &[(f64, f64)], pos: (f64, f64)) -> (f64, f64) {
        if path.len() == 1 {
            return path[0];
        }
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for (i, w) in path.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let (sx, sy) = (b.0 - a.0, b.1 - a.1);
            let len2 = sx * sx + sy * sy;
            let t = if len2 > 0.0 {
                (((pos.0 - a.0) * sx + (pos.1 - a.1) * sy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.0 + t * sx, a.1 + t * sy);
            let d2 = (pos.0 - px).powi(2) + (pos.1 - py).powi(2);
            // `<=` prefers later segments, so progress is never undone on ties.
            if d2 <= best.0 {
                best = (d2, i, t);
            }
        }
        let (_, mut seg, t) = best;
        let seg_len = |i: usize| {
            let (a, b) = (path[i], path[i + 1]);
            ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
        };
        let mut remaining = self.lookahead + t * seg_len(seg);
        loop {
            let len = seg_len(seg);
            if remaining <= len {
                let (a, b) = (path[seg], path[seg + 1]);
                let f = if len > 0.0 { remaining / len } else { 0.0 };
                return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            }
            remaining -= len;
            seg += 1;
            if seg + 1 >= path.len() {
                return *path.last().unwrap();
            }
        }
    }

    pub fn command(&self, path: &[(f64, f64)], state: &BodyState, profile: &RobotProfile) -> (f64, f64) {
        let target = self.lookahead_point(path, state.position());
        let bearing = (target.1 - state.y).atan2(target.0 - state.x);
        let err = wrap_angle(bearing - state.heading);
        let omega = (self.gain * err).clamp(-profile.omega_max, profile.omega_max);
        let v = profile.v_max * err.cos().max(0.0);
        (v, omega)
    }
}

/// Default pure-pursuit command toward a waypoint path. Ignores the robot's
/// lag, drift and fall hazard by design.
pub fn oracle_policy(path: &[(f64, f64)], state: &BodyState, profile: &RobotProfile) -> (f64, f64) {
    PurePursuit::default().command(path, state, profile)
}
