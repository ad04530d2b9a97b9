mod common;

use legnav::adapt::{spl, z_grid, EpisodeResult, Metrics};
use legnav::navsim::*;
use legnav::planner::{geodesic_field, octile};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

proptest! {
    #[test]
    fn wrap_angle_lands_in_half_open_range(a in -100.0f64..100.0) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        let k = ((a - w) / (2.0 * PI)).round();
        prop_assert!((a - w - 2.0 * PI * k).abs() < 1e-9);
    }

    #[test]
    fn footstep_respects_triangle_bound(
        gamma in -PI..PI,
        v in -2.0f64..2.0,
        omega in -3.0f64..3.0,
        r_f in 0.01f64..0.6,
        dt in 0.01f64..0.5,
    ) {
        let foot = (r_f * gamma.cos(), r_f * gamma.sin());
        let t = footstep_target(foot, gamma, v, omega, r_f, dt);
        let d = (t.x_des - foot.0).hypot(t.y_des - foot.1);
        prop_assert!(d <= v.abs() * dt + 2.0 * r_f * (0.5 * omega * dt).sin().abs() + 1e-12);
    }

    #[test]
    fn fall_probability_is_a_probability(v in -5.0f64..5.0, w in -5.0f64..5.0, gain in 0.0f64..10.0) {
        let mut p = RobotProfile::builtin("daisy4").unwrap();
        p.fall_gain = gain;
        let f = fall_probability(&p, v, w);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn grid_is_sorted_and_bounded(n in 1usize..60) {
        let g = z_grid(n).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert!(g.iter().all(|z| (-1.0..=1.0).contains(z)));
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spl_never_exceeds_success_rate(
        eps in prop::collection::vec((any::<bool>(), 0.0f64..20.0, 0.0f64..20.0), 1..40)
    ) {
        let results: Vec<EpisodeResult> = eps
            .iter()
            .map(|&(success, p, l)| EpisodeResult { success, path_length: p, shortest_path: l, steps: 1, ret: 0.0 })
            .collect();
        let m = Metrics::from_results(&results);
        prop_assert!(spl(&results) <= m.success_rate + 1e-15);
        prop_assert!(m.spl >= 0.0);
    }

    #[test]
    fn octile_is_admissible(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = common::random_grid(15, 15, 0.2, &mut rng);
        let free = common::free_cells(&grid);
        let goal = free[seed as usize % free.len()];
        let field = geodesic_field(&grid, goal).unwrap();
        for &c in &free {
            prop_assert!(octile(c, goal, 1.0) <= field.at(c) + 1e-12);
        }
    }

    #[test]
    fn body_step_keeps_finite_state(v in -10.0f64..10.0, w in -10.0f64..10.0, seed in 0u64..100) {
        let grid = OccupancyGrid::closed(60, 60, 0.1).unwrap();
        let p = RobotProfile::builtin("aliengo").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = BodyState::new(3.0, 3.0, 0.0, p.num_legs);
        let (n, _) = body_step(&s, v, w, &p, &grid, &mut rng);
        prop_assert!(n.x.is_finite() && n.y.is_finite() && n.heading.is_finite());
        prop_assert!(n.lin_vel.abs() <= p.v_max);
        prop_assert!(!grid.disc_collides(n.x, n.y, p.body_radius));
    }
}
