mod common;

use common::mlp_forward_oracle;
use legnav::diffnet::{Activation, Mat, Tape};
use legnav::multirobot::*;
use legnav::sac::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS: usize = 4;

fn nets(seed: u64) -> SacNets {
    let config = SacConfig { hidden: 16, encoder_hidden: 16, latent_dim: 8, batch_size: 12, ..Default::default() };
    SacNets::new(OBS, 1, config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn embeddings(n: usize, seed: u64) -> Vec<Embedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Embedding::network(ZNetwork::learned(12, &mut rng).unwrap(), 1e-2)).collect()
}

fn batch(robots: &[usize], rng: &mut ChaCha8Rng) -> Batch {
    let items: Vec<Transition> = robots
        .iter()
        .map(|&r| {
            let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            Transition { obs: v(OBS), act: v(1), reward: v(1)[0], next_obs: v(OBS), done: false, terminal: false, robot_id: r, z: 0.0 }
        })
        .collect();
    Batch::from_transitions(&items).unwrap()
}

fn net_params(e: &Embedding) -> &legnav::diffnet::ParamCollection {
    e.params().unwrap()
}

/// Critic loss as a function of the embeddings, with the target and noise
/// held fixed.
fn critic_value(n: &SacNets, emb: &mut [Embedding], b: &Batch, target: &Mat) -> f64 {
    let mut tape = Tape::new();
    let z = RoutedZ::new(emb, ZSource::Fresh).build(&mut tape, b).unwrap();
    let l = critic_loss(n, &mut tape, b, z, target).unwrap();
    tape.scalar(l.total)
}

#[test]
fn absent_robot_is_untouched() {
    let mut n = nets(1);
    let mut opt = SacOptim::new(&n);
    let mut emb = embeddings(3, 2);
    let before = emb.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = batch(&[0, 0, 0, 2, 2, 2], &mut rng);
    routed_update_batch(&mut n, &mut opt, &mut emb, &b, &mut rng).unwrap();
    assert!(net_params(&emb[1]).bit_eq(net_params(&before[1])));
    assert!(!net_params(&emb[0]).bit_eq(net_params(&before[0])));
    assert!(!net_params(&emb[2]).bit_eq(net_params(&before[2])));
}

#[test]
fn gradient_of_one_robot_ignores_other_rows() {
    let n = nets(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = batch(&[0, 0, 0, 1, 1, 1], &mut rng);
    let mut other = b.clone();
    for i in 0..3 {
        other.obs.row_mut(i).mapv_inplace(|v| v * 1.7 - 0.2);
        other.reward[[i, 0]] += 3.0;
    }
    let grad_psi1 = |b: &Batch| {
        let mut emb = embeddings(2, 6);
        let mut tape = Tape::new();
        let z = RoutedZ::new(&mut emb, ZSource::Fresh).build(&mut tape, b).unwrap();
        let zv = tape.value(z).clone();
        let target = critic_target(&n, b, &zv, Mat::from_elem((6, 1), 0.3)).unwrap();
        let l = critic_loss(&n, &mut tape, b, z, &target).unwrap();
        tape.backward(l.td).unwrap().wrt(net_params(&emb[1])).flatten()
    };
    let a = grad_psi1(&b);
    let c = grad_psi1(&other);
    assert!(a.iter().any(|&g| g != 0.0));
    assert_eq!(a.iter().map(|g| g.to_bits()).collect::<Vec<_>>(), c.iter().map(|g| g.to_bits()).collect::<Vec<_>>());
}

#[test]
fn psi_gradient_matches_finite_differences() {
    let n = nets(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b = batch(&[0, 0, 1, 1, 1, 0], &mut rng);
    let mut emb = embeddings(2, 9);
    let mut tape = Tape::new();
    let z = RoutedZ::new(&mut emb, ZSource::Fresh).build(&mut tape, &b).unwrap();
    let zv = tape.value(z).clone();
    let target = critic_target(&n, &b, &zv, standard_normal(6, 1, &mut rng)).unwrap();
    let l = critic_loss(&n, &mut tape, &b, z, &target).unwrap();
    let grads = tape.backward(l.total).unwrap();

    let h = 1e-6;
    for r in 0..2 {
        let analytic = grads.wrt(net_params(&emb[r]));
        let count = net_params(&emb[r]).len();
        for p in 0..count {
            let shape = net_params(&emb[r]).value(p).dim();
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let probe = |delta: f64| {
                        let mut e = emb.clone();
                        if let Embedding::Network { net, .. } = &mut e[r] {
                            let mut v = net.params.value(p).clone();
                            v[[i, j]] += delta;
                            net.params.set(p, v).unwrap();
                        }
                        critic_value(&n, &mut e, &b, &target)
                    };
                    let fd = (probe(h) - probe(-h)) / (2.0 * h);
                    let g = analytic.0[p][[i, j]];
                    let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-3);
                    assert!(err < 1e-4, "robot {r} param {p} [{i},{j}]: {g} vs {fd}");
                }
            }
        }
    }
}

#[test]
fn psi_moves_only_by_the_critic_step() {
    let mut n = nets(10);
    let mut opt = SacOptim::new(&n);
    let mut emb = embeddings(2, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = batch(&[0, 0, 0, 1, 1, 1], &mut rng);

    // Replay the critic half of the update by hand on copies.
    let mut expect = emb.clone();
    let mut replay_rng = rng.clone();
    let next_noise = standard_normal(6, 1, &mut replay_rng);
    let mut tape = Tape::new();
    let z = RoutedZ::new(&mut expect, ZSource::Fresh).build(&mut tape, &b).unwrap();
    let zv = tape.value(z).clone();
    let target = critic_target(&n, &b, &zv, next_noise).unwrap();
    let l = critic_loss(&n, &mut tape, &b, z, &target).unwrap();
    let grads = tape.backward(l.total).unwrap();
    for e in expect.iter_mut() {
        if let Embedding::Network { net, opt } = e {
            let g = grads.wrt(&net.params);
            opt.step(&mut net.params, &g).unwrap();
        }
    }

    routed_update_batch(&mut n, &mut opt, &mut emb, &b, &mut rng).unwrap();
    for r in 0..2 {
        assert!(net_params(&emb[r]).bit_eq(net_params(&expect[r])), "robot {r}");
    }
}

#[test]
fn z_network_matches_hand_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for hidden in [1, 5, Z_HIDDEN] {
        let net = ZNetwork::learned(hidden, &mut rng).unwrap();
        let want = mlp_forward_oracle(&[1, hidden, hidden, 1], Activation::Relu, Activation::Tanh, &net.params, "g", &net.input())[0];
        assert!((net.value().unwrap() - want).abs() < 1e-14);
        let mut tape = Tape::new();
        let v = z_forward(&net, &mut tape).unwrap();
        assert!((tape.scalar(v) - want).abs() < 1e-14);

        // dz/dinput by the chain rule on the oracle
        let g = tape.backward(v).unwrap().wrt(&net.params);
        let idx = net.params.index_of("input").unwrap();
        let x = net.input()[0];
        let at = |x: f64| mlp_forward_oracle(&[1, hidden, hidden, 1], Activation::Relu, Activation::Tanh, &net.params, "g", &[x])[0];
        let fd = (at(x + 1e-6) - at(x - 1e-6)) / 2e-6;
        assert!((g.0[idx][[0, 0]] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
    }
}

#[test]
fn fixed_z_spacing() {
    assert_eq!(fixed_z_value(0, 1), 0.0);
    assert_eq!((0..3).map(|i| fixed_z_value(i, 3)).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
    assert_eq!(fixed_z_value(4, 5), 1.0);
}

fn tiny_config(method: Method) -> TrainConfig {
    TrainConfig {
        method,
        total_steps: 900,
        warmup_steps: 100,
        eval_every: 300,
        eval_episodes: 2,
        z_hidden: 8,
        seed: 3,
        sac: SacConfig { hidden: 16, encoder_hidden: 16, latent_dim: 8, batch_size: 16, ..Default::default() },
        ..Default::default()
    }
}

fn robots() -> Vec<RobotSpec> {
    ["cp1", "cp2"].iter().map(|n| RobotSpec::cartpole(n).unwrap()).collect()
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut t = Trainer::new(robots(), tiny_config(Method::LearnedZ)).unwrap();
        let out = t.run().unwrap();
        (t, out)
    };
    let (a, oa) = run();
    let (b, ob) = run();
    assert_eq!(oa, ob);
    assert_eq!(a.curves_csv(), b.curves_csv());
    assert!(a.nets.bit_eq(&b.nets));
    assert_eq!(a.z_values(), b.z_values());
    assert_eq!(oa.env_steps, 900);
    assert_eq!(a.curves.len(), 3 * 2);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut one = Trainer::new(robots(), tiny_config(Method::FixedZ)).unwrap();
    one.run().unwrap();
    let mut cfg = tiny_config(Method::FixedZ);
    cfg.workers = 2;
    let mut two = Trainer::new(robots(), cfg).unwrap();
    two.run().unwrap();
    assert_eq!(one.curves_csv(), two.curves_csv());
    assert!(one.nets.bit_eq(&two.nets));
}

#[test]
fn methods_set_up_embeddings() {
    let t = Trainer::new(robots(), tiny_config(Method::NoZ)).unwrap();
    assert_eq!(t.z_values(), vec![0.0, 0.0]);
    let t = Trainer::new(robots(), tiny_config(Method::FixedZ)).unwrap();
    assert_eq!(t.z_values(), vec![-1.0, 1.0]);
    let t = Trainer::new(robots(), tiny_config(Method::InformedZ)).unwrap();
    assert!(t.slots.iter().all(|s| matches!(s.embedding, Embedding::Network { ref net, .. } if net.fixed_input.is_some())));
    let t = Trainer::new(robots(), tiny_config(Method::LearnedZ)).unwrap();
    assert!(t.z_values().iter().all(|z| z.abs() < 1.0));
}

#[test]
fn mismatched_robots_are_rejected() {
    let mixed = vec![
        RobotSpec::cartpole("cp1").unwrap(),
        RobotSpec::nav("a1", Default::default()).unwrap(),
    ];
    assert!(Trainer::new(mixed, tiny_config(Method::LearnedZ)).is_err());
    assert!(Trainer::new(Vec::new(), tiny_config(Method::LearnedZ)).is_err());
}
