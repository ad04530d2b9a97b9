mod common;

use common::mlp_forward_oracle;
use legnav::diffnet::{Activation, Tape};
use legnav::sac::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS: usize = 3;

fn transition<R: Rng>(rng: &mut R, act_dim: usize) -> Transition {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let obs = v(OBS);
    let act = v(act_dim);
    let next_obs = v(OBS);
    let r = v(1)[0];
    let terminal = r > 0.5;
    Transition { obs, act, reward: r, next_obs, done: terminal, terminal, robot_id: 0, z: 0.0 }
}

fn small_nets(width: usize, seed: u64) -> SacNets {
    let config = SacConfig {
        hidden: width,
        encoder_hidden: width,
        latent_dim: width,
        batch_size: 2,
        reward_scale: 3.0,
        init_alpha: 0.2,
        ..Default::default()
    };
    SacNets::new(OBS, 1, config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn relu_mlp(widths: &[usize], out: Activation, p: &legnav::diffnet::ParamCollection, prefix: &str, x: &[f64]) -> Vec<f64> {
    mlp_forward_oracle(widths, Activation::Relu, out, p, prefix, x)
}

/// Soft target and the per-head targets, from explicit loops.
fn target_oracle(nets: &SacNets, t: &Transition, z: f64, eps: f64) -> (f64, f64, f64) {
    let c = &nets.config;
    let (h, eh, l) = (c.hidden, c.encoder_hidden, c.latent_dim);
    let mut feat = relu_mlp(&[OBS, eh, l], Activation::Tanh, &nets.critic, "enc", &t.next_obs);
    feat.push(z);
    let out = relu_mlp(&[l + 1, h, h, 2], Activation::Identity, &nets.actor, "pi", &feat);
    let ls = -10.0 + 6.0 * (out[1].tanh() + 1.0);
    let u = out[0] + ls.exp() * eps;
    let a = u.tanh();
    let logp = -0.5 * eps * eps - ls - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - a * a).ln();
    let mut qin = relu_mlp(&[OBS, eh, l], Activation::Tanh, &nets.critic_target, "enc", &t.next_obs);
    qin.push(z);
    qin.push(a);
    let q1 = relu_mlp(&[l + 2, h, h, 1], Activation::Identity, &nets.critic_target, "q1", &qin)[0];
    let q2 = relu_mlp(&[l + 2, h, h, 1], Activation::Identity, &nets.critic_target, "q2", &qin)[0];
    let alpha = nets.alpha();
    let nt = if t.terminal { 0.0 } else { 1.0 };
    let y = |q: f64| c.reward_scale * t.reward + c.discount * nt * (q - alpha * logp);
    (y(q1.min(q2)), y(q1), y(q2))
}

#[test]
fn critic_loss_matches_hand_oracle() {
    for (width, seed) in [(1, 0), (1, 1), (1, 2), (4, 3)] {
        let nets = small_nets(width, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let items: Vec<Transition> = (0..2).map(|_| transition(&mut rng, 1)).collect();
        let batch = Batch::from_transitions(&items).unwrap();
        let zs = [0.3, -0.7];
        let z = Array2::from_shape_vec((2, 1), zs.to_vec()).unwrap();
        let noise = Array2::from_shape_vec((2, 1), vec![0.4, -1.1]).unwrap();
        let target = critic_target(&nets, &batch, &z, noise.clone()).unwrap();

        let (h, l) = (width, width);
        let mut td = 0.0;
        let mut recon = 0.0;
        for (i, t) in items.iter().enumerate() {
            let (y, y1, y2) = target_oracle(&nets, t, zs[i], noise[[i, 0]]);
            assert!((target[[i, 0]] - y).abs() < 1e-12, "target {i}: {} vs {y}", target[[i, 0]]);
            assert!(y <= y1 && y <= y2);
            let lat = relu_mlp(&[OBS, width, l], Activation::Tanh, &nets.critic, "enc", &t.obs);
            let rec = relu_mlp(&[l, width, OBS], Activation::Identity, &nets.decoder, "dec", &lat);
            recon += rec.iter().zip(&t.obs).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2 * OBS) as f64;
            let mut qin = lat.clone();
            qin.push(zs[i]);
            qin.push(t.act[0]);
            for head in ["q1", "q2"] {
                let q = relu_mlp(&[l + 2, h, h, 1], Activation::Identity, &nets.critic, head, &qin)[0];
                td += (q - y).powi(2) / 2.0;
            }
        }
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let loss = critic_loss(&nets, &mut tape, &batch, zv, &target).unwrap();
        assert!((tape.scalar(loss.td) - td).abs() < 1e-12 * (1.0 + td));
        assert!((tape.scalar(loss.recon) - recon).abs() < 1e-12 * (1.0 + recon));
        let total = td + nets.config.ae_weight * recon;
        assert!((tape.scalar(loss.total) - total).abs() < 1e-12 * (1.0 + total));
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = ReplayBuffer::new(100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        buf.push(transition(&mut rng, 1)).unwrap();
    }
    let draws = 100_000;
    let mut counts = [0usize; 100];
    for i in buf.sample_indices(draws, &mut rng) {
        counts[i] += 1;
    }
    let expected = draws as f64 / 100.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 0.99 quantile of chi-square with 99 degrees of freedom
    assert!(chi2 < 134.642, "chi2 = {chi2}");
}

#[test]
fn replay_overwrites_oldest() {
    let mut buf = ReplayBuffer::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let items: Vec<Transition> = (0..5).map(|_| transition(&mut rng, 1)).collect();
    for t in &items {
        buf.push(t.clone()).unwrap();
    }
    assert_eq!(buf.len(), 3);
    assert_eq!(buf.inserted(), 5);
    assert_eq!(buf.items(), &[items[3].clone(), items[4].clone(), items[2].clone()]);
    let mut bad = items[0].clone();
    bad.reward = f64::NAN;
    assert!(buf.push(bad).is_err());
}

#[test]
fn bandit_actor_loss_decreases() {
    let mut nets = small_nets(16, 5);
    let mut opt = SacOptim::new(&nets);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let items: Vec<Transition> = (0..32).map(|_| transition(&mut rng, 1)).collect();
    let batch = Batch::from_transitions(&items).unwrap();
    let z = z_column(32, 0.0);
    let noise = standard_normal(32, 1, &mut rng);
    let mut prev = f64::INFINITY;
    for _ in 0..100 {
        let mut tape = Tape::new();
        let l = actor_loss(&nets, &mut tape, &batch, &z, noise.clone()).unwrap();
        let v = tape.scalar(l.loss);
        assert!(v < prev, "{v} after {prev}");
        prev = v;
        let g = tape.backward(l.loss).unwrap().wrt(&nets.actor);
        opt.actor.step(&mut nets.actor, &g).unwrap();
    }
}

#[test]
fn actor_loss_leaves_encoder_and_critic_alone() {
    let nets = small_nets(8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let items: Vec<Transition> = (0..8).map(|_| transition(&mut rng, 1)).collect();
    let batch = Batch::from_transitions(&items).unwrap();
    let mut tape = Tape::new();
    let l = actor_loss(&nets, &mut tape, &batch, &z_column(8, 0.5), standard_normal(8, 1, &mut rng)).unwrap();
    let grads = tape.backward(l.loss).unwrap();
    assert!(!grads.touches(&nets.critic));
    assert!(grads.wrt(&nets.critic).flatten().iter().all(|&g| g == 0.0));
    assert!(grads.touches(&nets.actor));
}

#[test]
fn polyak_decays_geometrically() {
    let nets = small_nets(4, 11);
    let source = nets.critic.clone();
    let mut target = nets.critic.clone();
    for i in 0..target.len() {
        let shifted = target.value(i).mapv(|v| v + 1.0);
        target.set(i, shifted).unwrap();
    }
    let p = 0.05;
    for _ in 0..40 {
        target.polyak_from(&source, p).unwrap();
    }
    let want = (1.0 - p).powi(40);
    for (t, s) in target.flatten().iter().zip(source.flatten()) {
        assert!((t - s - want).abs() < 1e-12);
    }
}

#[test]
fn update_diagnostics_stay_finite() {
    let mut nets = small_nets(16, 12);
    let mut opt = SacOptim::new(&nets);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut buf = ReplayBuffer::new(256).unwrap();
    for _ in 0..256 {
        buf.push(transition(&mut rng, 1)).unwrap();
    }
    let before = nets.critic_target.clone();
    for _ in 0..50 {
        let batch = buf.sample(16, &mut rng).unwrap();
        let d = sac_update(&mut nets, &mut opt, &batch, &z_column(16, -0.2), &mut rng).unwrap();
        assert!(d.is_finite() && d.accepted);
    }
    assert!(nets.is_finite());
    assert!(!nets.critic_target.bit_eq(&before));
}

#[test]
fn shape_errors_are_reported() {
    let nets = small_nets(4, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let items: Vec<Transition> = (0..4).map(|_| transition(&mut rng, 1)).collect();
    let batch = Batch::from_transitions(&items).unwrap();
    assert!(critic_target(&nets, &batch, &z_column(3, 0.0), standard_normal(4, 1, &mut rng)).is_err());
}
