use furrow_core::env::{EnvConfig, OBS_DIM};
use furrow_core::learner::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{gae_oracle, random_buffer, td_oracle, toy_update_buffer};

#[test]
fn gae_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let mut b = random_buffer(&mut rng, 10);
        compute_gae(&mut b, 0.99, 0.95);
        let oracle = gae_oracle(&b, 0.99, 0.95);
        for (a, o) in b.advantages.iter().zip(&oracle) {
            assert!((a - o).abs() <= 1e-10, "{a} vs {o}");
        }
        for t in 0..b.len() {
            assert_eq!(b.returns[t], b.advantages[t] + b.values[t]);
        }
    }
}

#[test]
fn gae_lambda_zero_is_td_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut b = random_buffer(&mut rng, 40);
    compute_gae(&mut b, 0.9, 0.0);
    for t in 0..b.len() {
        assert_eq!(b.advantages[t], b.td_error(t, 0.9));
        assert!((b.advantages[t] - td_oracle(&b, t, 0.9)).abs() <= 1e-12);
    }
}

#[test]
fn gae_unit_discount_gives_monte_carlo_minus_value() {
    let mut b = RolloutBuffer::default();
    let rewards = [1.0, -2.0, 0.5, 3.0];
    let values = [0.3, -1.0, 2.0, 0.7];
    for t in 0..4 {
        b.push(vec![0.0], 0.0, 0.0, values[t], rewards[t], t == 3, false, 0.0);
    }
    compute_gae(&mut b, 1.0, 1.0);
    for t in 0..4 {
        let mc: f64 = rewards[t..].iter().sum();
        assert!((b.advantages[t] - (mc - values[t])).abs() < 1e-12);
    }
}

#[test]
fn advantage_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut v: Vec<f64> = (0..2048).map(|_| rng.random_range(-30.0..80.0)).collect();
    normalize(&mut v);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-8);
    assert!((std - 1.0).abs() < 1e-6);
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    // a tiny policy so every parameter is checked
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pol = Policy::new(2, &[2], &mut rng);
    let mut b = toy_update_buffer(&pol, &mut rng, 16, 2);
    normalize(&mut b.advantages);
    // move away from ratio 1 so some samples sit on the clipped branch
    let mut p = pol.params();
    for v in p.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    pol.set_params(&p);
    let cfg = TrainConfig::default();
    let idx: Vec<usize> = (0..b.len()).collect();
    let loss = |pol: &Policy| {
        let m = minibatch_loss(pol, &b, &idx, &cfg);
        m.policy_loss + cfg.vf_coef * m.value_loss
    };
    let g = minibatch_loss(&pol, &b, &idx, &cfg).grad;
    let p0 = pol.params();
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let h = 1e-6;
        let mut q = p0.clone();
        q[i] += h;
        pol.set_params(&q);
        let up = loss(&pol);
        q[i] -= 2.0 * h;
        pol.set_params(&q);
        let down = loss(&pol);
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn fresh_update_starts_unclipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pol = Policy::new(OBS_DIM, &[16, 16], &mut rng);
    let mut b = toy_update_buffer(&pol, &mut rng, 256, OBS_DIM);
    let cfg = TrainConfig {
        n_steps: 256,
        ..TrainConfig::default()
    };
    let mut adam = Adam::new(pol.n_params(), cfg.learning_rate);
    let m = ppo_update(&mut pol, &mut adam, &mut b, &cfg, &mut rng).unwrap();
    assert_eq!(m.first_clip_fraction, 0.0);
    assert!((0.0..=1.0).contains(&m.clip_fraction));
    assert!(m.policy_loss.is_finite() && m.value_loss.is_finite());
}

#[test]
fn ratio_one_gradient_equals_policy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pol = Policy::new(3, &[4], &mut rng);
    let mut b = toy_update_buffer(&pol, &mut rng, 32, 3);
    normalize(&mut b.advantages);
    let cfg = TrainConfig {
        vf_coef: 0.0,
        ..TrainConfig::default()
    };
    let idx: Vec<usize> = (0..b.len()).collect();
    let g = minibatch_loss(&pol, &b, &idx, &cfg).grad;
    // -mean(A * grad log pi), by finite differences of the log-likelihood
    let p0 = pol.params();
    let mut q = pol.clone();
    let f = |p: &Policy| -> f64 { -(0..b.len()).map(|i| b.advantages[i] * p.log_prob(&b.obs[i], b.raw_actions[i])).sum::<f64>() / b.len() as f64 };
    for i in 0..p0.len() {
        let h = 1e-6;
        let mut v = p0.clone();
        v[i] += h;
        q.set_params(&v);
        let up = f(&q);
        v[i] -= 2.0 * h;
        q.set_params(&v);
        let fd = (up - f(&q)) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1e-3), "param {i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn zero_advantages_leave_the_actor_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut pol = Policy::new(3, &[8], &mut rng);
    let mut b = toy_update_buffer(&pol, &mut rng, 64, 3);
    b.advantages.iter_mut().for_each(|a| *a = 0.0);
    let before = pol.clone();
    let cfg = TrainConfig {
        n_steps: 64,
        n_epochs: 2,
        ..TrainConfig::default()
    };
    let mut adam = Adam::new(pol.n_params(), cfg.learning_rate);
    let m = ppo_update(&mut pol, &mut adam, &mut b, &cfg, &mut rng).unwrap();
    assert_eq!(m.policy_loss, 0.0);
    assert_eq!(pol.actor, before.actor);
    assert_eq!(pol.log_std, before.log_std);
    assert_ne!(pol.critic, before.critic);
}

#[test]
fn grad_norm_clip() {
    let mut g = vec![3.0, 4.0];
    assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
    let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
    assert!((n - 0.5).abs() < 1e-6);
    let mut small = vec![0.1, 0.1];
    clip_grad_norm(&mut small, 0.5);
    assert_eq!(small, vec![0.1, 0.1]);
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    let bad = TrainConfig {
        batch_size: 100,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    assert!(TrainConfig {
        gamma: 0.0,
        ..TrainConfig::default()
    }
    .validate()
    .is_err());
}

#[test]
fn rollouts_are_reproducible_and_fixed_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pol = Policy::new(OBS_DIM, &[8], &mut rng);
    let mut c1 = Collector::new(EnvConfig::reduced(), 42);
    let mut c2 = Collector::new(EnvConfig::reduced(), 42);
    let (b1, e1) = c1.collect(&pol, 300).unwrap();
    let (b2, e2) = c2.collect(&pol, 300).unwrap();
    assert_eq!(b1.len(), 300);
    assert_eq!(b1, b2);
    assert_eq!(e1, e2);
    // completed-episode rewards equal the buffer's reward sums per episode
    let mut acc = 0.0;
    let mut k = 0;
    for t in 0..b1.len() {
        acc += b1.rewards[t];
        if b1.terminated[t] || b1.truncated[t] {
            assert!((acc - e1[k].reward).abs() < 1e-9);
            k += 1;
            acc = 0.0;
        }
    }
    assert_eq!(k, e1.len());
}

#[test]
fn checkpoint_round_trip_reproduces_rollouts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        n_steps: 128,
        batch_size: 32,
        n_epochs: 2,
        total_steps: 256,
        hidden: vec![8, 8],
        seed: 3,
        checkpoint_every: 1,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &EnvConfig::reduced(), Some(dir.path()), |_| {}).unwrap();
    assert_eq!(out.metrics.len(), 2);
    assert_eq!(out.checkpoints.len(), 3);
    assert!(dir.path().join("metrics.csv").exists());
    let ck = Checkpoint::load(out.checkpoints.last().unwrap()).unwrap();
    assert_eq!(ck.policy, out.policy);
    let (b1, _) = Collector::new(EnvConfig::reduced(), 9).collect(&out.policy, 100).unwrap();
    let (b2, _) = Collector::new(EnvConfig::reduced(), 9).collect(&ck.policy, 100).unwrap();
    assert_eq!(b1, b2);
}

#[test]
fn moving_average_window() {
    assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
}
