use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saw_core::config::{ExperimentConfig, Preset};
use saw_core::policy::{ActorCritic, Checkpoint};
use saw_core::train::{gradient_check, train_loop, Trainer};

#[test]
fn ppo_mirror_gradient_matches_finite_differences() {
    let start = Instant::now();
    let r = gradient_check(17, &[8, 8], 6, 1e-5).unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(None, Some(Preset::BalanceSmoke)).unwrap();
    cfg.ppo.batch_steps = 800;
    cfg.ppo.max_iterations = 2;
    cfg.ppo.eval_every = 2;
    cfg.ppo.eval_episodes = 2;
    cfg.ppo.checkpoint_every = 1;
    cfg.ppo.time_budget_s = None;
    cfg.policy.hidden = vec![8, 8];
    cfg.validate().unwrap();
    cfg
}

fn train(cfg: &ExperimentConfig, dir: &std::path::Path) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ac = ActorCritic::new(&cfg.model, &cfg.policy, &mut rng).unwrap();
    let mut t = Trainer::new(
        cfg.build_env().unwrap(),
        ac,
        cfg.ppo.clone(),
        cfg.seed,
        true,
    )
    .unwrap();
    let out = train_loop(&mut t, Some(dir), &cfg.hash()).unwrap();
    assert_eq!(out.metrics.len(), 2);
    std::fs::read_to_string(dir.join("metrics.csv")).unwrap()
}

#[test]
fn serial_training_is_reproducible_and_checkpoints_reload() {
    let cfg = tiny_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(train(&cfg, a.path()), train(&cfg, b.path()));

    let pa = std::fs::read(a.path().join("policy.json")).unwrap();
    let pb = std::fs::read(b.path().join("policy.json")).unwrap();
    assert_eq!(pa, pb);

    let ck = Checkpoint::load(&a.path().join("policy.json")).unwrap();
    assert_eq!(ck.config_hash, cfg.hash());
    let net = ActorCritic::from_checkpoint(&ck).unwrap();
    let again = net.to_checkpoint(&ck.config_hash, ck.iteration);
    assert_eq!(again.hash(), ck.hash());
}
