//! Trains a healthy-robot PPO expert and prints the learning curve.
//!
//! `cargo run --release --example train_expert -- [iterations] [episode_steps] [epochs]`

use dappo::ppo::{train, Curriculum, GaeConfig, ObservationMode, PpoConfig, TrainSetup};
use dappo::sim::{RewardConfig, RobotSpec};

fn main() -> dappo::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let episode_steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let mut spec = RobotSpec::quadruped();
    spec.max_steps = episode_steps;
    let mut ppo = PpoConfig::for_robot(&spec);
    if let Some(epochs) = args.next().and_then(|a| a.parse().ok()) {
        ppo.epochs = epochs;
    }
    let curriculum = Curriculum::healthy_only(iterations);
    let setup = TrainSetup {
        spec: &spec,
        reward: RewardConfig::for_robot(&spec),
        curriculum: &curriculum,
        mode: ObservationMode::Unaware,
        ppo: &ppo,
        gae: GaeConfig::default(),
        seed: 0,
    };
    let start = std::time::Instant::now();
    let trained = train(&setup)?;
    for m in &trained.metrics {
        println!(
            "iter {:>3}  reward {:>9.3}  forward {:>7.3}  kl {:.4}  clip {:.3}  beta {:.3}  lr {:.2e}",
            m.iteration, m.mean_episode_reward, m.mean_forward_reward, m.mean_kl, m.clip_fraction, m.beta, m.lr
        );
    }
    println!("{iterations} iterations in {:.1?}", start.elapsed());
    Ok(())
}
