//! Trains a damage-aware policy and an unaware baseline with the same seed
//! and curriculum, then compares mean forward reward per damage class.
//!
//! `cargo run --release --example damage_aware_ppo -- [iterations per stage]`

use dappo::harness::{evaluate_per_class, EvaluationReport};
use dappo::ppo::{train, Curriculum, GaeConfig, ObservationMode, PpoConfig, TrainSetup};
use dappo::sim::{RewardConfig, RobotSpec};

fn main() -> dappo::Result<()> {
    let per_stage: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let mut spec = RobotSpec::quadruped();
    spec.max_steps = 200;
    let reward = RewardConfig::for_robot(&spec);
    let mut ppo = PpoConfig::for_robot(&spec);
    ppo.epochs = 4;
    let curriculum = Curriculum::staged([per_stage, per_stage, per_stage, 2 * per_stage]);

    let mut runs = Vec::new();
    for mode in [ObservationMode::DamageAware, ObservationMode::Unaware] {
        let setup = TrainSetup { spec: &spec, reward, curriculum: &curriculum, mode, ppo: &ppo, gae: GaeConfig::default(), seed: 0 };
        let trained = train(&setup)?;
        let last = trained.metrics.last().expect("at least one iteration");
        println!("{mode:?}: final training forward reward {:.3}", last.mean_forward_reward);
        runs.push(vec![evaluate_per_class(&trained.policy, &spec, reward, mode, 5, 0, false)?]);
    }
    let report = EvaluationReport::from_runs(&spec.damage_space(), "example", &[0], 5, &runs[0], &runs[1], None)?;
    for c in &report.classes {
        println!("{:<22} aware {:>7.3}  unaware {:>7.3}", c.label, c.dappo, c.unaware);
    }
    println!(
        "mean aware {:.3} unaware {:.3}, wins {}/{}",
        report.mean_dappo,
        report.mean_unaware,
        report.wins,
        report.classes.len()
    );
    Ok(())
}
