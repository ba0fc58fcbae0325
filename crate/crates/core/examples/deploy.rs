//! Control loop with an oracle diagnoser: a damage event halfway through a
//! run collapses forward reward, one probe runs, and the policy continues
//! with the diagnosed encoding.
//!
//! `cargo run --release --example deploy -- [damage class]`

use dappo::control::{
    calibrate_baseline, run_deployment, AgentState, DamageEvent, DeployScenario, OracleDiagnoser, ProbeSetup,
};
use dappo::ppo::{train, Curriculum, GaeConfig, ObservationMode, PpoConfig, TrainSetup};
use dappo::sim::{RewardConfig, RobotSpec};

fn main() -> dappo::Result<()> {
    let class: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(19);
    let mut spec = RobotSpec::quadruped();
    spec.max_steps = 200;
    let reward = RewardConfig::for_robot(&spec);
    let mut ppo = PpoConfig::for_robot(&spec);
    ppo.epochs = 4;
    let gae = GaeConfig::default();
    let healthy = Curriculum::healthy_only(30);
    let staged = Curriculum::staged([15, 15, 15, 30]);
    let expert = train(&TrainSetup { spec: &spec, reward, curriculum: &healthy, mode: ObservationMode::Unaware, ppo: &ppo, gae, seed: 1 })?.policy;
    let policy = train(&TrainSetup { spec: &spec, reward, curriculum: &staged, mode: ObservationMode::DamageAware, ppo: &ppo, gae, seed: 2 })?.policy;

    let baseline = calibrate_baseline(&policy, &spec, reward, 10, 3)?;
    let agent = AgentState::new(baseline, 0.5, 3)?;
    let schedule = vec![DamageEvent { episode: 10, class_id: class }];
    let diagnoser = OracleDiagnoser { schedule: schedule.clone(), classes: spec.damage_space().class_count(), timesteps: 30 };
    let scenario = DeployScenario { episodes: 30, schedule, seed: 4 };
    let setup = ProbeSetup { spec: &spec, reward, expert: &expert };
    let log = run_deployment(&policy, &diagnoser, &setup, agent, &scenario)?;

    println!("healthy baseline forward reward {baseline:.3}, threshold {:.3}", log.final_state.threshold());
    for e in &log.events {
        let note = match (e.triggered, e.diagnosed_class) {
            (_, Some(c)) => format!("probe -> class {c}"),
            (true, None) => "trigger".to_string(),
            _ => String::new(),
        };
        println!("episode {:>3}  forward {:>7.3}  {note}", e.episode, e.forward_reward);
    }
    println!("{} probe(s) executed", log.probes);
    Ok(())
}
