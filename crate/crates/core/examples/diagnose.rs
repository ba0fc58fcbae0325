//! Single-trial diagnosis on a three-class subset: trains a healthy expert,
//! collects paired probes, fits the recurrent classifier and prints the
//! validation confusion matrix.
//!
//! `cargo run --release --example diagnose -- [A|B] [timesteps] [rollouts]`

use dappo::diagnosis::{
    collect_samples, confusion_matrix, stratified_split, train_classifier, ClassifierTraining, CollectionConfig,
    DiagnosisSample, Method,
};
use dappo::ppo::{train, Curriculum, GaeConfig, ObservationMode, PpoConfig, TrainSetup};
use dappo::sim::{RewardConfig, RobotSpec};

fn main() -> dappo::Result<()> {
    let mut args = std::env::args().skip(1);
    let method = match args.next().as_deref() {
        Some("A") => Method::A,
        _ => Method::B,
    };
    let timesteps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(30);
    let rollouts: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let mut spec = RobotSpec::quadruped();
    spec.max_steps = 200;
    let reward = RewardConfig::for_robot(&spec);
    let mut ppo = PpoConfig::for_robot(&spec);
    ppo.epochs = 4;
    let curriculum = Curriculum::healthy_only(40);
    println!("training expert ({} iterations)", curriculum.total_iterations());
    let expert = train(&TrainSetup {
        spec: &spec,
        reward,
        curriculum: &curriculum,
        mode: ObservationMode::Unaware,
        ppo: &ppo,
        gae: GaeConfig::default(),
        seed: 0,
    })?
    .policy;

    let space = spec.damage_space();
    let classes = vec![0, 1, 2];
    let config = CollectionConfig { n_rollouts: rollouts, n_timesteps: timesteps, seed_base: 1000, method, classes: Some(classes.clone()) };
    let samples = collect_samples(&config, &spec, reward, &expert)?;
    println!("collected {} samples (method {}, T={timesteps})", samples.len(), method.label());

    let training = ClassifierTraining::default();
    let (model, report) = train_classifier(&samples, space.class_count(), &training, 0)?;
    println!("validation accuracy {:.3} (best epoch {})", report.val_accuracy, report.best_epoch);
    let (_, val) = stratified_split(&samples, training.split, 0)?;
    let val: Vec<&DiagnosisSample> = val.iter().map(|&i| &samples[i]).collect();
    let confusion = confusion_matrix(&model, &val)?;
    for &t in &classes {
        let row: Vec<String> = classes.iter().map(|&p| format!("{:>4}", confusion[t][p])).collect();
        println!("{:<12} {}", space.class_from_id(t)?.to_string(), row.join(""));
    }
    Ok(())
}
