//! Command-line front end shared by the `dappo` binary and tests.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use super::commands::{
    cmd_collect, cmd_deploy_demo, cmd_evaluate, cmd_train_dappo, cmd_train_diagnose, cmd_train_expert,
    cmd_train_unaware, Context,
};
use super::config::{ExperimentConfig, RobotKind};
use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RobotArg {
    Quad,
    Hex,
}

impl From<RobotArg> for RobotKind {
    fn from(r: RobotArg) -> Self {
        match r {
            RobotArg::Quad => RobotKind::Quad,
            RobotArg::Hex => RobotKind::Hex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-length training budgets.
    Full,
    /// Short episodes and budgets for a single CPU.
    Desk,
}

#[derive(Debug, Parser)]
#[command(name = "dappo", version, about = "Damage diagnosis and damage-aware locomotion experiments")]
pub struct Cli {
    /// JSON experiment config; defaults come from --robot and --preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the config's seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub robot: Option<RobotArg>,
    #[arg(long, global = true, value_enum, default_value = "full")]
    pub preset: Preset,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train the healthy expert used by diagnosis probes.
    TrainExpert,
    /// Collect the paired-rollout diagnosis dataset.
    Collect,
    /// Train the damage classifier and the accuracy grid.
    TrainDiagnose,
    /// Train the damage-aware policy through the curriculum.
    TrainDappo,
    /// Train the baseline policy without damage input.
    TrainUnaware,
    /// Compare both policies on every damage class.
    Evaluate,
    /// Run the control loop over a scripted damage event.
    DeployDemo {
        /// Diagnose with the true label instead of the classifier.
        #[arg(long)]
        oracle: bool,
    },
    /// Print the resolved configuration as JSON.
    ShowConfig,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                if let Some(r) = self.robot {
                    if RobotKind::from(r) != c.robot {
                        return Err(config_err(format!("--robot {r:?} contradicts config file robot {:?}", c.robot)));
                    }
                }
                c
            }
            None => {
                let robot = self.robot.map_or(RobotKind::Quad, RobotKind::from);
                match self.preset {
                    Preset::Full => ExperimentConfig::for_robot(robot),
                    Preset::Desk => ExperimentConfig::desk(robot),
                }
            }
        };
        if let Some(seed) = self.seed {
            config.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Command::DeployDemo { oracle: true } = self.command {
            config.deploy.oracle = true;
        }
        Ok(config)
    }
}

/// Executes the parsed command and returns a short human-readable summary.
pub fn run(cli: &Cli) -> Result<String> {
    let config = cli.resolve_config()?;
    if let Command::ShowConfig = cli.command {
        return Ok(serde_json::to_string_pretty(&config)?);
    }
    let ctx = Context::new(config)?;
    let listing = |paths: Vec<PathBuf>| {
        paths.iter().map(|p| format!("wrote {}", p.display())).collect::<Vec<_>>().join("\n")
    };
    Ok(match &cli.command {
        Command::TrainExpert => listing(cmd_train_expert(&ctx)?),
        Command::Collect => listing(cmd_collect(&ctx)?),
        Command::TrainDiagnose => listing(cmd_train_diagnose(&ctx)?),
        Command::TrainDappo => listing(cmd_train_dappo(&ctx)?),
        Command::TrainUnaware => listing(cmd_train_unaware(&ctx)?),
        Command::Evaluate => {
            let (report, paths) = cmd_evaluate(&ctx)?;
            let improvement = report.improvement_pct.map_or("n/a".to_string(), |p| format!("{p:.1}%"));
            format!(
                "{}\nmean forward reward: damage-aware {:.3}, unaware {:.3} (improvement {improvement})\nwins {} ties {} losses {} of {} classes",
                listing(paths),
                report.mean_dappo,
                report.mean_unaware,
                report.wins,
                report.ties,
                report.losses,
                report.classes.len()
            )
        }
        Command::DeployDemo { .. } => {
            let (summaries, paths) = cmd_deploy_demo(&ctx)?;
            let lines: Vec<String> = summaries
                .iter()
                .map(|s| {
                    format!(
                        "seed {}: damage {} at episode {}, {} probe(s), diagnosed {}",
                        s.seed, s.true_class, s.damage_episode, s.probes, s.final_class
                    )
                })
                .collect();
            format!("{}\n{}", listing(paths), lines.join("\n"))
        }
        Command::ShowConfig => unreachable!("handled above"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dappo").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_override_defaults() {
        let cli = parse(&["collect", "--seed", "5", "--out", "/tmp/x", "--robot", "hex", "--preset", "desk"]);
        let c = cli.resolve_config().unwrap();
        assert_eq!(c.seeds, vec![5]);
        assert_eq!(c.robot, RobotKind::Hex);
        assert_eq!(c.spec.n_legs, 6);
        assert_eq!(c.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.spec.max_steps, 200);
    }

    #[test]
    fn every_subcommand_parses() {
        for sub in ["train-expert", "collect", "train-diagnose", "train-dappo", "train-unaware", "evaluate", "deploy-demo"] {
            parse(&[sub]);
        }
        assert!(matches!(parse(&["deploy-demo", "--oracle"]).command, Command::DeployDemo { oracle: true }));
    }

    #[test]
    fn missing_upstream_names_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        for (sub, needs) in [
            ("collect", "train-expert"),
            ("train-diagnose", "collect"),
            ("evaluate", "train-dappo"),
            ("deploy-demo", "train-dappo"),
        ] {
            match run(&parse(&[sub, "--out", out, "--preset", "desk"])) {
                Err(Error::MissingArtifact { subcommand, .. }) => assert_eq!(subcommand, needs, "{sub}"),
                other => panic!("{sub}: expected missing artifact, got {other:?}"),
            }
        }
    }
}
