//! Experiment orchestration: configuration, artifact layout, pipeline
//! subcommands and reports.
//!
//! Every file written here carries the config hash and seed: CSVs start with
//! a `# config_hash=… seed=…` line, JSON documents have `config_hash` and
//! `seed` fields, checkpoints use the hash as their tag.

pub mod cli;
mod commands;
mod config;
mod evaluate;
pub mod svg;

use std::path::{Path, PathBuf};

pub use commands::{
    cmd_collect, cmd_deploy_demo, cmd_evaluate, cmd_train_dappo, cmd_train_diagnose, cmd_train_expert,
    cmd_train_unaware, Context, DeploySummary, GridCell,
};
pub use config::{
    CollectSettings, DeploySettings, EvalSettings, ExperimentConfig, ExpertConfig, GridSettings, RobotKind,
};
pub use evaluate::{eval_episode_seed, evaluate_per_class, ClassResult, EvaluationReport};

use crate::error::{Error, Result};

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn expert(&self, seed: u64) -> PathBuf {
        self.root.join("expert").join(format!("policy_seed{seed}.json"))
    }

    pub fn expert_metrics(&self, seed: u64) -> PathBuf {
        self.root.join("expert").join(format!("metrics_seed{seed}.csv"))
    }

    pub fn dataset(&self, seed: u64) -> PathBuf {
        self.root.join("data").join(format!("dataset_seed{seed}.dpds"))
    }

    pub fn classifier(&self, seed: u64) -> PathBuf {
        self.root.join("classifier").join(format!("model_seed{seed}.json"))
    }

    pub fn classifier_report(&self, seed: u64) -> PathBuf {
        self.root.join("classifier").join(format!("report_seed{seed}.json"))
    }

    pub fn confusion(&self, seed: u64) -> PathBuf {
        self.root.join("classifier").join(format!("confusion_seed{seed}.csv"))
    }

    pub fn grid(&self) -> PathBuf {
        self.root.join("classifier").join("accuracy_grid.csv")
    }

    /// `role` is `dappo` or `unaware`.
    pub fn policy(&self, role: &str, seed: u64) -> PathBuf {
        self.root.join(role).join(format!("policy_seed{seed}.json"))
    }

    pub fn policy_metrics(&self, role: &str, seed: u64) -> PathBuf {
        self.root.join(role).join(format!("metrics_seed{seed}.csv"))
    }

    pub fn evaluation(&self, file: &str) -> PathBuf {
        self.root.join("evaluation").join(file)
    }

    pub fn deploy_events(&self, seed: u64) -> PathBuf {
        self.root.join("deploy").join(format!("events_seed{seed}.jsonl"))
    }

    pub fn deploy_summary(&self, seed: u64) -> PathBuf {
        self.root.join("deploy").join(format!("summary_seed{seed}.json"))
    }
}

/// Errors unless `path` exists, naming the subcommand that produces it.
pub fn require(path: &Path, subcommand: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { path: path.to_path_buf(), subcommand })
    }
}

/// First line of every CSV output.
pub fn provenance_line(config_hash: &str, seed: &str) -> String {
    format!("# config_hash={config_hash} seed={seed}")
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(path.to_path_buf())
}

pub(crate) fn write_csv(path: &Path, provenance: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    let mut text = String::new();
    for line in [provenance, header].into_iter().chain(rows.iter().map(String::as_str)) {
        text.push_str(line);
        text.push('\n');
    }
    write_file(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_artifact_names_subcommand() {
        let err = require(Path::new("/nonexistent/x.json"), "train-expert").unwrap_err();
        assert!(err.to_string().contains("`train-expert`"));
    }

    #[test]
    fn csv_starts_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(&dir.path().join("a/b.csv"), &provenance_line("abc", "3"), "x,y", &["1,2".into()]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "# config_hash=abc seed=3\nx,y\n1,2\n");
    }
}
