use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::ExperimentConfig;
use super::evaluate::{evaluate_per_class, EvaluationReport};
use super::svg::{grouped_bar_chart, line_chart, Series};
use super::{provenance_line, require, write_csv, write_file, Layout};
use crate::control::{
    calibrate_baseline, run_deployment, AgentState, ClassifierDiagnoser, DamageEvent, DeployScenario, Diagnoser,
    OracleDiagnoser, ProbeSetup,
};
use crate::diagnosis::{
    collect_samples, confusion_matrix, stratified_split, train_classifier, write_confusion_csv, ClassifierModel,
    CollectionConfig, Dataset, DatasetHeader, DiagnosisSample, EpochRecord, Method,
};
use crate::error::{config_err, Result};
use crate::nn::Checkpoint;
use crate::ppo::{train, Curriculum, IterationMetrics, ObservationMode, PolicyNet, TrainSetup, Trained};
use crate::rng::derive_seed;

const STREAM_EXPERT: u64 = 1;
const STREAM_POLICY: u64 = 2;
const STREAM_COLLECT: u64 = 3;
const STREAM_CLASSIFIER: u64 = 4;
const STREAM_EVALUATE: u64 = 5;
const STREAM_BASELINE: u64 = 6;
const STREAM_DEPLOY: u64 = 7;

/// Validated configuration plus its hash.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub hash: String,
    pub layout: Layout,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        let layout = Layout::new(&config.out_dir);
        Ok(Self { config, hash, layout })
    }

    fn provenance(&self, seed: u64) -> String {
        provenance_line(&self.hash, &seed.to_string())
    }

    fn seeds_label(&self) -> String {
        self.config.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
    }

    fn write_config(&self) -> Result<PathBuf> {
        let mut config = self.config.clone();
        config.out_dir = PathBuf::new();
        let doc = json!({ "config_hash": self.hash, "seed": config.seeds, "config": config });
        write_file(&self.layout.config(), serde_json::to_string_pretty(&doc)? + "\n")
    }

    fn save_checkpoint(&self, mut ckpt: Checkpoint, metadata: serde_json::Value, path: &Path) -> Result<PathBuf> {
        ckpt.metadata = metadata;
        write_file(path, ckpt.to_json()?)
    }

    fn load_policy(&self, path: &Path, subcommand: &'static str) -> Result<PolicyNet> {
        require(path, subcommand)?;
        PolicyNet::from_checkpoint(&Checkpoint::load(path)?)
    }

    fn load_expert(&self, seed: u64) -> Result<PolicyNet> {
        self.load_policy(&self.layout.expert(seed), "train-expert")
    }

    fn collection(&self, seed: u64, timesteps: usize, rollouts: usize, method: Method) -> CollectionConfig {
        CollectionConfig {
            n_rollouts: rollouts,
            n_timesteps: timesteps,
            seed_base: derive_seed(seed, STREAM_COLLECT),
            method,
            classes: self.config.collect.classes.clone(),
        }
    }
}

fn metrics_rows(metrics: &[IterationMetrics]) -> Vec<String> {
    metrics.iter().map(IterationMetrics::csv_row).collect()
}

/// Healthy-only PPO expert per seed.
pub fn cmd_train_expert(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let mut written = vec![ctx.write_config()?];
    let curriculum = Curriculum::healthy_only(c.expert.iterations);
    for &seed in &c.seeds {
        let setup = TrainSetup {
            spec: &c.spec,
            reward: c.reward,
            curriculum: &curriculum,
            mode: ObservationMode::Unaware,
            ppo: &c.ppo,
            gae: c.gae,
            seed: derive_seed(seed, STREAM_EXPERT),
        };
        let trained = train(&setup)?;
        let meta = json!({ "seed": seed, "role": "expert" });
        written.push(ctx.save_checkpoint(trained.policy.to_checkpoint(&ctx.hash), meta, &ctx.layout.expert(seed))?);
        written.push(write_csv(
            &ctx.layout.expert_metrics(seed),
            &ctx.provenance(seed),
            IterationMetrics::CSV_HEADER,
            &metrics_rows(&trained.metrics),
        )?);
    }
    Ok(written)
}

/// Paired-rollout diagnosis dataset per seed.
pub fn cmd_collect(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let mut written = vec![ctx.write_config()?];
    let space = c.spec.damage_space();
    for &seed in &c.seeds {
        let expert = ctx.load_expert(seed)?;
        let cfg = ctx.collection(seed, c.collect.timesteps, c.collect.rollouts, c.collect.method);
        let samples = collect_samples(&cfg, &c.spec, c.reward, &expert)?;
        let dataset = Dataset {
            header: DatasetHeader {
                obs_dim: c.spec.observation_dim(),
                timesteps: cfg.n_timesteps,
                classes: space.class_count(),
                method: cfg.method,
                seed_base: cfg.seed_base,
                samples: samples.len(),
                config_hash: ctx.hash.clone(),
            },
            samples,
        };
        let path = ctx.layout.dataset(seed);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        dataset.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassifierReport {
    config_hash: String,
    seed: u64,
    method: Method,
    timesteps: usize,
    samples: usize,
    val_accuracy: f64,
    train_accuracy: f64,
    best_epoch: usize,
    history: Vec<EpochRecord>,
    confusion: Vec<Vec<usize>>,
}

/// One row of the accuracy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub timesteps: usize,
    pub rollouts: usize,
    pub method: Method,
    /// One validation accuracy per seed, in seed order.
    pub accuracies: Vec<f64>,
}

impl GridCell {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation; zero for a single seed.
    pub fn std(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.accuracies.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

fn validation_confusion(model: &ClassifierModel, samples: &[DiagnosisSample], split: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    let (_, val) = stratified_split(samples, split, seed)?;
    let val: Vec<&DiagnosisSample> = val.iter().map(|&i| &samples[i]).collect();
    confusion_matrix(model, &val)
}

/// Classifier per seed on the collected dataset, then the accuracy grid.
pub fn cmd_train_diagnose(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let mut written = vec![ctx.write_config()?];
    let classes = c.spec.damage_space().class_count();
    for &seed in &c.seeds {
        let path = ctx.layout.dataset(seed);
        require(&path, "collect")?;
        let dataset = Dataset::load(&path)?;
        if dataset.header.obs_dim != c.spec.observation_dim() {
            return Err(config_err(format!("dataset {} was collected for another robot", path.display())));
        }
        let train_seed = derive_seed(seed, STREAM_CLASSIFIER);
        let (model, report) = train_classifier(&dataset.samples, classes, &c.classifier, train_seed)?;
        let confusion = validation_confusion(&model, &dataset.samples, c.classifier.split, train_seed)?;
        let meta = json!({ "seed": seed, "method": dataset.header.method, "timesteps": dataset.header.timesteps });
        written.push(ctx.save_checkpoint(model.to_checkpoint(&ctx.hash), meta, &ctx.layout.classifier(seed))?);
        let mut csv = provenance_line(&ctx.hash, &seed.to_string()).into_bytes();
        csv.push(b'\n');
        write_confusion_csv(&confusion, &mut csv)?;
        written.push(write_file(&ctx.layout.confusion(seed), csv)?);
        let doc = ClassifierReport {
            config_hash: ctx.hash.clone(),
            seed,
            method: dataset.header.method,
            timesteps: dataset.header.timesteps,
            samples: dataset.samples.len(),
            val_accuracy: report.val_accuracy,
            train_accuracy: report.train_accuracy,
            best_epoch: report.best_epoch,
            history: report.history,
            confusion,
        };
        written.push(write_file(&ctx.layout.classifier_report(seed), serde_json::to_string_pretty(&doc)? + "\n")?);
    }
    if !(c.grid.timesteps.is_empty() || c.grid.rollouts.is_empty() || c.grid.methods.is_empty()) {
        let cells = accuracy_grid(ctx)?;
        let rows: Vec<String> = cells
            .iter()
            .map(|g| {
                let per_seed: Vec<String> = g.accuracies.iter().map(f64::to_string).collect();
                format!(
                    "{},{},{},{},{},{}",
                    g.timesteps,
                    g.rollouts,
                    g.method.label(),
                    g.mean(),
                    g.std(),
                    per_seed.join(";")
                )
            })
            .collect();
        written.push(write_csv(
            &ctx.layout.grid(),
            &provenance_line(&ctx.hash, &ctx.seeds_label()),
            "timesteps,rollouts,method,mean_val_accuracy,std_val_accuracy,per_seed",
            &rows,
        )?);
    }
    Ok(written)
}

/// Validation accuracy for every (T, rollouts, method, seed). Methods share
/// rollout seeds within a seed, so A and B see the same episodes.
fn accuracy_grid(ctx: &Context) -> Result<Vec<GridCell>> {
    let c = &ctx.config;
    let classes = c.spec.damage_space().class_count();
    let experts = c.seeds.iter().map(|&s| ctx.load_expert(s)).collect::<Result<Vec<_>>>()?;
    let mut tasks = Vec::new();
    for &t in &c.grid.timesteps {
        for &r in &c.grid.rollouts {
            for &m in &c.grid.methods {
                for k in 0..c.seeds.len() {
                    tasks.push((t, r, m, k));
                }
            }
        }
    }
    let accs = tasks
        .par_iter()
        .map(|&(t, r, m, k)| {
            let seed = c.seeds[k];
            let samples = collect_samples(&ctx.collection(seed, t, r, m), &c.spec, c.reward, &experts[k])?;
            let (_, report) = train_classifier(&samples, classes, &c.classifier, derive_seed(seed, STREAM_CLASSIFIER))?;
            Ok(report.val_accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(tasks
        .chunks(c.seeds.len())
        .zip(accs.chunks(c.seeds.len()))
        .map(|(group, acc)| GridCell { timesteps: group[0].0, rollouts: group[0].1, method: group[0].2, accuracies: acc.to_vec() })
        .collect())
}

fn train_policy(ctx: &Context, mode: ObservationMode, role: &str) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let mut written = vec![ctx.write_config()?];
    for &seed in &c.seeds {
        let setup = TrainSetup {
            spec: &c.spec,
            reward: c.reward,
            curriculum: &c.curriculum,
            mode,
            ppo: &c.ppo,
            gae: c.gae,
            seed: derive_seed(seed, STREAM_POLICY),
        };
        let Trained { policy, metrics, .. } = train(&setup)?;
        let meta = json!({ "seed": seed, "role": role });
        written.push(ctx.save_checkpoint(policy.to_checkpoint(&ctx.hash), meta, &ctx.layout.policy(role, seed))?);
        written.push(write_csv(
            &ctx.layout.policy_metrics(role, seed),
            &ctx.provenance(seed),
            IterationMetrics::CSV_HEADER,
            &metrics_rows(&metrics),
        )?);
    }
    Ok(written)
}

/// Damage-aware policy through the curriculum, per seed.
pub fn cmd_train_dappo(ctx: &Context) -> Result<Vec<PathBuf>> {
    train_policy(ctx, ObservationMode::DamageAware, "dappo")
}

/// Baseline without damage input, same seeds and curriculum.
pub fn cmd_train_unaware(ctx: &Context) -> Result<Vec<PathBuf>> {
    train_policy(ctx, ObservationMode::Unaware, "unaware")
}

/// Mean-forward-reward column of a metrics CSV.
fn read_forward_curve(path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let header = IterationMetrics::CSV_HEADER.split(',').collect::<Vec<_>>();
    let col = header.iter().position(|h| *h == "mean_forward_reward").expect("metrics header has forward reward");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| config_err(format!("malformed metrics row in {}: {l}", path.display())))
        })
        .collect()
}

fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..n).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64).collect()
}

/// Per-class comparison of the damage-aware and unaware policies.
pub fn cmd_evaluate(ctx: &Context) -> Result<(EvaluationReport, Vec<PathBuf>)> {
    let c = &ctx.config;
    let mut written = vec![ctx.write_config()?];
    let space = c.spec.damage_space();
    let (mut dappo, mut unaware) = (Vec::new(), Vec::new());
    let (mut dappo_curves, mut unaware_curves) = (Vec::new(), Vec::new());
    for &seed in &c.seeds {
        let d = ctx.load_policy(&ctx.layout.policy("dappo", seed), "train-dappo")?;
        let u = ctx.load_policy(&ctx.layout.policy("unaware", seed), "train-unaware")?;
        let eval_seed = derive_seed(seed, STREAM_EVALUATE);
        let (ep, st) = (c.evaluation.episodes, c.evaluation.stochastic);
        dappo.push(evaluate_per_class(&d, &c.spec, c.reward, ObservationMode::DamageAware, ep, eval_seed, st)?);
        unaware.push(evaluate_per_class(&u, &c.spec, c.reward, ObservationMode::Unaware, ep, eval_seed, st)?);
        dappo_curves.push(read_forward_curve(&ctx.layout.policy_metrics("dappo", seed))?);
        unaware_curves.push(read_forward_curve(&ctx.layout.policy_metrics("unaware", seed))?);
    }
    let confusion = classifier_confusion(ctx, space.class_count())?;
    let report =
        EvaluationReport::from_runs(&space, &ctx.hash, &c.seeds, c.evaluation.episodes, &dappo, &unaware, confusion)?;

    written.push(write_file(&ctx.layout.evaluation("report.json"), serde_json::to_string_pretty(&report)? + "\n")?);
    let provenance = provenance_line(&ctx.hash, &ctx.seeds_label());
    written.push(write_csv(&ctx.layout.evaluation("per_class.csv"), &provenance, EvaluationReport::CSV_HEADER, &report.csv_rows())?);
    let note = format!("config_hash={} seeds={}", ctx.hash, ctx.seeds_label());
    let categories: Vec<String> = report.classes.iter().map(|r| r.label.clone()).collect();
    let bars = grouped_bar_chart(
        "Mean forward reward per damage class",
        &note,
        "forward reward",
        &categories,
        &[
            Series { name: "damage-aware".into(), values: report.classes.iter().map(|r| r.dappo).collect() },
            Series { name: "unaware".into(), values: report.classes.iter().map(|r| r.unaware).collect() },
        ],
    );
    written.push(write_file(&ctx.layout.evaluation("per_class.svg"), bars)?);
    let curves = line_chart(
        "Training curves (mean over seeds)",
        &note,
        "iteration",
        "mean forward reward",
        &[
            Series { name: "damage-aware".into(), values: mean_curve(&dappo_curves) },
            Series { name: "unaware".into(), values: mean_curve(&unaware_curves) },
        ],
    );
    written.push(write_file(&ctx.layout.evaluation("training_curves.svg"), curves)?);
    Ok((report, written))
}

/// Summed validation confusion when every seed has a classifier report.
fn classifier_confusion(ctx: &Context, classes: usize) -> Result<Option<Vec<Vec<usize>>>> {
    let mut total = vec![vec![0usize; classes]; classes];
    for &seed in &ctx.config.seeds {
        let path = ctx.layout.classifier_report(seed);
        if !path.exists() {
            return Ok(None);
        }
        let report: ClassifierReport = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        if report.confusion.len() != classes {
            return Ok(None);
        }
        for (t, row) in total.iter_mut().zip(&report.confusion) {
            t.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
    }
    Ok(Some(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploySummary {
    pub config_hash: String,
    pub seed: u64,
    pub healthy_baseline: f64,
    pub threshold: f64,
    pub true_class: usize,
    pub damage_episode: usize,
    pub probes: usize,
    pub diagnosis_count: usize,
    pub final_class: usize,
    pub first_trigger: Option<usize>,
    pub oracle: bool,
}

/// Control loop over a scripted damage event, per seed.
pub fn cmd_deploy_demo(ctx: &Context) -> Result<(Vec<DeploySummary>, Vec<PathBuf>)> {
    let c = &ctx.config;
    let d = &c.deploy;
    let mut written = vec![ctx.write_config()?];
    let mut summaries = Vec::new();
    for &seed in &c.seeds {
        let policy = ctx.load_policy(&ctx.layout.policy("dappo", seed), "train-dappo")?;
        let expert = ctx.load_expert(seed)?;
        let schedule = vec![DamageEvent { episode: d.damage_episode, class_id: d.damage_class }];
        let diagnoser: Box<dyn Diagnoser> = if d.oracle {
            Box::new(OracleDiagnoser {
                schedule: schedule.clone(),
                classes: c.spec.damage_space().class_count(),
                timesteps: c.collect.timesteps,
            })
        } else {
            let path = ctx.layout.classifier(seed);
            require(&path, "train-diagnose")?;
            let ckpt = Checkpoint::load(&path)?;
            let method: Method = serde_json::from_value(ckpt.metadata["method"].clone())?;
            Box::new(ClassifierDiagnoser { model: ClassifierModel::from_checkpoint(&ckpt)?, method })
        };
        let baseline =
            calibrate_baseline(&policy, &c.spec, c.reward, d.baseline_episodes, derive_seed(seed, STREAM_BASELINE))?;
        let agent = AgentState::new(baseline, d.trigger_fraction, d.trigger_window)?;
        let threshold = agent.threshold();
        let scenario = DeployScenario { episodes: d.episodes, schedule, seed: derive_seed(seed, STREAM_DEPLOY) };
        let setup = ProbeSetup { spec: &c.spec, reward: c.reward, expert: &expert };
        let log = run_deployment(&policy, diagnoser.as_ref(), &setup, agent, &scenario)?;

        let mut events = serde_json::to_string(&json!({ "config_hash": ctx.hash, "seed": seed }))?.into_bytes();
        events.push(b'\n');
        log.write_jsonl(&mut events)?;
        written.push(write_file(&ctx.layout.deploy_events(seed), events)?);
        let summary = DeploySummary {
            config_hash: ctx.hash.clone(),
            seed,
            healthy_baseline: baseline,
            threshold,
            true_class: d.damage_class,
            damage_episode: d.damage_episode,
            probes: log.probes,
            diagnosis_count: log.final_state.diagnosis_count,
            final_class: log.final_state.mu,
            first_trigger: log.events.iter().find(|e| e.triggered).map(|e| e.episode),
            oracle: d.oracle,
        };
        written.push(write_file(&ctx.layout.deploy_summary(seed), serde_json::to_string_pretty(&summary)? + "\n")?);
        summaries.push(summary);
    }
    Ok((summaries, written))
}
