//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `cargo test --release --test acceptance` runs all of them; pass criterion
//! numbers to run a subset, e.g. `cargo test --test acceptance -- 1 2 11`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dappo::control::{
    episode_seed, run_deployment, run_policy_episode, AgentState, DamageEvent, DeployScenario, OracleDiagnoser,
    ProbeSetup,
};
use dappo::damage::{count_classes, DamageSpace};
use dappo::diagnosis::{collect_samples, train_classifier, ClassifierTraining, CollectionConfig, Dataset, DatasetHeader, Method};
use dappo::harness::{
    cmd_collect, cmd_deploy_demo, cmd_evaluate, cmd_train_dappo, cmd_train_diagnose, cmd_train_expert,
    cmd_train_unaware, Context, EvaluationReport, ExperimentConfig, GridSettings, RobotKind,
};
use dappo::nn::{finite_diff_check, Activation, Checkpoint, DenseGrads, DenseLayer, LstmCell, Tensor2};
use dappo::ppo::{
    clipped_surrogate, compute_gae, gaussian_kl, policy_ratio, ppo_loss, ppo_loss_and_grad, value_loss_and_grad,
    ClassMix, Curriculum, GaeConfig, PolicyMinibatch, PolicyNet, Stage, ValueNet,
};
use dappo::rng::rng_from_seed;
use dappo::sim::{RewardConfig, RobotSpec, Simulator};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const GAE_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-4;
const SUBSET_MIN_ACC: f64 = 0.90;
const FULL_MIN_ACC: f64 = 0.60;
const MIN_IMPROVEMENT_PCT: f64 = 10.0;
const MIN_WIN_RATE: f64 = 0.55;
const MAX_PPO_ITERATIONS: usize = 300;
const SIGMA_BOUND: f64 = 3.0;
const SEEDS: [u64; 3] = [0, 1, 2];

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

struct Outcome {
    pass: bool,
    detail: String,
    budget: Duration,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>, budget: Duration) -> Self {
        Self { pass, detail: detail.into(), budget }
    }
}

/// Output directory shared by the pipeline-based criteria.
struct Shared {
    ctx: Context,
    experts: OnceLock<Duration>,
    policies: OnceLock<Duration>,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
        let _ = std::fs::remove_dir_all(&dir);
        let mut config = ExperimentConfig::desk(RobotKind::Quad);
        config.seeds = SEEDS.to_vec();
        config.out_dir = dir;
        Shared { ctx: Context::new(config).expect("desk config is valid"), experts: OnceLock::new(), policies: OnceLock::new() }
    })
}

fn experts() -> Vec<PolicyNet> {
    let s = shared();
    s.experts.get_or_init(|| {
        let t = Instant::now();
        cmd_train_expert(&s.ctx).expect("expert training");
        let took = t.elapsed();
        println!("    (fixture: {} healthy experts trained in {took:.1?})", SEEDS.len());
        took
    });
    SEEDS.iter().map(|&seed| load_policy(&s.ctx.layout.expert(seed))).collect()
}

fn load_policy(path: &Path) -> PolicyNet {
    PolicyNet::from_checkpoint(&Checkpoint::load(path).expect("checkpoint")).expect("policy")
}

fn ensure_policies() -> Duration {
    let s = shared();
    *s.policies.get_or_init(|| {
        let t = Instant::now();
        cmd_train_dappo(&s.ctx).expect("damage-aware training");
        cmd_train_unaware(&s.ctx).expect("unaware training");
        t.elapsed()
    })
}

fn random_policy(obs: usize, act: usize, hidden: &[usize], seed: u64) -> PolicyNet {
    PolicyNet::new(obs, act, hidden, &mut rng_from_seed(seed))
}

fn gaussian_tensor<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

// ---------------------------------------------------------------- criteria

fn c1_class_counts() -> Outcome {
    let quad = count_classes(4, 2);
    let hex = count_classes(6, 2);
    let mut mismatches = Vec::new();
    for n in 1..=8usize {
        for k in 1..=3usize {
            // every assignment of {healthy, type 1..k} to n limbs, at most two damaged
            let total = (k + 1).pow(n as u32);
            let brute = (0..total)
                .filter(|&code| {
                    let mut c = code;
                    let mut damaged = 0;
                    for _ in 0..n {
                        if c % (k + 1) != 0 {
                            damaged += 1;
                        }
                        c /= k + 1;
                    }
                    damaged <= 2
                })
                .count();
            if brute != count_classes(n, k) {
                mismatches.push((n, k, brute, count_classes(n, k)));
            }
            if k <= 2 && DamageSpace::new(n, k).unwrap().classes().len() != brute {
                mismatches.push((n, k, brute, usize::MAX));
            }
        }
    }
    Outcome::new(
        quad == 33 && hex == 73 && mismatches.is_empty(),
        format!("quad {quad}, hex {hex}, brute-force mismatches {mismatches:?}"),
        Duration::from_secs(1),
    )
}

fn c2_encoding_bijective() -> Outcome {
    let mut failures = 0;
    let mut checked = 0;
    for limbs in [4, 6] {
        let space = DamageSpace::for_limbs(limbs);
        let mut seen = BTreeSet::new();
        for id in 0..space.class_count() {
            let class = space.class_from_id(id).unwrap();
            let enc = space.encode(&class).unwrap();
            let back = space.decode(&enc).unwrap();
            let ok = back == class
                && space.id_from_class(&back).unwrap() == id
                && enc.len() == 2 * limbs
                && enc.0.chunks(2).all(|t| t != [1, 1])
                && seen.insert(enc.0.clone());
            failures += usize::from(!ok);
            checked += 1;
        }
    }
    Outcome::new(failures == 0 && checked == 106, format!("{checked} classes, {failures} failures"), Duration::from_secs(1))
}

fn c3_gae_oracle() -> Outcome {
    let cfg = GaeConfig::default();
    let (g, l) = (cfg.gamma, cfg.lambda);
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let bootstrap = rng.random_range(-5.0..5.0);
        let terminal = rng.random_bool(0.5);
        let mut dones = vec![false; n];
        dones[n - 1] = terminal;
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, &cfg).unwrap();
        for t in 0..n {
            let mut oracle = 0.0;
            for k in t..n {
                let next = if k + 1 < n { values[k + 1] } else if terminal { 0.0 } else { bootstrap };
                oracle += (g * l).powi((k - t) as i32) * (rewards[k] + g * next - values[k]);
            }
            worst = worst.max((adv[t] - oracle).abs());
        }
    }
    Outcome::new(worst <= GAE_TOL, format!("max |recursive − double sum| = {worst:.2e} (tol {GAE_TOL:.0e})"), Duration::from_secs(5))
}

fn c4_ppo_identities() -> Outcome {
    let mut rng = rng_from_seed(4);
    let policy = random_policy(23, 8, &[16, 16], 40);
    let obs = gaussian_tensor(64, 23, &mut rng);
    let actions = gaussian_tensor(64, 8, &mut rng);
    let advantages: Vec<f64> = (0..64).map(|_| StandardNormal.sample(&mut rng)).collect();
    let batch = PolicyMinibatch::from_old_policy(&policy, obs.clone(), actions.clone(), advantages.clone()).unwrap();
    let clip = 0.2;
    let ratios_one = (0..64).all(|i| policy_ratio(&policy, &policy, obs.row(i), actions.row(i)).unwrap() == 1.0);
    let means = policy.mean_batch(&obs).unwrap();
    let kl_zero = (0..64).all(|i| gaussian_kl(means.row(i), &policy.log_std, means.row(i), &policy.log_std) == 0.0);
    let unclipped_equal = advantages.iter().all(|&a| clipped_surrogate(1.0, a, clip) == a);
    let loss = ppo_loss(&policy, &batch, 1.0, clip).unwrap();
    let mean_adv = advantages.iter().sum::<f64>() / 64.0;
    let loss_ok = loss.kl == 0.0 && (loss.surrogate - mean_adv).abs() < 1e-15 && loss.clip_fraction == 0.0;
    let hand_a = clipped_surrogate(1.5, 1.0, 0.2);
    let hand_b = clipped_surrogate(0.5, -1.0, 0.2);
    Outcome::new(
        ratios_one && kl_zero && unclipped_equal && loss_ok && hand_a == 1.2 && hand_b == -0.8,
        format!(
            "ratios=1 {ratios_one}, KL=0 {kl_zero}, clipped=unclipped {unclipped_equal}, batch loss {loss_ok}; \
             hand cases {hand_a} and {hand_b}"
        ),
        Duration::from_secs(1),
    )
}

fn c5_gradient_checks() -> Outcome {
    let mut rng = rng_from_seed(5);
    let eps = 1e-6;

    let old = random_policy(6, 3, &[8, 8], 50);
    let obs = gaussian_tensor(12, 6, &mut rng);
    let actions = gaussian_tensor(12, 3, &mut rng);
    let advantages: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
    let batch = PolicyMinibatch::from_old_policy(&old, obs.clone(), actions, advantages).unwrap();
    let mut policy = old.clone();
    for w in policy.mean.layers.iter_mut().flat_map(|l| l.weights.data_mut().iter_mut()) {
        *w += 0.05 * rng.random_range(-1.0..1.0);
    }
    policy.log_std.iter_mut().for_each(|s| *s += 0.1);
    let policy_err = finite_diff_check(
        &mut policy,
        |p| {
            let (l, g) = ppo_loss_and_grad(p, &batch, 0.7, 0.2).unwrap();
            (l.loss, g)
        },
        eps,
    )
    .unwrap();

    let mut value = ValueNet::new(6, &[8, 8], &mut rng);
    let targets: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
    let value_err = finite_diff_check(&mut value, |v| value_loss_and_grad(v, &obs, &targets).unwrap(), eps).unwrap();

    let mut dense = DenseLayer::new(5, 4, Activation::Tanh, &mut rng);
    let x = gaussian_tensor(7, 5, &mut rng);
    let w = gaussian_tensor(7, 4, &mut rng);
    let dense_err = finite_diff_check(
        &mut dense,
        |layer| {
            let (y, cache) = layer.forward_batch(&x).unwrap();
            let loss: f64 = y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
            let mut grads = DenseGrads::zeros_like(layer);
            layer.backward(&cache, &w, &mut grads);
            (loss, grads.into_vecs())
        },
        eps,
    )
    .unwrap();

    let mut lstm = LstmCell::new(3, 4, &mut rng);
    let seq: Vec<Tensor2> = (0..5).map(|_| gaussian_tensor(2, 3, &mut rng)).collect();
    let wh = gaussian_tensor(2, 4, &mut rng);
    let lstm_err = finite_diff_check(
        &mut lstm,
        |cell| {
            let (h, cache) = cell.forward_batch(&seq).unwrap();
            let loss: f64 = h.data().iter().zip(wh.data()).map(|(a, b)| a * b).sum();
            let mut grads = cell.zero_grads();
            cell.backward(&cache, &wh, &mut grads);
            (loss, grads.into_vecs())
        },
        eps,
    )
    .unwrap();

    let worst = policy_err.max(value_err).max(dense_err).max(lstm_err);
    Outcome::new(
        worst <= GRAD_TOL,
        format!(
            "relative error: policy {policy_err:.1e}, value {value_err:.1e}, dense {dense_err:.1e}, lstm {lstm_err:.1e} (tol {GRAD_TOL:.0e})"
        ),
        Duration::from_secs(30),
    )
}

fn c6_paired_rollouts() -> Outcome {
    let mut spec = RobotSpec::quadruped();
    spec.max_steps = 200;
    let reward = RewardConfig::for_robot(&spec);
    let expert = random_policy(spec.observation_dim(), spec.action_dim(), &[32, 32], 60);
    let config = CollectionConfig { n_rollouts: 8, n_timesteps: 30, seed_base: 600, method: Method::B, classes: None };
    let a = collect_samples(&config, &spec, reward, &expert).unwrap();
    let b = collect_samples(&config, &spec, reward, &expert).unwrap();
    let d = spec.damage_space().class_count();
    let healthy: Vec<_> = a.iter().filter(|s| s.label == 0).collect();
    let zero = !healthy.is_empty() && healthy.iter().all(|s| s.matrix.data().iter().all(|v| v.to_bits() == 0));
    let damaged_nonzero = a.iter().filter(|s| s.label != 0).all(|s| s.matrix.data().iter().any(|&v| v != 0.0));
    let to_bytes = |samples: Vec<_>| {
        let ds = Dataset {
            header: DatasetHeader {
                obs_dim: spec.observation_dim(),
                timesteps: 30,
                classes: d,
                method: Method::B,
                seed_base: 600,
                samples: a.len(),
                config_hash: String::new(),
            },
            samples,
        };
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        buf
    };
    let identical = to_bytes(a.clone()) == to_bytes(b);
    Outcome::new(
        zero && damaged_nonzero && a.len() == 8 * d && identical,
        format!(
            "healthy samples all +0.0 {zero} ({} of them), damaged samples non-zero {damaged_nonzero}, count {} = 8×{d}, \
             rerun bit-identical {identical}",
            healthy.len(),
            a.len()
        ),
        Duration::from_secs(30),
    )
}

fn diagnosis_accuracy(
    expert: &PolicyNet,
    classes: Option<Vec<usize>>,
    timesteps: usize,
    rollouts: usize,
    method: Method,
    seed: u64,
) -> f64 {
    let spec = &shared().ctx.config.spec;
    let reward = shared().ctx.config.reward;
    let config = CollectionConfig { n_rollouts: rollouts, n_timesteps: timesteps, seed_base: 1_000_000 * (seed + 1), method, classes };
    let samples = collect_samples(&config, spec, reward, expert).unwrap();
    let (_, report) = train_classifier(&samples, spec.damage_space().class_count(), &ClassifierTraining::default(), seed).unwrap();
    report.val_accuracy
}

fn c7_diagnosis_accuracy() -> Outcome {
    let experts = experts();
    let t = Instant::now();
    let subset: Vec<f64> = SEEDS
        .iter()
        .zip(&experts)
        .map(|(&s, e)| diagnosis_accuracy(e, Some(vec![0, 1, 2]), 30, 200, Method::B, s))
        .collect();
    let full = diagnosis_accuracy(&experts[0], None, 50, 500, Method::B, 0);
    let elapsed = t.elapsed();
    Outcome::new(
        subset.iter().all(|&a| a >= SUBSET_MIN_ACC) && full >= FULL_MIN_ACC,
        format!(
            "3-class subset {subset:.3?} (need ≥ {SUBSET_MIN_ACC} each), 33 classes T=50 {full:.3} (need ≥ {FULL_MIN_ACC}); work {elapsed:.1?}"
        ),
        mins(15),
    )
}

fn c8_method_b_vs_a() -> Outcome {
    let experts = experts();
    let mut acc = [Vec::new(), Vec::new()];
    for (&s, e) in SEEDS.iter().zip(&experts) {
        for (k, m) in [Method::A, Method::B].into_iter().enumerate() {
            acc[k].push(diagnosis_accuracy(e, None, 30, 200, m, s));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (mean(&acc[0]), mean(&acc[1]));
    Outcome::new(
        b >= a,
        format!("33 classes, T=30, 200 rollouts/class: A {:.4?} mean {a:.4}, B {:.4?} mean {b:.4}", acc[0], acc[1]),
        mins(20),
    )
}

fn c9_damage_awareness_gain() -> Outcome {
    let s = shared();
    let train_time = ensure_policies();
    let (report, _) = cmd_evaluate(&s.ctx).unwrap();
    let iterations = s.ctx.config.curriculum.total_iterations();
    let improvement = report.improvement_pct.unwrap_or(f64::NEG_INFINITY);
    Outcome::new(
        iterations <= MAX_PPO_ITERATIONS && improvement >= MIN_IMPROVEMENT_PCT && report.win_rate >= MIN_WIN_RATE,
        format!(
            "{iterations} iterations × {} seeds (training {train_time:.1?}): forward reward aware {:.3} vs unaware {:.3} \
             → {improvement:+.1}% (need ≥ {MIN_IMPROVEMENT_PCT}%), wins {}/{} = {:.3} (need ≥ {MIN_WIN_RATE}), ties {}",
            SEEDS.len(),
            report.mean_dappo,
            report.mean_unaware,
            report.wins,
            report.classes.len(),
            report.win_rate,
            report.ties
        ),
        mins(90),
    )
}

fn c10_single_trial_control_loop() -> Outcome {
    let s = shared();
    let _ = experts();
    ensure_policies();
    let mut ctx = s.ctx.clone();
    ctx.config.deploy.oracle = true;
    let (summaries, _) = cmd_deploy_demo(&ctx).unwrap();
    let probes: Vec<usize> = summaries.iter().map(|x| x.probes).collect();
    let diagnosed: Vec<usize> = summaries.iter().map(|x| x.final_class).collect();
    let d = &ctx.config.deploy;

    // Direct replay against oracle-labelled evaluation on the first seed.
    let c = &ctx.config;
    let policy = load_policy(&ctx.layout.policy("dappo", SEEDS[0]));
    let expert = load_policy(&ctx.layout.expert(SEEDS[0]));
    let space = c.spec.damage_space();
    let schedule = vec![DamageEvent { episode: d.damage_episode, class_id: d.damage_class }];
    let oracle = OracleDiagnoser { schedule: schedule.clone(), classes: space.class_count(), timesteps: c.collect.timesteps };
    let healthy_sim = Simulator::new(&c.spec, &space.class_from_id(0).unwrap(), c.reward).unwrap();
    let zeros = vec![0.0; 2 * c.spec.n_legs];
    let baseline = summaries[0].healthy_baseline;
    let scenario = DeployScenario { episodes: d.episodes, schedule, seed: 1010 };
    let setup = ProbeSetup { spec: &c.spec, reward: c.reward, expert: &expert };
    let log = run_deployment(&policy, &oracle, &setup, AgentState::new(baseline, d.trigger_fraction, d.trigger_window).unwrap(), &scenario).unwrap();
    let diag_episode = log.events.iter().find(|e| e.diagnosed_class.is_some()).map(|e| e.episode);
    let damaged_sim = Simulator::new(&c.spec, &space.class_from_id(d.damage_class).unwrap(), c.reward).unwrap();
    let encoding = space.encode_id(d.damage_class).unwrap().to_features();
    let mut identical = diag_episode.is_some();
    if let Some(start) = diag_episode {
        for e in &log.events[start..] {
            let reference = run_policy_episode(&policy, &damaged_sim, &encoding, episode_seed(scenario.seed, e.episode)).unwrap();
            identical &= reference.reward.to_bits() == e.reward.to_bits()
                && reference.forward_reward.to_bits() == e.forward_reward.to_bits();
        }
    }
    for e in &log.events[..d.damage_episode] {
        let reference = run_policy_episode(&policy, &healthy_sim, &zeros, episode_seed(scenario.seed, e.episode)).unwrap();
        identical &= reference.reward.to_bits() == e.reward.to_bits();
    }
    Outcome::new(
        probes.iter().all(|&p| p == 1) && diagnosed.iter().all(|&m| m == d.damage_class) && log.probes == 1 && identical,
        format!(
            "damage class {} at episode {} of {}: probes per seed {probes:?}, final diagnosis {diagnosed:?}; \
             replay probes {}, diagnosed at episode {diag_episode:?}, rewards bit-identical to oracle-labelled evaluation {identical}",
            d.damage_class, d.damage_episode, d.episodes, log.probes
        ),
        mins(5),
    )
}

fn c11_curriculum_frequencies() -> Outcome {
    let space = DamageSpace::for_limbs(4);
    let n = 10_000usize;
    let mut worst = 0.0f64;
    let mut healthy_only = true;
    for (k, stage) in [Stage::I, Stage::II, Stage::III, Stage::IV].into_iter().enumerate() {
        let mix = ClassMix::for_stage(stage);
        let p = mix.probabilities(&space);
        let mut counts = vec![0usize; space.class_count()];
        let mut rng = rng_from_seed(1100 + k as u64);
        for _ in 0..n {
            counts[mix.sample(&space, &mut rng)] += 1;
        }
        if stage == Stage::I {
            healthy_only = counts[0] == n;
        }
        let mut groups = vec![(counts[0], p[0])];
        let singles = 1..=8;
        groups.push((counts[singles.clone()].iter().sum(), p[singles.clone()].iter().sum()));
        groups.push((counts[9..].iter().sum(), p[9..].iter().sum()));
        groups.extend(counts.iter().copied().zip(p.iter().copied()));
        for (count, prob) in groups {
            let expected = n as f64 * prob;
            let sigma = (n as f64 * prob * (1.0 - prob)).sqrt();
            let z = if sigma > 0.0 { (count as f64 - expected).abs() / sigma } else if count as f64 == expected { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    let staged = Curriculum::default();
    let order: Vec<Stage> = staged.schedule().map(|p| p.stage).collect();
    let ordered = order.windows(2).all(|w| w[0] as u8 <= w[1] as u8) && order.len() == staged.total_iterations();
    Outcome::new(
        worst <= SIGMA_BOUND && healthy_only && ordered,
        format!("max |count − np|/σ over classes and groups {worst:.2} (bound {SIGMA_BOUND}), stage I healthy only {healthy_only}"),
        mins(1),
    )
}

fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk(RobotKind::Quad);
    c.seeds = vec![0, 1];
    c.spec.max_steps = 40;
    c.ppo.batch_timesteps = 256;
    c.ppo.minibatch_size = 64;
    c.ppo.epochs = 2;
    c.ppo.hidden = vec![16, 16];
    c.expert.iterations = 2;
    c.curriculum = Curriculum::staged([1, 1, 1, 1]);
    c.collect.rollouts = 3;
    c.collect.timesteps = 10;
    c.classifier.max_epochs = 2;
    c.classifier.shape.projection = 16;
    c.classifier.shape.hidden = 8;
    c.classifier.shape.dense = vec![16];
    c.grid = GridSettings { timesteps: vec![5, 10], rollouts: vec![3], methods: vec![Method::A, Method::B] };
    c.evaluation.episodes = 2;
    c.deploy.episodes = 12;
    c.deploy.damage_episode = 6;
    c.deploy.baseline_episodes = 3;
    c.out_dir = out.to_path_buf();
    c
}

fn run_pipeline(out: &Path) -> Vec<PathBuf> {
    let ctx = Context::new(tiny_config(out)).unwrap();
    let mut files = cmd_train_expert(&ctx).unwrap();
    files.extend(cmd_collect(&ctx).unwrap());
    files.extend(cmd_train_diagnose(&ctx).unwrap());
    files.extend(cmd_train_dappo(&ctx).unwrap());
    files.extend(cmd_train_unaware(&ctx).unwrap());
    let (report, f): (EvaluationReport, _) = cmd_evaluate(&ctx).unwrap();
    assert_eq!(report.classes.len(), 33);
    files.extend(f);
    files.extend(cmd_deploy_demo(&ctx).unwrap().1);
    files.into_iter().map(|p| p.strip_prefix(out).unwrap().to_path_buf()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn c12_determinism() -> Outcome {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    let _ = std::fs::remove_dir_all(&root);
    let (a, b) = (root.join("a"), root.join("b"));
    let files_a = run_pipeline(&a);
    let files_b = run_pipeline(&b);
    let hash = Context::new(tiny_config(&a)).unwrap().hash;
    let mut differing = Vec::new();
    let mut unlabeled = Vec::new();
    for rel in &files_a {
        let (x, y) = (std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap());
        if x != y {
            differing.push(rel.display().to_string());
        }
        let carries_hash = x.windows(hash.len()).any(|w| w == hash.as_bytes());
        if !carries_hash {
            unlabeled.push(rel.display().to_string());
        }
    }
    let kinds: BTreeSet<String> =
        files_a.iter().filter_map(|p| p.extension().map(|e| e.to_string_lossy().into_owned())).collect();
    Outcome::new(
        files_a == files_b && differing.is_empty() && unlabeled.is_empty() && files_a.len() > 20,
        format!(
            "7 subcommands × 2 runs, {} files ({kinds:?}): differing {differing:?}, missing config hash {unlabeled:?}",
            files_a.len()
        ),
        mins(5),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "damage-class counts", c1_class_counts),
        (2, "encoding bijectivity", c2_encoding_bijective),
        (3, "GAE oracle equivalence", c3_gae_oracle),
        (4, "PPO identities", c4_ppo_identities),
        (5, "gradient checks", c5_gradient_checks),
        (6, "paired-rollout zero property", c6_paired_rollouts),
        (7, "diagnosis accuracy", c7_diagnosis_accuracy),
        (8, "method B ≥ method A", c8_method_b_vs_a),
        (9, "damage-awareness gain", c9_damage_awareness_gain),
        (10, "single-trial control loop", c10_single_trial_control_loop),
        (11, "curriculum frequencies", c11_curriculum_frequencies),
        (12, "determinism", c12_determinism),
    ];
    let selected: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_time = elapsed <= o.budget;
                let budget = if in_time { String::new() } else { format!("; over budget {:.0?}", o.budget) };
                (o.pass && in_time, format!("{}{budget}", o.detail))
            }
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        println!("criterion {id:>2} [{}] {name}: {detail} ({elapsed:.1?})", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
