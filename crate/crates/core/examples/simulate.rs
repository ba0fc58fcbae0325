//! Drives the quadruped with an open-loop sine gait under each single damage
//! and reports distance covered. Optionally writes the healthy trajectory.
//!
//! `cargo run --example simulate -- [trajectory.csv]`

use dappo::damage::DamageClass;
use dappo::sim::{RewardConfig, RobotSpec, Simulator, TrajectoryRecorder};

fn sine_gait(spec: &RobotSpec, step: usize) -> Vec<f64> {
    let phase = step as f64 * spec.dt * 2.0 * std::f64::consts::PI;
    (0..spec.joint_count())
        .map(|j| {
            let leg = j / spec.joints_per_leg;
            let p = phase + if leg.is_multiple_of(2) { 0.0 } else { std::f64::consts::PI };
            // Hip sweeps; the rest of the leg folds while the hip swings forward.
            match j % spec.joints_per_leg {
                0 => 0.5 * p.sin(),
                _ => -p.cos().max(0.0),
            }
        })
        .collect()
}

fn run(sim: &Simulator, recorder: Option<&mut TrajectoryRecorder>) -> dappo::Result<(f64, f64, usize)> {
    let (mut state, _) = sim.reset(7);
    let (mut reward, mut forward) = (0.0, 0.0);
    let mut rec = recorder;
    while !state.terminated {
        let action = sine_gait(sim.spec(), state.step_count);
        let (next, obs, info) = sim.step(&state, &action)?;
        if let Some(r) = rec.as_deref_mut() {
            r.record(&next, &obs, &action, &info);
        }
        reward += info.reward;
        forward += info.delta_x;
        state = next;
    }
    Ok((reward, forward, state.step_count))
}

fn main() -> dappo::Result<()> {
    let mut spec = RobotSpec::quadruped();
    spec.max_steps = 200;
    let reward = RewardConfig::for_robot(&spec);
    let space = spec.damage_space();

    let mut recorder = TrajectoryRecorder::new();
    let healthy = Simulator::new(&spec, &DamageClass::healthy(), reward)?;
    let (r, x, n) = run(&healthy, Some(&mut recorder))?;
    println!("{:<14} reward {r:>8.2}  forward {x:>6.2}  steps {n}", "healthy");
    for id in 1..=spec.n_legs * 2 {
        let class = space.class_from_id(id)?;
        let (r, x, n) = run(&Simulator::new(&spec, &class, reward)?, None)?;
        println!("{:<14} reward {r:>8.2}  forward {x:>6.2}  steps {n}", class.to_string());
    }
    if let Some(path) = std::env::args().nth(1) {
        recorder.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        println!("trajectory written to {path}");
    }
    Ok(())
}
