use std::io::Write;

use super::{EnvState, Observation, StepInfo};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub q: Vec<f64>,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Collects steps of one episode for CSV export.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecorder {
    rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, state: &EnvState, obs: &Observation, action: &[f64], info: &StepInfo) {
        self.rows.push(TrajectoryRow {
            step: state.step_count,
            q: state.q.clone(),
            observation: obs.0.clone(),
            action: action.to_vec(),
            reward: info.reward,
            done: state.terminated,
        });
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    /// Header `step,q0..,obs0..,action0..,reward,done`, one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let Some(first) = self.rows.first() else {
            writeln!(out, "step,reward,done")?;
            return Ok(());
        };
        let mut header = vec!["step".to_string()];
        header.extend((0..first.q.len()).map(|i| format!("q{i}")));
        header.extend((0..first.observation.len()).map(|i| format!("obs{i}")));
        header.extend((0..first.action.len()).map(|i| format!("action{i}")));
        header.push("reward".into());
        header.push("done".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = vec![row.step.to_string()];
            fields.extend(row.q.iter().map(f64::to_string));
            fields.extend(row.observation.iter().map(f64::to_string));
            fields.extend(row.action.iter().map(f64::to_string));
            fields.push(row.reward.to_string());
            fields.push(u8::from(row.done).to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damage::DamageClass;
    use crate::sim::{RewardConfig, RobotSpec, Simulator};

    #[test]
    fn csv_has_expected_columns() {
        let spec = RobotSpec::quadruped();
        let sim = Simulator::new(&spec, &DamageClass::healthy(), RewardConfig::quadruped()).unwrap();
        let (mut state, _) = sim.reset(0);
        let mut rec = TrajectoryRecorder::new();
        for _ in 0..3 {
            let action = vec![0.5; 8];
            let (next, obs, info) = sim.step(&state, &action).unwrap();
            rec.record(&next, &obs, &action, &info);
            state = next;
        }
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let cols = 1 + 8 + 23 + 8 + 2;
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert!(lines[0].starts_with("step,q0,"));
    }
}
