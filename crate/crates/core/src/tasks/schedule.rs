use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::task::TaskId;
use crate::error::{Error, Result};

/// A stretch of training with a fixed distribution over tasks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub steps: u64,
    /// Probability of each task in [`Schedule::tasks`].
    pub probs: Vec<f64>,
}

/// Time-varying task distribution. Past the last phase, the last phase's
/// distribution persists.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    tasks: Vec<TaskId>,
    phases: Vec<Phase>,
    samplers: Vec<WeightedIndex<f64>>,
}

impl Schedule {
    pub fn new(tasks: Vec<TaskId>, phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() || tasks.is_empty() {
            return Err(Error::Config("a schedule needs at least one task and one phase".into()));
        }
        let mut samplers = Vec::with_capacity(phases.len());
        for (k, p) in phases.iter().enumerate() {
            if p.steps == 0 {
                return Err(Error::Config(format!("phase {k} has zero steps")));
            }
            if p.probs.len() != tasks.len() {
                return Err(Error::Config(format!("phase {k} has {} probabilities for {} tasks", p.probs.len(), tasks.len())));
            }
            let total: f64 = p.probs.iter().sum();
            if p.probs.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("phase {k} probabilities must be non-negative and sum to 1 (sum {total})")));
            }
            samplers.push(WeightedIndex::new(&p.probs).map_err(|e| Error::Config(format!("phase {k}: {e}")))?);
        }
        Ok(Schedule { tasks, phases, samplers })
    }

    /// One phase per task in order. Each phase gives `current` probability
    /// to its own task and spreads the rest uniformly over earlier tasks
    /// (the first phase is a point mass).
    pub fn sequential(tasks: Vec<TaskId>, steps_per_phase: u64, current: f64) -> Result<Self> {
        let n = tasks.len();
        let phases = (0..n)
            .map(|k| {
                let mut probs = vec![0.0; n];
                if k == 0 {
                    probs[0] = 1.0;
                } else {
                    probs[k] = current;
                    for p in &mut probs[..k] {
                        *p = (1.0 - current) / k as f64;
                    }
                }
                Phase { steps: steps_per_phase, probs }
            })
            .collect();
        Schedule::new(tasks, phases)
    }

    /// The eight grid tasks, 80% current task and 20% replay.
    pub fn lifelong(steps_per_phase: u64) -> Self {
        Schedule::sequential(TaskId::grid_tasks().to_vec(), steps_per_phase, 0.8).expect("valid default schedule")
    }

    pub fn single(task: TaskId, steps: u64) -> Self {
        Schedule::new(vec![task], vec![Phase { steps, probs: vec![1.0] }]).expect("valid single-task schedule")
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn total_steps(&self) -> u64 {
        self.phases.iter().map(|p| p.steps).sum()
    }

    /// Index of the phase containing `step`, clamped to the last phase.
    pub fn phase_at(&self, step: u64) -> usize {
        let mut end = 0;
        for (k, p) in self.phases.iter().enumerate() {
            end += p.steps;
            if step < end {
                return k;
            }
        }
        self.phases.len() - 1
    }

    /// First step after phase `k`.
    pub fn phase_end(&self, k: usize) -> u64 {
        self.phases[..=k].iter().map(|p| p.steps).sum()
    }

    /// The phase in which `task` first has nonzero probability.
    pub fn first_phase_of(&self, task: TaskId) -> Option<usize> {
        let t = self.tasks.iter().position(|&x| x == task)?;
        self.phases.iter().position(|p| p.probs[t] > 0.0)
    }

    /// The last phase in which `task` has the largest probability.
    pub fn own_phase_of(&self, task: TaskId) -> Option<usize> {
        let t = self.tasks.iter().position(|&x| x == task)?;
        self.phases.iter().rposition(|p| {
            let best = p.probs.iter().cloned().fold(f64::MIN, f64::max);
            p.probs[t] > 0.0 && p.probs[t] == best
        })
    }

    pub fn sample_task(&self, step: u64, rng: &mut impl Rng) -> TaskId {
        self.tasks[self.samplers[self.phase_at(step)].sample(rng)]
    }

    /// Tasks with nonzero probability at or before `step`.
    pub fn seen_by(&self, step: u64) -> Vec<TaskId> {
        let k = self.phase_at(step);
        self.tasks
            .iter()
            .enumerate()
            .filter(|(t, _)| self.phases[..=k].iter().any(|p| p.probs[*t] > 0.0))
            .map(|(_, &task)| task)
            .collect()
    }
}
