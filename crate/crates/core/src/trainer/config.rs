use std::path::PathBuf;

use ntpt_engine::OptimizerKind;

use crate::error::{Error, Result};
use crate::model_math::MachineShape;
use crate::tasks::{Phase, Schedule, TaskId};
use crate::terpret::LossReduction;

/// Everything a training run depends on. Unknown keys are rejected when
/// deserializing.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Restart `k` trains with seed `seed + k`.
    pub seed: u64,
    pub restarts: usize,
    /// Worker threads for restarts.
    pub jobs: usize,
    pub schedule: ScheduleConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub reduction: LossReduction,
    /// Std of the initial interpreter logits.
    pub init_std: f64,
    pub eval: EvalConfig,
    pub convergence: ConvergenceConfig,
    pub data: DataConfig,
    pub perception: PerceptionMode,
    pub math: MathConfig,
    /// End a restart as soon as every task it trains has converged.
    pub stop_on_convergence: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub tasks: Vec<TaskId>,
    /// Steps of each generated phase when `phases` is empty.
    pub steps_per_phase: u64,
    /// Probability of the newest task in each generated phase.
    pub current_prob: f64,
    /// Explicit phases; overrides the generated ones.
    pub phases: Vec<Phase>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Adam,
    Rmsprop,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerChoice,
    pub lr_interpreter: f64,
    pub lr_perceptual: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub every: u64,
    pub examples: usize,
    /// Examples per forward pass during evaluation.
    pub chunk: usize,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub jump: f64,
    pub level: f64,
    /// Number of consecutive evaluations the jump must fit in.
    pub window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Synthetic,
    Mnist,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Seed of the glyph renderer and of every evaluation set.
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Directory of the IDX files; falls back to `NTPT_DATA_DIR`.
    pub mnist_dir: Option<PathBuf>,
    /// Size of each task's fixed training pool; unlimited when absent.
    pub pool_cap: Option<usize>,
    /// Variation of synthetic glyphs.
    pub glyphs: crate::tasks::GlyphStyle,
}

/// How neural calls are answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionMode {
    /// Trainable networks from the shared library.
    Learned,
    /// Ground-truth symbol classes.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MathConfig {
    /// Blocks of the machine; each owns one register.
    pub blocks: usize,
    pub train_digits: usize,
    /// Unrolled steps as a multiple of the tape length, plus `steps_extra`.
    pub steps_per_symbol: usize,
    pub steps_extra: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            restarts: 1,
            jobs: 1,
            schedule: ScheduleConfig::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            reduction: LossReduction::Mean,
            init_std: 1.0,
            eval: EvalConfig::default(),
            convergence: ConvergenceConfig::default(),
            data: DataConfig::default(),
            perception: PerceptionMode::Learned,
            math: MathConfig::default(),
            stop_on_convergence: false,
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { tasks: TaskId::grid_tasks().to_vec(), steps_per_phase: 2000, current_prob: 0.8, phases: Vec::new() }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { kind: OptimizerChoice::Adam, lr_interpreter: 0.05, lr_perceptual: 5e-4 }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { every: 500, examples: 1000, chunk: 250 }
    }
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { jump: 0.4, level: 0.9, window: 5 }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { kind: DataKind::Synthetic, seed: 0, train_per_class: 200, test_per_class: 100, mnist_dir: None, pool_cap: None, glyphs: Default::default() }
    }
}

impl Default for MathConfig {
    fn default() -> Self {
        let shape = MachineShape::default();
        MathConfig { blocks: shape.blocks, train_digits: 2, steps_per_symbol: 2, steps_extra: 2 }
    }
}

impl MathConfig {
    pub fn shape(&self) -> MachineShape {
        MachineShape { blocks: self.blocks }
    }

    pub fn steps_for(&self, tape_len: usize) -> usize {
        self.steps_per_symbol * tape_len + self.steps_extra
    }
}

impl OptimizerConfig {
    pub fn kind(&self) -> OptimizerKind {
        match self.kind {
            OptimizerChoice::Adam => OptimizerKind::adam(),
            OptimizerChoice::Rmsprop => OptimizerKind::rmsprop(),
            OptimizerChoice::Sgd => OptimizerKind::Sgd,
        }
    }
}

impl RunConfig {
    /// The eight grid tasks in sequence.
    pub fn lifelong(steps_per_phase: u64) -> Self {
        let mut c = RunConfig::default();
        c.schedule.steps_per_phase = steps_per_phase;
        c
    }

    pub fn single(task: TaskId, steps: u64) -> Self {
        let mut c = RunConfig::default();
        c.schedule = ScheduleConfig { tasks: vec![task], steps_per_phase: steps, ..ScheduleConfig::default() };
        c
    }

    /// Math from ground-truth symbols.
    pub fn math(steps: u64) -> Self {
        let mut c = RunConfig::single(TaskId::MATH, steps);
        c.perception = PerceptionMode::Oracle;
        c.optimizer.lr_interpreter = 0.1;
        c.eval = EvalConfig { every: 100, examples: 200, chunk: 200 };
        c.stop_on_convergence = true;
        c
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        let s = &self.schedule;
        if s.phases.is_empty() {
            Schedule::sequential(s.tasks.clone(), s.steps_per_phase, s.current_prob)
        } else {
            Schedule::new(s.tasks.clone(), s.phases.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.build_schedule()?;
        self.math.shape().validate()?;
        let o = &self.optimizer;
        if !(o.lr_interpreter > 0.0 && o.lr_perceptual >= 0.0) {
            return bad("learning rates must be positive".into());
        }
        if o.lr_perceptual > o.lr_interpreter {
            return bad(format!(
                "optimizer.lr_perceptual ({}) must not exceed optimizer.lr_interpreter ({})",
                o.lr_perceptual, o.lr_interpreter
            ));
        }
        if self.restarts == 0 || self.jobs == 0 || self.batch_size == 0 {
            return bad("restarts, jobs and batch_size must be positive".into());
        }
        if self.eval.every == 0 || self.eval.examples == 0 || self.eval.chunk == 0 {
            return bad("eval.every, eval.examples and eval.chunk must be positive".into());
        }
        if self.convergence.window < 2 {
            return bad("convergence.window must be at least 2".into());
        }
        if self.math.train_digits == 0 || self.math.steps_per_symbol == 0 {
            return bad("math.train_digits and math.steps_per_symbol must be positive".into());
        }
        if !(self.init_std > 0.0) {
            return bad("init_std must be positive".into());
        }
        Ok(())
    }
}

impl DataConfig {
    /// The symbol images this config describes. The IDX directory falls back
    /// to `NTPT_DATA_DIR`.
    pub fn source(&self) -> Result<crate::tasks::SymbolSource> {
        use crate::tasks::SymbolSource;
        match self.kind {
            DataKind::Synthetic => {
                Ok(SymbolSource::synthetic_styled(self.seed, self.train_per_class, self.test_per_class, self.glyphs))
            }
            DataKind::Mnist => {
                let dir = self
                    .mnist_dir
                    .clone()
                    .or_else(|| std::env::var_os("NTPT_DATA_DIR").map(PathBuf::from))
                    .ok_or_else(|| Error::Config("data.kind = \"mnist\" needs data.mnist_dir or NTPT_DATA_DIR".into()))?;
                SymbolSource::mnist(&dir, self.seed, self.train_per_class, self.test_per_class)
            }
        }
    }
}
