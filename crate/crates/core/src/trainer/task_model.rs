use crate::error::{Error, Result};
use crate::model_2x2::{GridModel, NetRef};
use crate::model_math::MathModel;
use crate::tasks::{Example, Scenario, SymbolSource, TaskId};
use crate::terpret::{discretize, Batch, LossReduction, ModelGraph, Perception, ProgramListing, ProgramParams, VarId};
use ntpt_engine::Tape;

use super::config::MathConfig;

/// The interpreter model of one task.
pub enum TaskModel {
    Grid(GridModel),
    /// Math at its training tape length.
    Math(MathModel),
}

/// Held-out accuracy and mean loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub accuracy: f64,
    pub loss: f64,
}

impl TaskModel {
    pub fn build(task: TaskId, nets: &[NetRef], math: &MathConfig) -> Result<Self> {
        match task.scenario {
            Scenario::Math => {
                let len = 2 * math.train_digits - 1;
                Ok(TaskModel::Math(MathModel::build(math.shape(), len, math.steps_for(len), nets)?))
            }
            _ => Ok(TaskModel::Grid(GridModel::build(task, nets)?)),
        }
    }

    pub fn graph(&self) -> &ModelGraph {
        match self {
            TaskModel::Grid(m) => &m.graph,
            TaskModel::Math(m) => &m.graph,
        }
    }

    pub fn output(&self) -> VarId {
        match self {
            TaskModel::Grid(m) => m.output,
            TaskModel::Math(m) => m.output,
        }
    }

    pub fn nets(&self) -> &[NetRef] {
        match self {
            TaskModel::Grid(m) => &m.nets,
            TaskModel::Math(m) => &m.nets,
        }
    }

    pub fn batch(&self, examples: &[&Example], source: &SymbolSource) -> Result<Batch> {
        match self {
            TaskModel::Grid(m) => m.batch(examples, source),
            TaskModel::Math(m) => m.batch(examples, source),
        }
    }

    pub fn render(&self, listing: &ProgramListing) -> Result<String> {
        match self {
            TaskModel::Grid(m) => Ok(m.render(listing)),
            TaskModel::Math(m) => m.render(listing),
        }
    }

    pub fn golden(&self) -> Result<ProgramListing> {
        match self {
            TaskModel::Grid(m) => Ok(m.golden()),
            TaskModel::Math(m) => m.golden(),
        }
    }

    /// The discrete program of `params`.
    pub fn extract(&self, params: &ProgramParams) -> ProgramListing {
        discretize(self.graph(), params)
    }

    /// Differentiable evaluation: the prediction is the argmax of the
    /// output marginal.
    pub fn score(
        &self,
        params: &ProgramParams,
        examples: &[Example],
        source: &SymbolSource,
        perception: &dyn Perception,
        chunk: usize,
    ) -> Result<Score> {
        if examples.is_empty() {
            return Err(Error::Eval("no examples to score".into()));
        }
        let (mut correct, mut loss) = (0usize, 0.0);
        for part in examples.chunks(chunk) {
            let refs: Vec<&Example> = part.iter().collect();
            let batch = self.batch(&refs, source)?;
            let mut tape = Tape::new();
            let fwd = self.graph().forward(&mut tape, params, &batch, perception, LossReduction::Sum)?;
            loss += fwd.loss.map(|l| tape.value(l).item()).unwrap_or(0.0);
            let out = fwd.var(self.output()).ok_or_else(|| Error::Eval("output was not computed".into()))?;
            let probs = tape.value(out);
            for (i, e) in part.iter().enumerate() {
                if crate::terpret::argmax(probs.row_slice(i)) == e.label {
                    correct += 1;
                }
            }
        }
        let n = examples.len() as f64;
        Ok(Score { accuracy: correct as f64 / n, loss: loss / n })
    }
}

/// Math with the given program params at an arbitrary tape length.
pub fn math_at_length(trained: &MathModel, digits: usize, math: &MathConfig) -> Result<MathModel> {
    let len = 2 * digits - 1;
    MathModel::build(trained.shape, len, math.steps_for(len), &trained.nets)
}
