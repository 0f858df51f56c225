use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::MathConfig;
use super::task_model::{math_at_length, Score, TaskModel};
use crate::error::{Error, Result};
use crate::model_2x2::{GridModel, NetRef};
use crate::model_math::{perfect_read, MathModel, MathProgram, Outcome};
use crate::neural::{Library, LibraryPerception};
use crate::perception::{Mismatch, OraclePerception};
use crate::tasks::{gen_example, Example, Split, SymbolSource, TaskId, IMAGE_PIXELS};
use crate::terpret::{concrete_eval, Perception, ProgramListing, ProgramParams};
use ntpt_engine::Tensor;

/// Where symbol values come from at evaluation time.
#[derive(Clone, Copy)]
pub enum Reader<'a> {
    Oracle,
    Library(&'a Library),
}

impl<'a> Reader<'a> {
    pub fn perception(&self) -> Box<dyn Perception + 'a> {
        match *self {
            Reader::Oracle => Box::new(OraclePerception::new(Mismatch::Uniform)),
            Reader::Library(l) => Box::new(LibraryPerception { library: l }),
        }
    }

    /// Value `net` reports for symbol `pos` of `e`.
    pub fn read(&self, net: &NetRef, source: &SymbolSource, e: &Example, pos: usize) -> Result<usize> {
        let s = e.symbols[pos];
        match *self {
            Reader::Oracle => Ok(perfect_read(net.classes, s.class as usize)),
            Reader::Library(l) => {
                let f = l.get(&net.name).ok_or_else(|| Error::Library(format!("no function `{}`", net.name)))?;
                let img = source.image(e.split, s.class as usize, s.index as usize);
                Ok(f.classify(&Tensor::new([1, IMAGE_PIXELS], img.to_vec())?)?[0])
            }
        }
    }
}

/// Accuracy of the discrete program on grid examples.
pub fn grid_discrete_accuracy(
    model: &GridModel,
    listing: &ProgramListing,
    examples: &[Example],
    source: &SymbolSource,
    reader: Reader<'_>,
) -> Result<f64> {
    let refs: Vec<&Example> = examples.iter().collect();
    let batch = model.batch(&refs, source)?;
    let perception = reader.perception();
    let mut correct = 0;
    for (i, e) in examples.iter().enumerate() {
        if concrete_eval(&model.graph, listing, &batch, i, perception.as_ref())?.observed == [e.label] {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len().max(1) as f64)
}

/// Accuracy of an extracted Math program, and how many runs did not halt.
pub fn math_discrete_accuracy(
    program: &MathProgram,
    nets: &[NetRef],
    examples: &[Example],
    source: &SymbolSource,
    reader: Reader<'_>,
    math: &MathConfig,
) -> Result<(f64, usize)> {
    let (mut correct, mut stuck) = (0, 0);
    for e in examples {
        let len = e.symbols.len();
        let mut failure = None;
        let out = program.run(
            len,
            |n, p| match reader.read(&nets[n], source, e, p) {
                Ok(v) => v,
                Err(err) => {
                    failure.get_or_insert(err);
                    0
                }
            },
            math.steps_for(len),
        );
        if let Some(err) = failure {
            return Err(err);
        }
        match out {
            Outcome::Halted { value, .. } if value == e.label => correct += 1,
            Outcome::Halted { .. } => {}
            Outcome::NonHalt => stuck += 1,
        }
    }
    Ok((correct as f64 / examples.len().max(1) as f64, stuck))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LengthRow {
    pub digits: usize,
    /// `None` when the differentiable run was skipped.
    pub differentiable: Option<f64>,
    pub discrete: f64,
    pub non_halting: usize,
}

/// Held-out Math examples with `digits` digits, identical for equal seeds.
pub fn math_examples(source: &SymbolSource, digits: usize, n: usize, seed: u64) -> Result<Vec<Example>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(digits as u64);
    (0..n).map(|_| gen_example(TaskId::MATH, source, Split::Test, digits, &mut rng)).collect()
}

/// Accuracy per expression length of the soft machine (when `digits` is at
/// most `differentiable_up_to`) and of the extracted program.
#[allow(clippy::too_many_arguments)]
pub fn math_sweep(
    trained: &MathModel,
    params: &ProgramParams,
    math: &MathConfig,
    source: &SymbolSource,
    reader: Reader<'_>,
    lengths: &[usize],
    per_length: usize,
    seed: u64,
    differentiable_up_to: usize,
    chunk: usize,
) -> Result<Vec<LengthRow>> {
    let listing = TaskModel::Math(MathModel::build(trained.shape, trained.tape_len, trained.steps, &trained.nets)?)
        .extract(params);
    let program = MathProgram::from_listing(&listing, trained.shape)?;
    let mut rows = Vec::new();
    for &digits in lengths {
        if digits == 0 {
            return Err(Error::Config("expression lengths start at 1 digit".into()));
        }
        let examples = math_examples(source, digits, per_length, seed)?;
        let differentiable = if digits <= differentiable_up_to {
            let model = TaskModel::Math(math_at_length(trained, digits, math)?);
            let p = ProgramParams::from_parts(model.graph(), params.logits().to_vec())?;
            let perception = reader.perception();
            let Score { accuracy, .. } = model.score(&p, &examples, source, perception.as_ref(), chunk)?;
            Some(accuracy)
        } else {
            None
        };
        let (discrete, non_halting) = math_discrete_accuracy(&program, &trained.nets, &examples, source, reader, math)?;
        rows.push(LengthRow { digits, differentiable, discrete, non_halting });
    }
    Ok(rows)
}
