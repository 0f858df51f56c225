//! Exact integer execution of a model under a discrete program.
//!
//! This shares nothing with the marginal compiler beyond the statement list
//! and each indicator's function table, so it serves as an independent oracle.

use super::compile::{Batch, ModelGraph, Perception};
use super::listing::ProgramListing;
use super::model::{ConstValue, NeuralArg, Operand, Statement};
use crate::error::{Error, Result};

/// Values produced by [`concrete_eval`]. Variables in untaken switch branches
/// stay `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteRun {
    pub vars: Vec<Option<usize>>,
    /// Value of each observed variable, in statement order.
    pub observed: Vec<usize>,
}

struct Machine<'a> {
    graph: &'a ModelGraph,
    params: Vec<usize>,
    vars: Vec<Option<usize>>,
    observed: Vec<usize>,
    batch: &'a Batch,
    example: usize,
    perception: &'a dyn Perception,
}

/// Run example `example` of `batch` under `listing`.
pub fn concrete_eval(
    graph: &ModelGraph,
    listing: &ProgramListing,
    batch: &Batch,
    example: usize,
    perception: &dyn Perception,
) -> Result<ConcreteRun> {
    let params = graph
        .model()
        .params()
        .iter()
        .map(|p| {
            let v = listing.get(&p.name).ok_or_else(|| Error::Listing(format!("no value for `{}`", p.name)))?;
            if !p.domain.contains(v) {
                return Err(Error::Listing(format!("`{}` = {v} outside its domain", p.name)));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = Machine {
        graph,
        params,
        vars: vec![None; graph.model().vars().len()],
        observed: Vec::new(),
        batch,
        example,
        perception,
    };
    m.run(graph.model().statements())?;
    Ok(ConcreteRun { vars: m.vars, observed: m.observed })
}

impl Machine<'_> {
    fn read(&self, op: Operand) -> Result<usize> {
        match op {
            Operand::Param(p) => Ok(self.params[p.index()]),
            Operand::Var(v) => self.vars[v.index()].ok_or_else(|| {
                Error::Eval(format!("`{}` read before assignment", self.graph.model().vars()[v.index()].name))
            }),
        }
    }

    fn run(&mut self, statements: &[Statement]) -> Result<()> {
        for s in statements {
            match s {
                Statement::Const { target, value } => {
                    self.vars[target.index()] = Some(match value {
                        ConstValue::Point(v) => *v,
                        ConstValue::Uniform => 0,
                    });
                }
                Statement::CopyInput { target, input } => {
                    let v = self
                        .batch
                        .ints
                        .get(input.0)
                        .and_then(|col| col.get(self.example))
                        .ok_or_else(|| Error::Eval("missing integer input".into()))?;
                    self.vars[target.index()] = Some(*v);
                }
                Statement::Apply { target, function, args } => {
                    let args = args.iter().map(|&a| self.read(a)).collect::<Result<Vec<_>>>()?;
                    self.vars[target.index()] = Some(function.eval(&args));
                }
                Statement::Switch { target, scrutinee, cases } => {
                    let k = self.read(*scrutinee)?;
                    let case = cases
                        .iter()
                        .find(|c| c.value == k)
                        .ok_or_else(|| Error::Eval(format!("no case for value {k}")))?;
                    self.run(&case.body)?;
                    self.vars[target.index()] = Some(self.read(case.result)?);
                }
                Statement::Neural { target, function, args } => {
                    let mut slots = Vec::new();
                    let mut ints = Vec::new();
                    for a in args {
                        match a {
                            NeuralArg::Tensor(s) => slots.push(*s),
                            NeuralArg::Int(op) => ints.push(self.read(*op)?),
                        }
                    }
                    let v = self.perception.classify(function, &slots, &ints, self.batch, self.example)?;
                    self.vars[target.index()] = Some(v);
                }
                Statement::Observe { var, .. } => {
                    let v = self.read(*var)?;
                    self.observed.push(v);
                }
            }
        }
        Ok(())
    }
}
