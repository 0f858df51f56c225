//! Builder API for interpreter models.
//!
//! A [`Model`] is a list of single-assignment statements over bounded-integer
//! variables, learnable `Param`s, integer inputs, tensor inputs and observed
//! outputs. Nothing is checked here; [`super::compile`] validates domains,
//! scoping and ordering.

use std::sync::Arc;

use super::domain::IntDomain;
use super::indicator::IndicatorTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InputId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorSlot(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OutputId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl TensorSlot {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Something a statement can read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(VarId),
    Param(ParamId),
}

impl From<VarId> for Operand {
    fn from(v: VarId) -> Self {
        Operand::Var(v)
    }
}

impl From<ParamId> for Operand {
    fn from(p: ParamId) -> Self {
        Operand::Param(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstValue {
    Point(usize),
    /// Uniform distribution; concretely it evaluates to 0.
    Uniform,
}

#[derive(Clone, Debug)]
pub enum NeuralArg {
    Tensor(TensorSlot),
    Int(Operand),
}

/// One branch of a [`Statement::Switch`]. `body` runs in its own scope and
/// `result` is the value the switch target takes in this branch.
#[derive(Clone, Debug)]
pub struct Case {
    pub value: usize,
    pub body: Vec<Statement>,
    pub result: Operand,
}

impl Case {
    pub fn select(value: usize, result: impl Into<Operand>) -> Self {
        Case { value, body: Vec::new(), result: result.into() }
    }
}

#[derive(Clone, Debug)]
pub enum Statement {
    Const { target: VarId, value: ConstValue },
    CopyInput { target: VarId, input: InputId },
    Apply { target: VarId, function: Arc<IndicatorTensor>, args: Vec<Operand> },
    Switch { target: VarId, scrutinee: Operand, cases: Vec<Case> },
    /// Call of a learnable function from the neural library.
    Neural { target: VarId, function: String, args: Vec<NeuralArg> },
    Observe { var: Operand, output: OutputId },
}

impl Statement {
    pub fn target(&self) -> Option<VarId> {
        match self {
            Statement::Const { target, .. }
            | Statement::CopyInput { target, .. }
            | Statement::Apply { target, .. }
            | Statement::Switch { target, .. }
            | Statement::Neural { target, .. } => Some(*target),
            Statement::Observe { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub name: String,
    pub domain: IntDomain,
}

#[derive(Clone, Debug)]
pub struct TensorDecl {
    pub name: String,
    pub width: usize,
}

/// A neural library function the model calls, with the integer domain its
/// softmax output ranges over.
#[derive(Clone, Debug)]
pub struct NeuralDecl {
    pub name: String,
    pub output: IntDomain,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub(crate) name: String,
    pub(crate) params: Vec<Decl>,
    pub(crate) vars: Vec<Decl>,
    pub(crate) inputs: Vec<Decl>,
    pub(crate) tensor_inputs: Vec<TensorDecl>,
    pub(crate) outputs: Vec<Decl>,
    pub(crate) neural: Vec<NeuralDecl>,
    pub(crate) statements: Vec<Statement>,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Model {
            name: name.into(),
            params: Vec::new(),
            vars: Vec::new(),
            inputs: Vec::new(),
            tensor_inputs: Vec::new(),
            outputs: Vec::new(),
            neural: Vec::new(),
            statements: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[Decl] {
        &self.params
    }

    pub fn vars(&self) -> &[Decl] {
        &self.vars
    }

    pub fn inputs(&self) -> &[Decl] {
        &self.inputs
    }

    pub fn tensor_inputs(&self) -> &[TensorDecl] {
        &self.tensor_inputs
    }

    pub fn outputs(&self) -> &[Decl] {
        &self.outputs
    }

    pub fn neural_functions(&self) -> &[NeuralDecl] {
        &self.neural
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn param(&mut self, name: impl Into<String>, domain: IntDomain) -> ParamId {
        self.params.push(Decl { name: name.into(), domain });
        ParamId(self.params.len() - 1)
    }

    pub fn var(&mut self, name: impl Into<String>, domain: IntDomain) -> VarId {
        self.vars.push(Decl { name: name.into(), domain });
        VarId(self.vars.len() - 1)
    }

    pub fn input(&mut self, name: impl Into<String>, domain: IntDomain) -> InputId {
        self.inputs.push(Decl { name: name.into(), domain });
        InputId(self.inputs.len() - 1)
    }

    pub fn tensor_input(&mut self, name: impl Into<String>, width: usize) -> TensorSlot {
        self.tensor_inputs.push(TensorDecl { name: name.into(), width });
        TensorSlot(self.tensor_inputs.len() - 1)
    }

    pub fn output(&mut self, name: impl Into<String>, domain: IntDomain) -> OutputId {
        self.outputs.push(Decl { name: name.into(), domain });
        OutputId(self.outputs.len() - 1)
    }

    pub fn declare_neural(&mut self, name: impl Into<String>, output: IntDomain) {
        let name = name.into();
        if !self.neural.iter().any(|n| n.name == name) {
            self.neural.push(NeuralDecl { name, output });
        }
    }

    pub fn push(&mut self, statement: Statement) {
        self.statements.push(statement);
    }

    pub fn domain_of(&self, operand: Operand) -> IntDomain {
        match operand {
            Operand::Var(v) => self.vars[v.0].domain,
            Operand::Param(p) => self.params[p.0].domain,
        }
    }

    pub fn operand_name(&self, operand: Operand) -> &str {
        match operand {
            Operand::Var(v) => &self.vars[v.0].name,
            Operand::Param(p) => &self.params[p.0].name,
        }
    }

    // Convenience constructors: declare the target variable and push the
    // statement that assigns it.

    pub fn constant(&mut self, name: impl Into<String>, domain: IntDomain, value: ConstValue) -> VarId {
        let target = self.var(name, domain);
        self.push(Statement::Const { target, value });
        target
    }

    pub fn copy_input(&mut self, name: impl Into<String>, input: InputId) -> VarId {
        let domain = self.inputs[input.0].domain;
        let target = self.var(name, domain);
        self.push(Statement::CopyInput { target, input });
        target
    }

    pub fn apply(
        &mut self,
        name: impl Into<String>,
        function: &Arc<IndicatorTensor>,
        args: &[Operand],
    ) -> VarId {
        let target = self.var(name, function.out_domain());
        self.push(Statement::Apply { target, function: function.clone(), args: args.to_vec() });
        target
    }

    pub fn switch(
        &mut self,
        name: impl Into<String>,
        domain: IntDomain,
        scrutinee: impl Into<Operand>,
        cases: Vec<Case>,
    ) -> VarId {
        let target = self.var(name, domain);
        self.push(Statement::Switch { target, scrutinee: scrutinee.into(), cases });
        target
    }

    /// `target = results[scrutinee]`, the common selection form of a switch.
    pub fn select(
        &mut self,
        name: impl Into<String>,
        scrutinee: impl Into<Operand>,
        results: &[Operand],
    ) -> VarId {
        let domain = self.domain_of(results[0]);
        let cases = results.iter().enumerate().map(|(v, &r)| Case::select(v, r)).collect();
        self.switch(name, domain, scrutinee, cases)
    }

    pub fn neural(&mut self, name: impl Into<String>, function: &str, args: Vec<NeuralArg>) -> VarId {
        let output = self
            .neural
            .iter()
            .find(|n| n.name == function)
            .map(|n| n.output)
            .expect("neural function must be declared before it is called");
        let target = self.var(name, output);
        self.push(Statement::Neural { target, function: function.to_string(), args });
        target
    }

    pub fn observe(&mut self, var: impl Into<Operand>, output: OutputId) {
        self.push(Statement::Observe { var: var.into(), output });
    }

    /// Build the statements of a case body in their own scope. The closure's
    /// statements are collected into the returned body instead of the model.
    pub fn scoped<T>(&mut self, build: impl FnOnce(&mut Model) -> T) -> (Vec<Statement>, T) {
        let saved = std::mem::take(&mut self.statements);
        let out = build(self);
        let body = std::mem::replace(&mut self.statements, saved);
        (body, out)
    }
}
