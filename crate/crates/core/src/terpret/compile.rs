//! Compilation of a [`Model`] to marginal semantics on a tape.
//!
//! Every integer variable becomes a `[batch, N]` tensor of marginals. The two
//! lifting rules are:
//!
//! * function application `z = f(x, y)` becomes
//!   `mu_z[i] = sum_jk I[i, j, k] mu_x[j] mu_y[k]` (the `contract` primitive);
//! * a switch `z = case_v if x == v` becomes `mu_z = sum_v mu_x[v] mu_case_v`
//!   (the `mix` primitive).
//!
//! Params are softmaxes over learnable logits, shared by every example in the
//! batch.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use ntpt_engine::{NodeId, ParamMut, Tape, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::domain::{IntDomain, MarginalVec};
use super::listing::ProgramListing;
use super::model::{ConstValue, Model, NeuralArg, Operand, Statement, TensorSlot, VarId};
use crate::error::{Error, Result};

/// Floor applied inside the observation log-likelihood.
pub const PROB_FLOOR: f64 = 1e-12;

/// A validated model with statements in dependency order.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    model: Model,
}

/// Examples fed to a forward pass, column-major by slot.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub size: usize,
    /// Per integer input slot, one value per example.
    pub ints: Vec<Vec<usize>>,
    /// Per tensor slot, a `[size, width]` tensor.
    pub tensors: Vec<Tensor>,
    /// Per tensor slot, the ground-truth symbol class of each example's
    /// tensor. Only oracle perception reads this; may be empty.
    pub symbols: Vec<Vec<usize>>,
    /// Per output slot, the observed value of each example.
    pub outputs: Vec<Vec<usize>>,
}

/// Differentiable call of a library function.
pub struct NeuralCall<'a> {
    pub function: &'a str,
    pub output: IntDomain,
    /// Tensor arguments as `(slot, [batch, width] node)`.
    pub tensors: Vec<(TensorSlot, NodeId)>,
    /// Integer arguments as `[batch, N]` marginal nodes.
    pub ints: Vec<NodeId>,
    pub batch: &'a Batch,
}

/// Source of neural function outputs, both differentiable and discrete.
pub trait Perception {
    /// `[batch, output]` distribution recorded on `tape`.
    fn forward(&self, tape: &mut Tape, call: &NeuralCall<'_>) -> Result<NodeId>;

    /// Discrete output for one example.
    fn classify(
        &self,
        function: &str,
        tensors: &[TensorSlot],
        ints: &[usize],
        batch: &Batch,
        example: usize,
    ) -> Result<usize>;
}

/// Perception for models without neural calls.
pub struct NoPerception;

impl Perception for NoPerception {
    fn forward(&self, _: &mut Tape, call: &NeuralCall<'_>) -> Result<NodeId> {
        Err(Error::Eval(format!("no perception available for `{}`", call.function)))
    }

    fn classify(&self, function: &str, _: &[TensorSlot], _: &[usize], _: &Batch, _: usize) -> Result<usize> {
        Err(Error::Eval(format!("no perception available for `{function}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossReduction {
    #[default]
    Mean,
    Sum,
}

/// Tape handles produced by [`ModelGraph::forward`].
#[derive(Clone, Debug)]
pub struct Forward {
    vars: Vec<Option<NodeId>>,
    pub loss: Option<NodeId>,
    /// Observed variables in statement order.
    pub observed: Vec<NodeId>,
}

impl Forward {
    pub fn var(&self, v: VarId) -> Option<NodeId> {
        self.vars[v.0]
    }

    /// Marginal of `v` for one example.
    pub fn marginal(&self, tape: &Tape, v: VarId, example: usize) -> Option<MarginalVec> {
        let node = self.vars[v.0]?;
        MarginalVec::new(tape.value(node).row_slice(example).to_vec()).ok()
    }
}

/// Learnable logits for every param of a model, stored as `[1, N]` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramParams {
    names: Vec<String>,
    logits: Vec<Tensor>,
}

impl ProgramParams {
    /// Logits drawn from `Normal(0, std)`, giving near-uniform programs.
    pub fn init(graph: &ModelGraph, rng: &mut impl Rng, std: f64) -> Self {
        let normal = Normal::new(0.0, std).expect("valid std");
        let logits = graph
            .model
            .params
            .iter()
            .map(|p| {
                let n = p.domain.size();
                Tensor::new([1, n], (0..n).map(|_| normal.sample(rng)).collect()).expect("shape")
            })
            .collect();
        ProgramParams { names: graph.param_names(), logits }
    }

    pub fn zeros(graph: &ModelGraph) -> Self {
        let logits = graph.model.params.iter().map(|p| Tensor::zeros([1, p.domain.size()])).collect();
        ProgramParams { names: graph.param_names(), logits }
    }

    /// Logit `logit` on each listed value and 0 elsewhere.
    pub fn from_listing(graph: &ModelGraph, listing: &ProgramListing, logit: f64) -> Result<Self> {
        let mut out = ProgramParams::zeros(graph);
        for (i, p) in graph.model.params.iter().enumerate() {
            let v = listing
                .get(&p.name)
                .ok_or_else(|| Error::Listing(format!("listing has no value for `{}`", p.name)))?;
            if !p.domain.contains(v) {
                return Err(Error::Listing(format!("`{}` = {v} outside its domain", p.name)));
            }
            out.logits[i].data_mut()[v] = logit;
        }
        Ok(out)
    }

    pub fn from_parts(graph: &ModelGraph, logits: Vec<Tensor>) -> Result<Self> {
        let expected: Vec<usize> = graph.model.params.iter().map(|p| p.domain.size()).collect();
        if logits.len() != expected.len() || logits.iter().zip(&expected).any(|(t, &n)| t.shape() != [1, n]) {
            return Err(Error::Listing(format!("logit shapes do not match `{}`", graph.name())));
        }
        Ok(ProgramParams { names: graph.param_names(), logits })
    }

    /// Tape names, `<model>/<param>`.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn logits(&self) -> &[Tensor] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [Tensor] {
        &mut self.logits
    }

    pub fn iter_mut<'a>(&'a mut self, group: &'a str) -> impl Iterator<Item = ParamMut<'a>> + 'a {
        self.names
            .iter()
            .zip(self.logits.iter_mut())
            .map(move |(name, value)| ParamMut { name, group: Some(group), value })
    }
}

impl ModelGraph {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn name(&self) -> &str {
        &self.model.name
    }

    fn param_names(&self) -> Vec<String> {
        self.model.params.iter().map(|p| format!("{}/{}", self.model.name, p.name)).collect()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.model.params.iter().position(|p| p.name == name)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.model.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Syntactically distinct programs: the product of all param domain sizes.
    pub fn program_space(&self) -> f64 {
        self.model.params.iter().map(|p| p.domain.size() as f64).product()
    }

    /// Record the marginal-semantics evaluation of `batch` on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ProgramParams,
        batch: &Batch,
        perception: &dyn Perception,
        reduction: LossReduction,
    ) -> Result<Forward> {
        if params.logits.len() != self.model.params.len() {
            return Err(Error::Eval("param count does not match model".into()));
        }
        let mut ctx = Exec {
            model: &self.model,
            tape,
            logits: params,
            params: vec![None; self.model.params.len()],
            vars: vec![None; self.model.vars.len()],
            slots: vec![None; self.model.tensor_inputs.len()],
            batch,
            perception,
            terms: Vec::new(),
            observed: Vec::new(),
            reduction,
        };
        ctx.run(&self.model.statements)?;
        let loss = match ctx.terms.split_first() {
            None => None,
            Some((&first, rest)) => {
                let mut acc = first;
                for &t in rest {
                    acc = ctx.tape.add(acc, t)?;
                }
                Some(acc)
            }
        };
        Ok(Forward { vars: ctx.vars, loss, observed: ctx.observed })
    }
}

struct Exec<'a, 't> {
    model: &'a Model,
    tape: &'t mut Tape,
    logits: &'a ProgramParams,
    params: Vec<Option<NodeId>>,
    vars: Vec<Option<NodeId>>,
    slots: Vec<Option<NodeId>>,
    batch: &'a Batch,
    perception: &'a dyn Perception,
    terms: Vec<NodeId>,
    observed: Vec<NodeId>,
    reduction: LossReduction,
}

impl Exec<'_, '_> {
    fn operand(&mut self, op: Operand) -> Result<NodeId> {
        match op {
            Operand::Var(v) => self.vars[v.0]
                .ok_or_else(|| Error::Eval(format!("`{}` read before assignment", self.model.vars[v.0].name))),
            Operand::Param(p) => {
                if let Some(id) = self.params[p.0] {
                    return Ok(id);
                }
                let logits = self.tape.param(&self.logits.names[p.0], &self.logits.logits[p.0]);
                let probs = self.tape.softmax(logits)?;
                let expanded = self.tape.gather(probs, &vec![0; self.batch.size])?;
                self.params[p.0] = Some(expanded);
                Ok(expanded)
            }
        }
    }

    fn slot(&mut self, slot: TensorSlot) -> Result<NodeId> {
        if let Some(id) = self.slots[slot.0] {
            return Ok(id);
        }
        let t = self
            .batch
            .tensors
            .get(slot.0)
            .ok_or_else(|| Error::Eval(format!("batch has no tensor slot {}", slot.0)))?;
        let id = self.tape.leaf(t.clone());
        self.slots[slot.0] = Some(id);
        Ok(id)
    }

    fn one_hot(&self, n: usize, values: impl Iterator<Item = usize>) -> Tensor {
        let mut t = Tensor::zeros([self.batch.size, n]);
        for (b, v) in values.enumerate() {
            t.data_mut()[b * n + v] = 1.0;
        }
        t
    }

    fn run(&mut self, statements: &[Statement]) -> Result<()> {
        for s in statements {
            self.exec(s)?;
        }
        Ok(())
    }

    fn exec(&mut self, s: &Statement) -> Result<()> {
        match s {
            Statement::Const { target, value } => {
                let n = self.model.vars[target.0].domain.size();
                let t = match value {
                    ConstValue::Point(v) => self.one_hot(n, std::iter::repeat(*v).take(self.batch.size)),
                    ConstValue::Uniform => Tensor::full([self.batch.size, n], 1.0 / n as f64),
                };
                self.vars[target.0] = Some(self.tape.leaf(t));
            }
            Statement::CopyInput { target, input } => {
                let n = self.model.inputs[input.0].domain.size();
                let values = self
                    .batch
                    .ints
                    .get(input.0)
                    .ok_or_else(|| Error::Eval(format!("batch has no integer input {}", input.0)))?;
                if values.len() != self.batch.size || values.iter().any(|&v| v >= n) {
                    return Err(Error::Eval(format!("bad values for input `{}`", self.model.inputs[input.0].name)));
                }
                let t = self.one_hot(n, values.iter().copied());
                self.vars[target.0] = Some(self.tape.leaf(t));
            }
            Statement::Apply { target, function, args } => {
                let ids = args.iter().map(|&a| self.operand(a)).collect::<Result<Vec<_>>>()?;
                self.vars[target.0] = Some(self.tape.contract(function.contraction(), &ids)?);
            }
            Statement::Switch { target, scrutinee, cases } => {
                let weights = self.operand(*scrutinee)?;
                let mut results = vec![None; cases.len()];
                for case in cases {
                    self.run(&case.body)?;
                    results[case.value] = Some(self.operand(case.result)?);
                }
                let results: Vec<NodeId> = results.into_iter().map(|r| r.expect("validated")).collect();
                self.vars[target.0] = Some(self.tape.mix(weights, &results)?);
            }
            Statement::Neural { target, function, args } => {
                let mut tensors = Vec::new();
                let mut ints = Vec::new();
                for a in args {
                    match a {
                        NeuralArg::Tensor(slot) => tensors.push((*slot, self.slot(*slot)?)),
                        NeuralArg::Int(op) => ints.push(self.operand(*op)?),
                    }
                }
                let call = NeuralCall {
                    function,
                    output: self.model.vars[target.0].domain,
                    tensors,
                    ints,
                    batch: self.batch,
                };
                self.vars[target.0] = Some(self.perception.forward(self.tape, &call)?);
            }
            Statement::Observe { var, output } => {
                let node = self.operand(*var)?;
                let values = self
                    .batch
                    .outputs
                    .get(output.0)
                    .ok_or_else(|| Error::Eval(format!("batch has no output {}", output.0)))?;
                let picked = self.tape.select(node, values)?;
                let logs = self.tape.log(picked, PROB_FLOOR)?;
                let total = self.tape.sum_axis(logs, 0)?;
                let scale = match self.reduction {
                    LossReduction::Mean => -1.0 / self.batch.size as f64,
                    LossReduction::Sum => -1.0,
                };
                let term = self.tape.scale(total, scale)?;
                self.terms.push(term);
                self.observed.push(node);
            }
        }
        Ok(())
    }
}

/// Validate `model` and put its statements in dependency order.
pub fn compile(mut model: Model) -> Result<ModelGraph> {
    for p in &model.params {
        if p.domain.size() == 0 {
            return Err(Error::compile(&p.name, "empty param domain"));
        }
    }
    let statements = std::mem::take(&mut model.statements);
    let mut assigned = vec![0u32; model.vars.len()];
    let sorted = sort_scope(&model, statements, &HashSet::new(), &mut assigned)?;
    model.statements = sorted;
    Ok(ModelGraph { model })
}

fn var_name(model: &Model, v: VarId) -> String {
    model.vars.get(v.0).map(|d| d.name.clone()).unwrap_or_else(|| format!("#{}", v.0))
}

/// Vars read by `s` that it does not itself define.
fn free_reads(s: &Statement, out: &mut HashSet<VarId>) {
    let push = |op: &Operand, out: &mut HashSet<VarId>| {
        if let Operand::Var(v) = op {
            out.insert(*v);
        }
    };
    match s {
        Statement::Const { .. } | Statement::CopyInput { .. } => {}
        Statement::Apply { args, .. } => args.iter().for_each(|a| push(a, out)),
        Statement::Neural { args, .. } => {
            for a in args {
                if let NeuralArg::Int(op) = a {
                    push(op, out);
                }
            }
        }
        Statement::Observe { var, .. } => push(var, out),
        Statement::Switch { scrutinee, cases, .. } => {
            push(scrutinee, out);
            for c in cases {
                let mut inner = HashSet::new();
                let mut defined = HashSet::new();
                for b in &c.body {
                    free_reads(b, &mut inner);
                    collect_targets(b, &mut defined);
                }
                push(&c.result, &mut inner);
                out.extend(inner.difference(&defined));
            }
        }
    }
}

fn collect_targets(s: &Statement, out: &mut HashSet<VarId>) {
    if let Some(t) = s.target() {
        out.insert(t);
    }
    if let Statement::Switch { cases, .. } = s {
        for c in cases {
            for b in &c.body {
                collect_targets(b, out);
            }
        }
    }
}

fn check_statement(model: &Model, s: &Statement) -> Result<()> {
    let dom = |op: Operand| -> Result<IntDomain> {
        match op {
            Operand::Var(v) => model.vars.get(v.0).map(|d| d.domain).ok_or_else(|| Error::compile(format!("#{}", v.0), "undeclared var")),
            Operand::Param(p) => model.params.get(p.0).map(|d| d.domain).ok_or_else(|| Error::compile(format!("#{}", p.0), "undeclared param")),
        }
    };
    let target = s.target();
    if let Some(t) = target {
        if t.0 >= model.vars.len() {
            return Err(Error::compile(format!("#{}", t.0), "undeclared target"));
        }
    }
    let tname = || target.map(|t| var_name(model, t)).unwrap_or_default();
    let tdom = || model.vars[target.expect("has target").0].domain;
    match s {
        Statement::Const { value, .. } => {
            if let ConstValue::Point(v) = value {
                if !tdom().contains(*v) {
                    return Err(Error::compile(tname(), format!("constant {v} outside domain")));
                }
            }
        }
        Statement::CopyInput { input, .. } => {
            let d = model.inputs.get(input.0).ok_or_else(|| Error::compile(tname(), "undeclared input"))?;
            if d.domain != tdom() {
                return Err(Error::compile(tname(), format!("input `{}` has a different domain", d.name)));
            }
        }
        Statement::Apply { function, args, .. } => {
            if args.len() != function.arity() {
                return Err(Error::compile(
                    tname(),
                    format!("`{}` takes {} arguments, got {}", function.name(), function.arity(), args.len()),
                ));
            }
            for (i, (&a, &d)) in args.iter().zip(function.in_domains()).enumerate() {
                if dom(a)? != d {
                    return Err(Error::compile(
                        tname(),
                        format!(
                            "argument {i} of `{}` has domain {} but {} is expected",
                            function.name(),
                            dom(a)?.size(),
                            d.size()
                        ),
                    ));
                }
            }
            if function.out_domain() != tdom() {
                return Err(Error::compile(tname(), format!("`{}` output domain differs from target", function.name())));
            }
        }
        Statement::Switch { scrutinee, cases, .. } => {
            let k = dom(*scrutinee)?.size();
            let mut seen = vec![false; k];
            for c in cases {
                if c.value >= k || seen[c.value] {
                    return Err(Error::compile(tname(), format!("case {} is out of range or repeated", c.value)));
                }
                seen[c.value] = true;
                if dom(c.result)? != tdom() {
                    return Err(Error::compile(tname(), format!("case {} result has a different domain", c.value)));
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::compile(tname(), format!("missing case {missing}")));
            }
        }
        Statement::Neural { function, args, .. } => {
            let decl = model
                .neural
                .iter()
                .find(|n| &n.name == function)
                .ok_or_else(|| Error::compile(tname(), format!("undeclared neural function `{function}`")))?;
            if decl.output != tdom() {
                return Err(Error::compile(tname(), format!("`{function}` output domain differs from target")));
            }
            if args.is_empty() {
                return Err(Error::compile(tname(), format!("`{function}` called without inputs")));
            }
            for a in args {
                match a {
                    NeuralArg::Tensor(slot) if slot.0 >= model.tensor_inputs.len() => {
                        return Err(Error::compile(tname(), "undeclared tensor input"));
                    }
                    NeuralArg::Int(op) => {
                        dom(*op)?;
                    }
                    _ => {}
                }
            }
        }
        Statement::Observe { var, output } => {
            let d = model.outputs.get(output.0).ok_or_else(|| Error::compile(model.operand_name(*var), "undeclared output"))?;
            if dom(*var)? != d.domain {
                return Err(Error::compile(model.operand_name(*var), format!("observed output `{}` has a different domain", d.name)));
            }
        }
    }
    Ok(())
}

fn sort_scope(
    model: &Model,
    statements: Vec<Statement>,
    visible: &HashSet<VarId>,
    assigned: &mut [u32],
) -> Result<Vec<Statement>> {
    let mut defined_here: HashMap<VarId, usize> = HashMap::new();
    for (i, s) in statements.iter().enumerate() {
        check_statement(model, s)?;
        if let Some(t) = s.target() {
            assigned[t.0] += 1;
            if assigned[t.0] > 1 {
                return Err(Error::compile(var_name(model, t), "assigned more than once"));
            }
            defined_here.insert(t, i);
        }
    }

    let n = statements.len();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (i, s) in statements.iter().enumerate() {
        let mut reads = HashSet::new();
        free_reads(s, &mut reads);
        let mut reads: Vec<VarId> = reads.into_iter().collect();
        reads.sort();
        for v in reads {
            match defined_here.get(&v) {
                Some(&j) if j == i => {
                    return Err(Error::compile(var_name(model, v), "cyclic dependency"));
                }
                Some(&j) => {
                    deps[j].push(i);
                    indegree[i] += 1;
                }
                None if visible.contains(&v) => {}
                None => return Err(Error::compile(var_name(model, v), "read but never assigned in scope")),
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &j in &deps[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).expect("some statement remains");
        let name = statements[stuck].target().map(|t| var_name(model, t)).unwrap_or_else(|| "<observe>".into());
        return Err(Error::compile(name, "cyclic dependency"));
    }

    let mut inner_visible = visible.clone();
    inner_visible.extend(defined_here.keys().copied());
    let mut slots: Vec<Option<Statement>> = statements.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(n);
    for i in order {
        let mut s = slots[i].take().expect("each statement placed once");
        if let Statement::Switch { cases, target, .. } = &mut s {
            for c in cases.iter_mut() {
                let body = std::mem::take(&mut c.body);
                let body = sort_scope(model, body, &inner_visible, assigned)?;
                let mut body_defs = HashSet::new();
                for b in &body {
                    collect_targets(b, &mut body_defs);
                }
                if let Operand::Var(r) = c.result {
                    if r == *target {
                        return Err(Error::compile(var_name(model, r), "switch reads its own target"));
                    }
                    if !body_defs.contains(&r) && !inner_visible.contains(&r) {
                        return Err(Error::compile(var_name(model, r), "read but never assigned in scope"));
                    }
                }
                c.body = body;
            }
        }
        out.push(s);
    }
    Ok(out)
}
