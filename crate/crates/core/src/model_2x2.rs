//! Straight-line programs over a 2x2 grid of symbol images.
//!
//! The machine has a read head over the cells NW=0, NE=1, SW=2, SE=3 and
//! immutable registers over `0..=18`. Initialization writes `k` registers:
//! the three auxiliary integers (apply tasks only) followed by a READ of the
//! NW cell. Each of the four program lines then writes one new register.

use std::fmt::Write as _;
use std::sync::Arc;

use ntpt_engine::Tensor;

use crate::arith::{add_indicator, arith_indicator, register_domain, REGISTER_SIZE};
use crate::error::{Error, Result};
use crate::neural::{Library, OutputSpec};
use crate::tasks::{Example, Scenario, SymbolSource, TaskId, Variant, IMAGE_PIXELS};
use crate::terpret::{
    compile, lift_cached, Batch, Case, IndicatorTensor, IntDomain, Model, ModelGraph, NeuralArg, Operand, ProgramListing,
    VarId,
};

pub const LINES: usize = 4;
pub const CELLS: usize = 4;

/// Instruction codes of a program line.
pub const NOOP: usize = 0;
pub const MOVE_NORTH: usize = 1;
pub const MOVE_EAST: usize = 2;
pub const MOVE_SOUTH: usize = 3;
pub const MOVE_WEST: usize = 4;
/// `ADD(a, b)` in add tasks, `APPLY(a, b, op)` in apply tasks.
pub const COMBINE: usize = 5;
pub const INSTRUCTIONS: usize = 6;

const MOVE_NAMES: [&str; 4] = ["MOVE_NORTH", "MOVE_EAST", "MOVE_SOUTH", "MOVE_WEST"];

/// Cell reached from `cell` by moving in `dir` (0 north, 1 east, 2 south,
/// 3 west); moves off the grid leave the head where it is.
pub fn move_head(cell: usize, dir: usize) -> usize {
    let (row, col) = (cell / 2, cell % 2);
    let (row, col) = match dir {
        0 => (0, col),
        1 => (row, 1),
        2 => (1, col),
        3 => (row, 0),
        _ => panic!("direction {dir} out of range"),
    };
    row * 2 + col
}

/// A library network the model may call, with its number of classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetRef {
    pub name: String,
    pub classes: usize,
}

impl NetRef {
    pub fn new(name: &str, classes: usize) -> Self {
        NetRef { name: name.to_string(), classes }
    }

    /// All integer-output functions of `library`, in declaration order.
    pub fn from_library(library: &Library) -> Vec<NetRef> {
        library
            .functions()
            .filter_map(|f| match f.spec().output() {
                OutputSpec::Int(d) => Some(NetRef::new(f.name(), d.size())),
                OutputSpec::Tensor(_) => None,
            })
            .collect()
    }
}

/// Parameter names of line `t`.
pub fn line_param(t: usize, field: &str) -> String {
    format!("line{t}.{field}")
}

pub const INIT_NET: &str = "init.net";

pub struct GridModel {
    pub task: TaskId,
    pub nets: Vec<NetRef>,
    pub graph: ModelGraph,
    /// Number of registers written before the program lines.
    pub init_registers: usize,
    pub output: VarId,
}

fn embed(classes: usize) -> Result<Arc<IndicatorTensor>> {
    lift_cached(
        "embed",
        |a| a[0],
        &[IntDomain::new(classes).map_err(|e| Error::Config(e.to_string()))?],
        register_domain(),
    )
}

fn move_indicator(dir: usize) -> Result<Arc<IndicatorTensor>> {
    let cells = IntDomain::new(CELLS).expect("nonzero");
    lift_cached(&format!("move{dir}"), move |a| move_head(a[0], dir), &[cells], cells)
}

fn op_of_register() -> Result<Arc<IndicatorTensor>> {
    lift_cached("op_of", |a| a[0] % 4, &[register_domain()], crate::arith::operator_domain())
}

impl GridModel {
    pub fn build(task: TaskId, nets: &[NetRef]) -> Result<Self> {
        task.variant()?;
        let apply = match task.scenario {
            Scenario::Add2x2 => false,
            Scenario::Apply2x2 => true,
            Scenario::Math => return Err(Error::Config("the grid model does not handle math".into())),
        };
        let needed = if apply { 4 } else { 10 };
        if !nets.iter().any(|n| n.classes == needed) {
            return Err(Error::Library(format!("task `{task}` needs a library function with {needed} outputs")));
        }
        if nets.iter().any(|n| n.classes > REGISTER_SIZE || n.classes == 0) {
            return Err(Error::Library("network outputs must fit in a register".into()));
        }
        let k = if apply { 4 } else { 1 };
        let r = register_domain();
        let cells = IntDomain::new(CELLS).expect("nonzero");
        let net_dom = IntDomain::new(nets.len()).expect("nonempty");

        let mut m = Model::new(task.to_string());
        let slots: Vec<_> = (0..CELLS).map(|c| m.tensor_input(format!("cell{c}"), IMAGE_PIXELS)).collect();
        for n in nets {
            m.declare_neural(&n.name, IntDomain::new(n.classes).expect("nonzero"));
        }
        // emb[n][c]: network n applied to cell c, embedded in a register.
        let mut emb: Vec<Vec<Operand>> = Vec::new();
        for (ni, n) in nets.iter().enumerate() {
            let e = embed(n.classes)?;
            let row = (0..CELLS)
                .map(|c| {
                    let raw = m.neural(format!("raw{ni}_{c}"), &n.name, vec![NeuralArg::Tensor(slots[c])]);
                    Ok(m.apply(format!("emb{ni}_{c}"), &e, &[raw.into()]).into())
                })
                .collect::<Result<Vec<Operand>>>()?;
            emb.push(row);
        }

        let mut regs: Vec<Operand> = Vec::new();
        if apply {
            for i in 0..3 {
                let input = m.input(format!("aux{i}"), r);
                regs.push(m.copy_input(format!("R{i}"), input).into());
            }
        }
        let init_net = m.param(INIT_NET, net_dom);
        let nw: Vec<Operand> = emb.iter().map(|row| row[0]).collect();
        regs.push(m.select(format!("R{}", k - 1), init_net, &nw).into());

        let mut head: Operand = m.constant("head0", cells, crate::terpret::ConstValue::Point(0)).into();
        let add = add_indicator()?;
        let arith = arith_indicator()?;
        let op_of = op_of_register()?;
        for t in 0..LINES {
            let avail = IntDomain::new(k + t).expect("nonzero");
            let instr = m.param(line_param(t, "instr"), IntDomain::new(INSTRUCTIONS).expect("nonzero"));
            let net = m.param(line_param(t, "net"), net_dom);
            let a = m.param(line_param(t, "a"), avail);
            let b = m.param(line_param(t, "b"), avail);
            let av = m.select(format!("l{t}_a"), a, &regs);
            let bv = m.select(format!("l{t}_b"), b, &regs);
            let combined = if apply {
                let c = m.param(line_param(t, "op"), avail);
                let cv = m.select(format!("l{t}_op"), c, &regs);
                let op = m.apply(format!("l{t}_opcode"), &op_of, &[cv.into()]);
                m.apply(format!("l{t}_apply"), &arith, &[av.into(), bv.into(), op.into()])
            } else {
                m.apply(format!("l{t}_add"), &add, &[av.into(), bv.into()])
            };
            // The chosen network's reading of every cell.
            let seen: Vec<Operand> = (0..CELLS)
                .map(|c| {
                    let per_net: Vec<Operand> = emb.iter().map(|row| row[c]).collect();
                    m.select(format!("l{t}_seen{c}"), net, &per_net).into()
                })
                .collect();
            let mut new_heads = Vec::new();
            let mut reads = Vec::new();
            for dir in 0..4 {
                let h = m.apply(format!("l{t}_head{dir}"), &move_indicator(dir)?, &[head]);
                reads.push(Operand::from(m.select(format!("l{t}_read{dir}"), h, &seen)));
                new_heads.push(Operand::from(h));
            }
            let mut head_cases = vec![head];
            head_cases.extend(&new_heads);
            head_cases.push(head);
            head = m.select(format!("head{}", t + 1), instr, &head_cases).into();
            let mut value_cases = vec![Operand::from(av)];
            value_cases.extend(&reads);
            value_cases.push(combined.into());
            let cases = value_cases.into_iter().enumerate().map(|(v, o)| Case::select(v, o)).collect();
            regs.push(m.switch(format!("R{}", k + t), r, instr, cases).into());
        }
        let Operand::Var(output) = *regs.last().expect("registers") else { unreachable!() };
        let out = m.output("result", r);
        m.observe(output, out);
        Ok(GridModel { task, nets: nets.to_vec(), graph: compile(m)?, init_registers: k, output })
    }

    pub fn is_apply(&self) -> bool {
        self.task.scenario == Scenario::Apply2x2
    }

    /// Index of the first network with `classes` outputs.
    fn net_for(&self, classes: usize) -> usize {
        self.nets.iter().position(|n| n.classes == classes).unwrap_or(0)
    }

    /// A correct program for the task, writing its result in the final line.
    pub fn golden(&self) -> ProgramListing {
        let variant = self.task.variant.expect("grid task");
        let k = self.init_registers;
        let net = self.net_for(if self.is_apply() { 4 } else { 10 });
        let mut l = ProgramListing::new().with(INIT_NET, net);
        // Move lines first: the second cell is adjacent to NW for top and
        // left; bottom and right need two moves.
        let moves: Vec<usize> = match variant {
            Variant::Top => vec![MOVE_EAST],
            Variant::Left => vec![MOVE_SOUTH],
            Variant::Bottom => vec![MOVE_SOUTH, MOVE_EAST],
            Variant::Right => vec![MOVE_EAST, MOVE_SOUTH],
        };
        // Registers holding the two cells of interest.
        let (first, second) = if moves.len() == 1 { (k - 1, k) } else { (k, k + 1) };
        let mut lines: Vec<(usize, usize, usize, usize)> = moves.iter().map(|&mv| (mv, 0, 0, 0)).collect();
        if self.is_apply() {
            lines.push((COMBINE, 0, 1, first));
            lines.push((COMBINE, k + lines.len() - 1, 2, second));
        } else {
            lines.push((COMBINE, first, second, 0));
        }
        while lines.len() < LINES {
            let prev = k + lines.len() - 1;
            lines.push((NOOP, prev, 0, 0));
        }
        for (t, (instr, a, b, op)) in lines.into_iter().enumerate() {
            l.set(line_param(t, "instr"), instr);
            l.set(line_param(t, "net"), net);
            l.set(line_param(t, "a"), a);
            l.set(line_param(t, "b"), b);
            if self.is_apply() {
                l.set(line_param(t, "op"), op);
            }
        }
        l
    }

    /// Source-code form of a listing.
    pub fn render(&self, listing: &ProgramListing) -> String {
        let k = self.init_registers;
        let get = |name: &str| listing.get(name).unwrap_or(0);
        let net_name = |i: usize| self.nets.get(i).map(|n| n.name.as_str()).unwrap_or("?");
        let mut s = String::from("# initialization:\n");
        if self.is_apply() {
            for i in 0..3 {
                let _ = writeln!(s, "R{i} = InputInt[{i}]");
            }
        }
        let _ = writeln!(s, "R{} = READ {}", k - 1, net_name(get(INIT_NET)));
        s.push_str("# program:\n");
        for t in 0..LINES {
            let p = |f: &str| get(&line_param(t, f));
            let line = match p("instr") {
                NOOP => format!("NOOP(R{})", p("a")),
                COMBINE if self.is_apply() => format!("APPLY(R{}, R{}, R{})", p("a"), p("b"), p("op")),
                COMBINE => format!("ADD(R{}, R{})", p("a"), p("b")),
                mv => format!("{} {}", MOVE_NAMES[mv - 1], net_name(p("net"))),
            };
            let _ = writeln!(s, "R{} = {line}", k + t);
        }
        let _ = write!(s, "return R{}", k + LINES - 1);
        s
    }

    /// Batch of examples in the slot layout of this model.
    pub fn batch(&self, examples: &[&Example], source: &SymbolSource) -> Result<Batch> {
        let n = examples.len();
        let mut tensors = vec![vec![0.0; n * IMAGE_PIXELS]; CELLS];
        let mut symbols = vec![vec![0; n]; CELLS];
        let mut ints = vec![vec![0; n]; if self.is_apply() { 3 } else { 0 }];
        let mut labels = Vec::with_capacity(n);
        for (b, e) in examples.iter().enumerate() {
            if e.symbols.len() != CELLS || e.aux.len() != ints.len() {
                return Err(Error::Eval(format!("example does not fit task `{}`", self.task)));
            }
            for (c, s) in e.symbols.iter().enumerate() {
                let img = source.image(e.split, s.class as usize, s.index as usize);
                tensors[c][b * IMAGE_PIXELS..(b + 1) * IMAGE_PIXELS].copy_from_slice(img);
                symbols[c][b] = s.class as usize;
            }
            for (i, &v) in e.aux.iter().enumerate() {
                ints[i][b] = v;
            }
            labels.push(e.label);
        }
        Ok(Batch {
            size: n,
            ints,
            tensors: tensors.into_iter().map(|d| Tensor::new([n, IMAGE_PIXELS], d)).collect::<std::result::Result<_, _>>()?,
            symbols,
            outputs: vec![labels],
        })
    }
}
