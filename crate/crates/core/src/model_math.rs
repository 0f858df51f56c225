//! A block machine with a loop-capable control flow over a tape of symbols.
//!
//! Every block owns one register and holds one instruction, `MOVE` or
//! `APPLY`, the network a `MOVE` reads through, the argument registers of an
//! `APPLY`, and the block that runs next. Block `k` writes only `Rk`. `MOVE`
//! advances the head and loads the symbol under it; after each instruction
//! the machine halts if the head has passed the last symbol. The halt block
//! returns one register. Initialization reads the first symbol into the last
//! block's register.
//!
//! The differentiable unrolling tracks a control variable over
//! `(block, position)` pairs plus one "halted at step t" state per step, so
//! its final marginal is the distribution of halting times.

use std::fmt::Write as _;
use std::sync::Arc;

use ntpt_engine::Tensor;

use crate::arith::{arith_apply, arith_indicator, register_domain};
use crate::error::{Error, Result};
use crate::model_2x2::NetRef;
use crate::tasks::{symbol_kind, Example, SymbolKind, SymbolSource, IMAGE_PIXELS};
use crate::terpret::{
    compile, lift, lift_cached, Batch, Case, ConstValue, IndicatorTensor, IntDomain, Model, ModelGraph, NeuralArg,
    Operand, ProgramListing, VarId,
};

pub const MOVE: usize = 0;
pub const APPLY: usize = 1;

pub const INIT_NET: &str = "init.net";
pub const RETURN: &str = "halt.return";

pub fn block_param(b: usize, field: &str) -> String {
    format!("block{b}.{field}")
}

/// Number of blocks, which is also the number of registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MachineShape {
    pub blocks: usize,
}

impl Default for MachineShape {
    fn default() -> Self {
        MachineShape { blocks: 3 }
    }
}

impl MachineShape {
    pub fn new(blocks: usize) -> Result<Self> {
        let s = MachineShape { blocks };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.blocks) {
            return Err(Error::Config(format!("block count {} outside 1..=4", self.blocks)));
        }
        Ok(())
    }

    pub fn registers(&self) -> usize {
        self.blocks
    }

    /// Register the initial READ writes.
    pub fn init_register(&self) -> usize {
        self.blocks - 1
    }
}

/// Unrolled steps for a tape of `tape_len` symbols.
pub fn default_steps(tape_len: usize) -> usize {
    2 * tape_len + 2
}

/// One block of a discrete program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub instr: usize,
    pub net: usize,
    pub a: usize,
    pub b: usize,
    pub op: usize,
    pub goto: usize,
}

/// A discrete program for the block machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MathProgram {
    pub init_net: usize,
    pub blocks: Vec<Block>,
    pub ret: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Halted { value: usize, steps: usize },
    NonHalt,
}

impl Outcome {
    pub fn value(self) -> Option<usize> {
        match self {
            Outcome::Halted { value, .. } => Some(value),
            Outcome::NonHalt => None,
        }
    }
}

impl MathProgram {
    /// Read a program from a listing of the given machine shape.
    pub fn from_listing(listing: &ProgramListing, shape: MachineShape) -> Result<Self> {
        let get = |name: &str| listing.get(name).ok_or_else(|| Error::Listing(format!("no value for `{name}`")));
        let blocks = (0..shape.blocks)
            .map(|b| {
                let f = |field: &str| get(&block_param(b, field));
                Ok(Block {
                    instr: f("instr")?,
                    net: f("net")?,
                    a: f("a")?,
                    b: f("b")?,
                    op: f("op")?,
                    goto: f("goto")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = MathProgram { init_net: get(INIT_NET)?, blocks, ret: get(RETURN)? };
        p.check(shape)?;
        Ok(p)
    }

    fn check(&self, shape: MachineShape) -> Result<()> {
        let r = shape.registers();
        let ok = self.blocks.len() == shape.blocks
            && self.ret < r
            && self.blocks.iter().all(|b| {
                b.instr <= APPLY && b.a < r && b.b < r && b.op < r && b.goto < shape.blocks
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Listing("program does not fit the machine shape".into()))
        }
    }

    pub fn to_listing(&self) -> ProgramListing {
        let mut l = ProgramListing::new().with(INIT_NET, self.init_net);
        for (i, b) in self.blocks.iter().enumerate() {
            for (field, v) in [
                ("instr", b.instr),
                ("net", b.net),
                ("a", b.a),
                ("b", b.b),
                ("op", b.op),
                ("goto", b.goto),
            ] {
                l.set(block_param(i, field), v);
            }
        }
        l.set(RETURN, self.ret);
        l
    }

    /// The loop `MOVE` operator, `MOVE` digit, `APPLY`: R0 holds the
    /// operator, R1 the digit and the last register the running value.
    /// `digit_net` and `op_net` are network indices.
    pub fn golden(shape: MachineShape, digit_net: usize, op_net: usize) -> Result<Self> {
        if shape.blocks < 3 {
            return Err(Error::Config("the reference program needs 3 blocks".into()));
        }
        let acc = shape.init_register();
        let idle = |b: usize| Block { instr: MOVE, net: 0, a: 0, b: 0, op: 0, goto: b };
        let mut blocks: Vec<Block> = (0..shape.blocks).map(idle).collect();
        blocks[0] = Block { instr: MOVE, net: op_net, a: 0, b: 0, op: 0, goto: 1 };
        blocks[1] = Block { instr: MOVE, net: digit_net, a: 0, b: 0, op: 0, goto: acc };
        blocks[acc] = Block { instr: APPLY, net: 0, a: acc, b: 1, op: 0, goto: 0 };
        Ok(MathProgram { init_net: digit_net, blocks, ret: acc })
    }

    /// Exact execution on a tape of `tape_len` symbols. `read(net, pos)` is
    /// the value network `net` reports for the symbol at `pos`.
    pub fn run(&self, tape_len: usize, mut read: impl FnMut(usize, usize) -> usize, max_steps: usize) -> Outcome {
        let mut regs = vec![0; self.blocks.len()];
        regs[self.blocks.len() - 1] = read(self.init_net, 0);
        let (mut block, mut pos) = (0, 0);
        for step in 0..max_steps {
            let b = self.blocks[block];
            if b.instr == MOVE {
                pos += 1;
                if pos < tape_len {
                    regs[block] = read(b.net, pos);
                }
            } else {
                regs[block] = arith_apply(regs[b.a], regs[b.b], regs[b.op] % 4);
            }
            if pos == tape_len {
                return Outcome::Halted { value: regs[self.ret], steps: step + 1 };
            }
            block = b.goto;
        }
        Outcome::NonHalt
    }
}

/// Value a perfect network with `classes` outputs reports for a symbol:
/// digits for 10 classes, operators for 4, and 0 for a symbol it does not
/// recognize.
pub fn perfect_read(classes: usize, symbol: usize) -> usize {
    match (classes, symbol_kind(symbol)) {
        (10, SymbolKind::Digit(d)) => d,
        (4, SymbolKind::Operator(o)) => o,
        _ => 0,
    }
}

/// Discrete run with perfect perception on symbol classes.
pub fn extract_and_run(program: &MathProgram, nets: &[NetRef], symbols: &[usize], max_steps: usize) -> Outcome {
    program.run(symbols.len(), |n, p| perfect_read(nets[n].classes, symbols[p]), max_steps)
}

pub struct MathModel {
    pub shape: MachineShape,
    pub tape_len: usize,
    pub steps: usize,
    pub nets: Vec<NetRef>,
    pub graph: ModelGraph,
    pub output: VarId,
    /// Control variable before each step and after the last.
    pub control: Vec<VarId>,
}

impl MathModel {
    /// Control index of the live state `(block, pos)`.
    pub fn live_state(&self, block: usize, pos: usize) -> usize {
        block * self.tape_len + pos
    }

    /// Control index of "halted during step `t`".
    pub fn halted_state(&self, t: usize) -> usize {
        self.shape.blocks * self.tape_len + t
    }

    pub fn control_size(&self) -> usize {
        self.shape.blocks * self.tape_len + self.steps
    }

    pub fn build(shape: MachineShape, tape_len: usize, steps: usize, nets: &[NetRef]) -> Result<Self> {
        shape.validate()?;
        if tape_len == 0 || steps == 0 || nets.is_empty() {
            return Err(Error::Config("the block machine needs a tape, steps and a network".into()));
        }
        let (nb, nr, l) = (shape.blocks, shape.registers(), tape_len);
        let r = register_domain();
        let ctrl_dom = IntDomain::new(nb * l + steps).expect("nonzero");
        let block_dom = IntDomain::new(nb).expect("nonzero");
        let reg_dom = IntDomain::new(nr).expect("nonzero");
        let net_dom = IntDomain::new(nets.len()).expect("nonzero");
        let live = |b: usize, p: usize| b * l + p;
        let halted = |t: usize| nb * l + t;

        let mut m = Model::new(format!("math{nb}"));
        let slots: Vec<_> = (0..l).map(|p| m.tensor_input(format!("sym{p}"), IMAGE_PIXELS)).collect();
        for n in nets {
            m.declare_neural(&n.name, IntDomain::new(n.classes).expect("nonzero"));
        }
        let mut emb: Vec<Vec<Operand>> = Vec::new();
        for (ni, n) in nets.iter().enumerate() {
            let e = lift_cached("embed", |a| a[0], &[IntDomain::new(n.classes).expect("nonzero")], r)?;
            emb.push(
                (0..l)
                    .map(|p| {
                        let raw = m.neural(format!("raw{ni}_{p}"), &n.name, vec![NeuralArg::Tensor(slots[p])]);
                        m.apply(format!("emb{ni}_{p}"), &e, &[raw.into()]).into()
                    })
                    .collect(),
            );
        }

        let init_net = m.param(INIT_NET, net_dom);
        let ret = m.param(RETURN, reg_dom);
        struct BlockParams {
            instr: Operand,
            net: Operand,
            a: Operand,
            b: Operand,
            op: Operand,
            goto: Operand,
        }
        let two = IntDomain::new(2).expect("nonzero");
        let blocks: Vec<BlockParams> = (0..nb)
            .map(|b| BlockParams {
                instr: m.param(block_param(b, "instr"), two).into(),
                net: m.param(block_param(b, "net"), net_dom).into(),
                a: m.param(block_param(b, "a"), reg_dom).into(),
                b: m.param(block_param(b, "b"), reg_dom).into(),
                op: m.param(block_param(b, "op"), reg_dom).into(),
                goto: m.param(block_param(b, "goto"), block_dom).into(),
            })
            .collect();

        // load[b][p]: block b's network reading the symbol at p.
        let load: Vec<Vec<Operand>> = (0..nb)
            .map(|b| {
                (0..l)
                    .map(|p| {
                        let per_net: Vec<Operand> = emb.iter().map(|row| row[p]).collect();
                        m.select(format!("load{b}_{p}"), blocks[b].net, &per_net).into()
                    })
                    .collect()
            })
            .collect();
        // jump[b][p]: control state after block b's goto with the head at p.
        let jump: Vec<Arc<IndicatorTensor>> = (0..l)
            .map(|p| lift(&format!("jump_to_{p}"), move |a| live(a[0], p), &[block_dom], ctrl_dom).map(Arc::new))
            .collect::<Result<_>>()?;
        let op_of = lift_cached("op_of", |a| a[0] % 4, &[r], crate::arith::operator_domain())?;
        let arith = arith_indicator()?;

        let mut regs: Vec<Operand> = (0..nr - 1).map(|i| m.constant(format!("R{i}_0"), r, ConstValue::Point(0)).into()).collect();
        let first: Vec<Operand> = emb.iter().map(|row| row[0]).collect();
        regs.push(m.select(format!("R{}_0", nr - 1), init_net, &first).into());
        let mut ctrl: Operand = m.constant("ctrl_0", ctrl_dom, ConstValue::Point(live(0, 0))).into();
        let mut control = vec![match ctrl {
            Operand::Var(v) => v,
            Operand::Param(_) => unreachable!(),
        }];
        let mut returns: Vec<Operand> = Vec::with_capacity(steps);

        for t in 0..steps {
            let applied: Vec<Operand> = blocks
                .iter()
                .enumerate()
                .map(|(b, bp)| {
                    let x = m.select(format!("s{t}_b{b}_a"), bp.a, &regs);
                    let y = m.select(format!("s{t}_b{b}_b"), bp.b, &regs);
                    let o = m.select(format!("s{t}_b{b}_opreg"), bp.op, &regs);
                    let o = m.apply(format!("s{t}_b{b}_op"), &op_of, &[o.into()]);
                    m.apply(format!("s{t}_b{b}_apply"), &arith, &[x.into(), y.into(), o.into()]).into()
                })
                .collect();
            let halt_here: Operand = m.constant(format!("s{t}_halt"), ctrl_dom, ConstValue::Point(halted(t))).into();

            // Only block b writes register b.
            let mut next_regs = Vec::with_capacity(nr);
            for ri in 0..nr {
                let mut cases = Vec::with_capacity(ctrl_dom.size());
                for b in 0..nb {
                    for p in 0..l {
                        let v = if b != ri {
                            regs[ri]
                        } else {
                            let after_move = if p + 1 < l { load[b][p + 1] } else { regs[ri] };
                            m.select(format!("s{t}_R{ri}_p{p}"), blocks[b].instr, &[after_move, applied[b]]).into()
                        };
                        cases.push(Case::select(live(b, p), v));
                    }
                }
                for s in 0..steps {
                    cases.push(Case::select(halted(s), regs[ri]));
                }
                next_regs.push(Operand::from(m.switch(format!("R{ri}_{}", t + 1), r, ctrl, cases)));
            }

            let mut cases = Vec::with_capacity(ctrl_dom.size());
            for (b, bp) in blocks.iter().enumerate() {
                for p in 0..l {
                    let after_move = if p + 1 < l {
                        m.apply(format!("s{t}_c_b{b}_p{p}_move"), &jump[p + 1], &[bp.goto]).into()
                    } else {
                        halt_here
                    };
                    let after_apply = m.apply(format!("s{t}_c_b{b}_p{p}_apply"), &jump[p], &[bp.goto]);
                    let v = m.select(format!("s{t}_c_b{b}_p{p}"), bp.instr, &[after_move, after_apply.into()]);
                    cases.push(Case::select(live(b, p), v));
                }
            }
            for s in 0..steps {
                let frozen = m.constant(format!("s{t}_frozen{s}"), ctrl_dom, ConstValue::Point(halted(s)));
                cases.push(Case::select(halted(s), frozen));
            }
            let next = m.switch(format!("ctrl_{}", t + 1), ctrl_dom, ctrl, cases);
            control.push(next);
            ctrl = next.into();
            regs = next_regs;
            returns.push(m.select(format!("ret_{}", t + 1), ret, &regs).into());
        }

        let unfinished: Operand = m.constant("unfinished", r, ConstValue::Uniform).into();
        let mut cases = Vec::with_capacity(ctrl_dom.size());
        for b in 0..nb {
            for p in 0..l {
                cases.push(Case::select(live(b, p), unfinished));
            }
        }
        for (s, &ret_s) in returns.iter().enumerate() {
            cases.push(Case::select(halted(s), ret_s));
        }
        let output = m.switch("result", r, ctrl, cases);
        let out = m.output("result", r);
        m.observe(output, out);

        Ok(MathModel { shape, tape_len, steps, nets: nets.to_vec(), graph: compile(m)?, output, control })
    }

    /// Index of the first network with `classes` outputs.
    pub fn net_for(&self, classes: usize) -> Option<usize> {
        self.nets.iter().position(|n| n.classes == classes)
    }

    /// The reference loop as a listing for this model.
    pub fn golden(&self) -> Result<ProgramListing> {
        let digit = self.net_for(10).ok_or_else(|| Error::Library("no digit network".into()))?;
        let op = self.net_for(4).ok_or_else(|| Error::Library("no operator network".into()))?;
        Ok(MathProgram::golden(self.shape, digit, op)?.to_listing())
    }

    pub fn render(&self, listing: &ProgramListing) -> Result<String> {
        render_program(&MathProgram::from_listing(listing, self.shape)?, &self.nets)
    }

    pub fn batch(&self, examples: &[&Example], source: &SymbolSource) -> Result<Batch> {
        let n = examples.len();
        let l = self.tape_len;
        let mut tensors = vec![vec![0.0; n * IMAGE_PIXELS]; l];
        let mut symbols = vec![vec![0; n]; l];
        let mut labels = Vec::with_capacity(n);
        for (b, e) in examples.iter().enumerate() {
            if e.symbols.len() != l {
                return Err(Error::Eval(format!("tape of {} symbols given to a model of length {l}", e.symbols.len())));
            }
            for (p, s) in e.symbols.iter().enumerate() {
                let img = source.image(e.split, s.class as usize, s.index as usize);
                tensors[p][b * IMAGE_PIXELS..(b + 1) * IMAGE_PIXELS].copy_from_slice(img);
                symbols[p][b] = s.class as usize;
            }
            labels.push(e.label);
        }
        Ok(Batch {
            size: n,
            ints: Vec::new(),
            tensors: tensors.into_iter().map(|d| Tensor::new([n, IMAGE_PIXELS], d)).collect::<std::result::Result<_, _>>()?,
            symbols,
            outputs: vec![labels],
        })
    }
}

/// Source-code form of a program.
pub fn render_program(p: &MathProgram, nets: &[NetRef]) -> Result<String> {
    let net = |i: usize| nets.get(i).map(|n| n.name.clone()).ok_or_else(|| Error::Listing(format!("no network {i}")));
    let mut s = format!("init: R{} = READ {}\n", p.blocks.len() - 1, net(p.init_net)?);
    for (i, b) in p.blocks.iter().enumerate() {
        let instr = if b.instr == MOVE {
            format!("R{i} = MOVE {}", net(b.net)?)
        } else {
            format!("R{i} = APPLY(R{}, R{}, R{})", b.a, b.b, b.op)
        };
        let _ = writeln!(s, "block {i}: {instr} ; goto {}", b.goto);
    }
    let _ = write!(s, "halt: return R{}", p.ret);
    Ok(s)
}
