use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::source::{Split, SymbolSource};
use super::OPERATOR_BASE;
use crate::arith::{arith_apply, REGISTER_SIZE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Add2x2,
    Apply2x2,
    Math,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Top,
    Left,
    Bottom,
    Right,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Top, Variant::Left, Variant::Bottom, Variant::Right];

    /// The two grid cells (NW=0, NE=1, SW=2, SE=3) in reading order.
    pub fn cells(self) -> [usize; 2] {
        match self {
            Variant::Top => [0, 1],
            Variant::Left => [0, 2],
            Variant::Bottom => [2, 3],
            Variant::Right => [1, 3],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Variant::Top => "top",
            Variant::Left => "left",
            Variant::Bottom => "bottom",
            Variant::Right => "right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub scenario: Scenario,
    /// `None` exactly for [`Scenario::Math`].
    pub variant: Option<Variant>,
}

impl TaskId {
    pub const MATH: TaskId = TaskId { scenario: Scenario::Math, variant: None };

    pub fn add(v: Variant) -> Self {
        TaskId { scenario: Scenario::Add2x2, variant: Some(v) }
    }

    pub fn apply(v: Variant) -> Self {
        TaskId { scenario: Scenario::Apply2x2, variant: Some(v) }
    }

    /// The eight grid tasks in lifelong order.
    pub fn grid_tasks() -> [TaskId; 8] {
        let mut out = [TaskId::MATH; 8];
        for (i, v) in Variant::ALL.into_iter().enumerate() {
            out[i] = TaskId::add(v);
            out[i + 4] = TaskId::apply(v);
        }
        out
    }

    pub fn variant(&self) -> Result<Variant> {
        self.variant.ok_or_else(|| Error::Config(format!("task `{self}` has no grid variant")))
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.scenario, self.variant) {
            (Scenario::Add2x2, Some(v)) => write!(f, "add2x2/{}", v.name()),
            (Scenario::Apply2x2, Some(v)) => write!(f, "apply2x2/{}", v.name()),
            _ => write!(f, "math"),
        }
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "math" {
            return Ok(TaskId::MATH);
        }
        let (scenario, variant) = s.split_once('/').ok_or_else(|| Error::Config(format!("unknown task `{s}`")))?;
        let variant = Variant::ALL
            .into_iter()
            .find(|v| v.name() == variant)
            .ok_or_else(|| Error::Config(format!("unknown task variant `{variant}`")))?;
        match scenario {
            "add2x2" => Ok(TaskId::add(variant)),
            "apply2x2" => Ok(TaskId::apply(variant)),
            _ => Err(Error::Config(format!("unknown scenario `{scenario}`"))),
        }
    }
}

impl serde::Serialize for TaskId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for TaskId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Reference to one image of a [`SymbolSource`] split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SymbolRef {
    pub class: u8,
    pub index: u32,
}

/// One input/output example. Grid examples have four symbols in the order
/// NW, NE, SW, SE; tape examples alternate digits and operators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub split: Split,
    pub symbols: Vec<SymbolRef>,
    pub aux: Vec<usize>,
    pub label: usize,
}

impl Example {
    pub fn classes(&self) -> Vec<usize> {
        self.symbols.iter().map(|s| s.class as usize).collect()
    }
}

/// Left-to-right evaluation of `d op d op d ..` given as symbol classes.
pub fn eval_left_to_right(classes: &[usize]) -> Result<usize> {
    let bad = || Error::Eval(format!("malformed expression {classes:?}"));
    let mut acc = *classes.first().filter(|&&c| c < 10).ok_or_else(bad)?;
    if classes.len() % 2 == 0 {
        return Err(bad());
    }
    for pair in classes[1..].chunks(2) {
        let (op, d) = (pair[0], pair[1]);
        if !(OPERATOR_BASE..OPERATOR_BASE + 4).contains(&op) || d >= 10 {
            return Err(bad());
        }
        acc = arith_apply(acc, d, op - OPERATOR_BASE);
    }
    Ok(acc)
}

/// The correct output for `task` on the given symbol classes and auxiliary
/// integers.
pub fn ground_truth(task: TaskId, classes: &[usize], aux: &[usize]) -> Result<usize> {
    match task.scenario {
        Scenario::Math => eval_left_to_right(classes),
        Scenario::Add2x2 => {
            let [a, b] = task.variant()?.cells().map(|c| classes.get(c).copied());
            match (a, b) {
                (Some(a), Some(b)) if a < 10 && b < 10 && classes.len() == 4 => Ok(a + b),
                _ => Err(Error::Eval(format!("add2x2 needs four digits, got {classes:?}"))),
            }
        }
        Scenario::Apply2x2 => {
            let [o1, o2] = task.variant()?.cells().map(|c| classes.get(c).copied().unwrap_or(usize::MAX));
            let ops_ok = [o1, o2].iter().all(|o| (OPERATOR_BASE..OPERATOR_BASE + 4).contains(o));
            if classes.len() != 4 || !ops_ok || aux.len() != 3 || aux.iter().any(|&v| v >= REGISTER_SIZE) {
                return Err(Error::Eval(format!("apply2x2 needs four operators and three integers, got {classes:?} {aux:?}")));
            }
            let first = arith_apply(aux[0], aux[1], o1 - OPERATOR_BASE);
            Ok(arith_apply(first, aux[2], o2 - OPERATOR_BASE))
        }
    }
}

fn pick(source: &SymbolSource, split: Split, class: usize, rng: &mut impl Rng) -> Result<SymbolRef> {
    Ok(SymbolRef { class: class as u8, index: source.sample(split, class, rng)? as u32 })
}

/// A fresh random example. `digits` is the expression length for math and
/// ignored otherwise.
pub fn gen_example(
    task: TaskId,
    source: &SymbolSource,
    split: Split,
    digits: usize,
    rng: &mut impl Rng,
) -> Result<Example> {
    let (classes, aux): (Vec<usize>, Vec<usize>) = match task.scenario {
        Scenario::Add2x2 => ((0..4).map(|_| rng.gen_range(0..10)).collect(), Vec::new()),
        Scenario::Apply2x2 => (
            (0..4).map(|_| OPERATOR_BASE + rng.gen_range(0..4)).collect(),
            (0..3).map(|_| rng.gen_range(0..REGISTER_SIZE)).collect(),
        ),
        Scenario::Math => {
            if digits == 0 {
                return Err(Error::Config("math expressions need at least one digit".into()));
            }
            let classes = (0..2 * digits - 1)
                .map(|i| if i % 2 == 0 { rng.gen_range(0..10) } else { OPERATOR_BASE + rng.gen_range(0..4) })
                .collect();
            (classes, Vec::new())
        }
    };
    let symbols = classes.iter().map(|&c| pick(source, split, c, rng)).collect::<Result<Vec<_>>>()?;
    let label = ground_truth(task, &classes, &aux)?;
    Ok(Example { split, symbols, aux, label })
}

/// Training examples for one task: either a fixed pool of `cap` examples or,
/// without a cap, a fresh example per draw.
#[derive(Clone, Debug)]
pub struct ExampleStream {
    pub task: TaskId,
    pub digits: usize,
    pool: Option<Vec<Example>>,
}

impl ExampleStream {
    pub fn new(task: TaskId, source: &SymbolSource, digits: usize, cap: Option<usize>, rng: &mut impl Rng) -> Result<Self> {
        let pool = match cap {
            None => None,
            Some(0) => return Err(Error::Config("pool cap must be positive".into())),
            Some(k) => Some((0..k).map(|_| gen_example(task, source, Split::Train, digits, rng)).collect::<Result<_>>()?),
        };
        Ok(ExampleStream { task, digits, pool })
    }

    pub fn draw(&self, source: &SymbolSource, rng: &mut impl Rng) -> Result<Example> {
        match &self.pool {
            Some(p) => Ok(p[rng.gen_range(0..p.len())].clone()),
            None => gen_example(self.task, source, Split::Train, self.digits, rng),
        }
    }

    pub fn pool(&self) -> Option<&[Example]> {
        self.pool.as_deref()
    }
}
