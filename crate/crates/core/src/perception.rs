//! Perception from ground-truth symbol classes.

use ntpt_engine::{NodeId, Tape, Tensor};

use crate::error::{Error, Result};
use crate::tasks::{symbol_kind, SymbolKind};
use crate::terpret::{Batch, NeuralCall, Perception, TensorSlot};

/// What an oracle network outputs for a symbol outside its class set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mismatch {
    Uniform,
    /// Point mass on class 0.
    Zero,
}

/// A perfect classifier: a function with 10 outputs recognizes digits, one
/// with 4 outputs recognizes operators. Reads the batch's symbol classes.
#[derive(Clone, Copy, Debug)]
pub struct OraclePerception {
    pub mismatch: Mismatch,
}

impl OraclePerception {
    pub fn new(mismatch: Mismatch) -> Self {
        OraclePerception { mismatch }
    }

    fn class_of(&self, outputs: usize, symbol: usize) -> Result<Option<usize>> {
        match (outputs, symbol_kind(symbol)) {
            (10, SymbolKind::Digit(d)) => Ok(Some(d)),
            (4, SymbolKind::Operator(o)) => Ok(Some(o)),
            (10, _) | (4, _) => Ok(None),
            _ => Err(Error::Eval(format!("oracle perception has no classifier with {outputs} outputs"))),
        }
    }

    fn symbol(&self, batch: &Batch, slot: TensorSlot, example: usize) -> Result<usize> {
        batch
            .symbols
            .get(slot.index())
            .and_then(|col| col.get(example))
            .copied()
            .ok_or_else(|| Error::Eval("oracle perception needs symbol classes in the batch".into()))
    }
}

impl Perception for OraclePerception {
    fn forward(&self, tape: &mut Tape, call: &NeuralCall<'_>) -> Result<NodeId> {
        let [(slot, _)] = call.tensors[..] else {
            return Err(Error::Eval("oracle perception takes exactly one image".into()));
        };
        let n = call.output.size();
        let mut t = Tensor::zeros([call.batch.size, n]);
        for b in 0..call.batch.size {
            let row = &mut t.data_mut()[b * n..(b + 1) * n];
            match (self.class_of(n, self.symbol(call.batch, slot, b)?)?, self.mismatch) {
                (Some(c), _) => row[c] = 1.0,
                (None, Mismatch::Uniform) => row.fill(1.0 / n as f64),
                (None, Mismatch::Zero) => row[0] = 1.0,
            }
        }
        Ok(tape.leaf(t))
    }

    fn classify(&self, function: &str, tensors: &[TensorSlot], _: &[usize], batch: &Batch, example: usize) -> Result<usize> {
        let [slot] = tensors else {
            return Err(Error::Eval("oracle perception takes exactly one image".into()));
        };
        let outputs = match function {
            "net_0" => 10,
            "net_1" => 4,
            _ => return Err(Error::Eval(format!("oracle perception does not know `{function}`"))),
        };
        Ok(self.class_of(outputs, self.symbol(batch, *slot, example)?)?.unwrap_or(0))
    }
}
