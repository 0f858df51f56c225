//! Bounded-integer models and their marginal semantics.

mod compile;
mod discrete;
mod domain;
mod indicator;
mod listing;
mod model;
mod ops;
pub mod random;

pub use compile::{
    compile, Batch, Forward, LossReduction, ModelGraph, NeuralCall, NoPerception, Perception, ProgramParams,
    PROB_FLOOR,
};
pub use discrete::{concrete_eval, ConcreteRun};
pub use domain::{argmax, IntDomain, MarginalVec, NORMALIZATION_TOL};
pub use indicator::{lift, lift_cached, IndicatorTensor};
pub use listing::{discretize, ProgramListing};
pub use model::{
    Case, ConstValue, Decl, InputId, Model, NeuralArg, NeuralDecl, Operand, OutputId, ParamId, Statement,
    TensorDecl, TensorSlot, VarId,
};
pub use ops::{eval_apply, eval_switch, observe};
