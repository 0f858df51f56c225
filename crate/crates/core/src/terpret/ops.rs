//! The lifting rules on standalone marginals, outside any model.

use ntpt_engine::Tape;

use super::compile::PROB_FLOOR;
use super::domain::MarginalVec;
use super::indicator::IndicatorTensor;
use crate::error::{Error, Result};

/// `mu_z[i] = sum_j I[i, j..] prod_d mu_d[j_d]`.
pub fn eval_apply(indicator: &IndicatorTensor, args: &[&MarginalVec]) -> Result<MarginalVec> {
    if args.len() != indicator.arity() {
        return Err(Error::Domain(format!(
            "`{}` takes {} arguments, got {}",
            indicator.name(),
            indicator.arity(),
            args.len()
        )));
    }
    for (i, (a, d)) in args.iter().zip(indicator.in_domains()).enumerate() {
        if a.domain() != *d {
            return Err(Error::Domain(format!(
                "argument {i} of `{}` has size {}, expected {}",
                indicator.name(),
                a.domain().size(),
                d.size()
            )));
        }
    }
    let mut tape = Tape::new();
    let ids: Vec<_> = args.iter().map(|a| tape.leaf(a.as_row())).collect();
    let z = tape.contract(indicator.contraction(), &ids)?;
    MarginalVec::new(tape.value(z).data().to_vec())
}

/// `mu_z = sum_v mu_x[v] mu_case_v`.
pub fn eval_switch(scrutinee: &MarginalVec, cases: &[MarginalVec]) -> Result<MarginalVec> {
    let k = scrutinee.domain().size();
    if cases.len() != k {
        return Err(Error::Domain(format!("switch over {k} values has {} cases", cases.len())));
    }
    let d = cases[0].domain();
    if cases.iter().any(|c| c.domain() != d) {
        return Err(Error::Domain("switch cases have different domains".into()));
    }
    let mut tape = Tape::new();
    let w = tape.leaf(scrutinee.as_row());
    let cs: Vec<_> = cases.iter().map(|c| tape.leaf(c.as_row())).collect();
    let z = tape.mix(w, &cs)?;
    MarginalVec::new(tape.value(z).data().to_vec())
}

/// `-log(max(p[value], 1e-12))`.
pub fn observe(var: &MarginalVec, value: usize) -> Result<f64> {
    if !var.domain().contains(value) {
        return Err(Error::Domain(format!("observed {value} outside domain of size {}", var.domain().size())));
    }
    Ok(-var.probs()[value].max(PROB_FLOOR).ln())
}
