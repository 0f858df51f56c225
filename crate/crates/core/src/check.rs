//! Finite-difference gradient checks on whole task models.

use ntpt_engine::{NodeId, Tape, Tensor};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::neural::{Library, LibraryPerception};
use crate::perception::{Mismatch, OraclePerception};
use crate::terpret::{Batch, LossReduction, ModelGraph, Perception, ProgramParams};

pub const FD_EPS: f64 = 1e-5;

/// Relative error with a floor so that two tiny gradients compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (1e-6f64).max(analytic.abs() + numeric.abs())
}

fn loss(graph: &ModelGraph, params: &ProgramParams, library: Option<&Library>, batch: &Batch) -> Result<(Tape, f64, NodeId)> {
    let oracle = OraclePerception::new(Mismatch::Uniform);
    let lib;
    let perception: &dyn Perception = match library {
        Some(l) => {
            lib = LibraryPerception { library: l };
            &lib
        }
        None => &oracle,
    };
    let mut tape = Tape::new();
    let fwd = graph.forward(&mut tape, params, batch, perception, LossReduction::Mean)?;
    let id = fwd.loss.ok_or_else(|| Error::Eval("model observes nothing".into()))?;
    let v = tape.value(id).item();
    Ok((tape, v, id))
}

enum Coord {
    Interp { param: usize, entry: usize },
    Lib { name: String, entry: usize },
}

/// Largest relative error between the analytic gradient and a central
/// difference over `coords` coordinates drawn from the interpreter params
/// and, when `library` is given, its weights. Without a library, neural
/// calls are answered by oracle perception.
pub fn gradcheck(
    graph: &ModelGraph,
    params: &ProgramParams,
    library: Option<&Library>,
    batch: &Batch,
    coords: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let (tape, _, id) = loss(graph, params, library, batch)?;
    let grads = tape.backward(id)?;

    let mut all = Vec::new();
    for (p, t) in params.logits().iter().enumerate() {
        all.extend((0..t.len()).map(|entry| Coord::Interp { param: p, entry }));
    }
    if let Some(l) = library {
        for f in l.functions() {
            for (name, w) in f.param_names().iter().zip(f.weights()) {
                all.extend((0..w.len()).map(|entry| Coord::Lib { name: name.clone(), entry }));
            }
        }
    }
    let grad_at = |name: &str, entry: usize| grads.get(name).map(|g: &Tensor| g.data()[entry]).unwrap_or(0.0);

    let mut worst: f64 = 0.0;
    for i in sample(rng, all.len(), coords.min(all.len())) {
        let (analytic, plus, minus) = match &all[i] {
            Coord::Interp { param, entry } => {
                let shifted = |d: f64| -> Result<f64> {
                    let mut p = params.clone();
                    p.logits_mut()[*param].data_mut()[*entry] += d;
                    Ok(loss(graph, &p, library, batch)?.1)
                };
                (grad_at(&params.names()[*param], *entry), shifted(FD_EPS)?, shifted(-FD_EPS)?)
            }
            Coord::Lib { name, entry } => {
                let lib = library.expect("library coordinates need a library");
                let shifted = |d: f64| -> Result<f64> {
                    let mut l = lib.clone();
                    let w = l.params_mut("check").find(|p| p.name == name).expect("known weight");
                    w.value.data_mut()[*entry] += d;
                    Ok(loss(graph, params, Some(&l), batch)?.1)
                };
                (grad_at(name, *entry), shifted(FD_EPS)?, shifted(-FD_EPS)?)
            }
        };
        worst = worst.max(relative_error(analytic, (plus - minus) / (2.0 * FD_EPS)));
    }
    Ok(worst)
}
