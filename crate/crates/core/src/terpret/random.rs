//! Random small models for equivalence and normalization checks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::compile::{compile, Batch, ModelGraph};
use super::domain::IntDomain;
use super::indicator::lift;
use super::listing::ProgramListing;
use super::model::{Case, ConstValue, Model, Operand};
use crate::error::Result;

/// A random model together with a concrete program and a one-example batch.
pub struct RandomModel {
    pub graph: ModelGraph,
    pub listing: ProgramListing,
    pub batch: Batch,
}

fn random_function(
    model: &mut Model,
    rng: &mut impl Rng,
    pool: &[Operand],
    out: IntDomain,
    name: String,
) -> Result<Operand> {
    let arity = rng.gen_range(1..=3.min(pool.len()));
    let args: Vec<Operand> = (0..arity).map(|_| *pool.choose(rng).expect("pool nonempty")).collect();
    let domains: Vec<IntDomain> = args.iter().map(|&a| model.domain_of(a)).collect();
    let tuples: usize = domains.iter().map(|d| d.size()).product();
    let table: Vec<usize> = (0..tuples).map(|_| rng.gen_range(0..out.size())).collect();
    let sizes: Vec<usize> = domains.iter().map(|d| d.size()).collect();
    let f = lift(
        &format!("f_{name}"),
        move |a| {
            let mut idx = 0;
            for (v, s) in a.iter().zip(&sizes) {
                idx = idx * s + v;
            }
            table[idx]
        },
        &domains,
        out,
    )?;
    Ok(model.apply(name, &std::sync::Arc::new(f), &args).into())
}

/// Build a random straight-line model with domains of size at most
/// `max_domain`, switches with nested case bodies, and statements pushed in a
/// shuffled order.
pub fn random_model(rng: &mut impl Rng, max_domain: usize) -> Result<RandomModel> {
    let mut model = Model::new("random");
    let mut listing = ProgramListing::new();
    let mut batch = Batch { size: 1, ..Batch::default() };
    let mut pool: Vec<Operand> = Vec::new();
    let dom = |rng: &mut dyn rand::RngCore| IntDomain::new(rng.gen_range(1..=max_domain)).expect("size >= 1");

    for i in 0..rng.gen_range(1..=3) {
        let d = dom(rng);
        let input = model.input(format!("in{i}"), d);
        batch.ints.push(vec![rng.gen_range(0..d.size())]);
        pool.push(model.copy_input(format!("x{i}"), input).into());
    }
    for i in 0..rng.gen_range(1..=3) {
        let d = dom(rng);
        let name = format!("p{i}");
        listing.set(name.clone(), rng.gen_range(0..d.size()));
        pool.push(model.param(name, d).into());
    }
    if rng.gen_bool(0.5) {
        let d = dom(rng);
        pool.push(model.constant("c", d, ConstValue::Point(rng.gen_range(0..d.size()))).into());
    }

    let steps = rng.gen_range(2..=8);
    for s in 0..steps {
        let out = dom(rng);
        if rng.gen_bool(0.6) {
            let v = random_function(&mut model, rng, &pool, out, format!("v{s}"))?;
            pool.push(v);
            continue;
        }
        // Switch on a small-domain operand, falling back to a fresh param.
        let scrutinee = match pool.iter().copied().filter(|&o| model.domain_of(o).size() <= 5).collect::<Vec<_>>() {
            small if !small.is_empty() => *small.choose(rng).expect("nonempty"),
            _ => {
                let d = IntDomain::new(rng.gen_range(1..=5)).expect("size >= 1");
                let name = format!("sel{s}");
                listing.set(name.clone(), rng.gen_range(0..d.size()));
                model.param(name, d).into()
            }
        };
        let k = model.domain_of(scrutinee).size();
        let mut cases = Vec::with_capacity(k);
        for v in 0..k {
            let same: Vec<Operand> = pool.iter().copied().filter(|&o| model.domain_of(o) == out).collect();
            if !same.is_empty() && rng.gen_bool(0.5) {
                cases.push(Case::select(v, *same.choose(rng).expect("nonempty")));
            } else {
                let pool_ref = pool.clone();
                let (body, result) =
                    model.scoped(|m| random_function(m, rng, &pool_ref, out, format!("v{s}_case{v}")));
                cases.push(Case { value: v, body, result: result? });
            }
        }
        pool.push(model.switch(format!("v{s}"), out, scrutinee, cases).into());
    }

    let last = *pool.last().expect("pool nonempty");
    let output = model.output("y", model.domain_of(last));
    model.observe(last, output);
    batch.outputs.push(vec![0]);

    model.statements.shuffle(rng);
    Ok(RandomModel { graph: compile(model)?, listing, batch })
}

/// Outcome of comparing marginal and concrete execution of one program.
#[derive(Clone, Copy, Debug)]
pub struct PointMassCheck {
    /// Every variable assigned by the concrete run has that value as argmax.
    pub agree: bool,
    /// Smallest probability the marginals put on the concrete values.
    pub min_prob: f64,
    /// Largest deviation of any marginal's mass from 1.
    pub max_mass_error: f64,
}

/// Run `case` with one-hot params (logit `logit` on the listed values) and
/// compare every marginal against [`concrete_eval`](super::concrete_eval).
pub fn point_mass_check(case: &RandomModel, logit: f64) -> Result<PointMassCheck> {
    use super::compile::{LossReduction, NoPerception, ProgramParams};
    use super::domain::argmax;

    let params = ProgramParams::from_listing(&case.graph, &case.listing, logit)?;
    let mut tape = ntpt_engine::Tape::new();
    let fwd = case.graph.forward(&mut tape, &params, &case.batch, &NoPerception, LossReduction::Mean)?;
    let run = super::concrete_eval(&case.graph, &case.listing, &case.batch, 0, &NoPerception)?;
    let mut out = PointMassCheck { agree: true, min_prob: 1.0, max_mass_error: 0.0 };
    for (i, value) in run.vars.iter().enumerate() {
        let Some(node) = fwd.var(super::model::VarId(i)) else { continue };
        let probs = tape.value(node).row_slice(0);
        out.max_mass_error = out.max_mass_error.max((probs.iter().sum::<f64>() - 1.0).abs());
        if let Some(v) = *value {
            out.agree &= argmax(probs) == v;
            out.min_prob = out.min_prob.min(probs[v]);
        }
    }
    Ok(out)
}
