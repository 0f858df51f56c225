use std::sync::Arc;

use ntpt::terpret::random::{point_mass_check, random_model};
use ntpt::terpret::*;
use ntpt::Error;
use ntpt_engine::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn d(n: usize) -> IntDomain {
    IntDomain::new(n).unwrap()
}

#[test]
fn point_mass_equivalence_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let case = random_model(&mut rng, 20).unwrap();
        let check = point_mass_check(&case, 50.0).unwrap();
        assert!(check.agree, "model {i} disagrees");
        assert!(check.min_prob >= 1.0 - 1e-6, "model {i}: prob {}", check.min_prob);
    }
}

#[test]
fn marginals_stay_normalized_under_random_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let case = random_model(&mut rng, 20).unwrap();
        let params = ProgramParams::init(&case.graph, &mut rng, 3.0);
        let mut tape = Tape::new();
        let fwd = case.graph.forward(&mut tape, &params, &case.batch, &NoPerception, LossReduction::Mean).unwrap();
        for v in 0..case.graph.model().vars().len() {
            let id = case.graph.var_by_name(&case.graph.model().vars()[v].name).unwrap();
            let node = fwd.var(id).unwrap();
            let s: f64 = tape.value(node).data().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(fwd.marginal(&tape, id, 0).is_some());
        }
    }
}

fn loss_at(case: &random::RandomModel, params: &ProgramParams) -> f64 {
    let mut tape = Tape::new();
    let fwd = case.graph.forward(&mut tape, params, &case.batch, &NoPerception, LossReduction::Mean).unwrap();
    tape.value(fwd.loss.unwrap()).item()
}

#[test]
fn param_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-5;
    for _ in 0..50 {
        let case = random_model(&mut rng, 6).unwrap();
        let params = ProgramParams::init(&case.graph, &mut rng, 1.0);
        let mut tape = Tape::new();
        let fwd = case.graph.forward(&mut tape, &params, &case.batch, &NoPerception, LossReduction::Mean).unwrap();
        let grads = tape.backward(fwd.loss.unwrap()).unwrap();
        for (i, name) in params.names().iter().enumerate() {
            let n = params.logits()[i].len();
            let analytic = grads.get(name).cloned().unwrap_or_else(|| Tensor::zeros([1, n]));
            for j in 0..n {
                let mut plus = params.clone();
                plus.logits_mut()[i].data_mut()[j] += eps;
                let mut minus = params.clone();
                minus.logits_mut()[i].data_mut()[j] -= eps;
                let numeric = (loss_at(&case, &plus) - loss_at(&case, &minus)) / (2.0 * eps);
                let a = analytic.data()[j];
                let err = (a - numeric).abs() / (1e-6f64).max(a.abs() + numeric.abs());
                assert!(err < 1e-3, "{name}[{j}]: analytic {a} numeric {numeric}");
            }
        }
    }
}

#[test]
fn sum_reduction_scales_with_batch() {
    let mut m = Model::new("m");
    let p = m.param("p", d(3));
    let o = m.output("o", d(3));
    m.observe(p, o);
    let g = compile(m).unwrap();
    let params = ProgramParams::zeros(&g);
    let batch = Batch { size: 4, outputs: vec![vec![0, 1, 2, 0]], ..Batch::default() };
    let mut t = Tape::new();
    let mean = g.forward(&mut t, &params, &batch, &NoPerception, LossReduction::Mean).unwrap();
    let sum = g.forward(&mut t, &params, &batch, &NoPerception, LossReduction::Sum).unwrap();
    assert!((t.value(mean.loss.unwrap()).item() - 3f64.ln()).abs() < 1e-12);
    assert!((t.value(sum.loss.unwrap()).item() - 4.0 * 3f64.ln()).abs() < 1e-12);
}

fn ident(n: usize) -> Arc<IndicatorTensor> {
    lift_cached("id", |a| a[0], &[d(n)], d(n)).unwrap()
}

#[test]
fn compile_rejects_cycles() {
    let mut m = Model::new("cyclic");
    let a = m.var("a", d(2));
    let b = m.var("b", d(2));
    m.push(Statement::Apply { target: a, function: ident(2), args: vec![b.into()] });
    m.push(Statement::Apply { target: b, function: ident(2), args: vec![a.into()] });
    match compile(m).unwrap_err() {
        Error::Compile { var, reason } => {
            assert!(var == "a" || var == "b");
            assert!(reason.contains("cyclic"));
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn compile_rejects_unassigned_reads_and_reassignment() {
    let mut m = Model::new("m");
    let a = m.var("ghost", d(2));
    m.apply("b", &ident(2), &[a.into()]);
    match compile(m).unwrap_err() {
        Error::Compile { var, .. } => assert_eq!(var, "ghost"),
        e => panic!("{e:?}"),
    }

    let mut m = Model::new("m");
    let a = m.constant("a", d(2), ConstValue::Point(1));
    m.push(Statement::Const { target: a, value: ConstValue::Point(0) });
    assert!(matches!(compile(m), Err(Error::Compile { .. })));

    // A case-body variable is not visible outside its case.
    let mut m = Model::new("m");
    let s = m.param("s", d(1));
    let (body, inner) = m.scoped(|m| m.constant("inner", d(2), ConstValue::Point(1)));
    m.switch("z", d(2), s, vec![Case { value: 0, body, result: inner.into() }]);
    m.apply("leak", &ident(2), &[inner.into()]);
    match compile(m).unwrap_err() {
        Error::Compile { var, .. } => assert_eq!(var, "inner"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn compile_checks_domains_and_cases() {
    let mut m = Model::new("m");
    let a = m.constant("a", d(3), ConstValue::Point(0));
    m.apply("b", &ident(2), &[a.into()]);
    assert!(matches!(compile(m), Err(Error::Compile { .. })));

    let mut m = Model::new("m");
    let s = m.param("s", d(2));
    let a = m.constant("a", d(2), ConstValue::Point(0));
    m.switch("z", d(2), s, vec![Case::select(0, a)]);
    let err = compile(m).unwrap_err().to_string();
    assert!(err.contains("missing case 1"), "{err}");
}

#[test]
fn statements_are_reordered_by_dependency() {
    let mut m = Model::new("m");
    let a = m.var("a", d(3));
    let b = m.apply("b", &ident(3), &[a.into()]);
    m.push(Statement::Const { target: a, value: ConstValue::Point(2) });
    let g = compile(m).unwrap();
    assert_eq!(g.model().statements()[0].target(), Some(a));
    let run = concrete_eval(&g, &ProgramListing::new(), &Batch { size: 1, ..Batch::default() }, 0, &NoPerception).unwrap();
    assert_eq!(run.vars[b.index()], Some(2));
}

#[test]
fn untaken_branches_are_not_executed_concretely() {
    let mut m = Model::new("m");
    let s = m.param("s", d(2));
    let (b0, r0) = m.scoped(|m| m.constant("r0", d(4), ConstValue::Point(1)));
    let (b1, r1) = m.scoped(|m| m.constant("r1", d(4), ConstValue::Point(3)));
    let z = m.switch("z", d(4), s, vec![Case { value: 0, body: b0, result: r0.into() }, Case { value: 1, body: b1, result: r1.into() }]);
    let g = compile(m).unwrap();
    let run = concrete_eval(&g, &ProgramListing::new().with("s", 1), &Batch { size: 1, ..Batch::default() }, 0, &NoPerception).unwrap();
    assert_eq!(run.vars[z.index()], Some(3));
    assert_eq!(run.vars[r0.index()], None);
}

#[test]
fn program_space_is_product_of_param_domains() {
    let mut m = Model::new("m");
    m.param("a", d(4));
    m.param("b", d(19));
    assert_eq!(compile(m).unwrap().program_space(), 76.0);
}

proptest! {
    #[test]
    fn lift_is_permutation_equivariant(
        seed in any::<u64>(),
        n1 in 1usize..6,
        n2 in 1usize..6,
        nout in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<usize> = (0..n1 * n2).map(|_| rng.gen_range(0..nout)).collect();
        let mut perm: Vec<usize> = (0..nout).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        let t2 = table.clone();
        let f = lift("f", move |a| table[a[0] * n2 + a[1]], &[d(n1), d(n2)], d(nout)).unwrap();
        let p2 = perm.clone();
        let g = lift("g", move |a| p2[t2[a[0] * n2 + a[1]]], &[d(n1), d(n2)], d(nout)).unwrap();
        for i in 0..nout {
            for j in 0..n1 {
                for k in 0..n2 {
                    prop_assert_eq!(g.get(perm[i], &[j, k]), f.get(i, &[j, k]));
                }
            }
        }
    }

    #[test]
    fn eval_apply_output_is_normalized(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<usize> = (0..n * n).map(|_| rng.gen_range(0..n)).collect();
        let f = lift("h", move |a| table[a[0] * n + a[1]], &[d(n), d(n)], d(n)).unwrap();
        let mut rand_marginal = || {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
            let s: f64 = w.iter().sum();
            MarginalVec::new(w.iter().map(|x| x / s).collect()).unwrap()
        };
        let (x, y) = (rand_marginal(), rand_marginal());
        let z = eval_apply(&f, &[&x, &y]).unwrap();
        prop_assert!((z.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
