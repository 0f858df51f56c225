use ntpt::model_2x2::*;
use ntpt::neural::{Library, LibraryPerception, NeuralFunctionSpec};
use ntpt::perception::{Mismatch, OraclePerception};
use ntpt::tasks::{gen_example, Example, Split, SymbolSource, TaskId, Variant};
use ntpt::terpret::{concrete_eval, discretize, LossReduction, ProgramParams};
use ntpt_engine::Tape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nets() -> Vec<NetRef> {
    vec![NetRef::new("net_0", 10), NetRef::new("net_1", 4)]
}

fn examples(task: TaskId, source: &SymbolSource, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_example(task, source, Split::Test, 0, &mut rng).unwrap()).collect()
}

#[test]
fn head_moves_clamp_at_edges() {
    assert_eq!(move_head(0, 1), 1);
    assert_eq!(move_head(1, 1), 1);
    assert_eq!(move_head(0, 0), 0);
    assert_eq!(move_head(3, 3), 2);
    assert_eq!(move_head(1, 2), 3);
}

#[test]
fn digit_sums_fit_in_a_register() {
    for a in 0..10 {
        for b in 0..10 {
            assert!(a + b <= ntpt::arith::M);
            assert_eq!(ntpt::arith::arith_apply(a, b, 0), a + b);
        }
    }
}

#[test]
fn golden_programs_solve_every_task_with_perfect_perception() {
    let source = SymbolSource::synthetic(0, 3, 3);
    let oracle = OraclePerception::new(Mismatch::Zero);
    for task in TaskId::grid_tasks() {
        let model = GridModel::build(task, &nets()).unwrap();
        let golden = model.golden();
        let ex = examples(task, &source, 1000, 1);
        let refs: Vec<&Example> = ex.iter().collect();
        let batch = model.batch(&refs, &source).unwrap();
        for (i, e) in ex.iter().enumerate() {
            let run = concrete_eval(&model.graph, &golden, &batch, i, &oracle).unwrap();
            assert_eq!(run.observed, vec![e.label], "{task} example {i}\n{}", model.render(&golden));
        }

        // The marginal semantics agrees under one-hot params.
        let params = ProgramParams::from_listing(&model.graph, &golden, 50.0).unwrap();
        let mut tape = Tape::new();
        let fwd = model.graph.forward(&mut tape, &params, &batch, &oracle, LossReduction::Mean).unwrap();
        for (i, e) in ex.iter().enumerate() {
            let m = fwd.marginal(&tape, model.output, i).unwrap();
            assert_eq!(m.argmax(), e.label);
            assert!(m.probs()[e.label] > 1.0 - 1e-6);
        }
        assert_eq!(discretize(&model.graph, &params), golden);
    }
}

#[test]
fn golden_listings_render_as_source() {
    let add = GridModel::build(TaskId::add(Variant::Right), &nets()[..1]).unwrap();
    assert_eq!(
        add.render(&add.golden()),
        "# initialization:\nR0 = READ net_0\n# program:\nR1 = MOVE_EAST net_0\nR2 = MOVE_SOUTH net_0\nR3 = ADD(R1, R2)\nR4 = NOOP(R3)\nreturn R4"
    );
    let apply = GridModel::build(TaskId::apply(Variant::Right), &nets()).unwrap();
    let text = apply.render(&apply.golden());
    assert!(text.contains("R3 = READ net_1"), "{text}");
    assert!(text.contains("R4 = MOVE_EAST net_1\nR5 = MOVE_SOUTH net_1\nR6 = APPLY(R0, R1, R4)\nR7 = APPLY(R6, R2, R5)\nreturn R7"), "{text}");
}

#[test]
fn apply_program_space_is_large() {
    let apply = GridModel::build(TaskId::apply(Variant::Top), &nets()).unwrap();
    assert!(apply.graph.program_space() >= 1e10, "{}", apply.graph.program_space());
}

#[test]
fn build_requires_matching_network() {
    assert!(GridModel::build(TaskId::apply(Variant::Top), &nets()[..1]).is_err());
    assert!(GridModel::build(TaskId::add(Variant::Top), &nets()[1..]).is_err());
    assert!(GridModel::build(TaskId::MATH, &nets()).is_err());
}

#[test]
fn marginals_normalized_under_random_programs() {
    let source = SymbolSource::synthetic(0, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lib = Library::new();
    lib.declare("net_0", NeuralFunctionSpec::digit_classifier(), "t", &mut rng).unwrap();
    let task = TaskId::add(Variant::Bottom);
    let model = GridModel::build(task, &NetRef::from_library(&lib)).unwrap();
    let ex = examples(task, &source, 8, 2);
    let refs: Vec<&Example> = ex.iter().collect();
    let batch = model.batch(&refs, &source).unwrap();
    for _ in 0..20 {
        let params = ProgramParams::init(&model.graph, &mut rng, 2.0);
        let mut tape = Tape::new();
        let fwd = model.graph.forward(&mut tape, &params, &batch, &LibraryPerception { library: &lib }, LossReduction::Mean).unwrap();
        for (i, _) in model.graph.model().vars().iter().enumerate() {
            let v = model.graph.var_by_name(&model.graph.model().vars()[i].name).unwrap();
            let t = tape.value(fwd.var(v).unwrap());
            for r in 0..t.rows() {
                assert!((t.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn identical_cells_make_reads_position_independent() {
    let source = SymbolSource::synthetic(0, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lib = Library::new();
    lib.declare("net_0", NeuralFunctionSpec::digit_classifier(), "t", &mut rng).unwrap();
    let task = TaskId::add(Variant::Top);
    let model = GridModel::build(task, &NetRef::from_library(&lib)).unwrap();
    let mut e = examples(task, &source, 1, 3).remove(0);
    let first = e.symbols[0];
    e.symbols = vec![first; 4];
    let batch = model.batch(&[&e], &source).unwrap();
    let params = ProgramParams::init(&model.graph, &mut rng, 2.0);
    let mut tape = Tape::new();
    let fwd = model.graph.forward(&mut tape, &params, &batch, &LibraryPerception { library: &lib }, LossReduction::Mean).unwrap();
    let single = fwd.marginal(&tape, model.graph.var_by_name("emb0_0").unwrap(), 0).unwrap();
    for t in 0..LINES {
        for dir in 0..4 {
            let read = fwd.marginal(&tape, model.graph.var_by_name(&format!("l{t}_read{dir}")).unwrap(), 0).unwrap();
            for (a, b) in read.probs().iter().zip(single.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
