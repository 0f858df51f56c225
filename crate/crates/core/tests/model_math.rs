use ntpt::arith::arith_apply;
use ntpt::model_2x2::NetRef;
use ntpt::model_math::*;
use ntpt::perception::{Mismatch, OraclePerception};
use ntpt::tasks::{gen_example, Example, Split, SymbolSource, TaskId};
use ntpt::terpret::{discretize, LossReduction, ProgramParams};
use ntpt_engine::Tape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nets() -> Vec<NetRef> {
    vec![NetRef::new("net_0", 10), NetRef::new("net_1", 4)]
}

fn examples(source: &SymbolSource, digits: usize, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_example(TaskId::MATH, source, Split::Test, digits, &mut rng).unwrap()).collect()
}

fn classes(e: &Example) -> Vec<usize> {
    e.symbols.iter().map(|s| s.class as usize).collect()
}

fn random_program(rng: &mut impl Rng, shape: MachineShape, nets: usize) -> MathProgram {
    let r = shape.registers();
    MathProgram {
        init_net: rng.gen_range(0..nets),
        blocks: (0..shape.blocks)
            .map(|_| Block {
                instr: rng.gen_range(0..2),
                net: rng.gen_range(0..nets),
                a: rng.gen_range(0..r),
                b: rng.gen_range(0..r),
                op: rng.gen_range(0..r),
                goto: rng.gen_range(0..shape.blocks),
            })
            .collect(),
        ret: rng.gen_range(0..r),
    }
}

/// Left-to-right evaluation written out independently of the task module.
fn fold(symbols: &[usize]) -> usize {
    let mut acc = symbols[0];
    for pair in symbols[1..].chunks(2) {
        acc = arith_apply(acc, pair[1], pair[0] - 10);
    }
    acc
}

#[test]
fn reference_loop_evaluates_every_length() {
    let source = SymbolSource::synthetic(1, 2, 2);
    let shape = MachineShape::default();
    let golden = MathProgram::golden(shape, 0, 1).unwrap();
    for digits in 1..=16 {
        for e in examples(&source, digits, 50, digits as u64) {
            let s = classes(&e);
            let out = extract_and_run(&golden, &nets(), &s, default_steps(s.len()));
            assert_eq!(out, Outcome::Halted { value: e.label, steps: 3 * digits - 2 }, "{s:?}");
            assert_eq!(e.label, fold(&s));
        }
    }
}

#[test]
fn three_symbol_tape_halts_after_four_steps() {
    // 7 * 2 = 14
    let golden = MathProgram::golden(MachineShape::default(), 0, 1).unwrap();
    let out = extract_and_run(&golden, &nets(), &[7, 12, 2], 8);
    assert_eq!(out, Outcome::Halted { value: 14, steps: 4 });
    // (3 + 4) * 2, left to right
    let out = extract_and_run(&golden, &nets(), &[3, 10, 4, 12, 2], 12);
    assert_eq!(out.value(), Some(14));
}

#[test]
fn single_block_move_loop_halts_on_first_check() {
    let shape = MachineShape::new(1).unwrap();
    let p = MathProgram {
        init_net: 0,
        blocks: vec![Block { instr: MOVE, net: 0, a: 0, b: 0, op: 0, goto: 0 }],
        ret: 0,
    };
    assert_eq!(extract_and_run(&p, &nets(), &[5], 4), Outcome::Halted { value: 5, steps: 1 });

    let source = SymbolSource::synthetic(1, 2, 2);
    let e = &examples(&source, 1, 1, 9)[0];
    let model = MathModel::build(shape, 1, 4, &nets()).unwrap();
    let params = ProgramParams::from_listing(&model.graph, &p.to_listing(), 50.0).unwrap();
    let batch = model.batch(&[e], &source).unwrap();
    let mut tape = Tape::new();
    let oracle = OraclePerception::new(Mismatch::Zero);
    let fwd = model.graph.forward(&mut tape, &params, &batch, &oracle, LossReduction::Mean).unwrap();
    let ctrl = fwd.marginal(&tape, model.control[1], 0).unwrap();
    assert!(ctrl.probs()[model.halted_state(0)] > 1.0 - 1e-9);
    let out = fwd.marginal(&tape, model.output, 0).unwrap();
    assert!(out.probs()[e.label] > 1.0 - 1e-9);
}

#[test]
fn apply_only_machine_never_halts() {
    let shape = MachineShape::default();
    let mut p = MathProgram::golden(shape, 0, 1).unwrap();
    p.blocks[0] = Block { instr: APPLY, net: 0, a: 2, b: 2, op: 0, goto: 0 };
    assert_eq!(extract_and_run(&p, &nets(), &[1, 10, 2], 100), Outcome::NonHalt);

    // The unrolled machine puts all mass on the uniform fallback.
    let source = SymbolSource::synthetic(1, 2, 2);
    let e = &examples(&source, 2, 1, 4)[0];
    let model = MathModel::build(shape, 3, 8, &nets()).unwrap();
    let params = ProgramParams::from_listing(&model.graph, &p.to_listing(), 50.0).unwrap();
    let batch = model.batch(&[e], &source).unwrap();
    let mut tape = Tape::new();
    let fwd = model
        .graph
        .forward(&mut tape, &params, &batch, &OraclePerception::new(Mismatch::Zero), LossReduction::Mean)
        .unwrap();
    let out = fwd.marginal(&tape, model.output, 0).unwrap();
    for &q in out.probs() {
        assert!((q - 1.0 / 19.0).abs() < 1e-6);
    }
}

#[test]
fn point_mass_runs_match_exact_execution() {
    let source = SymbolSource::synthetic(2, 2, 2);
    let oracle = OraclePerception::new(Mismatch::Zero);
    let shape = MachineShape::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (digits, tape_len) in [(1, 1), (2, 3), (3, 5), (4, 7)] {
        let steps = default_steps(tape_len);
        let model = MathModel::build(shape, tape_len, steps, &nets()).unwrap();
        let ex = examples(&source, digits, 4, 100 + digits as u64);
        let refs: Vec<&Example> = ex.iter().collect();
        let batch = model.batch(&refs, &source).unwrap();
        for _ in 0..50 {
            let p = random_program(&mut rng, shape, 2);
            let listing = p.to_listing();
            let params = ProgramParams::from_listing(&model.graph, &listing, 60.0).unwrap();
            assert_eq!(discretize(&model.graph, &params), listing);
            let mut tape = Tape::new();
            let fwd = model.graph.forward(&mut tape, &params, &batch, &oracle, LossReduction::Mean).unwrap();
            for (i, e) in ex.iter().enumerate() {
                let out = fwd.marginal(&tape, model.output, i).unwrap();
                match extract_and_run(&p, &nets(), &classes(e), steps) {
                    Outcome::Halted { value, steps: k } => {
                        assert!(out.probs()[value] > 1.0 - 1e-6, "{p:?} on {:?}", classes(e));
                        let ctrl = fwd.marginal(&tape, *model.control.last().unwrap(), i).unwrap();
                        assert!(ctrl.probs()[model.halted_state(k - 1)] > 1.0 - 1e-6);
                    }
                    Outcome::NonHalt => {
                        assert!(out.probs().iter().all(|q| (q - 1.0 / 19.0).abs() < 1e-6));
                    }
                }
            }
        }
    }
}

#[test]
fn control_mass_is_conserved_and_halting_is_final() {
    let source = SymbolSource::synthetic(3, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let perception = OraclePerception::new(Mismatch::Uniform);
    for (digits, tape_len) in [(1, 1), (3, 5), (5, 9)] {
        let model = MathModel::build(MachineShape::default(), tape_len, default_steps(tape_len), &nets()).unwrap();
        let ex = examples(&source, digits, 3, 5);
        let refs: Vec<&Example> = ex.iter().collect();
        let batch = model.batch(&refs, &source).unwrap();
        for _ in 0..10 {
            let params = ProgramParams::init(&model.graph, &mut rng, 1.5);
            let mut tape = Tape::new();
            let fwd = model.graph.forward(&mut tape, &params, &batch, &perception, LossReduction::Mean).unwrap();
            for i in 0..ex.len() {
                let mut prev = vec![0.0; model.steps];
                for (t, &c) in model.control.iter().enumerate() {
                    let m = fwd.marginal(&tape, c, i).unwrap();
                    assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    for (s, before) in prev.iter_mut().enumerate() {
                        let now = m.probs()[model.halted_state(s)];
                        // Mass halted at step s appears at t = s + 1 and then stays.
                        if t > s {
                            assert!((now - *before).abs() < 1e-9 || t == s + 1, "t={t} s={s}");
                        } else {
                            assert_eq!(now, 0.0);
                        }
                        *before = now;
                    }
                }
                let out = fwd.marginal(&tape, model.output, i).unwrap();
                assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn golden_listing_round_trips_and_renders() {
    let model = MathModel::build(MachineShape::default(), 3, 8, &nets()).unwrap();
    let listing = model.golden().unwrap();
    assert_eq!(MathProgram::from_listing(&listing, model.shape).unwrap().to_listing(), listing);
    assert_eq!(
        model.render(&listing).unwrap(),
        "init: R2 = READ net_0\n\
         block 0: R0 = MOVE net_1 ; goto 1\n\
         block 1: R1 = MOVE net_0 ; goto 2\n\
         block 2: R2 = APPLY(R2, R1, R0) ; goto 0\n\
         halt: return R2"
    );
    assert!(MathProgram::golden(MachineShape::new(2).unwrap(), 0, 1).is_err());
}

#[test]
fn shapes_outside_range_are_rejected() {
    assert!(MachineShape::new(5).is_err());
    assert!(MachineShape::new(0).is_err());
    assert!(MathModel::build(MachineShape { blocks: 5 }, 3, 8, &nets()).is_err());
    assert!(MathModel::build(MachineShape::default(), 0, 8, &nets()).is_err());
}

#[test]
fn tape_length_must_match_batch() {
    let source = SymbolSource::synthetic(1, 2, 2);
    let model = MathModel::build(MachineShape::default(), 3, 8, &nets()).unwrap();
    let e = &examples(&source, 3, 1, 1)[0];
    assert!(model.batch(&[e], &source).is_err());
}
