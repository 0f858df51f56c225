//! Offline checks on synthetic glyphs. Each prints one PASS/FAIL line.

use ntpt::arith::{arith_apply, arith_indicator, REGISTER_SIZE};
use ntpt::check::gradcheck;
use ntpt::model_math::{MachineShape, MathModel};
use ntpt::neural::{Library, NeuralFunctionSpec};
use ntpt::tasks::{gen_example, Example, Split, SymbolSource, TaskId};
use ntpt::terpret::ProgramParams;
use ntpt::trainer::{
    grid_discrete_accuracy, math_discrete_accuracy, math_examples, oracle_nets, MathConfig, Reader, TaskModel,
};
use ntpt::model_math::MathProgram;
use ntpt::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = fn(&SymbolSource) -> Result<String>;

fn arithmetic(_: &SymbolSource) -> Result<String> {
    let ind = arith_indicator()?;
    let mut n = 0;
    for a in 0..REGISTER_SIZE {
        for b in 0..REGISTER_SIZE {
            for op in 0..4 {
                if ind.eval(&[a, b, op]) != arith_apply(a, b, op) {
                    return Err(Error::Eval(format!("indicator disagrees at ({a}, {b}, {op})")));
                }
                n += 1;
            }
        }
    }
    Ok(format!("{n} tuples"))
}

fn grid_golden(source: &SymbolSource) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for task in TaskId::grid_tasks() {
        let TaskModel::Grid(model) = TaskModel::build(task, &oracle_nets(), &MathConfig::default())? else {
            unreachable!("grid task")
        };
        let examples: Vec<Example> =
            (0..100).map(|_| gen_example(task, source, Split::Test, 0, &mut rng)).collect::<Result<_>>()?;
        let acc = grid_discrete_accuracy(&model, &model.golden(), &examples, source, Reader::Oracle)?;
        if acc != 1.0 {
            return Err(Error::Eval(format!("reference program for {task} scores {acc}")));
        }
    }
    Ok("8 tasks".into())
}

fn math_golden(source: &SymbolSource) -> Result<String> {
    let shape = MachineShape::default();
    let program = MathProgram::golden(shape, 0, 1)?;
    let math = MathConfig::default();
    for digits in 1..=16 {
        let examples = math_examples(source, digits, 50, 7)?;
        let (acc, stuck) = math_discrete_accuracy(&program, &oracle_nets(), &examples, source, Reader::Oracle, &math)?;
        if acc != 1.0 || stuck != 0 {
            return Err(Error::Eval(format!("reference program scores {acc} on {digits} digits")));
        }
    }
    Ok("1..16 digits".into())
}

fn gradients(source: &SymbolSource) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut library = Library::new();
    library.declare("net_0", NeuralFunctionSpec::digit_classifier(), "selftest", &mut rng)?;
    let task: TaskId = "add2x2/top".parse()?;
    let grid = TaskModel::build(task, &oracle_nets()[..1], &MathConfig::default())?;
    let examples: Vec<Example> =
        (0..4).map(|_| gen_example(task, source, Split::Train, 0, &mut rng)).collect::<Result<_>>()?;
    let refs: Vec<&Example> = examples.iter().collect();
    let params = ProgramParams::init(grid.graph(), &mut rng, 1.0);
    let e1 = gradcheck(grid.graph(), &params, Some(&library), &grid.batch(&refs, source)?, 20, &mut rng)?;

    let math = MathModel::build(MachineShape::default(), 3, 8, &oracle_nets())?;
    let examples: Vec<Example> =
        (0..4).map(|_| gen_example(TaskId::MATH, source, Split::Train, 2, &mut rng)).collect::<Result<_>>()?;
    let refs: Vec<&Example> = examples.iter().collect();
    let params = ProgramParams::init(&math.graph, &mut rng, 1.0);
    let e2 = gradcheck(&math.graph, &params, None, &math.batch(&refs, source)?, 20, &mut rng)?;
    let worst = e1.max(e2);
    if worst >= 1e-3 {
        return Err(Error::Numeric(format!("relative gradient error {worst:.2e}")));
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn library_round_trip(_: &SymbolSource) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut library = Library::new();
    library.declare("net_0", NeuralFunctionSpec::digit_classifier(), "selftest", &mut rng)?;
    let bytes = library.to_bytes();
    let back = Library::from_bytes(&bytes, std::path::Path::new("<memory>"))?;
    if back != library {
        return Err(Error::Eval("library changed across serialization".into()));
    }
    Ok(format!("{} bytes", bytes.len()))
}

pub fn run() -> Result<()> {
    let source = SymbolSource::synthetic(0, 4, 4);
    let checks: [(&str, Check); 5] = [
        ("arithmetic indicator", arithmetic),
        ("grid reference programs", grid_golden),
        ("math reference program", math_golden),
        ("gradients", gradients),
        ("library round trip", library_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check(&source) {
            Ok(detail) => println!("PASS {name} ({detail})"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed > 0 {
        return Err(Error::Eval(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
