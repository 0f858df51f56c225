use std::path::{Path, PathBuf};

use clap::Args;
use ntpt::neural::{InputSpec, Library, OutputSpec};
use ntpt::tasks::TaskId;
use ntpt::trainer::{
    eval_set, grid_discrete_accuracy, load_restart, math_sweep, run_restarts, PerceptionMode, Reader, RunConfig,
    TaskModel,
};
use ntpt::{Error, Result};

use crate::run_dir::{self, restart_dir, Summary, CONFIG_FILE, METRICS_FILE, SUMMARY_FILE};

#[derive(Args)]
pub struct TrainArgs {
    /// TOML run configuration; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `lifelong`, `math` or a single task such as `add2x2/top`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Steps per phase.
    #[arg(long)]
    steps: Option<u64>,
    /// Start from the networks in this library file.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Answer neural calls with the true symbol classes.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    run: PathBuf,
    /// Defaults to the best restart.
    #[arg(long)]
    restart: Option<usize>,
}

#[derive(Args)]
pub struct EvalArgs {
    run: PathBuf,
    #[arg(long)]
    task: Option<TaskId>,
    #[arg(long)]
    restart: Option<usize>,
    /// Math expression lengths in digits: `1..16` (inclusive), `3` or `2,4,8`.
    #[arg(long, default_value = "1..16")]
    lengths: String,
    /// Math examples per length.
    #[arg(long, default_value_t = 200)]
    examples: usize,
    /// Longest expression also scored by the differentiable machine.
    #[arg(long, default_value_t = 4)]
    differentiable_max: usize,
}

#[derive(Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "lifelong")]
    scenario: String,
    #[arg(long)]
    steps: Option<u64>,
}

fn preset(scenario: &str, steps: Option<u64>) -> Result<RunConfig> {
    Ok(match scenario {
        "lifelong" => RunConfig::lifelong(steps.unwrap_or(2000)),
        "math" => RunConfig::math(steps.unwrap_or(2000)),
        task => RunConfig::single(task.parse()?, steps.unwrap_or(2000)),
    })
}

fn resolve(a: &TrainArgs) -> Result<RunConfig> {
    let mut c = match (&a.config, &a.scenario) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --config or --scenario, not both".into())),
        (Some(path), None) => run_dir::read_toml(path)?,
        (None, s) => preset(s.as_deref().unwrap_or("lifelong"), a.steps)?,
    };
    if let Some(r) = a.restarts {
        c.restarts = r;
    }
    if let Some(j) = a.jobs {
        c.jobs = j;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(s) = a.steps {
        c.schedule.steps_per_phase = s;
    }
    if a.oracle {
        c.perception = PerceptionMode::Oracle;
    }
    if c.restarts == 0 || c.jobs == 0 {
        return Err(Error::Config("restarts and jobs must be at least 1".into()));
    }
    c.validate()?;
    Ok(c)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let config = resolve(&a)?;
    let library = match &a.library {
        Some(p) => Library::load(p)?,
        None => Library::new(),
    };
    let source = config.data.source()?;
    std::fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    run_dir::write_toml(&a.out.join(CONFIG_FILE), &config)?;

    let until = |r: &ntpt::trainer::RestartResult| config.stop_on_convergence && r.all_converged();
    let report = run_restarts(&config, &source, &library, config.restarts, Some(&a.out), until);
    for r in report.finished() {
        r.save(&restart_dir(&a.out, r.restart))?;
    }
    report.merged_log().save(&a.out.join(METRICS_FILE))?;
    let summary = Summary::from_report(&report);
    run_dir::write_toml(&a.out.join(SUMMARY_FILE), &summary)?;

    for r in &summary.restarts {
        match &r.error {
            Some(e) => println!("restart {}: failed: {e}", r.restart),
            None => {
                let tasks: Vec<String> = r
                    .tasks
                    .iter()
                    .map(|t| match t.converged_at {
                        Some(s) => format!("{} converged@{s}", t.task),
                        None => format!("{} {:.3}", t.task, t.final_accuracy.unwrap_or(0.0)),
                    })
                    .collect();
                println!("restart {}: {}", r.restart, tasks.join(", "));
            }
        }
    }
    println!("converged {}/{} restarts; best {:?}", summary.converged.len(), summary.attempted, summary.best_restart);
    // Every attempted restart failing is an error, not an empty result.
    match report.results.iter().flatten().find_map(|r| r.as_ref().err()) {
        Some(_) if report.finished().next().is_none() => {
            Err(Error::Numeric(format!("all {} restarts failed", summary.attempted)))
        }
        _ => Ok(()),
    }
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let (_, _, k) = run_dir::open(&a.run, a.restart)?;
    let path = restart_dir(&a.run, k).join("listings.txt");
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    println!("# restart {k}");
    print!("{text}");
    Ok(())
}

/// `a..b` (inclusive), a single number, or a comma list.
pub fn parse_lengths(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("invalid --lengths `{s}`"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(Error::Config(format!("--lengths `{s}`: lengths are digit counts starting at 1")));
    }
    Ok(out)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let lengths = parse_lengths(&a.lengths)?;
    let (config, _, k) = run_dir::open(&a.run, a.restart)?;
    let (library, tasks) = load_restart(&config, &restart_dir(&a.run, k))?;
    let source = config.data.source()?;
    let reader = match config.perception {
        PerceptionMode::Learned => Reader::Library(&library),
        PerceptionMode::Oracle => Reader::Oracle,
    };
    let selected: Vec<_> = tasks.iter().filter(|t| a.task.map_or(true, |want| t.task == want)).collect();
    if selected.is_empty() {
        return Err(Error::Config(format!("restart {k} has no task {:?}", a.task.map(|t| t.to_string()))));
    }
    println!("# restart {k}");
    for t in selected {
        match &t.model {
            TaskModel::Math(m) => {
                println!("{}: digits  differentiable  discrete  non-halting", t.task);
                let rows = math_sweep(
                    m,
                    &t.params,
                    &config.math,
                    &source,
                    reader,
                    &lengths,
                    a.examples,
                    config.data.seed,
                    a.differentiable_max,
                    config.eval.chunk,
                )?;
                for r in rows {
                    let soft = r.differentiable.map_or("-".to_string(), |v| format!("{v:.4}"));
                    println!("{:>6}  {soft:>14}  {:>8.4}  {:>11}", r.digits, r.discrete, r.non_halting);
                }
            }
            TaskModel::Grid(g) => {
                let examples = eval_set(&config, &source, t.task)?;
                let perception = reader.perception();
                let soft = t.model.score(&t.params, &examples, &source, perception.as_ref(), config.eval.chunk)?;
                let listing = t.model.extract(&t.params);
                let discrete = grid_discrete_accuracy(g, &listing, &examples, &source, reader)?;
                println!(
                    "{}: differentiable {:.4}  discrete {discrete:.4}  loss {:.4}",
                    t.task, soft.accuracy, soft.loss
                );
            }
        }
    }
    Ok(())
}

pub fn inspect_library(file: &Path) -> Result<()> {
    let library = Library::load(file)?;
    println!("{} function(s)", library.len());
    for f in library.functions() {
        let spec = f.spec();
        let inputs: Vec<String> = spec
            .inputs()
            .iter()
            .map(|i| match i {
                InputSpec::Tensor(w) => format!("tensor[{w}]"),
                InputSpec::Int(d) => format!("int[{}]", d.size()),
            })
            .collect();
        let output = match spec.output() {
            OutputSpec::Int(d) => format!("int[{}]", d.size()),
            OutputSpec::Tensor(w) => format!("tensor[{w}]"),
        };
        let weights: usize = f.weights().iter().map(|t| t.len()).sum();
        println!(
            "{}: ({}) -> {output}, hidden {:?}, {weights} weights, {} steps, created by {}",
            f.name(),
            inputs.join(", "),
            spec.hidden(),
            f.steps(),
            if f.created_by().is_empty() { "-" } else { f.created_by() }
        );
    }
    Ok(())
}

pub fn config(a: ConfigArgs) -> Result<()> {
    let c = preset(&a.scenario, a.steps)?;
    print!("{}", toml::to_string_pretty(&c).map_err(|e| Error::Config(e.to_string()))?);
    Ok(())
}
