use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use ntpt_engine::{Optimizer, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{PerceptionMode, RunConfig};
use super::metrics::{detect_convergence, MetricsLog, MetricsRow, TEST, TRAIN};
use super::snapshot::{load_programs, save_programs, StoredProgram};
use super::task_model::{Score, TaskModel};
use crate::error::{Error, Result};
use crate::model_2x2::NetRef;
use crate::neural::{Library, LibraryPerception, NeuralFunctionSpec};
use crate::perception::{Mismatch, OraclePerception};
use crate::tasks::{gen_example, Example, ExampleStream, Scenario, Split, SymbolSource, TaskId};
use crate::terpret::{argmax, Perception, ProgramListing, ProgramParams};

/// Optimizer group of interpreter params.
pub const INTERPRETER: &str = "interpreter";
/// Optimizer group of library weights.
pub const PERCEPTUAL: &str = "perceptual";

/// Stable small index of a task, used to derive per-task random streams.
pub fn task_index(task: TaskId) -> u64 {
    match task.scenario {
        Scenario::Math => 8,
        _ => TaskId::grid_tasks().iter().position(|&t| t == task).expect("grid task") as u64,
    }
}

fn data_rng(config: &RunConfig, task: TaskId, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.data.seed);
    rng.set_stream(purpose * 16 + task_index(task));
    rng
}

/// Digits per example for `task`; grid tasks ignore it.
pub fn task_digits(config: &RunConfig, task: TaskId) -> usize {
    if task.scenario == Scenario::Math {
        config.math.train_digits
    } else {
        0
    }
}

/// The held-out set `task` is scored on. Depends only on the data seed.
pub fn eval_set(config: &RunConfig, source: &SymbolSource, task: TaskId) -> Result<Vec<Example>> {
    let mut rng = data_rng(config, task, 1);
    let digits = task_digits(config, task);
    (0..config.eval.examples).map(|_| gen_example(task, source, Split::Test, digits, &mut rng)).collect()
}

fn needed_nets(task: TaskId) -> &'static [(&'static str, fn() -> NeuralFunctionSpec)] {
    match task.scenario {
        Scenario::Add2x2 => &[("net_0", NeuralFunctionSpec::digit_classifier)],
        Scenario::Apply2x2 => &[("net_1", NeuralFunctionSpec::operator_classifier)],
        Scenario::Math => &[
            ("net_0", NeuralFunctionSpec::digit_classifier),
            ("net_1", NeuralFunctionSpec::operator_classifier),
        ],
    }
}

/// The networks oracle perception answers for.
pub fn oracle_nets() -> Vec<NetRef> {
    vec![NetRef::new("net_0", 10), NetRef::new("net_1", 4)]
}

pub struct TaskState {
    pub task: TaskId,
    pub model: TaskModel,
    pub params: ProgramParams,
    pub introduced_at: u64,
    pub converged_at: Option<u64>,
    stream: ExampleStream,
    eval: Vec<Example>,
    accuracies: Vec<f64>,
    train_loss: f64,
    train_correct: usize,
    train_seen: usize,
}

impl TaskState {
    pub fn listing(&self) -> ProgramListing {
        self.model.extract(&self.params)
    }

    pub fn eval_examples(&self) -> &[Example] {
        &self.eval
    }
}

pub struct RestartResult {
    pub restart: usize,
    pub seed: u64,
    /// Training steps completed.
    pub steps: u64,
    pub log: MetricsLog,
    pub library: Library,
    pub tasks: Vec<TaskState>,
}

impl RestartResult {
    pub fn task(&self, task: TaskId) -> Option<&TaskState> {
        self.tasks.iter().find(|t| t.task == task)
    }

    pub fn all_converged(&self) -> bool {
        !self.tasks.is_empty() && self.tasks.iter().all(|t| t.converged_at.is_some())
    }
}

pub fn snapshot_paths(dir: &Path, phase: usize) -> (PathBuf, PathBuf) {
    let base = dir.join("snapshots");
    (base.join(format!("phase_{phase}.ntpt")), base.join(format!("phase_{phase}.ntpp")))
}

struct Trainer<'a> {
    config: &'a RunConfig,
    source: &'a SymbolSource,
    restart: usize,
    library: Library,
    tasks: BTreeMap<TaskId, TaskState>,
    log: MetricsLog,
    out: Option<&'a Path>,
}

impl Trainer<'_> {
    fn perception(&self) -> Box<dyn Perception + '_> {
        match self.config.perception {
            PerceptionMode::Learned => Box::new(LibraryPerception { library: &self.library }),
            PerceptionMode::Oracle => Box::new(OraclePerception::new(Mismatch::Uniform)),
        }
    }

    /// Returns whether `task` is new.
    fn introduce(&mut self, task: TaskId, step: u64, rng: &mut ChaCha8Rng) -> Result<bool> {
        if self.tasks.contains_key(&task) {
            return Ok(false);
        }
        let nets = match self.config.perception {
            PerceptionMode::Oracle => oracle_nets(),
            PerceptionMode::Learned => {
                for (name, spec) in needed_nets(task) {
                    if !self.library.contains(name) {
                        self.library.declare(name, spec(), &task.to_string(), rng)?;
                    }
                }
                NetRef::from_library(&self.library)
            }
        };
        let model = TaskModel::build(task, &nets, &self.config.math)?;
        let params = ProgramParams::init(model.graph(), rng, self.config.init_std);
        let digits = task_digits(self.config, task);
        let stream =
            ExampleStream::new(task, self.source, digits, self.config.data.pool_cap, &mut data_rng(self.config, task, 2))?;
        let eval = eval_set(self.config, self.source, task)?;
        self.tasks.insert(
            task,
            TaskState {
                task,
                model,
                params,
                introduced_at: step,
                converged_at: None,
                stream,
                eval,
                accuracies: Vec::new(),
                train_loss: 0.0,
                train_correct: 0,
                train_seen: 0,
            },
        );
        Ok(true)
    }

    /// Score every task, or only `only`.
    fn evaluate(&mut self, step: u64, only: Option<TaskId>) -> Result<()> {
        let perception = self.perception();
        let mut scores = Vec::new();
        for s in self.tasks.values().filter(|s| only.map_or(true, |t| t == s.task)) {
            scores.push(s.model.score(&s.params, &s.eval, self.source, perception.as_ref(), self.config.eval.chunk)?);
        }
        drop(perception);
        let c = &self.config.convergence;
        let states = self.tasks.values_mut().filter(|s| only.map_or(true, |t| t == s.task));
        for (s, Score { accuracy, loss }) in states.zip(scores) {
            if s.train_seen > 0 {
                self.log.push(MetricsRow {
                    step,
                    task: s.task,
                    split: TRAIN.into(),
                    accuracy: s.train_correct as f64 / s.train_seen as f64,
                    loss: s.train_loss / s.train_seen as f64,
                    restart: self.restart,
                });
                (s.train_loss, s.train_correct, s.train_seen) = (0.0, 0, 0);
            }
            self.log.push(MetricsRow { step, task: s.task, split: TEST.into(), accuracy, loss, restart: self.restart });
            s.accuracies.push(accuracy);
            if s.converged_at.is_none() && detect_convergence(&s.accuracies, c.jump, c.level, c.window) {
                s.converged_at = Some(step);
            }
        }
        Ok(())
    }

    fn snapshot(&self, phase: usize) -> Result<()> {
        let Some(dir) = self.out else { return Ok(()) };
        let (lib, progs) = snapshot_paths(dir, phase);
        self.library.save(&lib)?;
        let stored: Vec<StoredProgram> =
            self.tasks.values().map(|s| StoredProgram::new(s.task, s.model.nets(), &s.params)).collect();
        save_programs(&progs, &stored)
    }

    fn train_step(&mut self, task: TaskId, step: u64, opt: &mut Optimizer, rng: &mut ChaCha8Rng) -> Result<()> {
        let state = &self.tasks[&task];
        let examples = (0..self.config.batch_size)
            .map(|_| state.stream.draw(self.source, rng))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Example> = examples.iter().collect();
        let batch = state.model.batch(&refs, self.source)?;
        let mut tape = Tape::new();
        let perception = self.perception();
        let fwd = state.model.graph().forward(&mut tape, &state.params, &batch, perception.as_ref(), self.config.reduction)?;
        drop(perception);
        let loss_id = fwd.loss.ok_or_else(|| Error::Eval("model observes nothing".into()))?;
        let loss = tape.value(loss_id).item();
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss} at step {step} on task {task}")));
        }
        let out = fwd.var(state.model.output()).ok_or_else(|| Error::Eval("output was not computed".into()))?;
        let correct = examples.iter().enumerate().filter(|(i, e)| argmax(tape.value(out).row_slice(*i)) == e.label).count();
        let grads = tape.backward(loss_id)?;
        let state = self.tasks.get_mut(&task).expect("introduced");
        opt.step(state.params.iter_mut(INTERPRETER).chain(self.library.params_mut(PERCEPTUAL)), &grads)?;
        if self.config.perception == PerceptionMode::Learned {
            self.library.record_step(&grads);
        }
        let per_example = match self.config.reduction {
            crate::terpret::LossReduction::Mean => loss * examples.len() as f64,
            crate::terpret::LossReduction::Sum => loss,
        };
        state.train_loss += per_example;
        state.train_correct += correct;
        state.train_seen += examples.len();
        Ok(())
    }
}

/// One restart of `config`, seeded with `config.seed + restart`. Snapshots
/// go under `out/snapshots` when `out` is given.
pub fn train(
    config: &RunConfig,
    source: &SymbolSource,
    library: Library,
    restart: usize,
    out: Option<&Path>,
) -> Result<RestartResult> {
    config.validate()?;
    let schedule = config.build_schedule()?;
    let total = schedule.total_steps();
    let seed = config.seed + restart as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Optimizer::new(config.optimizer.kind())
        .with_group(INTERPRETER, config.optimizer.lr_interpreter)
        .with_group(PERCEPTUAL, config.optimizer.lr_perceptual);
    let phase_ends: BTreeMap<u64, usize> = (0..schedule.phases().len()).map(|k| (schedule.phase_end(k), k)).collect();
    let mut evals: BTreeSet<u64> = (0..=total).step_by(config.eval.every as usize).collect();
    evals.extend(phase_ends.keys());
    let mut t = Trainer { config, source, restart, library, tasks: BTreeMap::new(), log: MetricsLog::new(), out };

    let mut step: u64 = 0;
    loop {
        // Evaluations and snapshots at `step` cover the tasks trained so far;
        // tasks of the next phase join afterwards.
        for task in schedule.seen_by(step.saturating_sub(1)) {
            t.introduce(task, step, &mut rng)?;
        }
        if evals.contains(&step) {
            t.evaluate(step, None)?;
            if let Some(&k) = phase_ends.get(&step) {
                t.snapshot(k)?;
            }
            if config.stop_on_convergence
                && t.tasks.len() == schedule.tasks().len()
                && t.tasks.values().all(|s| s.converged_at.is_some())
            {
                break;
            }
        }
        if step == total {
            break;
        }
        // A task joining mid-run is scored before its first step, so a jump
        // within its first evaluation interval still counts as convergence.
        for task in schedule.seen_by(step) {
            if t.introduce(task, step, &mut rng)? {
                t.evaluate(step, Some(task))?;
            }
        }
        let task = schedule.sample_task(step, &mut rng);
        t.train_step(task, step, &mut opt, &mut rng)?;
        step += 1;
    }
    Ok(RestartResult {
        restart,
        seed,
        steps: step,
        log: t.log,
        library: t.library,
        tasks: t.tasks.into_values().collect(),
    })
}

pub struct RestartsReport {
    /// Indexed by restart; `None` for restarts skipped after `until` held.
    pub results: Vec<Option<Result<RestartResult>>>,
}

impl RestartsReport {
    pub fn finished(&self) -> impl Iterator<Item = &RestartResult> {
        self.results.iter().filter_map(|r| r.as_ref().and_then(|r| r.as_ref().ok()))
    }

    pub fn converged(&self) -> Vec<usize> {
        self.finished().filter(|r| r.all_converged()).map(|r| r.restart).collect()
    }

    pub fn attempted(&self) -> usize {
        self.results.iter().filter(|r| r.is_some()).count()
    }

    /// Metrics of every finished restart, in restart order.
    pub fn merged_log(&self) -> MetricsLog {
        let mut log = MetricsLog::new();
        for r in self.finished() {
            log.extend(r.log.clone());
        }
        log
    }
}

/// Run `n` isolated restarts on up to `config.jobs` threads. Once a
/// finished restart satisfies `until`, restarts not yet started are
/// skipped.
pub fn run_restarts(
    config: &RunConfig,
    source: &SymbolSource,
    library: &Library,
    n: usize,
    out: Option<&Path>,
    until: impl Fn(&RestartResult) -> bool + Sync,
) -> RestartsReport {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<RestartResult>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..config.jobs.min(n).max(1) {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let dir = out.map(|o| o.join(format!("restart_{k}")));
                let r = train(config, source, library.clone(), k, dir.as_deref());
                if r.as_ref().is_ok_and(&until) {
                    stop.store(true, Ordering::SeqCst);
                }
                results.lock().expect("results lock")[k] = Some(r);
            });
        }
    });
    RestartsReport { results: results.into_inner().expect("results lock") }
}

/// Score `task` with the library and params snapshotted at the end of
/// `phase`.
pub fn replay(config: &RunConfig, source: &SymbolSource, dir: &Path, phase: usize, task: TaskId) -> Result<Score> {
    let (lib_path, prog_path) = snapshot_paths(dir, phase);
    let library = Library::load(&lib_path)?;
    let stored = load_programs(&prog_path)?
        .into_iter()
        .find(|p| p.task == task)
        .ok_or_else(|| Error::Eval(format!("no params for `{task}` in {}", prog_path.display())))?;
    let model = TaskModel::build(task, &stored.nets, &config.math)?;
    let params = stored.params_for(model.graph())?;
    let eval = eval_set(config, source, task)?;
    let perception: Box<dyn Perception> = match config.perception {
        PerceptionMode::Learned => Box::new(LibraryPerception { library: &library }),
        PerceptionMode::Oracle => Box::new(OraclePerception::new(Mismatch::Uniform)),
    };
    model.score(&params, &eval, source, perception.as_ref(), config.eval.chunk)
}

/// Files a finished restart leaves in its run directory.
pub fn restart_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("library.ntpt"), dir.join("programs.ntpp"), dir.join("listings.txt"))
}

impl RestartResult {
    /// Write the final library, program params and readable listings.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (lib, progs, listings) = restart_paths(dir);
        self.library.save(&lib)?;
        let stored: Vec<StoredProgram> =
            self.tasks.iter().map(|s| StoredProgram::new(s.task, s.model.nets(), &s.params)).collect();
        save_programs(&progs, &stored)?;
        let mut text = String::new();
        for s in &self.tasks {
            let status = match s.converged_at {
                Some(step) => format!("converged at step {step}"),
                None => "not converged".to_string(),
            };
            text.push_str(&format!("# {} ({status})\n{}\n\n", s.task, s.model.render(&s.listing())?));
        }
        std::fs::write(&listings, text).map_err(|e| Error::io(&listings, e))
    }
}

/// A task's trained model and params, read back from a restart directory.
pub struct SavedTask {
    pub task: TaskId,
    pub model: TaskModel,
    pub params: ProgramParams,
}

/// Library and task params saved by [`RestartResult::save`].
pub fn load_restart(config: &RunConfig, dir: &Path) -> Result<(Library, Vec<SavedTask>)> {
    let (lib, progs, _) = restart_paths(dir);
    let library = Library::load(&lib)?;
    let mut tasks = Vec::new();
    for p in load_programs(&progs)? {
        let model = TaskModel::build(p.task, &p.nets, &config.math)?;
        let params = p.params_for(model.graph())?;
        tasks.push(SavedTask { task: p.task, model, params });
    }
    Ok((library, tasks))
}
