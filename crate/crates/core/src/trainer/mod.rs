//! Training over a task schedule with a shared neural library.

mod config;
mod evaluate;
mod metrics;
mod run;
mod snapshot;
mod task_model;

pub use config::{
    ConvergenceConfig, DataConfig, DataKind, EvalConfig, MathConfig, OptimizerChoice, OptimizerConfig, PerceptionMode,
    RunConfig, ScheduleConfig,
};
pub use metrics::{detect_convergence, measure_transfer, MetricsLog, MetricsRow, TransferRow, TEST, TRAIN};
pub use run::{load_restart, restart_paths, SavedTask, 
    eval_set, oracle_nets, replay, run_restarts, snapshot_paths, task_digits, task_index, train, RestartResult,
    RestartsReport, TaskState, INTERPRETER, PERCEPTUAL,
};
pub use snapshot::{load_programs, programs_from_bytes, programs_to_bytes, save_programs, StoredProgram, PROGRAMS_VERSION};
pub use evaluate::{
    grid_discrete_accuracy, math_discrete_accuracy, math_examples, math_sweep, LengthRow, Reader,
};
pub use task_model::{math_at_length, Score, TaskModel};
