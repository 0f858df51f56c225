//! Layout of a run directory:
//!
//! ```text
//! resolved_config.toml
//! metrics.csv
//! summary.toml
//! restart_<k>/library.ntpt, programs.ntpp, listings.txt, snapshots/
//! ```

use std::path::{Path, PathBuf};

use ntpt::trainer::{RestartsReport, RunConfig, TEST};
use ntpt::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "resolved_config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.toml";

pub fn restart_dir(run: &Path, k: usize) -> PathBuf {
    run.join(format!("restart_{k}"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub converged_at: Option<u64>,
    pub final_accuracy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub converged: bool,
    pub error: Option<String>,
    #[serde(default)]
    pub tasks: Vec<TaskSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub attempted: usize,
    pub converged: Vec<usize>,
    pub best_restart: Option<usize>,
    #[serde(default)]
    pub restarts: Vec<RestartSummary>,
}

impl Summary {
    pub fn from_report(report: &RestartsReport) -> Summary {
        let mut restarts = Vec::new();
        for (k, r) in report.results.iter().enumerate() {
            match r {
                None => {}
                Some(Err(e)) => restarts.push(RestartSummary {
                    restart: k,
                    seed: None,
                    steps: None,
                    converged: false,
                    error: Some(e.to_string()),
                    tasks: Vec::new(),
                }),
                Some(Ok(r)) => restarts.push(RestartSummary {
                    restart: k,
                    seed: Some(r.seed),
                    steps: Some(r.steps),
                    converged: r.all_converged(),
                    error: None,
                    tasks: r
                        .tasks
                        .iter()
                        .map(|s| TaskSummary {
                            task: s.task.to_string(),
                            converged_at: s.converged_at,
                            final_accuracy: r
                                .log
                                .rows()
                                .iter()
                                .rev()
                                .find(|row| row.task == s.task && row.split == TEST)
                                .map(|row| row.accuracy),
                        })
                        .collect(),
                }),
            }
        }
        // Prefer restarts where every task converged, then mean final accuracy.
        let score = |r: &RestartSummary| {
            let accs: Vec<f64> = r.tasks.iter().filter_map(|t| t.final_accuracy).collect();
            let mean = if accs.is_empty() { 0.0 } else { accs.iter().sum::<f64>() / accs.len() as f64 };
            (r.converged, mean)
        };
        let best_restart = restarts
            .iter()
            .filter(|r| r.error.is_none())
            .max_by(|a, b| score(a).partial_cmp(&score(b)).expect("finite accuracies").then(b.restart.cmp(&a.restart)))
            .map(|r| r.restart);
        Summary { attempted: report.attempted(), converged: report.converged(), best_restart, restarts }
    }
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Config and summary of an existing run, with the restart to look at.
pub fn open(run: &Path, restart: Option<usize>) -> Result<(RunConfig, Summary, usize)> {
    let config: RunConfig = read_toml(&run.join(CONFIG_FILE))?;
    let summary: Summary = read_toml(&run.join(SUMMARY_FILE))?;
    let k = match restart.or(summary.best_restart) {
        Some(k) => k,
        None => return Err(Error::Config(format!("{} has no finished restart", run.display()))),
    };
    if !summary.restarts.iter().any(|r| r.restart == k && r.error.is_none()) {
        return Err(Error::Config(format!("restart {k} did not finish in {}", run.display())));
    }
    Ok((config, summary, k))
}
