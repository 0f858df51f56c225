use std::path::Path;

use crate::error::{Error, Result};
use crate::tasks::{Schedule, TaskId};

pub const TRAIN: &str = "train";
pub const TEST: &str = "test";

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsRow {
    /// Training steps completed when the row was recorded.
    pub step: u64,
    pub task: TaskId,
    /// `test` rows are held-out evaluations; `train` rows average the
    /// training batches since the previous evaluation.
    pub split: String,
    pub accuracy: f64,
    pub loss: f64,
    pub restart: usize,
}

/// Append-only metrics of one or more restarts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a row. Steps may not go backwards within a restart.
    pub fn push(&mut self, row: MetricsRow) {
        if let Some(last) = self.rows.iter().rev().find(|r| r.restart == row.restart) {
            assert!(row.step >= last.step, "metrics step went from {} to {}", last.step, row.step);
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn extend(&mut self, other: MetricsLog) {
        for r in other.rows {
            self.push(r);
        }
    }

    /// Held-out `(step, accuracy)` series of `task` in `restart`.
    pub fn series(&self, task: TaskId, restart: usize) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.task == task && r.restart == restart && r.split == TEST)
            .map(|r| (r.step, r.accuracy))
            .collect()
    }

    pub fn accuracy_at(&self, task: TaskId, restart: usize, step: u64) -> Option<f64> {
        self.series(task, restart).into_iter().find(|&(s, _)| s == step).map(|(_, a)| a)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Config(format!("metrics: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("metrics: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut log = MetricsLog::new();
        for r in csv::Reader::from_reader(text.as_bytes()).deserialize() {
            log.push(r.map_err(|e| Error::Config(format!("metrics: {e}")))?);
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::binio::write_file(path, self.to_csv()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// True when some evaluation above `level` is at least `jump` higher than
/// an evaluation at most `window - 1` positions earlier.
pub fn detect_convergence(accuracies: &[f64], jump: f64, level: f64, window: usize) -> bool {
    accuracies.iter().enumerate().any(|(j, &a)| {
        a > level && accuracies[j.saturating_sub(window - 1)..j].iter().any(|&b| a - b >= jump)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferRow {
    pub task: TaskId,
    pub phase_end_step: u64,
    pub at_phase_end: f64,
    pub at_end: f64,
    /// Largest peak-to-trough drop of held-out accuracy after the phase end.
    pub max_drawdown: f64,
}

impl TransferRow {
    pub fn reverse_transfer(&self) -> f64 {
        self.at_end - self.at_phase_end
    }
}

/// Accuracy of each task at the end of its own phase against the end of
/// training, for one restart.
pub fn measure_transfer(log: &MetricsLog, schedule: &Schedule, restart: usize) -> Vec<TransferRow> {
    schedule
        .tasks()
        .iter()
        .filter_map(|&task| {
            let end = schedule.phase_end(schedule.own_phase_of(task)?);
            let series = log.series(task, restart);
            let at_phase_end = series.iter().find(|&&(s, _)| s == end)?.1;
            let at_end = series.last()?.1;
            let mut peak = at_phase_end;
            let mut max_drawdown: f64 = 0.0;
            for &(_, a) in series.iter().filter(|&&(s, _)| s > end) {
                peak = peak.max(a);
                max_drawdown = max_drawdown.max(peak - a);
            }
            Some(TransferRow { task, phase_end_step: end, at_phase_end, at_end, max_drawdown })
        })
        .collect()
}
