//! Corruption sweeps. The unit of work is one (task, seed, run): its STMs
//! study once and are then queried at every (kind, level). Each finished
//! unit is written to its own chunk file, so an interrupted sweep resumes
//! where it stopped; the merged results file is sorted canonically and
//! therefore independent of worker count and scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::episode::{corruption_seed, Episode, StmConfigs, StmKind};
use super::{HarnessError, RunResult, Signal};
use crate::dataset::{build_run, corruption_levels, CorruptionKind, CorruptionSpec, Split, Task};
use crate::ltm::Ltm;

pub const RESULTS_FILE: &str = "results.csv";
pub const RESULTS_HEADER: &str = "task,kind,level,seed,run,signal,accuracy,recall_loss";
const CHUNK_DIR: &str = "chunks";
const FINGERPRINT_FILE: &str = "fingerprint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub tasks: Vec<Task>,
    pub kinds: Vec<CorruptionKind>,
    /// Evenly spaced corruption levels from 0 to the maximum.
    pub levels: usize,
    /// Seeds `seed, seed + 1, ...` of the experiment.
    pub seeds: usize,
    pub runs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl SweepConfig {
    pub fn full() -> Self {
        Self {
            tasks: Task::ALL.to_vec(),
            kinds: vec![CorruptionKind::Occlusion, CorruptionKind::Noise],
            levels: 10,
            seeds: 10,
            runs: 20,
        }
    }

    /// Reduced profile for quick checks.
    pub fn fast() -> Self {
        Self {
            levels: 5,
            seeds: 3,
            runs: 5,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tasks.is_empty() || self.kinds.is_empty() {
            return Err("sweep.tasks and sweep.kinds must be non-empty".into());
        }
        if self.kinds.contains(&CorruptionKind::None) {
            return Err("sweep.kinds takes occlusion and/or noise; level 0 is always included".into());
        }
        if self.levels < 2 || self.seeds == 0 || self.runs == 0 {
            return Err("sweep needs levels >= 2, seeds >= 1 and runs >= 1".into());
        }
        Ok(())
    }

    pub fn level_values(&self) -> Vec<f64> {
        corruption_levels(self.levels)
    }

    pub fn seed_values(&self, base: u64) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| base.wrapping_add(i)).collect()
    }
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub task: Task,
    pub kind: CorruptionKind,
    pub level: f64,
    pub seed: u64,
    pub run: usize,
    pub signal: Signal,
    pub accuracy: f64,
    pub recall_loss: Option<f64>,
}

impl ResultRow {
    pub fn from_result(result: &RunResult) -> Vec<ResultRow> {
        result
            .outcomes
            .iter()
            .map(|o| ResultRow {
                task: result.task,
                kind: result.corruption.kind,
                level: result.corruption.level,
                seed: result.seed,
                run: result.run,
                signal: o.signal,
                accuracy: o.accuracy,
                recall_loss: o.recall_loss,
            })
            .collect()
    }

    fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.task, self.kind)
            .cmp(&(other.task, other.kind))
            .then(self.level.total_cmp(&other.level))
            .then((self.seed, self.run, self.signal).cmp(&(other.seed, other.run, other.signal)))
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(RESULTS_HEADER.split(',')).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::io(path, source),
        kind => HarnessError::Malformed {
            path: path.display().to_string(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads a results file; a file without data rows is [`HarnessError::NoResults`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() {
        return Err(HarnessError::NoResults(display));
    }
    if headers.iter().collect::<Vec<_>>().join(",") != RESULTS_HEADER {
        return Err(HarnessError::Malformed {
            path: display,
            line: 1,
            message: format!("expected header `{RESULTS_HEADER}`"),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| HarnessError::Malformed {
            path: display.clone(),
            line,
            message,
        };
        let row: ResultRow = record
            .deserialize(Some(&headers))
            .map_err(|e| malformed(e.to_string()))?;
        if !(0.0..=1.0).contains(&row.accuracy) {
            return Err(malformed(format!("accuracy {} outside [0, 1]", row.accuracy)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::NoResults(display));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub results: PathBuf,
    pub rows: usize,
    pub units: usize,
    /// Units found complete on disk and not recomputed.
    pub resumed: usize,
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    task: Task,
    seed: u64,
    run: usize,
}

impl Unit {
    fn file_name(&self) -> String {
        format!("{}_{}_{}.csv", self.task, self.seed, self.run)
    }
}

fn fingerprint(ltm: &Ltm, split: &Split, configs: &StmConfigs, sweep: &SweepConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    let meta = serde_json::json!({ "stm": configs, "sweep": sweep, "seed": seed, "ltm": ltm.config() });
    h.update(meta.to_string().as_bytes());
    for v in ltm.encoder().kernels.iter().chain(ltm.decoder().kernels.iter()) {
        h.update(v.to_le_bytes());
    }
    for s in &split.samples {
        for v in s.image.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn evaluate_unit(
    ltm: &Ltm,
    split: &Split,
    configs: &StmConfigs,
    sweep: &SweepConfig,
    unit: Unit,
) -> Result<Vec<ResultRow>, HarnessError> {
    let run = build_run(split, unit.task, unit.seed, unit.run)?;
    let episode = Episode::study(ltm, &run, configs, StmKind::Both, unit.seed, unit.run)?;
    let mut rows = Vec::new();
    for &kind in &sweep.kinds {
        for level in sweep.level_values() {
            let spec = CorruptionSpec::new(kind, level, corruption_seed(unit.seed, unit.task, unit.run));
            rows.extend(ResultRow::from_result(&episode.evaluate(&spec)));
        }
    }
    Ok(rows)
}

/// Runs every pending unit of the sweep on `workers` threads (0 = all
/// cores) and merges the chunks into `<out_dir>/results.csv`.
pub fn sweep(
    ltm: &Ltm,
    split: &Split,
    configs: &StmConfigs,
    config: &SweepConfig,
    seed: u64,
    out_dir: &Path,
    workers: usize,
) -> Result<SweepSummary, HarnessError> {
    config.validate().map_err(HarnessError::Mismatch)?;
    let chunk_dir = out_dir.join(CHUNK_DIR);
    fs::create_dir_all(&chunk_dir).map_err(|e| HarnessError::io(&chunk_dir, e))?;

    let print = fingerprint(ltm, split, configs, config, seed);
    let print_path = chunk_dir.join(FINGERPRINT_FILE);
    match fs::read_to_string(&print_path) {
        Ok(existing) if existing.trim() != print => {
            return Err(HarnessError::Mismatch(format!(
                "{} holds partial results from a different configuration, checkpoint or dataset",
                out_dir.display()
            )))
        }
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(&print_path, &print).map_err(|e| HarnessError::io(&print_path, e))?
        }
        Err(e) => return Err(HarnessError::io(&print_path, e)),
    }

    let units: Vec<Unit> = config
        .tasks
        .iter()
        .flat_map(|&task| {
            config
                .seed_values(seed)
                .into_iter()
                .flat_map(move |s| (0..config.runs).map(move |run| Unit { task, seed: s, run }))
        })
        .collect();
    let pending: Vec<Unit> = units
        .iter()
        .copied()
        .filter(|u| !chunk_dir.join(u.file_name()).exists())
        .collect();
    let resumed = units.len() - pending.len();
    log::info!("sweep: {} units, {} already complete", units.len(), resumed);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Mismatch(format!("worker pool: {e}")))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    pool.install(|| {
        pending.par_iter().try_for_each(|&unit| {
            let rows = evaluate_unit(ltm, split, configs, config, unit)?;
            let path = chunk_dir.join(unit.file_name());
            let tmp = path.with_extension("tmp");
            write_results(&tmp, &rows)?;
            fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            log::info!("sweep: {n}/{} units ({} seed {} run {})", pending.len(), unit.task, unit.seed, unit.run);
            Ok::<(), HarnessError>(())
        })
    })?;

    let mut rows = Vec::new();
    for unit in &units {
        rows.extend(read_results(&chunk_dir.join(unit.file_name()))?);
    }
    rows.sort_by(ResultRow::canonical_cmp);
    let results = out_dir.join(RESULTS_FILE);
    write_results(&results, &rows)?;
    Ok(SweepSummary {
        results,
        rows: rows.len(),
        units: units.len(),
        resumed,
    })
}
