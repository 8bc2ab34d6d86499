use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{accuracy, match_by_mse, HarnessError, Signal};
use crate::aha::{Aha, AhaConfig};
use crate::dataset::{CorruptionKind, CorruptionSpec, Image, RunSpec, Task};
use crate::fastnn::{self, FastNn};
use crate::ltm::{Encoding, Ltm};
use crate::nncore::{mse_slices, NetConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StmConfigs {
    pub aha: AhaConfig,
    pub fastnn: NetConfig,
}

impl Default for StmConfigs {
    fn default() -> Self {
        Self {
            aha: AhaConfig::default(),
            fastnn: fastnn::default_config(),
        }
    }
}

/// Which short-term memories take part in an episode. The LTM signal is
/// always reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmKind {
    Aha,
    FastNn,
    Both,
}

impl StmKind {
    fn aha(self) -> bool {
        matches!(self, StmKind::Aha | StmKind::Both)
    }

    fn fastnn(self) -> bool {
        matches!(self, StmKind::FastNn | StmKind::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalOutcome {
    pub signal: Signal,
    /// Study index chosen for each query.
    pub mapping: Vec<usize>,
    pub accuracy: f64,
    /// Mean MSE between the model's recalled image and the true study
    /// image; `None` for the LTM, which cannot recall.
    pub recall_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunDiagnostics {
    /// Queries whose PC recall hit the sweep limit.
    pub pc_unconverged: usize,
    /// Queries whose PC output equals one of the stored codes.
    pub pc_on_stored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub task: Task,
    pub corruption: CorruptionSpec,
    pub seed: u64,
    pub run: usize,
    pub outcomes: Vec<SignalOutcome>,
    pub diagnostics: RunDiagnostics,
}

impl RunResult {
    pub fn outcome(&self, signal: Signal) -> Option<&SignalOutcome> {
        self.outcomes.iter().find(|o| o.signal == signal)
    }
}

/// Seed of the STM used for run `run` of `task` under experiment seed `seed`.
pub(crate) fn stm_seed(seed: u64, task: Task, run: usize) -> u64 {
    derive_seed(seed, &[task.index(), run as u64])
}

/// Per-run seed of the query corruption stream.
pub(crate) fn corruption_seed(seed: u64, task: Task, run: usize) -> u64 {
    derive_seed(seed, &[task.index(), run as u64, u64::MAX])
}

fn stack(rows: &[&[f32]]) -> Array2<f32> {
    let cols = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

fn recall_loss(recalled: &[Array1<f32>], run: &RunSpec) -> f64 {
    let total: f64 = recalled
        .iter()
        .zip(&run.truth)
        .map(|(img, &t)| mse_slices(img.as_slice().unwrap(), run.study[t].as_slice()) as f64)
        .sum();
    total / recalled.len() as f64
}

/// A studied episode: the STMs have seen the clean study set once and can
/// be queried under any corruption without further learning.
pub struct Episode<'a> {
    ltm: &'a Ltm,
    run: &'a RunSpec,
    seed: u64,
    run_index: usize,
    study_encodings: Vec<Encoding>,
    aha: Option<Aha>,
    fastnn: Option<(FastNn, Vec<Array1<f32>>)>,
}

impl<'a> Episode<'a> {
    pub fn study(
        ltm: &'a Ltm,
        run: &'a RunSpec,
        configs: &StmConfigs,
        kind: StmKind,
        seed: u64,
        run_index: usize,
    ) -> Result<Self, HarnessError> {
        let study_encodings = ltm.encode_all(&run.study);
        let enc_rows: Vec<&[f32]> = study_encodings.iter().map(Encoding::as_slice).collect();
        let img_rows: Vec<&[f32]> = run.study.iter().map(Image::as_slice).collect();
        let encodings = stack(&enc_rows);
        let images = stack(&img_rows);
        let stm = stm_seed(seed, run.task, run_index);

        let aha = if kind.aha() {
            let mut aha = Aha::new(encodings.ncols(), images.ncols(), configs.aha.clone(), stm);
            aha.study(encodings.view(), images.view())?;
            Some(aha)
        } else {
            None
        };
        let fastnn = if kind.fastnn() {
            let mut net = FastNn::new(encodings.ncols(), images.ncols(), configs.fastnn, stm);
            net.study(encodings.view(), images.view())?;
            let hidden = encodings.rows().into_iter().map(|r| net.infer(r).0).collect();
            Some((net, hidden))
        } else {
            None
        };
        Ok(Self {
            ltm,
            run,
            seed,
            run_index,
            study_encodings,
            aha,
            fastnn,
        })
    }

    pub fn aha(&self) -> Option<&Aha> {
        self.aha.as_ref()
    }

    pub fn fastnn(&self) -> Option<&FastNn> {
        self.fastnn.as_ref().map(|(n, _)| n)
    }

    /// Queries the studied memories with corrupted query images.
    pub fn evaluate(&self, corruption: &CorruptionSpec) -> RunResult {
        let run = self.run;
        let queries: Vec<Encoding> = run
            .query
            .iter()
            .enumerate()
            .map(|(i, img)| self.ltm.encode(&corruption.apply(img, i)))
            .collect();
        let query_rows: Vec<&[f32]> = queries.iter().map(Encoding::as_slice).collect();
        let study_rows: Vec<&[f32]> = self.study_encodings.iter().map(Encoding::as_slice).collect();

        let mut outcomes = Vec::new();
        let mut push = |signal, mapping: Vec<usize>, recall_loss| {
            outcomes.push(SignalOutcome {
                signal,
                accuracy: accuracy(&mapping, &run.truth),
                mapping,
                recall_loss,
            })
        };
        push(Signal::Ltm, match_by_mse(&query_rows, &study_rows), None);

        let mut diagnostics = RunDiagnostics::default();
        if let Some(aha) = &self.aha {
            let recalls: Vec<_> = query_rows.iter().map(|q| aha.recall(ndarray::ArrayView1::from(*q))).collect();
            let targets_unit: Vec<Vec<f32>> = aha.targets().iter().map(|t| t.to_unit()).collect();
            let targets_bipolar: Vec<Vec<f32>> = aha.targets().iter().map(|t| t.to_bipolar_f32()).collect();
            let pr: Vec<&[f32]> = recalls.iter().map(|r| r.pr.as_slice().unwrap()).collect();
            let pc: Vec<Vec<f32>> = recalls.iter().map(|r| r.pc.pattern.to_bipolar_f32()).collect();
            let images: Vec<Array1<f32>> = recalls.iter().map(|r| r.image.clone()).collect();
            let loss = recall_loss(&images, run);
            push(Signal::AhaPr, match_by_mse(&pr, &targets_unit), Some(loss));
            push(Signal::AhaPc, match_by_mse(&pc, &targets_bipolar), Some(loss));
            diagnostics.pc_unconverged = recalls.iter().filter(|r| !r.pc.converged).count();
            diagnostics.pc_on_stored = recalls
                .iter()
                .filter(|r| aha.targets().contains(&r.pc.pattern))
                .count();
        }
        if let Some((net, study_hidden)) = &self.fastnn {
            let (hidden, images): (Vec<_>, Vec<_>) =
                query_rows.iter().map(|q| net.infer(ndarray::ArrayView1::from(*q))).unzip();
            let hidden_rows: Vec<&[f32]> = hidden.iter().map(|h| h.as_slice().unwrap()).collect();
            let study_hidden_rows: Vec<&[f32]> = study_hidden.iter().map(|h| h.as_slice().unwrap()).collect();
            let loss = recall_loss(&images, run);
            push(Signal::FastNn, match_by_mse(&hidden_rows, &study_hidden_rows), Some(loss));
        }

        RunResult {
            task: run.task,
            corruption: *corruption,
            seed: self.seed,
            run: self.run_index,
            outcomes,
            diagnostics,
        }
    }
}

/// Studies fresh STMs on `run` and evaluates them once. The STMs are
/// dropped afterwards, so every call starts from a reset state.
pub fn evaluate_run(
    ltm: &Ltm,
    configs: &StmConfigs,
    kind: StmKind,
    run: &RunSpec,
    (corruption_kind, level): (CorruptionKind, f64),
    seed: u64,
    run_index: usize,
) -> Result<RunResult, HarnessError> {
    let episode = Episode::study(ltm, run, configs, kind, seed, run_index)?;
    let corruption = CorruptionSpec::new(corruption_kind, level, corruption_seed(seed, run.task, run_index));
    Ok(episode.evaluate(&corruption))
}
