//! Stage-2 evaluation: one-shot study/query episodes, min-MSE matching per
//! signal, corruption sweeps and their aggregation.

mod episode;
pub mod report;
mod stats;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aha::StmError;
use crate::dataset::DatasetError;
use crate::nncore::mse_slices;

pub use episode::{evaluate_run, Episode, RunDiagnostics, RunResult, SignalOutcome, StmConfigs, StmKind};
pub use stats::{aggregate_stats, Stats};
pub use sweep::{
    read_results, sweep, write_results, ResultRow, SweepConfig, SweepSummary, RESULTS_FILE, RESULTS_HEADER,
};

/// The representation used to match a query against the study set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signal {
    #[serde(rename = "LTM")]
    Ltm,
    #[serde(rename = "AHA-PR")]
    AhaPr,
    #[serde(rename = "AHA-PC")]
    AhaPc,
    #[serde(rename = "FastNN")]
    FastNn,
}

impl Signal {
    pub const ALL: [Signal; 4] = [Signal::Ltm, Signal::AhaPr, Signal::AhaPc, Signal::FastNn];

    pub fn as_str(self) -> &'static str {
        match self {
            Signal::Ltm => "LTM",
            Signal::AhaPr => "AHA-PR",
            Signal::AhaPc => "AHA-PC",
            Signal::FastNn => "FastNN",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Signal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.as_str() == s)
            .ok_or_else(|| format!("unknown signal `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stm(#[from] StmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },
    #[error("no results in {0}")]
    NoResults(String),
    #[error("cannot aggregate an empty group: {0}")]
    EmptyGroup(String),
    #[error("{0}")]
    Mismatch(String),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// For each query, the study index with the smallest MSE; ties go to the
/// lower index. Queries are matched independently.
pub fn match_by_mse<Q: AsRef<[f32]>, S: AsRef<[f32]>>(queries: &[Q], study: &[S]) -> Vec<usize> {
    assert!(!study.is_empty(), "match: empty study set");
    queries
        .iter()
        .map(|q| {
            let q = q.as_ref();
            let mut best = (0, f32::INFINITY);
            for (i, s) in study.iter().enumerate() {
                let s = s.as_ref();
                assert_eq!(q.len(), s.len(), "match: representation length mismatch");
                let d = mse_slices(q, s);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect()
}

/// Fraction of queries mapped to their true study item.
pub fn accuracy(mapping: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(mapping.len(), truth.len(), "accuracy: length mismatch");
    let hits = mapping.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_reps_give_identity() {
        let reps: Vec<Vec<f32>> = (0..20).map(|i| vec![i as f32, (i * i) as f32]).collect();
        let m = match_by_mse(&reps, &reps);
        assert_eq!(m, (0..20).collect::<Vec<_>>());
        assert_eq!(accuracy(&m, &m), 1.0);
    }

    #[test]
    fn hand_built_three_by_three() {
        let study = [vec![0.0f32, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let queries = [vec![0.9f32, 0.1], vec![0.1, 0.2], vec![0.4, 0.6]];
        let m = match_by_mse(&queries, &study);
        // exhaustive scan by squared distance
        let oracle: Vec<usize> = queries
            .iter()
            .map(|q| {
                (0..3)
                    .min_by(|&a, &b| {
                        let da: f32 = q.iter().zip(&study[a]).map(|(x, y)| (x - y).powi(2)).sum();
                        let db: f32 = q.iter().zip(&study[b]).map(|(x, y)| (x - y).powi(2)).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap()
            })
            .collect();
        assert_eq!(m, oracle);
        assert_eq!(m, vec![1, 0, 2]);
    }

    #[test]
    fn ties_go_to_lowest_index_and_need_not_be_bijective() {
        let study = [vec![1.0f32], vec![-1.0], vec![1.0]];
        let m = match_by_mse(&[vec![0.0f32], vec![0.9]], &study);
        assert_eq!(m, vec![0, 0]);
    }

    #[test]
    fn random_reps_sit_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut total = 0.0;
        let trials = 400;
        for _ in 0..trials {
            let mut rep = || (0..16).map(|_| rng.random_range(0.0..1.0f32)).collect::<Vec<_>>();
            let study: Vec<_> = (0..20).map(|_| rep()).collect();
            let queries: Vec<_> = (0..20).map(|_| rep()).collect();
            let truth: Vec<usize> = (0..20).collect();
            total += accuracy(&match_by_mse(&queries, &study), &truth);
        }
        let mean = total / trials as f64;
        assert!((mean - 0.05).abs() < 0.01, "mean accuracy {mean}");
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn dimension_mismatch_panics() {
        match_by_mse(&[vec![0.0f32]], &[vec![0.0f32, 1.0]]);
    }

    #[test]
    fn signal_names_round_trip() {
        for s in Signal::ALL {
            assert_eq!(s.as_str().parse::<Signal>().unwrap(), s);
        }
    }
}
