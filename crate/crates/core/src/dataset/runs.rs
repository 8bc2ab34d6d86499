use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::omniglot::{load_png, Split};
use super::{DatasetError, Image};
use crate::seed::{rng_for, tag};

/// Study and query sets hold this many images.
pub const RUN_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Instance,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Classification, Task::Instance];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Instance => "instance",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Task::Classification => 0,
            Task::Instance => 1,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classification" => Ok(Task::Classification),
            "instance" => Ok(Task::Instance),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    /// Class index within the split, or the training-file index for
    /// externally supplied runs.
    pub class_id: usize,
    pub writer: String,
    pub label: String,
}

/// One evaluation episode: `truth[q]` is the study index matching query `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub task: Task,
    pub study: Vec<Image>,
    pub study_items: Vec<Item>,
    pub query: Vec<Image>,
    pub query_items: Vec<Item>,
    pub truth: Vec<usize>,
}

impl RunSpec {
    pub fn truth_is_bijection(&self) -> bool {
        let n = self.study.len();
        self.query.len() == n
            && self.truth.len() == n
            && self.truth.iter().copied().collect::<BTreeSet<_>>() == (0..n).collect()
    }
}

fn item(split: &Split, sample: usize) -> Item {
    let s = &split.samples[sample];
    Item {
        class_id: s.class_id,
        writer: s.writer.clone(),
        label: split.label(sample),
    }
}

fn sample_by_writer(split: &Split, class_id: usize, writer: &str) -> Option<usize> {
    split.classes[class_id]
        .samples
        .iter()
        .copied()
        .find(|&i| split.samples[i].writer == writer)
}

/// 20 distinct classes, studied by one writer and queried by another,
/// queries shuffled. Classes come from a single alphabet when one has at
/// least 20 classes, otherwise from the whole split.
pub fn build_classification_run(split: &Split, seed: u64, run: usize) -> Result<RunSpec, DatasetError> {
    let mut rng = rng_for(seed, &[tag::RUN, Task::Classification.index(), run as u64]);
    let usable = |c: usize| split.classes[c].samples.len() >= 2;

    let per_alphabet: Vec<Vec<usize>> = (0..split.alphabets.len())
        .map(|a| {
            (0..split.classes.len())
                .filter(|&c| split.classes[c].alphabet_id == a && usable(c))
                .collect()
        })
        .collect();
    let big: Vec<&Vec<usize>> = per_alphabet.iter().filter(|v| v.len() >= RUN_SIZE).collect();
    let pool: Vec<usize> = if big.is_empty() {
        (0..split.classes.len()).filter(|&c| usable(c)).collect()
    } else {
        big[rng.random_range(0..big.len())].clone()
    };
    if pool.len() < RUN_SIZE {
        return Err(DatasetError::InsufficientClasses {
            needed: RUN_SIZE,
            found: pool.len(),
        });
    }
    let classes: Vec<usize> = index::sample(&mut rng, pool.len(), RUN_SIZE)
        .into_iter()
        .map(|i| pool[i])
        .collect();

    let writer_sets: Vec<BTreeSet<&str>> = classes
        .iter()
        .map(|&c| {
            split.classes[c]
                .samples
                .iter()
                .map(|&i| split.samples[i].writer.as_str())
                .collect()
        })
        .collect();
    let common: Vec<&str> = writer_sets[0]
        .iter()
        .copied()
        .filter(|w| writer_sets.iter().all(|s| s.contains(w)))
        .collect();

    let pairs: Vec<(usize, usize)> = if common.len() >= 2 {
        let picked = index::sample(&mut rng, common.len(), 2);
        let (ws, wq) = (common[picked.index(0)], common[picked.index(1)]);
        classes
            .iter()
            .map(|&c| {
                (
                    sample_by_writer(split, c, ws).unwrap(),
                    sample_by_writer(split, c, wq).unwrap(),
                )
            })
            .collect()
    } else {
        classes
            .iter()
            .map(|&c| {
                let s = &split.classes[c].samples;
                let picked = index::sample(&mut rng, s.len(), 2);
                (s[picked.index(0)], s[picked.index(1)])
            })
            .collect()
    };

    let mut perm: Vec<usize> = (0..RUN_SIZE).collect();
    perm.shuffle(&mut rng);
    Ok(RunSpec {
        task: Task::Classification,
        study: pairs.iter().map(|&(s, _)| split.samples[s].image.clone()).collect(),
        study_items: pairs.iter().map(|&(s, _)| item(split, s)).collect(),
        query: perm.iter().map(|&p| split.samples[pairs[p].1].image.clone()).collect(),
        query_items: perm.iter().map(|&p| item(split, pairs[p].1)).collect(),
        truth: perm,
    })
}

/// 20 exemplars of a single class, each queried by an identical copy.
/// Within one seed, runs draw classes without repeats.
pub fn build_instance_run(split: &Split, seed: u64, run: usize) -> Result<RunSpec, DatasetError> {
    let mut eligible: Vec<usize> = (0..split.classes.len())
        .filter(|&c| split.classes[c].samples.len() >= RUN_SIZE)
        .collect();
    if eligible.is_empty() {
        return Err(DatasetError::InsufficientClasses {
            needed: 1,
            found: 0,
        });
    }
    eligible.shuffle(&mut rng_for(seed, &[tag::INSTANCE_CLASSES]));
    let class_id = eligible[run % eligible.len()];

    let mut rng = rng_for(seed, &[tag::RUN, Task::Instance.index(), run as u64]);
    let members = &split.classes[class_id].samples;
    let chosen: Vec<usize> = index::sample(&mut rng, members.len(), RUN_SIZE)
        .into_iter()
        .map(|i| members[i])
        .collect();
    let mut perm: Vec<usize> = (0..RUN_SIZE).collect();
    perm.shuffle(&mut rng);
    Ok(RunSpec {
        task: Task::Instance,
        study: chosen.iter().map(|&s| split.samples[s].image.clone()).collect(),
        study_items: chosen.iter().map(|&s| item(split, s)).collect(),
        query: perm.iter().map(|&p| split.samples[chosen[p]].image.clone()).collect(),
        query_items: perm.iter().map(|&p| item(split, chosen[p])).collect(),
        truth: perm,
    })
}

pub fn build_run(split: &Split, task: Task, seed: u64, run: usize) -> Result<RunSpec, DatasetError> {
    match task {
        Task::Classification => build_classification_run(split, seed, run),
        Task::Instance => build_instance_run(split, seed, run),
    }
}

/// Reads published one-shot trials: `runNN/class_labels.txt` lines of the
/// form `runNN/test/itemKK.png runNN/training/classMM.png`, with paths
/// relative to `dir`.
pub fn load_lake_runs(dir: &Path) -> Result<Vec<RunSpec>, DatasetError> {
    let mut run_dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| DatasetError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("class_labels.txt").is_file())
        .collect();
    run_dirs.sort();
    if run_dirs.is_empty() {
        return Err(DatasetError::MissingSplit {
            split: "one-shot runs".into(),
            path: dir.to_path_buf(),
        });
    }
    let resolve = |rel: &str| {
        let p = dir.join(rel);
        if p.is_file() {
            p
        } else {
            // Some copies drop the leading run directory from the listed paths.
            let tail: std::path::PathBuf = Path::new(rel).components().skip(1).collect();
            dir.join(tail)
        }
    };
    let mut runs = Vec::with_capacity(run_dirs.len());
    for run_dir in run_dirs {
        let labels = run_dir.join("class_labels.txt");
        let text = std::fs::read_to_string(&labels).map_err(|e| DatasetError::io(&labels, e))?;
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(q), Some(s)) => pairs.push((q.to_string(), s.to_string())),
                _ => {
                    return Err(DatasetError::Malformed {
                        path: labels.clone(),
                        line: n + 1,
                    })
                }
            }
        }
        let mut training: Vec<String> = pairs.iter().map(|(_, s)| s.clone()).collect();
        training.sort();
        training.dedup();
        if training.len() != pairs.len() {
            return Err(DatasetError::Malformed {
                path: labels.clone(),
                line: 0,
            });
        }
        let lake_item = |i: usize, rel: &str| Item {
            class_id: i,
            writer: String::new(),
            label: rel.to_string(),
        };
        let mut run = RunSpec {
            task: Task::Classification,
            study: Vec::new(),
            study_items: Vec::new(),
            query: Vec::new(),
            query_items: Vec::new(),
            truth: Vec::new(),
        };
        for (i, rel) in training.iter().enumerate() {
            run.study.push(load_png(&resolve(rel))?);
            run.study_items.push(lake_item(i, rel));
        }
        for (q, s) in &pairs {
            let t = training.binary_search(s).expect("training file listed");
            run.query.push(load_png(&resolve(q))?);
            run.query_items.push(lake_item(t, q));
            run.truth.push(t);
        }
        runs.push(run);
    }
    Ok(runs)
}
