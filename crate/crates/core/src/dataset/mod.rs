//! Omniglot ingestion, evaluation-run construction and query corruption.

mod corrupt;
mod image;
mod omniglot;
mod runs;
pub mod synth;

use std::path::{Path, PathBuf};

pub use self::image::Image;
pub use corrupt::{
    add_noise, corruption_levels, corruption_schedule, noise_positions, occlude, CorruptionKind,
    CorruptionSpec, MAX_LEVEL, SCHEDULE_LEVELS,
};
pub use omniglot::{
    load_omniglot, load_png, load_split, CharacterClass, Dataset, Sample, Split,
    BACKGROUND_ALPHABETS, BACKGROUND_DIR, EVALUATION_ALPHABETS, EVALUATION_DIR,
};
pub use runs::{
    build_classification_run, build_instance_run, build_run, load_lake_runs, Item, RunSpec, Task,
    RUN_SIZE,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("missing {split} directory at {path}")]
    MissingSplit { split: String, path: PathBuf },
    #[error("{split}: expected {expected} alphabets, found {found}")]
    AlphabetCount {
        split: String,
        expected: usize,
        found: usize,
    },
    #[error("alphabet `{0}` appears in both background and evaluation")]
    SharedAlphabet(String),
    #[error("character directory {0} holds no images")]
    EmptyClass(PathBuf),
    #[error("image size differs from the rest of the dataset at {label}")]
    InconsistentSize { label: String },
    #[error("cannot read image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("need {needed} character classes, found {found}")]
    InsufficientClasses { needed: usize, found: usize },
    #[error("malformed run file {path} at line {line}")]
    Malformed { path: PathBuf, line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
