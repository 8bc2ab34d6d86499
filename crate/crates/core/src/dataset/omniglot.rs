use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use super::{DatasetError, Image};

pub const BACKGROUND_DIR: &str = "images_background";
pub const EVALUATION_DIR: &str = "images_evaluation";
pub const BACKGROUND_ALPHABETS: usize = 30;
pub const EVALUATION_ALPHABETS: usize = 10;

#[derive(Debug, Clone)]
pub struct Sample {
    pub alphabet_id: usize,
    pub class_id: usize,
    pub writer: String,
    pub image: Image,
}

#[derive(Debug, Clone)]
pub struct CharacterClass {
    pub alphabet_id: usize,
    pub name: String,
    /// Indices into [`Split::samples`].
    pub samples: Vec<usize>,
}

/// One half of the corpus. Class ids index [`Split::classes`].
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub alphabets: Vec<String>,
    pub classes: Vec<CharacterClass>,
    pub samples: Vec<Sample>,
}

impl Split {
    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.samples
            .first()
            .map(|s| (s.image.height(), s.image.width()))
    }

    pub fn label(&self, sample: usize) -> String {
        let s = &self.samples[sample];
        let class = &self.classes[s.class_id];
        format!(
            "{}/{}/{}",
            self.alphabets[class.alphabet_id], class.name, s.writer
        )
    }

    pub(crate) fn push_class(&mut self, alphabet_id: usize, name: String, images: Vec<(String, Image)>) {
        let class_id = self.classes.len();
        let mut indices = Vec::with_capacity(images.len());
        for (writer, image) in images {
            indices.push(self.samples.len());
            self.samples.push(Sample {
                alphabet_id,
                class_id,
                writer,
                image,
            });
        }
        self.classes.push(CharacterClass {
            alphabet_id,
            name,
            samples: indices,
        });
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub background: Split,
    pub evaluation: Split,
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Writer label from an Omniglot file name such as `0709_17.png` -> `17`.
fn writer_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.rsplit_once('_') {
        Some((_, w)) => w.to_string(),
        None => stem,
    }
}

/// Reads a PNG and applies the standard preprocessing of [`Image::from_luma`].
pub fn load_png(path: &Path) -> Result<Image, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    let raw = Array2::from_shape_vec((h as usize, w as usize), luma.into_raw())
        .expect("luma buffer matches dimensions");
    Ok(Image::from_luma(raw.view()))
}

pub fn load_split(dir: &Path, split: &str) -> Result<Split, DatasetError> {
    if !dir.is_dir() {
        return Err(DatasetError::MissingSplit {
            split: split.to_string(),
            path: dir.to_path_buf(),
        });
    }
    let mut out = Split::default();
    for (alphabet_id, alphabet_dir) in sorted_subdirs(dir)?.into_iter().enumerate() {
        out.alphabets.push(file_name(&alphabet_dir));
        for char_dir in sorted_subdirs(&alphabet_dir)? {
            let files = sorted_pngs(&char_dir)?;
            if files.is_empty() {
                return Err(DatasetError::EmptyClass(char_dir));
            }
            let images = files
                .par_iter()
                .map(|p| load_png(p).map(|img| (writer_label(p), img)))
                .collect::<Result<Vec<_>, _>>()?;
            out.push_class(alphabet_id, file_name(&char_dir), images);
        }
    }
    if let Some(dims) = out.image_dims() {
        if let Some(bad) = out
            .samples
            .iter()
            .position(|s| (s.image.height(), s.image.width()) != dims)
        {
            return Err(DatasetError::InconsistentSize {
                label: out.label(bad),
            });
        }
    }
    Ok(out)
}

/// Loads `images_background` and `images_evaluation` under `root` and checks
/// the alphabet counts and that the two splits share no alphabet.
pub fn load_omniglot(root: &Path) -> Result<Dataset, DatasetError> {
    let background = load_split(&root.join(BACKGROUND_DIR), BACKGROUND_DIR)?;
    let evaluation = load_split(&root.join(EVALUATION_DIR), EVALUATION_DIR)?;
    for (split, name, expected) in [
        (&background, BACKGROUND_DIR, BACKGROUND_ALPHABETS),
        (&evaluation, EVALUATION_DIR, EVALUATION_ALPHABETS),
    ] {
        if split.alphabets.len() != expected {
            return Err(DatasetError::AlphabetCount {
                split: name.to_string(),
                expected,
                found: split.alphabets.len(),
            });
        }
    }
    if let Some(shared) = background
        .alphabets
        .iter()
        .find(|a| evaluation.alphabets.contains(a))
    {
        return Err(DatasetError::SharedAlphabet(shared.clone()));
    }
    if background.image_dims() != evaluation.image_dims() {
        return Err(DatasetError::InconsistentSize {
            label: "background vs evaluation".into(),
        });
    }
    log::info!(
        "loaded omniglot: {} background classes, {} evaluation classes",
        background.classes.len(),
        evaluation.classes.len()
    );
    Ok(Dataset {
        background,
        evaluation,
    })
}
