//! Procedural stand-in for Omniglot: stroke glyphs in the same directory
//! layout and at the same 105x105 resolution.
//!
//! Each alphabet owns a small library of curved strokes; its characters are
//! compositions of library strokes at fixed anchors, and each writer redraws
//! a character with a global affine wobble, per-point jitter and its own pen
//! width. Used by tests, `selftest` and demos when the real corpus is absent.

use std::io;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::omniglot::{Dataset, Split, BACKGROUND_DIR, EVALUATION_DIR};
use super::Image;
use crate::seed::{rng_for, Rng as SeedRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub background_alphabets: usize,
    pub evaluation_alphabets: usize,
    pub classes_per_alphabet: usize,
    pub writers: usize,
    pub side: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            background_alphabets: 30,
            evaluation_alphabets: 10,
            classes_per_alphabet: 6,
            writers: 20,
            side: 105,
            seed: 2020,
        }
    }
}

impl SynthConfig {
    /// Smallest corpus that still supports every run type.
    pub fn tiny() -> Self {
        Self {
            classes_per_alphabet: 3,
            ..Self::default()
        }
    }
}

type Point = (f64, f64);

/// Quadratic Bezier in unit coordinates relative to its anchor.
#[derive(Debug, Clone, Copy)]
struct Stroke([Point; 3]);

pub struct SynthCorpus {
    config: SynthConfig,
}

const SPLIT_BACKGROUND: u64 = 0;
const SPLIT_EVALUATION: u64 = 1;
const LIBRARY_SIZE: usize = 6;

impl SynthCorpus {
    pub fn new(config: SynthConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    fn library(&self, split: u64, alphabet: usize) -> Vec<Stroke> {
        let mut rng = rng_for(self.config.seed, &[split, alphabet as u64, u64::MAX]);
        (0..LIBRARY_SIZE)
            .map(|_| {
                let mut p = || (rng.random_range(-0.22..0.22), rng.random_range(-0.22..0.22));
                Stroke([p(), p(), p()])
            })
            .collect()
    }

    /// The character's strokes, placed at their anchors.
    fn prototype(&self, split: u64, alphabet: usize, class: usize) -> Vec<Stroke> {
        let library = self.library(split, alphabet);
        let mut rng = rng_for(self.config.seed, &[split, alphabet as u64, class as u64]);
        let count = rng.random_range(2..=3);
        (0..count)
            .map(|_| {
                let s = library[rng.random_range(0..library.len())];
                let anchor = (rng.random_range(0.32..0.68), rng.random_range(0.32..0.68));
                let scale = rng.random_range(0.8..1.3);
                let flip = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
                Stroke(s.0.map(|(x, y)| (anchor.0 + flip * scale * x, anchor.1 + scale * y)))
            })
            .collect()
    }

    fn render_writer(&self, strokes: &[Stroke], rng: &mut SeedRng) -> Array2<u8> {
        let side = self.config.side;
        let scale = rng.random_range(0.9..1.1);
        let angle: f64 = rng.random_range(-0.12..0.12);
        let shift = (rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04));
        let radius = rng.random_range(1.8..2.6) * side as f64 / 105.0;
        let (sin, cos) = angle.sin_cos();
        let mut warp = |(x, y): Point| {
            let (jx, jy) = (rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
            let (cx, cy) = (x - 0.5 + jx, y - 0.5 + jy);
            (
                0.5 + shift.0 + scale * (cos * cx - sin * cy),
                0.5 + shift.1 + scale * (sin * cx + cos * cy),
            )
        };
        let mut canvas = Array2::from_elem((side, side), 255u8);
        for stroke in strokes {
            let [p0, p1, p2] = stroke.0.map(&mut warp);
            let steps = 80;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let u = 1.0 - t;
                let x = (u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0) * side as f64;
                let y = (u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1) * side as f64;
                stamp(&mut canvas, x, y, radius);
            }
        }
        canvas
    }

    /// Raw luma rendering, dark ink on white, `side x side`.
    pub fn render(&self, evaluation: bool, alphabet: usize, class: usize, writer: usize) -> Array2<u8> {
        let split = if evaluation { SPLIT_EVALUATION } else { SPLIT_BACKGROUND };
        let strokes = self.prototype(split, alphabet, class);
        let mut rng = rng_for(
            self.config.seed,
            &[split, alphabet as u64, class as u64, 1 + writer as u64],
        );
        self.render_writer(&strokes, &mut rng)
    }

    fn alphabet_name(evaluation: bool, a: usize) -> String {
        if evaluation {
            format!("Synthetic_Evaluation_{:02}", a + 1)
        } else {
            format!("Synthetic_Background_{:02}", a + 1)
        }
    }

    fn alphabets(&self, evaluation: bool) -> usize {
        if evaluation {
            self.config.evaluation_alphabets
        } else {
            self.config.background_alphabets
        }
    }

    pub fn split(&self, evaluation: bool) -> Split {
        let mut split = Split::default();
        for a in 0..self.alphabets(evaluation) {
            split.alphabets.push(Self::alphabet_name(evaluation, a));
            for c in 0..self.config.classes_per_alphabet {
                let images = (0..self.config.writers)
                    .map(|w| {
                        let raw = self.render(evaluation, a, c, w);
                        (format!("{:02}", w + 1), Image::from_luma(raw.view()))
                    })
                    .collect();
                split.push_class(a, format!("character{:02}", c + 1), images);
            }
        }
        split
    }

    pub fn background_split(&self) -> Split {
        self.split(false)
    }

    pub fn evaluation_split(&self) -> Split {
        self.split(true)
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            background: self.background_split(),
            evaluation: self.evaluation_split(),
        }
    }

    /// Writes PNGs as `<root>/images_{background,evaluation}/<alphabet>/<character>/<id>_<writer>.png`.
    pub fn write_tree(&self, root: &Path) -> io::Result<()> {
        let mut global_class = 0usize;
        for (evaluation, dir) in [(false, BACKGROUND_DIR), (true, EVALUATION_DIR)] {
            for a in 0..self.alphabets(evaluation) {
                for c in 0..self.config.classes_per_alphabet {
                    global_class += 1;
                    let class_dir = root
                        .join(dir)
                        .join(Self::alphabet_name(evaluation, a))
                        .join(format!("character{:02}", c + 1));
                    std::fs::create_dir_all(&class_dir)?;
                    for w in 0..self.config.writers {
                        let raw = self.render(evaluation, a, c, w);
                        let side = self.config.side as u32;
                        let img = image::GrayImage::from_raw(side, side, raw.into_raw_vec_and_offset().0)
                            .expect("buffer sized to canvas");
                        img.save(class_dir.join(format!("{global_class:04}_{:02}.png", w + 1)))
                            .map_err(io::Error::other)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn stamp(canvas: &mut Array2<u8>, cx: f64, cy: f64, r: f64) {
    let (h, w) = canvas.dim();
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y1 = ((cy + r).ceil() as isize).clamp(0, h as isize - 1) as usize;
    let x1 = ((cx + r).ceil() as isize).clamp(0, w as isize - 1) as usize;
    if cy + r < 0.0 || cx + r < 0.0 {
        return;
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= r * r {
                canvas[[y, x]] = 0;
            }
        }
    }
}
