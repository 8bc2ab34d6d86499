//! Long-term memory: a single-layer convolutional k-sparse autoencoder,
//! pretrained slowly on the background alphabets and frozen afterwards.
//!
//! Encoding pipeline for a frozen model:
//! conv -> per-position top-k across filters -> ReLU -> Interest Filter mask
//! -> 3x3 box smoothing -> 2x2 max-pool.

pub(crate) mod autoencoder;
mod checkpoint;
pub mod interest;

use ndarray::{Array2, Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Image;
use crate::nncore::{conv_output_dim, AdamConfig, ConvLayer, ConvTranspose};

pub use autoencoder::{pretrain, sparse_hidden, LtmError, PretrainReport, SparseHidden};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use interest::{dog_kernel, interest_mask, InterestConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LtmConfig {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Active filters kept at each conv position.
    pub k_conv: usize,
    pub interest: InterestConfig,
    pub smoothing: usize,
    pub pool: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Background images held out to measure reconstruction loss.
    pub holdout: usize,
    /// Cap on training images per epoch; 0 uses every background image.
    pub max_train_images: usize,
}

impl Default for LtmConfig {
    fn default() -> Self {
        Self {
            filters: 121,
            kernel: 10,
            stride: 5,
            k_conv: 4,
            interest: InterestConfig::default(),
            smoothing: 3,
            pool: 2,
            epochs: 8,
            batch_size: 32,
            adam: AdamConfig::with_lr(1e-3),
            holdout: 256,
            max_train_images: 0,
        }
    }
}

impl LtmConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("filters", self.filters),
            ("kernel", self.kernel),
            ("stride", self.stride),
            ("k_conv", self.k_conv),
            ("smoothing", self.smoothing),
            ("pool", self.pool),
            ("batch_size", self.batch_size),
            ("interest.kernel", self.interest.kernel),
            ("interest.nms_window", self.interest.nms_window),
            ("interest.top_m", self.interest.top_m),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(format!("ltm.{name} must be positive"));
        }
        if self.k_conv > self.filters {
            return Err("ltm.k_conv exceeds ltm.filters".into());
        }
        if !(self.interest.sigma1 > 0.0 && self.interest.sigma1 < self.interest.sigma2) {
            return Err("ltm.interest needs 0 < sigma1 < sigma2".into());
        }
        if self.interest.kernel.is_multiple_of(2)
            || self.interest.nms_window.is_multiple_of(2)
            || self.smoothing.is_multiple_of(2) {
            return Err("ltm.interest.kernel, nms_window and smoothing must be odd".into());
        }
        Ok(())
    }

    pub fn grid_dims(&self, side: usize) -> usize {
        conv_output_dim(side, self.kernel, self.stride)
    }

    pub fn pooled_dims(&self, side: usize) -> usize {
        conv_output_dim(self.grid_dims(side), self.pool, self.pool)
    }

    pub fn encoding_len(&self, side: usize) -> usize {
        let p = self.pooled_dims(side);
        self.filters * p * p
    }
}

/// Non-negative feature tensor `[filters x h x w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding(Array3<f32>);

impl Encoding {
    pub fn new(data: Array3<f32>) -> Self {
        debug_assert!(data.iter().all(|&v| v >= 0.0));
        Self(data)
    }

    pub fn view(&self) -> ArrayView3<'_, f32> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f32] {
        self.0.as_slice().expect("contiguous encoding")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A pretrained, frozen LTM. Only this type can encode, so Stage-2 code
/// cannot reach a model that is still learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Ltm {
    config: LtmConfig,
    side: usize,
    encoder: ConvLayer<f32>,
    decoder: ConvTranspose<f32>,
}

impl Ltm {
    pub(crate) fn from_parts(
        config: LtmConfig,
        side: usize,
        encoder: ConvLayer<f32>,
        decoder: ConvTranspose<f32>,
    ) -> Self {
        Self {
            config,
            side,
            encoder,
            decoder,
        }
    }

    pub fn config(&self) -> &LtmConfig {
        &self.config
    }

    pub fn image_side(&self) -> usize {
        self.side
    }

    pub fn encoder(&self) -> &ConvLayer<f32> {
        &self.encoder
    }

    pub fn decoder(&self) -> &ConvTranspose<f32> {
        &self.decoder
    }

    pub fn encoding_len(&self) -> usize {
        self.config.encoding_len(self.side)
    }

    fn check_image(&self, image: &Image) {
        assert!(
            image.height() == self.side && image.width() == self.side,
            "ltm: expected {0}x{0} images, got {1}x{2}",
            self.side,
            image.height(),
            image.width()
        );
    }

    /// Sparse pre-pool hidden activity `[positions x filters]` for one image,
    /// before the Interest Filter.
    pub fn hidden(&self, image: &Image) -> Array2<f32> {
        self.check_image(image);
        let batch = image.view().insert_axis(Axis(0));
        let cols = self.encoder.unfold(batch);
        sparse_hidden(&self.encoder, cols.view(), self.config.k_conv).values
    }

    /// Reconstruction from pre-pool hidden activity; training path only.
    pub fn decode(&self, hidden: &Array2<f32>) -> Image {
        let out = self.decoder.forward(hidden.view(), 1, self.side, self.side).out;
        Image::new(out.index_axis_move(Axis(0), 0).mapv(|v| v.clamp(0.0, 1.0)))
    }

    pub fn encode(&self, image: &Image) -> Encoding {
        let cfg = &self.config;
        let hidden = self.hidden(image);
        let grid = cfg.grid_dims(self.side);
        let mask = interest_mask(image, &cfg.interest, cfg.kernel, cfg.stride);

        // [positions x filters] -> [filters x gy x gx], masked
        let mut maps = Array3::<f32>::zeros((cfg.filters, grid, grid));
        for ((pos, f), &v) in hidden.indexed_iter() {
            let (gy, gx) = (pos / grid, pos % grid);
            maps[[f, gy, gx]] = v * mask[[gy, gx]];
        }
        let smoothed = box_smooth(&maps, cfg.smoothing);
        Encoding::new(max_pool(&smoothed, cfg.pool))
    }

    pub fn encode_all(&self, images: &[Image]) -> Vec<Encoding> {
        images.iter().map(|img| self.encode(img)).collect()
    }
}

/// Per-channel mean over a `size x size` window with zero padding.
fn box_smooth(maps: &Array3<f32>, size: usize) -> Array3<f32> {
    let (c, h, w) = maps.dim();
    let half = (size / 2) as isize;
    let norm = (size * size) as f32;
    Array3::from_shape_fn((c, h, w), |(f, y, x)| {
        let mut acc = 0.0;
        for dy in -half..=half {
            for dx in -half..=half {
                let (sy, sx) = (y as isize + dy, x as isize + dx);
                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                    acc += maps[[f, sy as usize, sx as usize]];
                }
            }
        }
        acc / norm
    })
}

fn max_pool(maps: &Array3<f32>, size: usize) -> Array3<f32> {
    let (c, h, w) = maps.dim();
    let (ph, pw) = (conv_output_dim(h, size, size), conv_output_dim(w, size, size));
    Array3::from_shape_fn((c, ph, pw), |(f, y, x)| {
        let mut m = f32::NEG_INFINITY;
        for dy in 0..size {
            for dx in 0..size {
                m = m.max(maps[[f, y * size + dy, x * size + dx]]);
            }
        }
        m
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = LtmConfig::default();
        assert_eq!(cfg.grid_dims(52), 9);
        assert_eq!(cfg.pooled_dims(52), 4);
        assert_eq!(cfg.encoding_len(52), 121 * 16);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn validation_catches_bad_values() {
        let cfg = LtmConfig { k_conv: 200, ..LtmConfig::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = LtmConfig::default();
        cfg.interest.sigma1 = 2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn smoothing_and_pooling_by_hand() {
        let mut maps = Array3::zeros((1, 3, 3));
        maps[[0, 1, 1]] = 9.0;
        let s = box_smooth(&maps, 3);
        assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-6));
        let mut m = Array3::zeros((1, 5, 5));
        m[[0, 1, 1]] = 2.0;
        m[[0, 2, 3]] = 3.0;
        m[[0, 4, 4]] = 7.0;
        let p = max_pool(&m, 2);
        assert_eq!(p.dim(), (1, 2, 2));
        assert_eq!(p[[0, 0, 0]], 2.0);
        assert_eq!(p[[0, 1, 1]], 3.0);
    }
}
