//! Interest Filter: a saliency mask that keeps conv activity only near
//! strong positive or negative intensity transitions.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Image;
use crate::nncore::top_k_indices;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterestConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub kernel: usize,
    pub nms_window: usize,
    /// Points kept per polarity.
    pub top_m: usize,
}

impl Default for InterestConfig {
    fn default() -> Self {
        Self {
            sigma1: 0.5,
            sigma2: 1.0,
            kernel: 7,
            nms_window: 3,
            top_m: 20,
        }
    }
}

fn gaussian(sigma: f64, size: usize) -> Array2<f64> {
    let c = (size / 2) as f64;
    let mut g = Array2::from_shape_fn((size, size), |(y, x)| {
        let (dy, dx) = (y as f64 - c, x as f64 - c);
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    });
    let total = g.sum();
    g /= total;
    g
}

/// Unit-sum Gaussian(`sigma1`) minus unit-sum Gaussian(`sigma2`).
pub fn dog_kernel(sigma1: f64, sigma2: f64, size: usize) -> Array2<f64> {
    assert!(sigma1 < sigma2, "dog: sigma1 must be below sigma2");
    dog_kernel_unchecked(sigma1, sigma2, size)
}

pub(crate) fn dog_kernel_unchecked(sigma1: f64, sigma2: f64, size: usize) -> Array2<f64> {
    assert!(size % 2 == 1, "dog: kernel size must be odd");
    gaussian(sigma1, size) - gaussian(sigma2, size)
}

/// Same-size DoG response with edge-replicated borders.
///
/// Written in the centred form `sum k * (x[p + d] - x[p])`, equal to the plain
/// convolution because the kernel sums to zero, so an intensity offset
/// cancels exactly instead of leaving rounding residue.
pub fn dog_response(image: &Image, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = (image.height() as isize, image.width() as isize);
    let px = image.view();
    let half = (kernel.nrows() / 2) as isize;
    Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        let centre = px[[y, x]];
        let mut acc = 0.0f64;
        for ((ky, kx), &k) in kernel.indexed_iter() {
            let sy = (y as isize + ky as isize - half).clamp(0, h - 1) as usize;
            let sx = (x as isize + kx as isize - half).clamp(0, w - 1) as usize;
            acc += k * (px[[sy, sx]] - centre) as f64;
        }
        acc
    })
}

/// Keeps values that equal the maximum of their window; the rest become `-inf`.
fn non_max_suppress(response: &Array2<f64>, window: usize) -> Array2<f64> {
    let (h, w) = response.dim();
    let half = (window / 2) as isize;
    Array2::from_shape_fn((h, w), |(y, x)| {
        let v = response[[y, x]];
        for dy in -half..=half {
            for dx in -half..=half {
                let (sy, sx) = (y as isize + dy, x as isize + dx);
                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w
                    && response[[sy as usize, sx as usize]] > v
                {
                    return f64::NEG_INFINITY;
                }
            }
        }
        v
    })
}

/// Binary pixel mask with exactly `top_m` points from one polarity.
pub fn polarity_mask(response: &Array2<f64>, config: &InterestConfig) -> Array2<f32> {
    let kept = non_max_suppress(response, config.nms_window);
    let flat: Vec<f64> = kept.iter().copied().collect();
    let mut mask = Array2::zeros(response.dim());
    let w = response.ncols();
    for i in top_k_indices(&flat, config.top_m.min(flat.len())) {
        mask[[i / w, i % w]] = 1.0;
    }
    mask
}

/// Union of the positive and negative polarity masks at pixel resolution.
pub fn interest_pixels(image: &Image, config: &InterestConfig) -> Array2<f32> {
    let kernel = dog_kernel(config.sigma1, config.sigma2, config.kernel);
    let pos = dog_response(image, &kernel);
    let neg = pos.mapv(|v| -v);
    let mut mask = polarity_mask(&pos, config) + polarity_mask(&neg, config);
    mask.mapv_inplace(|v| v.min(1.0));
    mask
}

/// Interest mask reduced to the conv grid: a cell is on when any masked pixel
/// falls inside its receptive field.
pub fn interest_mask(
    image: &Image,
    config: &InterestConfig,
    kernel: usize,
    stride: usize,
) -> Array2<f32> {
    let pixels = interest_pixels(image, config);
    let gh = crate::nncore::conv_output_dim(image.height(), kernel, stride);
    let gw = crate::nncore::conv_output_dim(image.width(), kernel, stride);
    Array2::from_shape_fn((gh, gw), |(gy, gx)| {
        let rows = gy * stride..gy * stride + kernel;
        let cols = gx * stride..gx * stride + kernel;
        let any = rows
            .flat_map(|y| cols.clone().map(move |x| (y, x)))
            .any(|(y, x)| pixels[[y, x]] > 0.0);
        if any {
            1.0
        } else {
            0.0
        }
    })
}
