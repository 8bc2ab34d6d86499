use ndarray::{Array2, ArrayView2};

/// Grayscale intensity grid with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image(Array2<f32>);

impl Image {
    pub fn new(pixels: Array2<f32>) -> Self {
        assert!(
            pixels.iter().all(|v| (0.0..=1.0).contains(v)),
            "image: intensity outside [0, 1]"
        );
        Self(pixels)
    }

    pub fn blank(height: usize, width: usize) -> Self {
        Self(Array2::zeros((height, width)))
    }

    pub fn height(&self) -> usize {
        self.0.nrows()
    }

    pub fn width(&self) -> usize {
        self.0.ncols()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn view(&self) -> ArrayView2<'_, f32> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f32] {
        self.0.as_slice().expect("image storage is contiguous")
    }

    pub fn into_inner(self) -> Array2<f32> {
        self.0
    }

    /// Mutable access; callers must keep values in `[0, 1]`.
    pub(crate) fn pixels_mut(&mut self) -> &mut Array2<f32> {
        &mut self.0
    }

    /// Binarises raw luminance (dark ink on a light background), crops to an even
    /// size, 2x2 area-averages and re-thresholds at 0.5.
    pub fn from_luma(raw: ArrayView2<u8>) -> Self {
        let (h, w) = raw.dim();
        let (h2, w2) = (h / 2, w / 2);
        let mut out = Array2::zeros((h2, w2));
        for y in 0..h2 {
            for x in 0..w2 {
                let ink = [
                    raw[[2 * y, 2 * x]],
                    raw[[2 * y, 2 * x + 1]],
                    raw[[2 * y + 1, 2 * x]],
                    raw[[2 * y + 1, 2 * x + 1]],
                ]
                .iter()
                .filter(|&&v| v < 128)
                .count();
                out[[y, x]] = if ink as f32 / 4.0 >= 0.5 { 1.0 } else { 0.0 };
            }
        }
        Self(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_thresholds_blocks() {
        // 5x5 raw: last row/column cropped; top-left block 3/4 ink, top-right 1/4 ink.
        let mut raw = Array2::from_elem((5, 5), 255u8);
        raw[[0, 0]] = 0;
        raw[[0, 1]] = 0;
        raw[[1, 0]] = 0;
        raw[[0, 2]] = 0;
        raw[[2, 0]] = 0;
        raw[[2, 1]] = 0;
        raw[[4, 4]] = 0;
        let img = Image::from_luma(raw.view());
        assert_eq!(img.height(), 2);
        assert_eq!(img.width(), 2);
        assert_eq!(img.view()[[0, 0]], 1.0);
        assert_eq!(img.view()[[0, 1]], 0.0);
        assert_eq!(img.view()[[1, 0]], 1.0);
        assert_eq!(img.view()[[1, 1]], 0.0);
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn rejects_out_of_range() {
        Image::new(Array2::from_elem((2, 2), 1.5));
    }
}
