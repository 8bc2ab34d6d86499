use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Image;
use crate::seed::{rng_for, tag};

/// Highest corruption level in a schedule.
pub const MAX_LEVEL: f64 = 0.98;
pub const SCHEDULE_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    None,
    Occlusion,
    Noise,
}

impl CorruptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::None => "none",
            CorruptionKind::Occlusion => "occlusion",
            CorruptionKind::Noise => "noise",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            CorruptionKind::None => 0,
            CorruptionKind::Occlusion => 1,
            CorruptionKind::Noise => 2,
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CorruptionKind::None),
            "occlusion" => Ok(CorruptionKind::Occlusion),
            "noise" => Ok(CorruptionKind::Noise),
            other => Err(format!("unknown corruption kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Occlusion: disc diameter as a fraction of image width.
    /// Noise: fraction of pixels replaced.
    pub level: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self {
            kind: CorruptionKind::None,
            level: 0.0,
            seed: 0,
        }
    }

    pub fn new(kind: CorruptionKind, level: f64, seed: u64) -> Self {
        assert!(
            (0.0..=MAX_LEVEL + 1e-12).contains(&level),
            "corruption level {level} outside [0, {MAX_LEVEL}]"
        );
        Self { kind, level, seed }
    }

    /// Corrupts image number `index` of a query set. Each index gets its own stream.
    pub fn apply(&self, image: &Image, index: usize) -> Image {
        let mut rng = rng_for(
            self.seed,
            &[tag::CORRUPT, self.kind.index(), self.level.to_bits(), index as u64],
        );
        match self.kind {
            CorruptionKind::None => image.clone(),
            CorruptionKind::Occlusion => occlude(image, self.level, &mut rng),
            CorruptionKind::Noise => add_noise(image, self.level, &mut rng),
        }
    }
}

/// `count` evenly spaced levels from 0 to [`MAX_LEVEL`] inclusive.
pub fn corruption_levels(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| MAX_LEVEL * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn corruption_schedule(kind: CorruptionKind) -> Vec<CorruptionSpec> {
    assert!(kind != CorruptionKind::None, "schedule needs occlusion or noise");
    corruption_levels(SCHEDULE_LEVELS)
        .into_iter()
        .map(|level| CorruptionSpec::new(kind, level, 0))
        .collect()
}

/// Blanks one disc of diameter `diameter * width`, placed uniformly so it lies
/// entirely inside the image.
pub fn occlude<R: Rng + ?Sized>(image: &Image, diameter: f64, rng: &mut R) -> Image {
    assert!((0.0..=1.0).contains(&diameter), "occlusion diameter outside [0, 1]");
    let mut out = image.clone();
    if diameter == 0.0 {
        return out;
    }
    let (h, w) = (image.height() as f64, image.width() as f64);
    let r = diameter * w.min(h) / 2.0;
    let place = |rng: &mut R, side: f64| {
        if side - 2.0 * r <= 0.0 {
            side / 2.0
        } else {
            rng.random_range(r..=side - r)
        }
    };
    let cx = place(rng, w);
    let cy = place(rng, h);
    let r2 = r * r;
    for ((y, x), v) in out.pixels_mut().indexed_iter_mut() {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        if dx * dx + dy * dy <= r2 {
            *v = 0.0;
        }
    }
    out
}

/// Distinct pixel positions replaced by [`add_noise`]: exactly
/// `round(fraction * pixels)` of them, drawn without replacement.
pub fn noise_positions<R: Rng + ?Sized>(pixels: usize, fraction: f64, rng: &mut R) -> Vec<usize> {
    assert!((0.0..=1.0).contains(&fraction), "noise fraction outside [0, 1]");
    let count = (fraction * pixels as f64).round() as usize;
    index::sample(rng, pixels, count).into_vec()
}

/// Replaces exactly `round(fraction * pixels)` distinct pixels with uniform draws.
pub fn add_noise<R: Rng + ?Sized>(image: &Image, fraction: f64, rng: &mut R) -> Image {
    let mut out = image.clone();
    let width = image.width();
    let positions = noise_positions(image.len(), fraction, rng);
    let px = out.pixels_mut();
    for p in positions {
        px[[p / width, p % width]] = rng.random_range(0.0f32..=1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(side: usize) -> Image {
        Image::new(Array2::ones((side, side)))
    }

    fn zero_count(img: &Image) -> usize {
        img.as_slice().iter().filter(|&&v| v == 0.0).count()
    }

    #[test]
    fn zero_levels_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = ones(52);
        assert_eq!(occlude(&img, 0.0, &mut rng), img);
        assert_eq!(add_noise(&img, 0.0, &mut rng), img);
    }

    #[test]
    fn full_occlusion_is_centred() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let count = zero_count(&occlude(&ones(52), 1.0, &mut rng));
        let expected = std::f64::consts::PI / 4.0 * 52.0 * 52.0;
        // boundary quantisation: at most one pixel ring of the circumference
        let band = std::f64::consts::PI * 52.0;
        assert!((count as f64 - expected).abs() <= band, "{count} vs {expected}");
        let again = zero_count(&occlude(&ones(52), 1.0, &mut ChaCha8Rng::seed_from_u64(99)));
        assert_eq!(count, again);
    }

    #[test]
    fn half_occlusion_area() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frac = zero_count(&occlude(&ones(52), 0.5, &mut rng)) as f64 / 2704.0;
            let expected = std::f64::consts::PI / 16.0;
            assert!((frac - expected).abs() / expected < 0.02, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn half_noise_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pos = noise_positions(52 * 52, 0.5, &mut rng);
        assert_eq!(pos.len(), 1352);
        let distinct: std::collections::BTreeSet<_> = pos.iter().collect();
        assert_eq!(distinct.len(), 1352);

        let mut a = ChaCha8Rng::seed_from_u64(2);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let noisy = add_noise(&ones(52), 0.5, &mut a);
        let expected = noise_positions(52 * 52, 0.5, &mut b);
        for (i, v) in noisy.as_slice().iter().enumerate() {
            if !expected.contains(&i) {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn full_noise_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy = add_noise(&ones(52), 1.0, &mut rng);
        assert!(noisy.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(noisy.as_slice().iter().filter(|&&v| v != 1.0).count() > 2690);
    }

    #[test]
    fn schedule_endpoints_and_spacing() {
        let s = corruption_schedule(CorruptionKind::Noise);
        assert_eq!(s.len(), 10);
        assert_eq!(s[0].level, 0.0);
        assert!((s[9].level - 0.98).abs() < 1e-12);
        for w in s.windows(2) {
            assert!((w[1].level - w[0].level - 0.98 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_apply_is_deterministic() {
        let img = ones(20);
        let spec = CorruptionSpec::new(CorruptionKind::Noise, 0.3, 11);
        assert_eq!(spec.apply(&img, 4), spec.apply(&img, 4));
        assert_ne!(spec.apply(&img, 4), spec.apply(&img, 5));
    }

    proptest! {
        #[test]
        fn corruption_preserves_range_and_shape(
            pixels in prop::collection::vec(0.0f32..=1.0, 16 * 16),
            level in 0.0f64..=0.98,
            seed in any::<u64>(),
            noise in any::<bool>(),
        ) {
            let img = Image::new(Array2::from_shape_vec((16, 16), pixels).unwrap());
            let kind = if noise { CorruptionKind::Noise } else { CorruptionKind::Occlusion };
            let spec = CorruptionSpec::new(kind, level, seed);
            let out = spec.apply(&img, 0);
            prop_assert_eq!((out.height(), out.width()), (16, 16));
            prop_assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(out, spec.apply(&img, 0));
        }
    }
}
