//! Pattern separation: a fixed sparse random projection with top-k winners
//! and a decaying refractory trace.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BipolarPattern;
use crate::nncore::top_k_indices;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsConfig {
    pub n_ps: usize,
    pub k_ps: usize,
    /// Fraction of incoming weights per unit fixed at zero.
    pub dropout: f64,
    /// Per-call multiplicative decay of the inhibition trace.
    pub gamma: f64,
}

impl Default for PsConfig {
    fn default() -> Self {
        Self {
            n_ps: 225,
            k_ps: 10,
            dropout: 0.5,
            gamma: 0.95,
        }
    }
}

impl PsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_ps == 0 || self.k_ps * 2 > self.n_ps {
            return Err("aha.ps needs 0 < k_ps <= n_ps / 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err("aha.ps.dropout must be in [0, 1)".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err("aha.ps.gamma must be in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSeparator {
    config: PsConfig,
    weights: Array2<f32>,
    trace: Array1<f32>,
}

impl PatternSeparator {
    pub fn new<R: Rng + ?Sized>(inputs: usize, config: PsConfig, rng: &mut R) -> Self {
        let zeros = (config.dropout * inputs as f64).floor() as usize;
        let mut weights = Array2::from_shape_simple_fn((config.n_ps, inputs), || rng.random_range(-1.0..1.0f32));
        for mut row in weights.rows_mut() {
            for i in sample(rng, inputs, zeros) {
                row[i] = 0.0;
            }
        }
        Self {
            trace: Array1::zeros(config.n_ps),
            config,
            weights,
        }
    }

    pub fn weights(&self) -> &Array2<f32> {
        &self.weights
    }

    pub fn trace(&self) -> &Array1<f32> {
        &self.trace
    }

    pub fn config(&self) -> &PsConfig {
        &self.config
    }

    pub fn clear_trace(&mut self) {
        self.trace.fill(0.0);
    }

    /// Selects `k_ps` winners and updates the refractory trace.
    ///
    /// A fully inhibited unit loses the whole spread of the current scores,
    /// so the most recent winners cannot win again on the same input.
    pub fn forward(&mut self, x: ArrayView1<f32>) -> BipolarPattern {
        let scores = self.weights.dot(&x);
        let (lo, hi) = scores
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = if hi > lo { hi - lo } else { 1.0 };
        let effective: Vec<f32> = scores
            .iter()
            .zip(&self.trace)
            .map(|(&s, &t)| s - t * range)
            .collect();
        let winners = top_k_indices(&effective, self.config.k_ps);
        let gamma = self.config.gamma as f32;
        self.trace.mapv_inplace(|t| t * gamma);
        for &w in &winners {
            self.trace[w] = 1.0;
        }
        BipolarPattern::from_active(self.config.n_ps, &winners)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separator(inputs: usize, seed: u64) -> PatternSeparator {
        PatternSeparator::new(inputs, PsConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn exact_zero_count_per_unit() {
        let ps = separator(101, 1);
        for row in ps.weights().rows() {
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 50);
        }
    }

    #[test]
    fn output_is_exactly_k_hot() {
        let mut ps = separator(64, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let x = Array1::from_shape_fn(64, |_| rng.random_range(0.0..1.0f32));
            assert_eq!(ps.forward(x.view()).active_count(), 10);
        }
    }

    #[test]
    fn repeated_input_changes_winners() {
        let mut ps = separator(64, 4);
        let x = Array1::from_shape_fn(64, |i| (i % 7) as f32 / 7.0);
        let a = ps.forward(x.view());
        let b = ps.forward(x.view());
        assert_ne!(a, b);
        assert_eq!(a.overlap(&b), 0);
    }

    #[test]
    fn blank_input_still_selects_k() {
        let mut ps = separator(16, 5);
        let zero = Array1::zeros(16);
        let a = ps.forward(zero.view());
        let b = ps.forward(zero.view());
        assert_eq!(a.active(), (0..10).collect::<Vec<_>>());
        assert_eq!(b.active_count(), 10);
        assert_eq!(a.overlap(&b), 0);
    }
}
