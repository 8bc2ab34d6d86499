//! Pattern completion: a binary Hopfield network with one-shot Hebbian
//! storage and asynchronous recall.
//!
//! Stored patterns are sparse (k active of n), so the plain outer-product
//! rule is dominated by the shared inactive majority and every stored code
//! collapses toward the all-off state. Storage therefore uses the
//! mean-centred rule `W += (p - a)(p - a)^T / n` with `a` the expected mean
//! of a k-hot bipolar code, and recall thresholds the field in {0, 1} units
//! at `theta` times the self-support of a complete stored pattern. Written
//! in bipolar form this is a Hopfield net with bias `b_i = sum_j W_ij - 2 theta`,
//! energy `E = -1/2 c^T W c - b^T c`.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BipolarPattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcConfig {
    /// Recall stops after this many full sweeps even without convergence.
    pub max_sweeps: usize,
    /// Firing threshold as a fraction of a full stored pattern's self-support.
    pub theta: f64,
    /// Stores allowed before a reset.
    pub capacity: usize,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            theta: 0.5,
            capacity: 20,
        }
    }
}

impl PcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_sweeps == 0 || self.capacity == 0 {
            return Err("aha.pc.max_sweeps and aha.pc.capacity must be positive".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err("aha.pc.theta must be in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recall {
    pub pattern: BipolarPattern,
    pub converged: bool,
    pub sweeps: usize,
    pub flips: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldMemory {
    config: PcConfig,
    /// Bipolar mean of a k-hot code.
    mean: f64,
    /// Threshold in {0,1} units.
    theta: f64,
    weights: Array2<f64>,
    row_sums: Array1<f64>,
    patterns: Vec<BipolarPattern>,
    order: Vec<usize>,
}

impl HopfieldMemory {
    /// Empty memory for `k`-hot patterns of length `n`; the rng fixes the
    /// asynchronous update order.
    pub fn new<R: Rng + ?Sized>(n: usize, k: usize, config: PcConfig, rng: &mut R) -> Self {
        let a = k as f64 / n as f64;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self {
            mean: 2.0 * a - 1.0,
            // (p_i - mean)(p_j - mean) = 4 (1 - a)^2 between active units
            theta: config.theta * 4.0 * (1.0 - a).powi(2) * (k as f64 - 1.0) / n as f64,
            config,
            weights: Array2::zeros((n, n)),
            row_sums: Array1::zeros(n),
            patterns: Vec::new(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn patterns(&self) -> &[BipolarPattern] {
        &self.patterns
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Per-unit bias of the bipolar dynamics.
    pub fn bias(&self) -> Array1<f64> {
        self.row_sums.mapv(|s| s - 2.0 * self.theta)
    }

    pub fn clear(&mut self) {
        self.weights.fill(0.0);
        self.row_sums.fill(0.0);
        self.patterns.clear();
    }

    pub fn store(&mut self, pattern: &BipolarPattern) {
        let n = self.len();
        assert_eq!(pattern.len(), n, "hopfield: pattern length mismatch");
        assert!(
            self.patterns.len() < self.config.capacity,
            "hopfield: capacity of {} patterns exceeded without reset",
            self.config.capacity
        );
        let centred: Vec<f64> = pattern.as_slice().iter().map(|&v| v as f64 - self.mean).collect();
        let scale = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    self.weights[[i, j]] += centred[i] * centred[j] * scale;
                }
            }
        }
        self.row_sums = self.weights.sum_axis(ndarray::Axis(1));
        self.patterns.push(pattern.clone());
    }

    pub fn energy(&self, state: &[i8]) -> f64 {
        let c: Array1<f64> = state.iter().map(|&v| v as f64).collect();
        -0.5 * c.dot(&self.weights.dot(&c)) - self.bias().dot(&c)
    }

    pub fn recall(&self, cue: &BipolarPattern) -> Recall {
        self.recall_observed(cue, |_| {})
    }

    /// Asynchronous recall; `on_flip` sees the state after every accepted flip.
    pub fn recall_observed(&self, cue: &BipolarPattern, mut on_flip: impl FnMut(&[i8])) -> Recall {
        assert_eq!(cue.len(), self.len(), "hopfield: cue length mismatch");
        let bias = self.bias();
        let mut state = cue.as_slice().to_vec();
        let mut flips = 0;
        for sweep in 1..=self.config.max_sweeps {
            let mut changed = false;
            for &i in &self.order {
                let field: f64 = self
                    .weights
                    .row(i)
                    .iter()
                    .zip(&state)
                    .map(|(&w, &c)| w * c as f64)
                    .sum::<f64>()
                    + bias[i];
                // a zero field keeps the current state
                let next = if field > 0.0 {
                    1
                } else if field < 0.0 {
                    -1
                } else {
                    state[i]
                };
                if next != state[i] {
                    state[i] = next;
                    changed = true;
                    flips += 1;
                    on_flip(&state);
                }
            }
            if !changed {
                return Recall {
                    pattern: BipolarPattern::new(state),
                    converged: true,
                    sweeps: sweep,
                    flips,
                };
            }
        }
        Recall {
            pattern: BipolarPattern::new(state),
            converged: false,
            sweeps: self.config.max_sweeps,
            flips,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn memory(seed: u64) -> HopfieldMemory {
        HopfieldMemory::new(225, 10, PcConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_pattern(rng: &mut ChaCha8Rng) -> BipolarPattern {
        BipolarPattern::from_active(225, &sample(rng, 225, 10).into_vec())
    }

    #[test]
    fn single_pattern_is_a_one_sweep_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = memory(1);
        let p = random_pattern(&mut rng);
        m.store(&p);
        let r = m.recall(&p);
        assert_eq!(r.pattern, p);
        assert!(r.converged);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn weights_stay_symmetric_with_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = memory(2);
        for _ in 0..7 {
            m.store(&random_pattern(&mut rng));
            let w = m.weights();
            assert_eq!(w, &w.t());
            assert!(w.diag().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    #[should_panic(expected = "capacity")]
    fn storing_past_capacity_panics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = memory(3);
        for _ in 0..21 {
            m.store(&random_pattern(&mut rng));
        }
    }

    #[test]
    fn clear_empties_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = memory(4);
        m.store(&random_pattern(&mut rng));
        m.clear();
        assert!(m.is_empty());
        assert!(m.weights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn plain_hebbian_rule_loses_sparse_patterns() {
        // the motivation for centring: without it a stored k-hot code is
        // not a fixed point once a handful of patterns share the net
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let patterns: Vec<_> = (0..20).map(|_| random_pattern(&mut rng)).collect();
        let n = 225;
        let mut w = Array2::<f64>::zeros((n, n));
        for p in &patterns {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        w[[i, j]] += (p.as_slice()[i] * p.as_slice()[j]) as f64 / n as f64;
                    }
                }
            }
        }
        let p = &patterns[0];
        let c: Array1<f64> = p.as_slice().iter().map(|&v| v as f64).collect();
        let field = w.dot(&c);
        let unstable = p.active().iter().filter(|&&i| field[i] < 0.0).count();
        assert!(unstable > 0);
    }
}
