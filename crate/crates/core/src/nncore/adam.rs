use serde::{Deserialize, Serialize};

use super::{NnError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// One named parameter tensor and its gradient, flattened.
pub struct Param<'a, F> {
    pub name: &'a str,
    pub values: &'a mut [F],
    pub grads: &'a [F],
}

impl<'a, F> Param<'a, F> {
    pub fn new(name: &'a str, values: &'a mut [F], grads: &'a [F]) -> Self {
        Self {
            name,
            values,
            grads,
        }
    }
}

/// Bias-corrected Adam with one moment slot per parameter tensor.
///
/// A tensor whose gradient is identically zero is skipped for that step:
/// its values and moments stay untouched. The step counter still advances.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F: Real> {
    pub config: AdamConfig,
    pub t: u64,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            t: 0,
            first: sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            second: sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
        }
    }

    pub fn reset(&mut self) {
        self.t = 0;
        for m in self.first.iter_mut().chain(self.second.iter_mut()) {
            m.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    pub fn is_reset(&self) -> bool {
        self.t == 0
            && self
                .first
                .iter()
                .chain(&self.second)
                .all(|m| m.iter().all(|v| *v == F::zero()))
    }

    pub fn first_moment(&self, slot: usize) -> &[F] {
        &self.first[slot]
    }

    pub fn second_moment(&self, slot: usize) -> &[F] {
        &self.second[slot]
    }

    pub fn step(&mut self, params: &mut [Param<'_, F>]) -> Result<(), NnError> {
        assert_eq!(
            params.len(),
            self.first.len(),
            "adam: parameter slot count mismatch"
        );
        for (p, m) in params.iter().zip(&self.first) {
            if p.values.len() != m.len() || p.grads.len() != m.len() {
                return Err(NnError::ShapeMismatch {
                    name: p.name.to_string(),
                    expected: m.len(),
                    got: p.grads.len().max(p.values.len()),
                });
            }
            if p.grads.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.to_string()));
            }
        }

        self.t += 1;
        let c = self.config;
        let b1 = F::lit(c.beta1);
        let b2 = F::lit(c.beta2);
        let one = F::one();
        let eps = F::lit(c.eps);
        let step = F::lit(c.lr / (1.0 - c.beta1.powi(self.t as i32)));
        let inv_correct2 = F::lit(1.0 / (1.0 - c.beta2.powi(self.t as i32)));

        for (slot, p) in params.iter_mut().enumerate() {
            if p.grads.iter().all(|g| *g == F::zero()) {
                continue;
            }
            let m = &mut self.first[slot];
            let v = &mut self.second[slot];
            for (((w, &g), m), v) in p.values.iter_mut().zip(p.grads.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *w = *w - step * *m / ((*v * inv_correct2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
