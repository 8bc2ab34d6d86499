//! Baseline short-term memory: one two-layer network trained during the
//! study exposure to map LTM encodings back to the study images. Its hidden
//! layer is the matching signal and its output the recall.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::aha::StmError;
use crate::nncore::{Loss, NetConfig, TwoLayerNet};
use crate::seed::{rng_for, tag};

pub fn default_config() -> NetConfig {
    NetConfig {
        hidden: 400,
        lr: 1e-2,
        steps: 200,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastNn {
    config: NetConfig,
    net: TwoLayerNet<f32>,
    studied: bool,
}

impl FastNn {
    pub fn new(inputs: usize, image_len: usize, config: NetConfig, seed: u64) -> Self {
        let net = config.build(inputs, image_len, &mut rng_for(seed, &[tag::FASTNN]));
        Self {
            config,
            net,
            studied: false,
        }
    }

    pub fn reset(&mut self, seed: u64) {
        *self = Self::new(self.net.inputs(), self.net.outputs(), self.config, seed);
    }

    pub fn net(&self) -> &TwoLayerNet<f32> {
        &self.net
    }

    /// Trains on the study batch; returns the loss at each step.
    pub fn study(&mut self, encodings: ArrayView2<f32>, images: ArrayView2<f32>) -> Result<Vec<f32>, StmError> {
        assert!(!self.studied, "fastnn: study requires a freshly reset state");
        self.studied = true;
        self.net
            .fit(encodings, images, Loss::Mse, self.config.steps)
            .map_err(|source| StmError::Diverged {
                network: "FastNN",
                source,
            })
    }

    /// Hidden activity and the clamped output image.
    pub fn infer(&self, encoding: ArrayView1<f32>) -> (Array1<f32>, Array1<f32>) {
        let (h, o) = self.net.predict(encoding);
        (h, o.mapv_into(|v| v.clamp(0.0, 1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetConfig {
        NetConfig {
            hidden: 32,
            lr: 1e-2,
            steps: 30,
        }
    }

    #[test]
    fn same_seed_same_weights_and_reset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((6, 20), |_| rng.random_range(0.0..1.0f32));
        let y = Array2::from_shape_fn((6, 12), |_| rng.random_range(0.0..1.0f32));
        let mut a = FastNn::new(20, 12, cfg(), 3);
        let mut b = FastNn::new(20, 12, cfg(), 3);
        let fresh = a.clone();
        a.study(x.view(), y.view()).unwrap();
        b.study(x.view(), y.view()).unwrap();
        assert_eq!(a, b);
        a.reset(3);
        assert_eq!(a, fresh);
        assert!(a.net().adam.is_reset());
    }

    #[test]
    fn outputs_in_unit_range_and_deterministic() {
        let net = FastNn::new(5, 7, cfg(), 9);
        let x = Array1::from_vec(vec![3.0, -2.0, 0.5, 8.0, 1.0]);
        let (h, o) = net.infer(x.view());
        assert_eq!(h.len(), 32);
        assert!(o.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(net.infer(x.view()), (h, o));
    }
}
