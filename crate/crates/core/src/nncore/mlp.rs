//! Two-layer fully-connected network with a sigmoid output, trained by Adam
//! on one full batch. Shared by the retrieval, mapping and baseline STMs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, AdamConfig, AdamState, DenseCache, DenseLayer, NnError, Param, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Mean squared error on the sigmoid output.
    Mse,
    /// Mean per-unit binary cross-entropy on the sigmoid output.
    Bce,
}

const BCE_EPS: f64 = 1e-7;

impl Loss {
    pub fn value<F: Real>(self, out: &Array2<F>, target: ArrayView2<F>) -> F {
        let n = F::from_usize(out.len()).unwrap();
        let eps = F::lit(BCE_EPS);
        let total = ndarray::Zip::from(out)
            .and(&target)
            .fold(F::zero(), |acc, &o, &t| match self {
                Loss::Mse => acc + (o - t) * (o - t),
                Loss::Bce => {
                    let o = o.max(eps).min(F::one() - eps);
                    acc - (t * o.ln() + (F::one() - t) * (F::one() - o).ln())
                }
            });
        total / n
    }
}

/// Size and training schedule of a [`TwoLayerNet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: usize,
    pub lr: f64,
    /// Full-batch Adam steps per study.
    pub steps: usize,
}

impl NetConfig {
    pub fn validate(&self, name: &str) -> Result<(), String> {
        if self.hidden == 0 {
            return Err(format!("{name}.hidden must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(format!("{name}.lr must be positive"));
        }
        Ok(())
    }

    /// Leaky-ReLU hidden layer, sigmoid output.
    pub fn build<R: Rng + ?Sized>(&self, inputs: usize, outputs: usize, rng: &mut R) -> TwoLayerNet<f32> {
        TwoLayerNet::new(inputs, self.hidden, outputs, Activation::LeakyRelu, AdamConfig::with_lr(self.lr), rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet<F: Real> {
    pub hidden: DenseLayer<F>,
    pub output: DenseLayer<F>,
    pub adam: AdamState<F>,
}

pub struct NetCache<F: Real> {
    pub hidden: DenseCache<F>,
    pub output: DenseCache<F>,
}

impl<F: Real> TwoLayerNet<F> {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        hidden_activation: Activation,
        adam: AdamConfig,
        rng: &mut R,
    ) -> Self {
        let hidden = DenseLayer::new(inputs, hidden, hidden_activation, rng);
        let output = DenseLayer::new(hidden.outputs(), outputs, Activation::Sigmoid, rng);
        let sizes = [
            hidden.weights.len(),
            hidden.bias.len(),
            output.weights.len(),
            output.bias.len(),
        ];
        Self {
            hidden,
            output,
            adam: AdamState::new(adam, &sizes),
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.output.outputs()
    }

    pub fn forward(&self, x: ArrayView2<F>) -> NetCache<F> {
        let hidden = self.hidden.forward(x);
        let output = self.output.forward(hidden.out.view());
        NetCache { hidden, output }
    }

    /// Hidden activity and output for a single input.
    pub fn predict(&self, x: ArrayView1<F>) -> (Array1<F>, Array1<F>) {
        let h = self.hidden.apply(x);
        let o = self.output.apply(h.view());
        (h, o)
    }

    /// Loss and gradients in Adam slot order.
    pub fn gradients(&self, x: ArrayView2<F>, target: ArrayView2<F>, loss: Loss) -> (F, [Vec<F>; 4]) {
        assert_eq!(target.dim(), (x.nrows(), self.outputs()), "mlp: target shape mismatch");
        let cache = self.forward(x);
        let value = loss.value(&cache.output.out, target);
        let n = F::from_usize(target.len()).unwrap();
        let diff = (&cache.output.out - &target).mapv_into(F::flush);
        let og = match loss {
            // sigmoid + cross-entropy: d/dpre = (o - t)
            Loss::Bce => self.output.backward_pre(cache.hidden.out.view(), (diff / n).view(), true),
            Loss::Mse => {
                let grad_out = diff * (F::lit(2.0) / n);
                self.output
                    .backward(cache.hidden.out.view(), &cache.output, grad_out.view(), true)
            }
        };
        let gh = og.input.expect("requested input gradient");
        let hg = self.hidden.backward(x, &cache.hidden, gh.view(), false);
        // a single-row batch can yield column-major products
        let flat = |a: Array2<F>| {
            if a.is_standard_layout() {
                a.into_raw_vec_and_offset().0
            } else {
                a.iter().copied().collect()
            }
        };
        (
            value,
            [flat(hg.weights), hg.bias.to_vec(), flat(og.weights), og.bias.to_vec()],
        )
    }

    /// One Adam step on the full batch; returns the loss before the step.
    pub fn train_step(&mut self, x: ArrayView2<F>, target: ArrayView2<F>, loss: Loss) -> Result<F, NnError> {
        let (value, [hw, hb, ow, ob]) = self.gradients(x, target, loss);
        if !value.is_finite() {
            return Err(NnError::NonFiniteGradient(format!("loss {value}")));
        }
        self.adam.step(&mut [
            Param::new("hidden.weights", self.hidden.weights.as_slice_mut().unwrap(), &hw),
            Param::new("hidden.bias", self.hidden.bias.as_slice_mut().unwrap(), &hb),
            Param::new("output.weights", self.output.weights.as_slice_mut().unwrap(), &ow),
            Param::new("output.bias", self.output.bias.as_slice_mut().unwrap(), &ob),
        ])?;
        Ok(value)
    }

    /// `steps` full-batch updates; returns the loss seen at each step.
    pub fn fit(&mut self, x: ArrayView2<F>, target: ArrayView2<F>, loss: Loss, steps: usize) -> Result<Vec<F>, NnError> {
        (0..steps).map(|_| self.train_step(x, target, loss)).collect()
    }
}
