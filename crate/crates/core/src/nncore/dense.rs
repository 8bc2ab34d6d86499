use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_init, Real};

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Sigmoid,
    LeakyRelu,
}

impl Activation {
    pub fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => (F::one() / (F::one() + (-x).exp())).flush(),
            Activation::LeakyRelu => {
                if x > F::zero() {
                    x
                } else {
                    x * F::lit(LEAKY_SLOPE)
                }
            }
        }
    }

    /// Derivative given the pre-activation `pre` and the activation `out`.
    pub fn derivative<F: Real>(self, pre: F, out: F) -> F {
        match self {
            Activation::Identity => F::one(),
            Activation::Sigmoid => out * (F::one() - out),
            Activation::LeakyRelu => {
                if pre > F::zero() {
                    F::one()
                } else {
                    F::lit(LEAKY_SLOPE)
                }
            }
        }
    }
}

/// Fully connected layer `activation(W x + b)` with `W` stored `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F: Real> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    pub activation: Activation,
}

/// Forward values retained for the backward pass. Rows are samples.
#[derive(Debug, Clone)]
pub struct DenseCache<F: Real> {
    pub pre: Array2<F>,
    pub out: Array2<F>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<F: Real> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    /// Gradient with respect to the layer input, when requested.
    pub input: Option<Array2<F>>,
}

impl<F: Real> DenseLayer<F> {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w = uniform_init(rng, inputs * outputs, inputs);
        let b = uniform_init(rng, outputs, inputs);
        Self {
            weights: Array2::from_shape_vec((outputs, inputs), w).unwrap(),
            bias: Array1::from_vec(b),
            activation,
        }
    }

    pub fn from_parts(weights: Array2<F>, bias: Array1<F>, activation: Activation) -> Self {
        assert_eq!(
            weights.nrows(),
            bias.len(),
            "dense: weight rows and bias length differ"
        );
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// `activation(W x + b)` for a single vector.
    pub fn apply(&self, x: ArrayView1<F>) -> Array1<F> {
        assert_eq!(x.len(), self.inputs(), "dense: input dimension mismatch");
        let act = self.activation;
        (self.weights.dot(&x) + &self.bias).mapv_into(|v| act.apply(v))
    }

    /// Batched forward; `x` is `[batch x in]`.
    pub fn forward(&self, x: ArrayView2<F>) -> DenseCache<F> {
        assert_eq!(x.ncols(), self.inputs(), "dense: input dimension mismatch");
        let pre = x.dot(&self.weights.t()) + &self.bias;
        let act = self.activation;
        let out = pre.mapv(|v| act.apply(v));
        DenseCache { pre, out }
    }

    /// Backward from the gradient with respect to the layer output.
    pub fn backward(
        &self,
        x: ArrayView2<F>,
        cache: &DenseCache<F>,
        grad_out: ArrayView2<F>,
        want_input: bool,
    ) -> DenseGrads<F> {
        let act = self.activation;
        let mut grad_pre = grad_out.to_owned();
        ndarray::Zip::from(&mut grad_pre)
            .and(&cache.pre)
            .and(&cache.out)
            .for_each(|g, &p, &o| *g = (*g * act.derivative(p, o)).flush());
        self.backward_pre(x, grad_pre.view(), want_input)
    }

    /// Backward from the gradient with respect to the pre-activation.
    pub fn backward_pre(
        &self,
        x: ArrayView2<F>,
        grad_pre: ArrayView2<F>,
        want_input: bool,
    ) -> DenseGrads<F> {
        DenseGrads {
            weights: grad_pre.t().dot(&x),
            bias: grad_pre.sum_axis(Axis(0)),
            input: want_input.then(|| grad_pre.dot(&self.weights)),
        }
    }
}
