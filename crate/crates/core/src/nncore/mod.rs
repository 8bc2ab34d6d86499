//! Minimal numeric substrate shared by the LTM and the short-term memories.
//!
//! Every trainable component here is one or two layers deep with a local
//! loss, so gradients are derived by hand. Layers are generic over [`Real`]
//! so that the same code runs in `f32` for training and in `f64` for
//! finite-difference gradient checks.

mod adam;
mod conv;
mod dense;
mod gradcheck;
mod mlp;
mod ops;

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

pub use adam::{AdamConfig, AdamState, Param};
pub use conv::{col2im, conv_output_dim, im2col, ConvLayer, ConvTranspose};
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use gradcheck::{finite_diff_check, relative_error};
pub use mlp::{Loss, NetCache, NetConfig, TwoLayerNet};
pub use ops::{mse, mse_slices, top_k_indices, top_k_mask};

/// Floating point scalar usable by every layer.
pub trait Real:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + std::ops::AddAssign
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// Subnormal values become zero; arithmetic on them is very slow on x86.
    fn flush(self) -> Self {
        if self.classify() == std::num::FpCategory::Subnormal {
            Self::zero()
        } else {
            self
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("parameter `{name}` has {got} elements, optimizer slot expects {expected}")]
    ShapeMismatch { name: String, expected: usize, got: usize },
}

/// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn uniform_init<F: Real, R: rand::Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    fan_in: usize,
) -> Vec<F> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len)
        .map(|_| F::lit(rng.random_range(-bound..bound)))
        .collect()
}
