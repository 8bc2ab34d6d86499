use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use rand::seq::SliceRandom;

use super::{Ltm, LtmConfig};
use crate::dataset::Split;
use crate::nncore::{
    top_k_indices, Activation, AdamState, ConvLayer, ConvTranspose, Param, Real,
};
use crate::seed::rng_for;

#[derive(Debug, thiserror::Error)]
pub enum LtmError {
    #[error("pretraining diverged at epoch {epoch}, step {step}: {reason}")]
    Diverged {
        epoch: usize,
        step: usize,
        reason: String,
    },
    #[error("background split is empty")]
    NoData,
    #[error("invalid ltm config: {0}")]
    Config(String),
}

/// k-sparse hidden activity and the gate through which gradients flow.
#[derive(Debug, Clone)]
pub struct SparseHidden<F: Real> {
    /// `[batch * positions x filters]`
    pub values: Array2<F>,
    /// 1 where a unit was selected and positive, else 0.
    pub gate: Array2<F>,
}

/// Conv pre-activations, top-`k` per position across filters, then ReLU.
pub fn sparse_hidden<F: Real>(encoder: &ConvLayer<F>, cols: ArrayView2<F>, k: usize) -> SparseHidden<F> {
    let pre = encoder.forward_cols(cols);
    let mut values = Array2::zeros(pre.dim());
    let mut gate = Array2::zeros(pre.dim());
    for (r, row) in pre.rows().into_iter().enumerate() {
        let row = row.to_vec();
        for f in top_k_indices(&row, k) {
            if row[f] > F::zero() {
                values[[r, f]] = row[f];
                gate[[r, f]] = F::one();
            }
        }
    }
    SparseHidden { values, gate }
}

pub(crate) struct StepGrads<F: Real> {
    pub loss: F,
    pub encoder: Array2<F>,
    pub decoder: Array2<F>,
    pub decoder_bias: F,
}

/// Reconstruction MSE and its gradients for one batch `[batch x h x w]`.
pub(crate) fn reconstruction_step<F: Real>(
    encoder: &ConvLayer<F>,
    decoder: &ConvTranspose<F>,
    batch: ArrayView3<F>,
    k: usize,
) -> StepGrads<F> {
    let (b, h, w) = batch.dim();
    let cols = encoder.unfold(batch);
    let hidden = sparse_hidden(encoder, cols.view(), k);
    let cache = decoder.forward(hidden.values.view(), b, h, w);
    let n = F::from_usize(batch.len()).unwrap();
    let diff: Array3<F> = &cache.out - &batch;
    let loss = diff.iter().fold(F::zero(), |a, &d| a + d * d) / n;
    let grad_out = diff * (F::lit(2.0) / n);
    let dg = decoder.backward(hidden.values.view(), &cache, grad_out.view());
    let grad_pre = dg.hidden * &hidden.gate;
    let eg = encoder.backward(cols.view(), grad_pre.view(), None);
    StepGrads {
        loss,
        encoder: eg.kernels,
        decoder: dg.kernels,
        decoder_bias: dg.bias,
    }
}

pub(crate) fn reconstruction_loss<F: Real>(
    encoder: &ConvLayer<F>,
    decoder: &ConvTranspose<F>,
    batch: ArrayView3<F>,
    k: usize,
) -> F {
    let (b, h, w) = batch.dim();
    let cols = encoder.unfold(batch);
    let hidden = sparse_hidden(encoder, cols.view(), k);
    let out = decoder.forward(hidden.values.view(), b, h, w).out;
    crate::nncore::mse(&out, &batch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub initial_holdout_loss: f32,
    pub epoch_train_loss: Vec<f32>,
    pub epoch_holdout_loss: Vec<f32>,
    pub train_images: usize,
    pub holdout_images: usize,
}

fn stack(split: &Split, indices: &[usize], side: usize) -> Array3<f32> {
    let mut out = Array3::zeros((indices.len(), side, side));
    for (slot, &i) in indices.iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), slot)
            .assign(&split.samples[i].image.view());
    }
    out
}

fn mean_loss(
    encoder: &ConvLayer<f32>,
    decoder: &ConvTranspose<f32>,
    split: &Split,
    indices: &[usize],
    side: usize,
    cfg: &LtmConfig,
) -> f32 {
    if indices.is_empty() {
        return f32::NAN;
    }
    let mut total = 0.0f64;
    for chunk in indices.chunks(cfg.batch_size) {
        let batch = stack(split, chunk, side);
        total += reconstruction_loss(encoder, decoder, batch.view(), cfg.k_conv) as f64 * chunk.len() as f64;
    }
    (total / indices.len() as f64) as f32
}

fn ink_logit(split: &Split, indices: &[usize]) -> f32 {
    let (sum, n) = indices.iter().fold((0.0f64, 0usize), |(s, n), &i| {
        let px = split.samples[i].image.as_slice();
        (s + px.iter().map(|&v| v as f64).sum::<f64>(), n + px.len())
    });
    let p = (sum / n.max(1) as f64).clamp(1e-3, 1.0 - 1e-3);
    (p / (1.0 - p)).ln() as f32
}

/// Trains the autoencoder on the background split and returns it frozen.
///
/// The encoder carries no trainable bias, so an empty field of view yields
/// no hidden activity.
pub fn pretrain(background: &Split, config: &LtmConfig, seed: u64) -> Result<(Ltm, PretrainReport), LtmError> {
    config.validate().map_err(LtmError::Config)?;
    let (side, _) = background.image_dims().ok_or(LtmError::NoData)?;
    let mut rng = rng_for(seed, &[0x17_u64]);

    let mut order: Vec<usize> = (0..background.samples.len()).collect();
    order.shuffle(&mut rng);
    let holdout_n = config.holdout.min(order.len() / 10);
    let holdout: Vec<usize> = order[..holdout_n].to_vec();
    let mut train: Vec<usize> = order[holdout_n..].to_vec();
    if config.max_train_images > 0 {
        train.truncate(config.max_train_images);
    }
    if train.is_empty() {
        return Err(LtmError::NoData);
    }

    let (k, s) = (config.kernel, config.stride);
    let mut encoder = ConvLayer::<f32>::new(config.filters, k, k, s, &mut rng);
    let mut decoder = ConvTranspose::<f32>::new(config.filters, k, k, s, Activation::Sigmoid, &mut rng);
    // start the output at the mean ink level rather than 0.5
    decoder.bias = ink_logit(background, &train);
    let mut adam = AdamState::<f32>::new(
        config.adam,
        &[encoder.kernels.len(), decoder.kernels.len(), 1],
    );

    let initial = mean_loss(&encoder, &decoder, background, &holdout, side, config);
    log::info!("ltm pretrain: {} train / {} holdout images, initial holdout loss {initial:.5}", train.len(), holdout.len());
    let mut report = PretrainReport {
        initial_holdout_loss: initial,
        epoch_train_loss: Vec::new(),
        epoch_holdout_loss: Vec::new(),
        train_images: train.len(),
        holdout_images: holdout.len(),
    };

    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let mut total = 0.0f64;
        for (step, chunk) in train.chunks(config.batch_size).enumerate() {
            let batch = stack(background, chunk, side);
            let g = reconstruction_step(&encoder, &decoder, batch.view(), config.k_conv);
            if !g.loss.is_finite() {
                return Err(LtmError::Diverged {
                    epoch,
                    step,
                    reason: format!("loss {}", g.loss),
                });
            }
            total += g.loss as f64 * chunk.len() as f64;
            let db = [g.decoder_bias];
            let mut dbias = [decoder.bias];
            adam.step(&mut [
                Param::new("encoder.kernels", encoder.kernels.as_slice_mut().unwrap(), g.encoder.as_slice().unwrap()),
                Param::new("decoder.kernels", decoder.kernels.as_slice_mut().unwrap(), g.decoder.as_slice().unwrap()),
                Param::new("decoder.bias", &mut dbias, &db),
            ])
            .map_err(|e| LtmError::Diverged {
                epoch,
                step,
                reason: e.to_string(),
            })?;
            decoder.bias = dbias[0];
        }
        let train_loss = (total / train.len() as f64) as f32;
        let holdout_loss = mean_loss(&encoder, &decoder, background, &holdout, side, config);
        log::info!("ltm epoch {}: train {train_loss:.5}, holdout {holdout_loss:.5}", epoch + 1);
        report.epoch_train_loss.push(train_loss);
        report.epoch_holdout_loss.push(holdout_loss);
    }

    Ok((Ltm::from_parts(config.clone(), side, encoder, decoder), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::finite_diff_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_hidden_keeps_k_per_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = ConvLayer::<f32>::new(12, 4, 4, 2, &mut rng);
        let img = Array3::from_shape_fn((2, 12, 12), |_| rng.random_range(0.0..1.0f32));
        let h = sparse_hidden(&enc, enc.unfold(img.view()).view(), 3);
        for row in h.values.rows() {
            assert!(row.iter().filter(|&&v| v != 0.0).count() <= 3);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn reconstruction_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let enc = ConvLayer::<f64>::new(5, 3, 3, 1, &mut rng);
        let dec = ConvTranspose::<f64>::new(5, 3, 3, 1, Activation::Sigmoid, &mut rng);
        let x = Array3::from_shape_fn((1, 8, 8), |_| rng.random_range(0.0..1.0));
        let g = reconstruction_step(&enc, &dec, x.view(), 2);
        let mut params: Vec<f64> = enc.kernels.iter().copied().collect();
        params.extend(dec.kernels.iter());
        params.push(dec.bias);
        let mut analytic: Vec<f64> = g.encoder.iter().copied().collect();
        analytic.extend(g.decoder.iter());
        analytic.push(g.decoder_bias);
        let (ne, nd) = (enc.kernels.len(), dec.kernels.len());
        let err = finite_diff_check(
            |p| {
                let mut e = enc.clone();
                let mut d = dec.clone();
                e.kernels.as_slice_mut().unwrap().copy_from_slice(&p[..ne]);
                d.kernels.as_slice_mut().unwrap().copy_from_slice(&p[ne..ne + nd]);
                d.bias = p[ne + nd];
                reconstruction_loss(&e, &d, x.view(), 2)
            },
            &params,
            &analytic,
        );
        assert!(err < 1e-4, "relative error {err}");
    }
}
