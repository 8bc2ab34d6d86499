use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;

use super::{uniform_init, Activation, Real};

/// `floor((input - kernel) / stride) + 1`.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize) -> usize {
    assert!(stride > 0, "conv: stride must be positive");
    assert!(kernel <= input, "conv: kernel {kernel} larger than input {input}");
    (input - kernel) / stride + 1
}

/// Unfolds `[batch x h x w]` images into `[batch * positions x kh * kw]`
/// patch rows, positions in row-major order.
pub fn im2col<F: Real>(images: ArrayView3<F>, kh: usize, kw: usize, stride: usize) -> Array2<F> {
    let (b, h, w) = images.dim();
    let oh = conv_output_dim(h, kh, stride);
    let ow = conv_output_dim(w, kw, stride);
    let mut cols = Array2::zeros((b * oh * ow, kh * kw));
    for n in 0..b {
        let img = images.index_axis(Axis(0), n);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut row = cols.row_mut((n * oh + oy) * ow + ox);
                for ky in 0..kh {
                    for kx in 0..kw {
                        row[ky * kw + kx] = img[[oy * stride + ky, ox * stride + kx]];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch rows back onto `[batch x h x w]`, summing overlaps.
pub fn col2im<F: Real>(
    cols: ArrayView2<F>,
    batch: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
) -> Array3<F> {
    let oh = conv_output_dim(h, kh, stride);
    let ow = conv_output_dim(w, kw, stride);
    assert_eq!(cols.dim(), (batch * oh * ow, kh * kw), "col2im: shape mismatch");
    let mut out = Array3::zeros((batch, h, w));
    for n in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = cols.row((n * oh + oy) * ow + ox);
                for ky in 0..kh {
                    for kx in 0..kw {
                        out[[n, oy * stride + ky, ox * stride + kx]] += row[ky * kw + kx];
                    }
                }
            }
        }
    }
    out
}

/// Single-input-channel valid convolution with one bias per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<F: Real> {
    /// `[filters x kh * kw]`
    pub kernels: Array2<F>,
    pub bias: Array1<F>,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<F: Real> {
    pub kernels: Array2<F>,
    pub bias: Array1<F>,
    pub input: Option<Array3<F>>,
}

impl<F: Real> ConvLayer<F> {
    pub fn new<R: Rng + ?Sized>(
        filters: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        assert!(filters > 0 && kh > 0 && kw > 0 && stride > 0, "conv: zero-sized layer");
        let fan_in = kh * kw;
        let k = uniform_init(rng, filters * fan_in, fan_in);
        Self {
            kernels: Array2::from_shape_vec((filters, fan_in), k).unwrap(),
            bias: Array1::zeros(filters),
            kh,
            kw,
            stride,
        }
    }

    pub fn filters(&self) -> usize {
        self.kernels.nrows()
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            conv_output_dim(h, self.kh, self.stride),
            conv_output_dim(w, self.kw, self.stride),
        )
    }

    pub fn unfold(&self, input: ArrayView3<F>) -> Array2<F> {
        im2col(input, self.kh, self.kw, self.stride)
    }

    /// Pre-activations `[batch * positions x filters]` from unfolded patches.
    pub fn forward_cols(&self, cols: ArrayView2<F>) -> Array2<F> {
        cols.dot(&self.kernels.t()) + &self.bias
    }

    pub fn backward(
        &self,
        cols: ArrayView2<F>,
        grad_pre: ArrayView2<F>,
        input_dims: Option<(usize, usize, usize)>,
    ) -> ConvGrads<F> {
        ConvGrads {
            kernels: grad_pre.t().dot(&cols),
            bias: grad_pre.sum_axis(Axis(0)),
            input: input_dims.map(|(b, h, w)| {
                let dcols = grad_pre.dot(&self.kernels);
                col2im(dcols.view(), b, h, w, self.kh, self.kw, self.stride)
            }),
        }
    }
}

/// Transposed convolution from `filters` maps back to one image channel,
/// with a single scalar bias and an output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose<F: Real> {
    /// `[filters x kh * kw]`
    pub kernels: Array2<F>,
    pub bias: F,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct ConvTransposeCache<F: Real> {
    pub pre: Array3<F>,
    pub out: Array3<F>,
}

#[derive(Debug, Clone)]
pub struct ConvTransposeGrads<F: Real> {
    pub kernels: Array2<F>,
    pub bias: F,
    pub hidden: Array2<F>,
}

impl<F: Real> ConvTranspose<F> {
    pub fn new<R: Rng + ?Sized>(
        filters: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let k = uniform_init(rng, filters * kh * kw, filters);
        Self {
            kernels: Array2::from_shape_vec((filters, kh * kw), k).unwrap(),
            bias: F::zero(),
            kh,
            kw,
            stride,
            activation,
        }
    }

    /// `hidden` is `[batch * positions x filters]`; output `[batch x h x w]`.
    pub fn forward(&self, hidden: ArrayView2<F>, batch: usize, h: usize, w: usize) -> ConvTransposeCache<F> {
        assert_eq!(hidden.ncols(), self.kernels.nrows(), "conv-transpose: filter count mismatch");
        let cols = hidden.dot(&self.kernels);
        let pre = col2im(cols.view(), batch, h, w, self.kh, self.kw, self.stride) + self.bias;
        let act = self.activation;
        let out = pre.mapv(|v| act.apply(v));
        ConvTransposeCache { pre, out }
    }

    pub fn backward(
        &self,
        hidden: ArrayView2<F>,
        cache: &ConvTransposeCache<F>,
        grad_out: ArrayView3<F>,
    ) -> ConvTransposeGrads<F> {
        let act = self.activation;
        let mut grad_pre = grad_out.to_owned();
        ndarray::Zip::from(&mut grad_pre)
            .and(&cache.pre)
            .and(&cache.out)
            .for_each(|g, &p, &o| *g = *g * act.derivative(p, o));
        let gcols = im2col(grad_pre.view(), self.kh, self.kw, self.stride);
        ConvTransposeGrads {
            kernels: hidden.t().dot(&gcols),
            bias: grad_pre.sum(),
            hidden: gcols.dot(&self.kernels.t()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{finite_diff_check, mse};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_dims() {
        assert_eq!(conv_output_dim(52, 10, 5), 9);
        assert_eq!(conv_output_dim(8, 3, 1), 6);
        assert_eq!(conv_output_dim(8, 3, 2), 3);
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array3::from_shape_fn((2, 9, 7), |_| rng.random_range(-1.0f64..1.0));
        let cols = im2col(x.view(), 3, 3, 2);
        let y = Array2::from_shape_fn(cols.dim(), |_| rng.random_range(-1.0f64..1.0));
        let lhs: f64 = (&cols * &y).sum();
        let back = col2im(y.view(), 2, 9, 7, 3, 3, 2);
        let rhs: f64 = (&x * &back).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn single_filter_convolution_by_hand() {
        let conv = ConvLayer {
            kernels: Array2::from_shape_vec((1, 4), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap(),
            bias: Array1::from_vec(vec![0.5]),
            kh: 2,
            kw: 2,
            stride: 1,
        };
        let x = Array3::from_shape_vec((1, 2, 3), vec![1.0, 0.0, 2.0, 0.0, 1.0, 1.0]).unwrap();
        let pre = conv.forward_cols(conv.unfold(x.view()).view());
        // [1 0; 0 1] -> 1 + 4 + 0.5, [0 2; 1 1] -> 4 + 3 + 4 + 0.5
        assert_eq!(pre.column(0).to_vec(), vec![5.5, 11.5]);
    }

    #[test]
    fn all_zero_hidden_gives_bias_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut dec = ConvTranspose::<f64>::new(3, 3, 3, 2, Activation::Sigmoid, &mut rng);
        dec.bias = 0.25;
        let hidden = Array2::zeros((9, 3));
        let out = dec.forward(hidden.view(), 1, 7, 7).out;
        let expected = 1.0 / (1.0 + (-0.25f64).exp());
        assert!(out.iter().all(|v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn conv_and_transpose_gradients_on_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let conv = ConvLayer::<f64>::new(3, 3, 3, 1, &mut rng);
        let dec = ConvTranspose::<f64>::new(3, 3, 3, 1, Activation::Sigmoid, &mut rng);
        let x = Array3::from_shape_fn((1, 8, 8), |_| rng.random_range(0.0..1.0));
        let loss = |c: &ConvLayer<f64>, d: &ConvTranspose<f64>| {
            let cols = c.unfold(x.view());
            let pre = c.forward_cols(cols.view());
            mse(&d.forward(pre.view(), 1, 8, 8).out, &x)
        };

        let cols = conv.unfold(x.view());
        let pre = conv.forward_cols(cols.view());
        let cache = dec.forward(pre.view(), 1, 8, 8);
        let grad_out = (&cache.out - &x) * (2.0 / x.len() as f64);
        let dg = dec.backward(pre.view(), &cache, grad_out.view());
        let cg = conv.backward(cols.view(), dg.hidden.view(), None);

        let mut params: Vec<f64> = conv.kernels.iter().copied().collect();
        params.extend(conv.bias.iter());
        params.extend(dec.kernels.iter());
        params.push(dec.bias);
        let mut analytic: Vec<f64> = cg.kernels.iter().copied().collect();
        analytic.extend(cg.bias.iter());
        analytic.extend(dg.kernels.iter());
        analytic.push(dg.bias);

        let (nk, nb, nd) = (conv.kernels.len(), conv.bias.len(), dec.kernels.len());
        let err = finite_diff_check(
            |p| {
                let mut c = conv.clone();
                let mut d = dec.clone();
                c.kernels.as_slice_mut().unwrap().copy_from_slice(&p[..nk]);
                c.bias.as_slice_mut().unwrap().copy_from_slice(&p[nk..nk + nb]);
                d.kernels.as_slice_mut().unwrap().copy_from_slice(&p[nk + nb..nk + nb + nd]);
                d.bias = p[nk + nb + nd];
                loss(&c, &d)
            },
            &params,
            &analytic,
        );
        assert!(err < 1e-4, "relative error {err}");
    }
}
