//! Invariant suites that need no dataset and no pretraining: gradient
//! checks for every layer type, the Hopfield memory, pattern separation
//! and the corruption generators.

use std::fmt;

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;

use crate::aha::{BipolarPattern, HopfieldMemory, PatternSeparator, PcConfig, PsConfig};
use crate::dataset::{add_noise, noise_positions, occlude, CorruptionKind, CorruptionSpec, Image};
use crate::ltm::autoencoder::{reconstruction_loss, reconstruction_step};
use crate::nncore::{
    finite_diff_check, mse, Activation, AdamConfig, ConvLayer, ConvTranspose, DenseLayer, Loss, TwoLayerNet,
};
use crate::seed::{rng_for, Rng as SeedRng};

/// Randomised instances per layer type in the gradient suite.
pub const GRADIENT_INSTANCES: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict} {}/{}: {}", self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        gradient_suite(seed),
        hopfield_suite(seed),
        ps_suite(seed),
        corruption_suite(seed),
    ]
}

fn uniform(rng: &mut SeedRng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Worst relative error over `GRADIENT_INSTANCES` random instances.
fn worst_error(seed: u64, tag: u64, mut instance: impl FnMut(&mut SeedRng) -> f64) -> f64 {
    (0..GRADIENT_INSTANCES as u64)
        .map(|i| instance(&mut rng_for(seed, &[0x6c, tag, i])))
        .fold(0.0, f64::max)
}

fn dense_instance(rng: &mut SeedRng) -> f64 {
    let act = [Activation::Identity, Activation::Sigmoid, Activation::LeakyRelu][rng.random_range(0..3)];
    let (n_in, n_out, batch) = (rng.random_range(1..7), rng.random_range(1..6), rng.random_range(1..4));
    let layer = DenseLayer::<f64>::new(n_in, n_out, act, rng);
    let x = Array2::from_shape_vec((batch, n_in), uniform(rng, batch * n_in, -1.0, 1.0)).unwrap();
    let t = Array2::from_shape_vec((batch, n_out), uniform(rng, batch * n_out, 0.0, 1.0)).unwrap();
    let cache = layer.forward(x.view());
    let grad_out = (&cache.out - &t) * (2.0 / t.len() as f64);
    let g = layer.backward(x.view(), &cache, grad_out.view(), true);

    let (nw, nb) = (layer.weights.len(), layer.bias.len());
    let mut params: Vec<f64> = layer.weights.iter().chain(&layer.bias).copied().collect();
    params.extend(x.iter());
    let mut analytic: Vec<f64> = g.weights.iter().chain(&g.bias).copied().collect();
    analytic.extend(g.input.unwrap().iter());
    finite_diff_check(
        |p| {
            let mut l = layer.clone();
            l.weights.as_slice_mut().unwrap().copy_from_slice(&p[..nw]);
            l.bias.as_slice_mut().unwrap().copy_from_slice(&p[nw..nw + nb]);
            let x = Array2::from_shape_vec(x.dim(), p[nw + nb..].to_vec()).unwrap();
            mse(&l.forward(x.view()).out, &t)
        },
        &params,
        &analytic,
    )
}

fn conv_instance(rng: &mut SeedRng) -> f64 {
    let k = rng.random_range(2..5);
    let stride = rng.random_range(1..3);
    let side = rng.random_range(k + 1..k + 6);
    let batch = rng.random_range(1..3);
    let layer = ConvLayer::<f64>::new(rng.random_range(1..4), k, k, stride, rng);
    let x = Array3::from_shape_vec((batch, side, side), uniform(rng, batch * side * side, 0.0, 1.0)).unwrap();
    let cols = layer.unfold(x.view());
    let pre = layer.forward_cols(cols.view());
    let t = Array2::from_shape_vec(pre.dim(), uniform(rng, pre.len(), -1.0, 1.0)).unwrap();
    let grad_pre = (&pre - &t) * (2.0 / t.len() as f64);
    let g = layer.backward(cols.view(), grad_pre.view(), Some((batch, side, side)));

    let (nk, nb) = (layer.kernels.len(), layer.bias.len());
    let mut params: Vec<f64> = layer.kernels.iter().chain(&layer.bias).copied().collect();
    params.extend(x.iter());
    let mut analytic: Vec<f64> = g.kernels.iter().chain(&g.bias).copied().collect();
    analytic.extend(g.input.unwrap().iter());
    finite_diff_check(
        |p| {
            let mut l = layer.clone();
            l.kernels.as_slice_mut().unwrap().copy_from_slice(&p[..nk]);
            l.bias.as_slice_mut().unwrap().copy_from_slice(&p[nk..nk + nb]);
            let x = Array3::from_shape_vec(x.dim(), p[nk + nb..].to_vec()).unwrap();
            mse(&l.forward_cols(l.unfold(x.view()).view()), &t)
        },
        &params,
        &analytic,
    )
}

fn conv_transpose_instance(rng: &mut SeedRng) -> f64 {
    let k = rng.random_range(2..5);
    let stride = rng.random_range(1..3);
    let grid = rng.random_range(1..4);
    let side = (grid - 1) * stride + k;
    let filters = rng.random_range(1..4);
    let layer = ConvTranspose::<f64>::new(filters, k, k, stride, Activation::Sigmoid, rng);
    let hidden = Array2::from_shape_vec((grid * grid, filters), uniform(rng, grid * grid * filters, 0.0, 1.0)).unwrap();
    let t = Array3::from_shape_vec((1, side, side), uniform(rng, side * side, 0.0, 1.0)).unwrap();
    let cache = layer.forward(hidden.view(), 1, side, side);
    let grad_out = (&cache.out - &t) * (2.0 / t.len() as f64);
    let g = layer.backward(hidden.view(), &cache, grad_out.view());

    let nk = layer.kernels.len();
    let mut params: Vec<f64> = layer.kernels.iter().copied().collect();
    params.push(layer.bias);
    params.extend(hidden.iter());
    let mut analytic: Vec<f64> = g.kernels.iter().copied().collect();
    analytic.push(g.bias);
    analytic.extend(g.hidden.iter());
    finite_diff_check(
        |p| {
            let mut l = layer.clone();
            l.kernels.as_slice_mut().unwrap().copy_from_slice(&p[..nk]);
            l.bias = p[nk];
            let h = Array2::from_shape_vec(hidden.dim(), p[nk + 1..].to_vec()).unwrap();
            mse(&l.forward(h.view(), 1, side, side).out, &t)
        },
        &params,
        &analytic,
    )
}

fn mlp_instance(rng: &mut SeedRng) -> f64 {
    let loss = if rng.random_bool(0.5) { Loss::Bce } else { Loss::Mse };
    let (n_in, hidden, n_out, batch) = (
        rng.random_range(1..7),
        rng.random_range(1..6),
        rng.random_range(1..5),
        rng.random_range(1..4),
    );
    let net = TwoLayerNet::<f64>::new(n_in, hidden, n_out, Activation::LeakyRelu, AdamConfig::default(), rng);
    let x = Array2::from_shape_vec((batch, n_in), uniform(rng, batch * n_in, -1.0, 1.0)).unwrap();
    let t = Array2::from_shape_fn((batch, n_out), |_| if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    let (_, grads) = net.gradients(x.view(), t.view(), loss);
    let params: Vec<f64> = net
        .hidden
        .weights
        .iter()
        .chain(&net.hidden.bias)
        .chain(&net.output.weights)
        .chain(&net.output.bias)
        .copied()
        .collect();
    let sizes: Vec<usize> = grads.iter().map(Vec::len).collect();
    finite_diff_check(
        |p| {
            let mut n = net.clone();
            let mut off = 0;
            for (slot, len) in sizes.iter().enumerate() {
                let dst = match slot {
                    0 => n.hidden.weights.as_slice_mut().unwrap(),
                    1 => n.hidden.bias.as_slice_mut().unwrap(),
                    2 => n.output.weights.as_slice_mut().unwrap(),
                    _ => n.output.bias.as_slice_mut().unwrap(),
                };
                dst.copy_from_slice(&p[off..off + len]);
                off += len;
            }
            loss.value(&n.forward(x.view()).output.out, t.view())
        },
        &params,
        &grads.concat(),
    )
}

fn autoencoder_instance(rng: &mut SeedRng) -> f64 {
    let k = rng.random_range(2..4);
    let stride = rng.random_range(1..3);
    let side = (rng.random_range(2..5) - 1) * stride + k;
    let filters = rng.random_range(2..5);
    let k_conv = rng.random_range(1..=filters);
    let enc = ConvLayer::<f64>::new(filters, k, k, stride, rng);
    let dec = ConvTranspose::<f64>::new(filters, k, k, stride, Activation::Sigmoid, rng);
    let x = Array3::from_shape_vec((1, side, side), uniform(rng, side * side, 0.0, 1.0)).unwrap();
    let g = reconstruction_step(&enc, &dec, x.view(), k_conv);

    let (ne, nd) = (enc.kernels.len(), dec.kernels.len());
    let mut params: Vec<f64> = enc.kernels.iter().chain(&dec.kernels).copied().collect();
    params.push(dec.bias);
    let mut analytic: Vec<f64> = g.encoder.iter().chain(&g.decoder).copied().collect();
    analytic.push(g.decoder_bias);
    finite_diff_check(
        |p| {
            let mut e = enc.clone();
            let mut d = dec.clone();
            e.kernels.as_slice_mut().unwrap().copy_from_slice(&p[..ne]);
            d.kernels.as_slice_mut().unwrap().copy_from_slice(&p[ne..ne + nd]);
            d.bias = p[ne + nd];
            reconstruction_loss(&e, &d, x.view(), k_conv)
        },
        &params,
        &analytic,
    )
}

pub fn gradient_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("gradients");
    type Case = fn(&mut SeedRng) -> f64;
    let cases: [(&str, Case); 5] = [
        ("dense", dense_instance),
        ("conv", conv_instance),
        ("conv-transpose", conv_transpose_instance),
        ("two-layer-net", mlp_instance),
        ("sparse-autoencoder", autoencoder_instance),
    ];
    for (tag, (name, case)) in cases.into_iter().enumerate() {
        let worst = worst_error(seed, tag as u64, case);
        report.check(
            name,
            worst < GRADIENT_TOLERANCE,
            format!("worst relative error {worst:.2e} over {GRADIENT_INSTANCES} instances"),
        );
    }
    report
}

pub const HOPFIELD_N: usize = 225;
pub const HOPFIELD_K: usize = 10;
pub const HOPFIELD_PATTERNS: usize = 20;

/// `count` k-hot patterns whose pairwise shared active units stay within
/// 20% of k.
pub fn near_orthogonal_patterns(count: usize, n: usize, k: usize, rng: &mut SeedRng) -> Vec<BipolarPattern> {
    let max_overlap = (k as f64 * 0.2).floor() as usize;
    let mut out: Vec<BipolarPattern> = Vec::new();
    while out.len() < count {
        let p = BipolarPattern::from_active(n, &sample(rng, n, k).into_vec());
        if out.iter().all(|q| q.overlap(&p) <= max_overlap) {
            out.push(p);
        }
    }
    out
}

fn energy_oracle(weights: &Array2<f64>, bias: &Array1<f64>, state: &[i8]) -> f64 {
    let n = state.len();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e -= 0.5 * weights[[i, j]] * (state[i] * state[j]) as f64;
        }
        e -= bias[i] * state[i] as f64;
    }
    e
}

fn flip_bits(p: &BipolarPattern, count: usize, rng: &mut SeedRng) -> BipolarPattern {
    let mut v = p.as_slice().to_vec();
    for i in sample(rng, v.len(), count) {
        v[i] = -v[i];
    }
    BipolarPattern::new(v)
}

pub fn hopfield_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("hopfield");
    let mut rng = rng_for(seed, &[0x40]);
    let patterns = near_orthogonal_patterns(HOPFIELD_PATTERNS, HOPFIELD_N, HOPFIELD_K, &mut rng);
    let mut mem = HopfieldMemory::new(HOPFIELD_N, HOPFIELD_K, PcConfig::default(), &mut rng);

    let mut symmetric = true;
    let mut zero_diag = true;
    for p in &patterns {
        mem.store(p);
        let w = mem.weights();
        symmetric &= (0..HOPFIELD_N).all(|i| (0..i).all(|j| w[[i, j]] == w[[j, i]]));
        zero_diag &= w.diag().iter().all(|&v| v == 0.0);
    }
    report.check("symmetry", symmetric, format!("after each of {} stores", patterns.len()));
    report.check("zero-diagonal", zero_diag, format!("after each of {} stores", patterns.len()));

    let fixed = patterns
        .iter()
        .filter(|p| {
            let r = mem.recall(p);
            r.pattern == **p && r.converged && r.sweeps == 1
        })
        .count();
    report.check(
        "fixed-points",
        fixed == patterns.len(),
        format!("{fixed}/{} stored patterns unchanged in one sweep", patterns.len()),
    );

    // energy along every recall: stored patterns, corrupted copies, random cues
    let bias = mem.bias();
    let mut cues: Vec<BipolarPattern> = patterns.clone();
    cues.extend(patterns.iter().map(|p| flip_bits(p, HOPFIELD_N / 10, &mut rng)));
    cues.extend((0..20).map(|_| {
        let density = rng.random_range(0.02..0.5);
        BipolarPattern::new((0..HOPFIELD_N).map(|_| if rng.random_bool(density) { 1 } else { -1 }).collect())
    }));
    let mut violations = 0;
    let mut flips = 0;
    for cue in &cues {
        let mut last = energy_oracle(mem.weights(), &bias, cue.as_slice());
        mem.recall_observed(cue, |state| {
            let e = energy_oracle(mem.weights(), &bias, state);
            if e > last + 1e-9 {
                violations += 1;
            }
            last = e;
            flips += 1;
        });
    }
    report.check(
        "energy-descent",
        violations == 0,
        format!("{violations} increases over {flips} accepted flips in {} recalls", cues.len()),
    );

    let trials = 20;
    let recovered = (0..trials)
        .filter(|&t| {
            let mut rng = rng_for(seed, &[0x41, t]);
            let p = BipolarPattern::from_active(HOPFIELD_N, &sample(&mut rng, HOPFIELD_N, HOPFIELD_K).into_vec());
            let mut single = HopfieldMemory::new(HOPFIELD_N, HOPFIELD_K, PcConfig::default(), &mut rng);
            single.store(&p);
            let cue = flip_bits(&p, HOPFIELD_N / 10, &mut rng);
            single.recall(&cue).pattern == p
        })
        .count();
    report.check(
        "corrupted-cue-recovery",
        recovered == trials as usize,
        format!("{recovered}/{trials} single stored patterns recovered from 10% flipped bits"),
    );
    report
}

pub const PS_STUDY_SIZE: usize = 20;
pub const PS_SEEDS: u64 = 10;
/// Input length of the default LTM encoding.
pub const PS_INPUTS: usize = 121 * 16;

fn synthetic_encoding(rng: &mut SeedRng) -> Array1<f32> {
    Array1::from_shape_fn(PS_INPUTS, |_| if rng.random_bool(0.17) { rng.random_range(0.0..1.0) } else { 0.0 })
}

fn mean_pairwise_overlap(codes: &[BipolarPattern]) -> f64 {
    let mut total = 0;
    let mut pairs = 0;
    for i in 0..codes.len() {
        for j in 0..i {
            total += codes[i].overlap(&codes[j]);
            pairs += 1;
        }
    }
    total as f64 / pairs as f64
}

pub fn ps_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("pattern-separation");
    let cfg = PsConfig::default();
    let mut rng = rng_for(seed, &[0x50]);
    let mut ps = PatternSeparator::new(PS_INPUTS, cfg.clone(), &mut rng);

    let zeros = (cfg.dropout * PS_INPUTS as f64).floor() as usize;
    let exact_zeros = ps
        .weights()
        .rows()
        .into_iter()
        .all(|r| r.iter().filter(|&&v| v == 0.0).count() == zeros);
    report.check("dropout-zeros", exact_zeros, format!("{zeros} zero weights per unit"));

    let k_hot = (0..200).all(|_| ps.forward(synthetic_encoding(&mut rng).view()).active_count() == cfg.k_ps);
    report.check("k-hot", k_hot, format!("exactly {} winners on 200 inputs", cfg.k_ps));

    let x = synthetic_encoding(&mut rng);
    ps.clear_trace();
    let a = ps.forward(x.view());
    let b = ps.forward(x.view());
    report.check(
        "refractory",
        a != b,
        format!("repeated input shares {} of {} winners", a.overlap(&b), cfg.k_ps),
    );

    let limit = 0.2 * cfg.k_ps as f64;
    let study = |rng: &mut SeedRng, similar: bool| -> f64 {
        let mut ps = PatternSeparator::new(PS_INPUTS, cfg.clone(), rng);
        let base = synthetic_encoding(rng);
        let codes: Vec<BipolarPattern> = (0..PS_STUDY_SIZE)
            .map(|_| {
                let x = if similar {
                    base.mapv(|v| (v + rng.random_range(-0.05..0.05f32)).max(0.0))
                } else {
                    synthetic_encoding(rng)
                };
                ps.forward(ArrayView1::from(x.as_slice().unwrap()))
            })
            .collect();
        mean_pairwise_overlap(&codes)
    };
    for (name, similar) in [("overlap-independent-inputs", false), ("overlap-similar-inputs", true)] {
        let overlaps: Vec<f64> = (0..PS_SEEDS).map(|s| study(&mut rng_for(seed, &[0x51, s, similar as u64]), similar)).collect();
        let mean = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
        let worst = overlaps.iter().copied().fold(0.0, f64::max);
        report.check(
            name,
            worst < limit,
            format!("mean pairwise winner overlap {mean:.3} (worst seed {worst:.3}) vs limit {limit:.1} over {PS_SEEDS} seeds"),
        );
    }
    report
}

pub const OCCLUSION_TOLERANCE: f64 = 0.02;

pub fn corruption_suite(seed: u64) -> SuiteReport {
    let mut report = SuiteReport::new("corruption");
    let side = 52;
    let ink = Image::new(Array2::from_elem((side, side), 1.0));

    let mut counts_ok = true;
    let mut only_positions = true;
    for (i, p) in [0.0, 0.1, 0.25, 0.5, 0.75, 0.98].into_iter().enumerate() {
        let mut rng = rng_for(seed, &[0x60, i as u64]);
        let mut probe = rng.clone();
        let positions = noise_positions(side * side, p, &mut probe);
        let mut distinct = positions.clone();
        distinct.sort_unstable();
        distinct.dedup();
        counts_ok &= positions.len() == (p * (side * side) as f64).round() as usize && distinct.len() == positions.len();
        let noisy = add_noise(&ink, p, &mut rng);
        only_positions &= noisy
            .as_slice()
            .iter()
            .enumerate()
            .all(|(j, &v)| v == 1.0 || distinct.binary_search(&j).is_ok());
    }
    report.check("noise-count", counts_ok, "round(p * pixels) distinct positions for 6 fractions".into());
    report.check("noise-positions", only_positions, "pixels change only at drawn positions".into());

    let mut worst = 0.0f64;
    for (i, d) in [0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
        let trials = 50;
        let mut rng = rng_for(seed, &[0x61, i as u64]);
        let mean = (0..trials)
            .map(|_| occlude(&ink, d, &mut rng).as_slice().iter().filter(|&&v| v == 0.0).count() as f64)
            .sum::<f64>()
            / trials as f64;
        let expected = std::f64::consts::PI / 4.0 * d * d * (side * side) as f64;
        worst = worst.max((mean - expected).abs() / expected);
    }
    report.check(
        "occlusion-area",
        worst <= OCCLUSION_TOLERANCE,
        format!("worst relative area error {:.4} for d in 0.3..0.9 (50 discs each)", worst),
    );

    let mut rng = rng_for(seed, &[0x62]);
    let glyph = Image::new(Array2::from_shape_fn((side, side), |_| if rng.random_bool(0.2) { 1.0 } else { 0.0 }));
    let mut deterministic = true;
    let mut in_range = true;
    for kind in [CorruptionKind::Occlusion, CorruptionKind::Noise] {
        for level in [0.0, 0.3, 0.98] {
            let spec = CorruptionSpec::new(kind, level, seed);
            let a = spec.apply(&glyph, 3);
            deterministic &= a == spec.apply(&glyph, 3);
            if level > 0.0 {
                deterministic &= a != spec.apply(&glyph, 4);
            }
            in_range &= a.height() == side && a.width() == side && a.as_slice().iter().all(|v| (0.0..=1.0).contains(v));
        }
    }
    report.check("determinism", deterministic, "same seed and index reproduce, other index differs".into());
    report.check("range", in_range, "shape kept and values stay in [0, 1]".into());
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_orthogonal_generator_respects_bound() {
        let mut rng = rng_for(1, &[]);
        let ps = near_orthogonal_patterns(20, 225, 10, &mut rng);
        for i in 0..ps.len() {
            assert_eq!(ps[i].active_count(), 10);
            for j in 0..i {
                assert!(ps[i].overlap(&ps[j]) <= 2);
            }
        }
    }

    #[test]
    fn report_lines_carry_verdicts() {
        let mut r = SuiteReport::new("demo");
        r.check("a", true, "fine".into());
        r.check("b", false, "broken".into());
        let text = r.to_string();
        assert!(text.contains("PASS demo/a: fine"));
        assert!(text.contains("FAIL demo/b: broken"));
        assert!(!r.passed());
    }
}
