/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Below this magnitude both gradients are treated as zero.
const FD_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom < FD_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares `analytic` against central differences of `loss` around `params`
/// and returns the maximum relative error over all parameters.
pub fn finite_diff_check<L>(mut loss: L, params: &[f64], analytic: &[f64]) -> f64
where
    L: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let up = loss(&p);
        p[i] = orig - FD_STEP;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
