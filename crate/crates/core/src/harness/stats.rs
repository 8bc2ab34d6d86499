use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 when `n == 1`.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// False when the group had a single value and `std` is a placeholder.
    pub std_defined: bool,
}

pub fn aggregate_stats(values: &[f64], group: &str) -> Result<Stats, HarnessError> {
    let n = values.len();
    if n == 0 {
        return Err(HarnessError::EmptyGroup(group.to_string()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (std, std_defined) = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        ((ss / (n - 1) as f64).sqrt(), true)
    } else {
        (0.0, false)
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Stats {
        n,
        mean,
        std,
        min,
        max,
        std_defined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_two_three() {
        let s = aggregate_stats(&[1.0, 2.0, 3.0], "g").unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
        assert!(s.std_defined);
    }

    #[test]
    fn single_value_flags_std() {
        let s = aggregate_stats(&[0.4], "g").unwrap();
        assert_eq!(s.std, 0.0);
        assert!(!s.std_defined);
    }

    #[test]
    fn empty_group_is_an_error() {
        let err = aggregate_stats(&[], "classification/noise").unwrap_err();
        assert!(err.to_string().contains("classification/noise"));
    }

    proptest! {
        #[test]
        fn mean_within_bounds(values in prop::collection::vec(0.0f64..1.0, 1..40)) {
            let s = aggregate_stats(&values, "g").unwrap();
            prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
            prop_assert!(s.std >= 0.0);
        }
    }
}
