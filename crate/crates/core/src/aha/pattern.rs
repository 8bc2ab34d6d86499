use serde::{Deserialize, Serialize};

/// Vector over {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipolarPattern(Vec<i8>);

impl BipolarPattern {
    pub fn new(values: Vec<i8>) -> Self {
        assert!(values.iter().all(|&v| v == 1 || v == -1), "pattern: values must be -1 or +1");
        Self(values)
    }

    /// `+1` at `active`, `-1` elsewhere.
    pub fn from_active(len: usize, active: &[usize]) -> Self {
        let mut v = vec![-1i8; len];
        for &i in active {
            v[i] = 1;
        }
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn active(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &v)| v > 0).map(|(i, _)| i).collect()
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0).count()
    }

    /// Units active in both patterns.
    pub fn overlap(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(&a, &b)| a > 0 && b > 0).count()
    }

    pub fn to_bipolar_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }

    /// Affine remap to {0, 1}.
    pub fn to_unit(&self) -> Vec<f32> {
        self.0.iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect()
    }
}

/// `+1` where `x > threshold`, else `-1`.
pub fn condition_bipolar(x: &[f32], threshold: f32) -> BipolarPattern {
    BipolarPattern(x.iter().map(|&v| if v > threshold { 1 } else { -1 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conditioning_examples() {
        assert_eq!(condition_bipolar(&[0.0, 1.0], 0.5).as_slice(), &[-1, 1]);
        assert!(condition_bipolar(&[0.5; 6], 0.5).as_slice().iter().all(|&v| v == -1));
    }

    #[test]
    fn overlap_and_active() {
        let a = BipolarPattern::from_active(8, &[1, 3, 5]);
        let b = BipolarPattern::from_active(8, &[3, 5, 7]);
        assert_eq!(a.overlap(&b), 2);
        assert_eq!(a.active(), vec![1, 3, 5]);
        assert_eq!(a.to_unit()[3], 1.0);
    }

    proptest! {
        #[test]
        fn conditioning_is_idempotent_on_bipolar(bits in prop::collection::vec(any::<bool>(), 1..64)) {
            let p = BipolarPattern::new(bits.iter().map(|&b| if b { 1 } else { -1 }).collect());
            prop_assert_eq!(condition_bipolar(&p.to_unit(), 0.5), p);
        }
    }
}
