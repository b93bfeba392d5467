use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 1.0;

/// Huber loss of the residual `y - y_hat`: quadratic inside `delta`,
/// linear outside.
pub fn huber(y: f64, y_hat: f64, delta: f64) -> f64 {
    let r = (y - y_hat).abs();
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to the residual `r = y - y_hat`.
pub fn huber_derivative(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Per-sample Huber errors of one configuration on the test rows, in
/// sample order so that configurations stay aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub label: String,
    pub delta: f64,
    pub errors: Vec<f64>,
}

impl ErrorDistribution {
    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }
}

pub fn error_distribution(
    y: &[f64],
    y_hat: &[f64],
    delta: f64,
    label: impl Into<String>,
) -> Result<ErrorDistribution> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            what: "targets vs predictions",
            left: y.len(),
            right: y_hat.len(),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "huber delta must be positive, got {delta}"
        )));
    }
    Ok(ErrorDistribution {
        label: label.into(),
        delta,
        errors: y
            .iter()
            .zip(y_hat)
            .map(|(&a, &b)| huber(a, b, delta))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_values() {
        assert_eq!(huber(0.0, 0.0, 1.0), 0.0);
        assert_eq!(huber(0.5, 0.0, 1.0), 0.125);
        assert_eq!(huber(2.0, 0.0, 1.0), 1.5);
        assert_eq!(huber(0.0, 2.0, 1.0), 1.5);
    }

    #[test]
    fn smooth_at_delta() {
        for delta in [0.5f64, 1.0, 3.0] {
            let inside = 0.5 * delta * delta;
            let outside = delta * (delta - 0.5 * delta);
            assert!((inside - outside).abs() < 1e-9);
            assert!((huber(delta, 0.0, delta) - inside).abs() < 1e-9);
            // one-sided slopes: r from the quadratic side, delta from the linear side
            let h = 1e-7;
            let left = (huber(delta, 0.0, delta) - huber(delta - h, 0.0, delta)) / h;
            let right = (huber(delta + h, 0.0, delta) - huber(delta, 0.0, delta)) / h;
            assert!((left - delta).abs() < 1e-6 * delta.max(1.0));
            assert!((right - delta).abs() < 1e-6 * delta.max(1.0));
            assert_eq!(huber_derivative(delta, delta), delta);
        }
    }

    #[test]
    fn distribution_examples() {
        let d = error_distribution(&[1.0, 2.0, -3.0], &[1.0, 2.0, -3.0], 1.0, "same").unwrap();
        assert_eq!(d.errors, vec![0.0; 3]);
        let d = error_distribution(&[0.0], &[2.0], 1.0, "one").unwrap();
        assert_eq!(d.errors, vec![1.5]);
        let d = error_distribution(&[0.0, 0.0], &[0.5, 2.0], 1.0, "m").unwrap();
        assert_eq!(d.mean(), (0.125 + 1.5) / 2.0);
        assert!(error_distribution(&[0.0], &[1.0, 2.0], 1.0, "bad").is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(a in -1e3f64..1e3, b in -1e3f64..1e3, delta in 0.01f64..10.0) {
            prop_assert_eq!(huber(a, b, delta), huber(b, a, delta));
            prop_assert!(huber(a, b, delta) >= 0.0);
        }
    }
}
