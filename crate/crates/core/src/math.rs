//! Small numeric helpers shared across modules.

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Binary cross-entropy of a logit `z` against label `y`:
/// `-[y ln σ(z) + (1 - y) ln(1 - σ(z))]`, computed as `softplus(z) - y z`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

/// Binary cross-entropy of a probability `s` against label `y`.
pub fn bce(s: f64, y: f64) -> f64 {
    -(y * libm::log(s) + (1.0 - y) * libm::log(1.0 - s))
}

/// Dot product accumulated in `f64`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Cosine similarity, `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_matches_closed_form() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-2), evaluated independently.
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((sigmoid(-1.0) - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn bce_routes_agree() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-1.5, 1.0)] {
            assert!((bce_with_logit(z, y) - bce(sigmoid(z), y)).abs() < 1e-12);
        }
        assert!((bce(0.5, 1.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }
}
