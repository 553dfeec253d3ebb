//! Binary link models: Boolean NMF with rank selection, logistic matrix
//! factorization, and their sigmoid ensemble.

mod boolean;
mod ensemble;
mod lmf;

pub use boolean::{
    bnmf, bnmfk_fit, boolean_product, hamming_error, BnmfModel, BnmfOptions, BoolMatrix,
};
pub use ensemble::{ensemble_fit, ensemble_scores, EnsembleConfig, EnsembleModel};
pub use lmf::{
    lmf_fit, lmf_gradients, lmf_loss, lmf_predict, LmfGradients, LmfModel, LmfOptions,
};

/// Smallest and largest values [`sigmoid`] returns.
const SIGMOID_FLOOR: f64 = 5e-324;
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated without overflow for any finite input. The
/// result is clamped to the representable values strictly inside (0, 1).
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(SIGMOID_FLOOR, SIGMOID_CEIL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1/(1+e^-1) to 20 digits: 0.73105857863000487925
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        let tiny = sigmoid(-800.0);
        assert!(tiny > 0.0 && tiny <= 1e-300);
        assert!(sigmoid(800.0) < 1.0);
        assert!((sigmoid(-500.0) - (-500f64).exp()).abs() < 1e-230);
    }
}
