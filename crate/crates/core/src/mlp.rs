//! Geometry propagation through the shared two-layer feed-forward network.

use crate::error::{Error, Result};
use crate::geometry::GeometryState;
use crate::kernel::{relu_kernel_f, GaussianQuad};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

/// Weight statistics of the two-layer MLP. Weight entries have variance
/// `sigma_w2 / d`, bias entries variance `sigma_b2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub activation: Activation,
    /// Per-panel quadrature order for the Gaussian expectations; only used
    /// for tanh.
    pub quad_nodes: usize,
}

impl MlpParams {
    pub fn new(
        sigma_w2: f64,
        sigma_b2: f64,
        activation: Activation,
        quad_nodes: usize,
    ) -> Result<Self> {
        if !sigma_w2.is_finite() || sigma_w2 <= 0.0 {
            return Err(Error::domain(
                "MlpParams",
                format!("sigma_w2 must be positive, got {sigma_w2}"),
            ));
        }
        if !sigma_b2.is_finite() || sigma_b2 < 0.0 {
            return Err(Error::domain(
                "MlpParams",
                format!("sigma_b2 must be nonnegative, got {sigma_b2}"),
            ));
        }
        if !(8..=256).contains(&quad_nodes) {
            return Err(Error::domain(
                "MlpParams",
                format!("quad_nodes must lie in 8..=256, got {quad_nodes}"),
            ));
        }
        Ok(MlpParams {
            sigma_w2,
            sigma_b2,
            activation,
            quad_nodes,
        })
    }

    pub fn relu(sigma_w2: f64, sigma_b2: f64) -> Result<Self> {
        MlpParams::new(sigma_w2, sigma_b2, Activation::Relu, 64)
    }

    pub fn tanh(sigma_w2: f64, sigma_b2: f64) -> Result<Self> {
        MlpParams::new(sigma_w2, sigma_b2, Activation::Tanh, 64)
    }
}

/// Two-layer MLP map on the concentrated state.
///
/// First linear layer: `q1 = sigma_w2 q0 + sigma_b2`, `p1 = sigma_w2 p0 + sigma_b2`.
/// Second layer after the nonlinearity:
/// ReLU uses the closed form `q2 = sigma_w2/2 q1 + sigma_b2`,
/// `p2 = sigma_w2/2 q1 f(rho1) + sigma_b2`; tanh evaluates the one- and
/// two-dimensional Gaussian expectations by Gauss-Hermite quadrature.
pub fn mlp_update(state: GeometryState, mlp: &MlpParams) -> Result<GeometryState> {
    let q1 = mlp.sigma_w2 * state.q() + mlp.sigma_b2;
    let p1 = mlp.sigma_w2 * state.p() + mlp.sigma_b2;
    if q1 <= 0.0 {
        return Err(Error::domain(
            "mlp_update",
            format!("post-linear variance must be positive, got q1 = {q1}"),
        ));
    }
    let rho1 = (p1 / q1).clamp(-1.0, 1.0);

    let (q2, p2) = match mlp.activation {
        Activation::Relu => {
            let q2 = 0.5 * mlp.sigma_w2 * q1 + mlp.sigma_b2;
            let p2 = 0.5 * mlp.sigma_w2 * q1 * relu_kernel_f(rho1)? + mlp.sigma_b2;
            (q2, p2)
        }
        Activation::Tanh => {
            let rule = GaussianQuad::new(mlp.quad_nodes)?;
            let s = q1.sqrt();
            let second = rule.expect(s, |z| (s * z).tanh().powi(2))?;
            let cross = if rho1 >= 1.0 {
                second
            } else {
                rule.expect_correlated(rho1, s, |z1, z2| (s * z1).tanh() * (s * z2).tanh())?
            };
            (
                mlp.sigma_w2 * second + mlp.sigma_b2,
                mlp.sigma_w2 * cross + mlp.sigma_b2,
            )
        }
    };
    GeometryState::new(q2, p2.min(q2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_he_scaling_preserves_correlated_input() {
        // (q, p) = (1, 1), sigma_w2 = 2, sigma_b2 = 0: f(1) = 1 keeps rho = 1.
        let state = GeometryState::new(1.0, 1.0).unwrap();
        let mlp = MlpParams::relu(2.0, 0.0).unwrap();
        let out = mlp_update(state, &mlp).unwrap();
        assert!((out.q() - 2.0).abs() < 1e-15);
        assert!((out.p() - 2.0).abs() < 1e-15);
        assert_eq!(out.rho(), 1.0);
    }

    #[test]
    fn relu_orthogonal_input() {
        // (q, p) = (1, 0), sigma_w2 = 2, sigma_b2 = 0: q2 = 2, p2 = 2/pi.
        let state = GeometryState::new(1.0, 0.0).unwrap();
        let mlp = MlpParams::relu(2.0, 0.0).unwrap();
        let out = mlp_update(state, &mlp).unwrap();
        let pi = std::f64::consts::PI;
        assert!((out.q() - 2.0).abs() < 1e-15);
        assert!((out.p() - 2.0 / pi).abs() < 1e-15);
        assert!((out.rho() - 1.0 / pi).abs() < 1e-15);
    }

    #[test]
    fn tanh_small_weights_linearise() {
        // For tiny sigma_w2, tanh(x) ~ x and the map is linear.
        let state = GeometryState::new(1.0, 0.5).unwrap();
        let mlp = MlpParams::tanh(0.01, 0.0).unwrap();
        let out = mlp_update(state, &mlp).unwrap();
        let expected = 0.01 * 0.01;
        assert!((out.q() - expected).abs() < 0.05 * expected);
        assert!((out.rho() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn tanh_rho_one_stays_correlated() {
        let state = GeometryState::new(1.0, 1.0).unwrap();
        let mlp = MlpParams::tanh(6.25, 0.1).unwrap();
        let out = mlp_update(state, &mlp).unwrap();
        assert_eq!(out.rho(), 1.0);
    }

    #[test]
    fn rejects_nonpositive_sigma_w2() {
        assert!(MlpParams::relu(0.0, 0.0).is_err());
        assert!(MlpParams::relu(-1.0, 0.0).is_err());
        assert!(MlpParams::new(1.0, 0.0, Activation::Tanh, 4).is_err());
    }
}
