//! Gaussian-expectation machinery: the ReLU arccosine kernel in closed form
//! and a composite quadrature for activations without one.
//!
//! Gaussian expectations of saturating activations like `tanh(s z)` have poles
//! at distance `pi / (2s)` from the real axis, so a single global rule loses
//! accuracy rapidly as `s` grows. The quadrature here tiles the real line with
//! panels whose width shrinks like `1/s` and applies a Gauss-Legendre rule on
//! each panel, which keeps the convergence spectral at every scale.

use crate::error::{Error, Result};

/// Slack tolerated on the [-1, 1] similarity domain before rejecting.
const RHO_SLACK: f64 = 1e-12;

/// Correlation structure of ReLU outputs for unit-variance inputs:
/// `f(rho) = (sqrt(1 - rho^2) + rho (pi - arccos rho)) / pi`.
///
/// Monotone increasing on [-1, 1] with `f(-1) = 0`, `f(0) = 1/pi`, `f(1) = 1`.
pub fn relu_kernel_f(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() > 1.0 + RHO_SLACK {
        return Err(Error::domain(
            "relu_kernel_f",
            format!("rho must lie in [-1, 1], got {rho}"),
        ));
    }
    let rho = rho.clamp(-1.0, 1.0);
    let pi = std::f64::consts::PI;
    Ok(((1.0 - rho * rho).sqrt() + rho * (pi - rho.acos())) / pi)
}

/// Gauss-Legendre rule on [-1, 1]: nodes are Legendre roots found by Newton
/// iteration on the three-term recurrence.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::domain("GaussLegendre", "need at least one node"));
        }
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        let half = m.div_ceil(2);
        for i in 0..half {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..m {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                deriv = mf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / deriv;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * deriv * deriv);
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if nodes.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Quadrature {
                op: "GaussLegendre",
            });
        }
        Ok(GaussLegendre { nodes, weights })
    }

    /// `int_a^b g(x) dx`.
    pub fn integrate(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let scale = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(mid + scale * x))
            .sum::<f64>()
            * scale
    }
}

/// Expectations against the standard normal density, computed by panel-wise
/// Gauss-Legendre quadrature. The panel width adapts to the integrand scale
/// hint: `expect` with scale `s` resolves structure of width `1/s` around the
/// origin, with panel edges meeting at 0.
#[derive(Debug, Clone)]
pub struct GaussianQuad {
    rule: GaussLegendre,
}

/// Integration half-range in standard deviations; the discarded tail mass is
/// below 1e-36.
const HALF_RANGE: f64 = 13.0;
/// Panel width for unit-scale integrands.
const BASE_PANEL: f64 = 4.0;

impl GaussianQuad {
    /// `order` is the Gauss-Legendre node count on each panel.
    pub fn new(order: usize) -> Result<Self> {
        Ok(GaussianQuad {
            rule: GaussLegendre::new(order)?,
        })
    }

    /// Flattened (node, weight * density) pairs of the composite rule for a
    /// given scale hint.
    fn weighted_nodes(&self, scale: f64) -> Vec<(f64, f64)> {
        let panel = BASE_PANEL / scale.max(1.0);
        let n_half = (HALF_RANGE / panel).ceil() as usize;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut out = Vec::with_capacity(2 * n_half * self.rule.nodes.len());
        for k in 0..2 * n_half {
            let a = -(n_half as f64) * panel + k as f64 * panel;
            let b = a + panel;
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let z = mid + half * x;
                out.push((z, w * half * norm * (-0.5 * z * z).exp()));
            }
        }
        out
    }

    /// `E[g(z)]` for standard normal `z`; `scale` is the characteristic
    /// frequency of `g` (pass `s` when `g(z) = phi(s z)`).
    pub fn expect(&self, scale: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        let v: f64 = self
            .weighted_nodes(scale)
            .iter()
            .map(|&(z, w)| w * g(z))
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Quadrature { op: "expect" })
        }
    }

    /// `E[g(z1, z2)]` for standard normal `z1`, `z2` with correlation `rho`,
    /// through the substitution `z2 = rho z1 + sqrt(1 - rho^2) z2'`.
    pub fn expect_correlated(
        &self,
        rho: f64,
        scale: f64,
        g: impl Fn(f64, f64) -> f64,
    ) -> Result<f64> {
        if rho.abs() > 1.0 + RHO_SLACK {
            return Err(Error::domain(
                "expect_correlated",
                format!("rho must lie in [-1, 1], got {rho}"),
            ));
        }
        let rho = rho.clamp(-1.0, 1.0);
        let ortho = (1.0 - rho * rho).sqrt();
        let outer = self.weighted_nodes(scale);
        // The inner variable enters g through ortho * z2', so its effective
        // frequency is scale * ortho.
        let inner = self.weighted_nodes(scale * ortho);
        let mut sum = 0.0;
        for &(z1, w1) in &outer {
            let mut acc = 0.0;
            for &(z2p, w2) in &inner {
                acc += w2 * g(z1, rho * z1 + ortho * z2p);
            }
            sum += w1 * acc;
        }
        if sum.is_finite() {
            Ok(sum)
        } else {
            Err(Error::Quadrature {
                op: "expect_correlated",
            })
        }
    }
}
