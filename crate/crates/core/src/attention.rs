//! Closed-form description of a self-attention layer at initialisation.
//!
//! A row of the attention matrix behaves like the Boltzmann measure of a
//! random energy model whose inverse temperature is the query/key scale
//! parameter `beta`. Below the critical `beta_c(rho)` the row is spread over
//! almost all keys and the layer collapses token diversity; above it the row
//! condenses onto a handful of keys and similarity is preserved.

use crate::error::{Error, Result};
use crate::geometry::{GeometryState, UNIT_TOL};
use serde::{Deserialize, Serialize};

/// Logarithm base used when converting an off-the-shelf initialisation into an
/// effective inverse temperature. The theory itself always uses the natural log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    pub fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// Query/key initialisation scale and sequence-length context of one attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// Inverse temperature `beta >= 0`.
    pub beta: f64,
    /// Sequence length `T >= 2`.
    pub seq_len: usize,
    /// Apply finite-size corrections below the transition.
    pub finite_size: bool,
}

impl AttentionParams {
    pub fn new(beta: f64, seq_len: usize, finite_size: bool) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::domain(
                "AttentionParams",
                format!("beta must be finite and nonnegative, got {beta}"),
            ));
        }
        if seq_len < 2 {
            return Err(Error::domain(
                "AttentionParams",
                format!("seq_len must be >= 2, got {seq_len}"),
            ));
        }
        Ok(AttentionParams {
            beta,
            seq_len,
            finite_size,
        })
    }

    /// Attention-score standard deviation `sigma_a = beta * sqrt(ln T)`.
    pub fn sigma_a(&self) -> Result<f64> {
        sigma_a_from_beta(self.beta, self.seq_len)
    }
}

/// `sigma_a = beta * sqrt(ln T)`, the score scale implied by `beta`.
///
/// Natural logarithm throughout: the temperature scaling is defined against
/// sequences of size `e^N`.
pub fn sigma_a_from_beta(beta: f64, seq_len: usize) -> Result<f64> {
    if seq_len < 2 {
        return Err(Error::domain(
            "sigma_a_from_beta",
            format!("seq_len must be >= 2, got {seq_len}"),
        ));
    }
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::domain(
            "sigma_a_from_beta",
            format!("beta must be nonnegative, got {beta}"),
        ));
    }
    Ok(beta * (seq_len as f64).ln().sqrt())
}

/// Effective inverse temperature of a model initialised with a constant
/// per-entry standard deviation: `init_std^2 * head_dim / sqrt(log T)`.
///
/// `log_base` defaults to the natural log; base 10 reproduces the commonly
/// quoted BERT value (~0.016 for head_dim 64, T = 512, std 0.02).
pub fn effective_beta(
    head_dim: usize,
    seq_len: usize,
    init_std: f64,
    log_base: LogBase,
) -> Result<f64> {
    if head_dim < 1 {
        return Err(Error::domain(
            "effective_beta",
            format!("head_dim must be >= 1, got {head_dim}"),
        ));
    }
    if seq_len < 2 {
        return Err(Error::domain(
            "effective_beta",
            format!("seq_len must be >= 2, got {seq_len}"),
        ));
    }
    if init_std.is_nan() || init_std <= 0.0 {
        return Err(Error::domain(
            "effective_beta",
            format!("init_std must be positive, got {init_std}"),
        ));
    }
    Ok(init_std * init_std * head_dim as f64 / log_base.log(seq_len as f64).sqrt())
}

/// Critical inverse temperature `beta_c(rho) = sqrt(2 / (1 - rho))`.
pub fn beta_critical(rho: f64) -> Result<f64> {
    if !(-1.0..1.0).contains(&rho) {
        return Err(Error::domain(
            "beta_critical",
            format!("rho must lie in [-1, 1), got {rho}"),
        ));
    }
    Ok((2.0 / (1.0 - rho)).sqrt())
}

/// Expected inverse participation ratio of an attention row, `Y_q(beta)`.
///
/// Zero below `beta_c(rho)`, `1 - beta_c / beta` above; continuous at the
/// transition.
pub fn y_q(beta: f64, rho: f64) -> Result<f64> {
    let bc = beta_critical(rho)?;
    if beta <= bc {
        Ok(0.0)
    } else {
        Ok(1.0 - bc / beta)
    }
}

/// `Y_q` with the finite-size correction `T^(-1 + beta^2 / beta_c^2)` applied
/// below the transition. Above `beta_c` the asymptotic value is used unchanged.
pub fn y_q_finite_size(beta: f64, rho: f64, seq_len: usize) -> Result<f64> {
    if seq_len < 2 {
        return Err(Error::domain(
            "y_q_finite_size",
            format!("seq_len must be >= 2, got {seq_len}"),
        ));
    }
    let bc = beta_critical(rho)?;
    let value = if beta < bc {
        let exponent = -1.0 + (beta * beta) / (bc * bc);
        (seq_len as f64).powf(exponent)
    } else {
        1.0 - bc / beta
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Expected cross-overlap of two distinct attention rows, `Y_p(beta)`.
///
/// Sub-leading for long sequences, hence zero in the asymptotic theory. With
/// finite-size corrections the uniform rows below the transition overlap by
/// exactly `1/T`.
pub fn y_p(beta: f64, rho: f64, seq_len: usize, finite_size: bool) -> Result<f64> {
    let bc = beta_critical(rho)?;
    if seq_len < 2 {
        return Err(Error::domain(
            "y_p",
            format!("seq_len must be >= 2, got {seq_len}"),
        ));
    }
    if finite_size && beta < bc {
        Ok(1.0 / seq_len as f64)
    } else {
        Ok(0.0)
    }
}

/// One self-attention layer acting on a normalised state.
///
/// `q' = rho + (1 - rho) Y_q` and `p' = p + (1 - rho) Y_p`; `p` itself is not
/// updated by attention in the asymptotic theory. The input must come out of a
/// LayerNorm (`q = 1`), which fixes `p = rho`.
///
/// Below `beta_c` in asymptotic mode the output degenerates to `q' = p' = rho`:
/// every token is mapped to the same direction and the reported similarity is
/// the collapsed value 1. Inputs with `rho` within 1e-9 of 1 are treated as
/// the absorbing fixed point.
pub fn sa_update(state: GeometryState, attn: &AttentionParams) -> Result<GeometryState> {
    if (state.q() - 1.0).abs() > UNIT_TOL {
        return Err(Error::precondition(
            "sa_update",
            format!("input must be normalised (q = 1), got q = {}", state.q()),
        ));
    }
    let rho = state.rho();
    if rho >= 1.0 - UNIT_TOL {
        return GeometryState::new(1.0, 1.0);
    }

    let (yq, yp) = if attn.finite_size {
        (
            y_q_finite_size(attn.beta, rho, attn.seq_len)?,
            y_p(attn.beta, rho, attn.seq_len, true)?,
        )
    } else {
        (y_q(attn.beta, rho)?, 0.0)
    };

    let q_out = rho + (1.0 - rho) * yq;
    let p_out = state.p() + (1.0 - rho) * yp;
    // Negative input similarity in the collapsed phase leaves a formally
    // negative mean-token norm; the physical limit is the zero state.
    if q_out < 0.0 {
        return GeometryState::new(0.0, 0.0);
    }
    GeometryState::new(q_out, p_out.min(q_out))
}
