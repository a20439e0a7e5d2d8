//! Composition of one full post-norm transformer block on the concentrated
//! geometry, and its iteration through depth.

use crate::attention::{sa_update, AttentionParams};
use crate::error::{Error, Result};
use crate::geometry::{layer_norm_geometry, residual_merge, GeometryState, Trajectory};
use crate::mlp::{mlp_update, MlpParams};
use serde::{Deserialize, Serialize};

/// Full hyperparameter set of one transformer block.
///
/// `sigma_v2` is the value-projection weight scale in the same convention as
/// the MLP weights (entry variance `sigma_v2 / d`). It multiplies the squared
/// norm of the attention branch and therefore sets how strongly that branch
/// competes with the residual; the similarity of the branch itself is
/// unaffected. The reference normalisation of the attention update corresponds
/// to `sigma_v2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub attn: AttentionParams,
    pub mlp: MlpParams,
    pub alpha_sa: f64,
    pub alpha_mlp: f64,
    pub sigma_v2: f64,
}

impl BlockParams {
    pub fn new(
        attn: AttentionParams,
        mlp: MlpParams,
        alpha_sa: f64,
        alpha_mlp: f64,
        sigma_v2: f64,
    ) -> Result<Self> {
        if alpha_sa.is_nan() || alpha_sa < 0.0 || alpha_mlp.is_nan() || alpha_mlp < 0.0 {
            return Err(Error::domain(
                "BlockParams",
                format!("residual strengths must be nonnegative, got ({alpha_sa}, {alpha_mlp})"),
            ));
        }
        if !sigma_v2.is_finite() || sigma_v2 < 0.0 {
            return Err(Error::domain(
                "BlockParams",
                format!("sigma_v2 must be nonnegative, got {sigma_v2}"),
            ));
        }
        Ok(BlockParams {
            attn,
            mlp,
            alpha_sa,
            alpha_mlp,
            sigma_v2,
        })
    }
}

/// One post-norm block:
/// LN -> self-attention -> + alpha_SA * (LN input) -> LN
///    -> MLP            -> + alpha_MLP * (MLP input) -> LN.
///
/// The output always has `q = 1`.
pub fn block_update(state: GeometryState, params: &BlockParams) -> Result<GeometryState> {
    let x0 = layer_norm_geometry(state)?;
    let sa = sa_update(x0, &params.attn)?;
    // Value-projection scale: multiplies the branch magnitude, not its similarity.
    let sa = GeometryState::new(params.sigma_v2 * sa.q(), params.sigma_v2 * sa.p())?;
    let r1 = residual_merge(sa, x0, params.alpha_sa)?;
    if r1.q() == 0.0 {
        // Collapsed attention branch and no residual: every token is mapped to
        // the same (vanishing) direction, the rank-collapsed absorbing state.
        return GeometryState::new(1.0, 1.0);
    }
    let x1 = layer_norm_geometry(r1)?;
    let m = mlp_update(x1, &params.mlp)?;
    let r2 = residual_merge(m, x1, params.alpha_mlp)?;
    layer_norm_geometry(r2)
}

/// Iterate `block_update` from a normalised input with similarity `rho0`.
///
/// The returned trajectory has `layers + 1` states, index 0 being the input.
pub fn iterate_depth(rho0: f64, params: &BlockParams, layers: usize) -> Result<Trajectory> {
    if layers < 1 {
        return Err(Error::precondition(
            "iterate_depth",
            format!("layers must be >= 1, got {layers}"),
        ));
    }
    let mut states = Vec::with_capacity(layers + 1);
    let mut state = GeometryState::normalized(rho0)?;
    states.push(state);
    for _ in 0..layers {
        state = block_update(state, params)?;
        if !state.rho().is_finite() {
            return Err(Error::domain("iterate_depth", "non-finite similarity"));
        }
        states.push(state);
    }
    Ok(Trajectory::new(states))
}
