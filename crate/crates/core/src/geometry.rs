//! Concentrated sequence geometry: the (q, p) pair and the maps that act on it
//! without touching the attention mechanism.
//!
//! `q` is the mean squared token norm divided by the embedding dimension and
//! `p` the mean cross inner product of two distinct tokens divided by the
//! dimension. Their ratio `rho = p / q` is the pairwise cosine similarity that
//! the whole theory tracks through depth.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for comparisons against 1 (norms, similarities).
pub const UNIT_TOL: f64 = 1e-9;

/// Slack allowed on the |p| <= q Cauchy-Schwarz bound before rejecting.
const CS_SLACK: f64 = 1e-9;

/// The concentrated (q, p) state of a token sequence.
///
/// Invariants: `q >= 0`, `|p| <= q` (up to float slack). `q = 0` is the
/// degenerate state left behind by a fully collapsed attention branch; it only
/// appears transiently inside block composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryState {
    q: f64,
    p: f64,
}

impl GeometryState {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !q.is_finite() || !p.is_finite() {
            return Err(Error::domain("GeometryState", "non-finite q or p"));
        }
        if q < 0.0 {
            return Err(Error::domain(
                "GeometryState",
                format!("q must be nonnegative, got {q}"),
            ));
        }
        if p.abs() > q + CS_SLACK {
            return Err(Error::domain(
                "GeometryState",
                format!("|p| <= q violated: q = {q}, p = {p}"),
            ));
        }
        // Clamp the float slack away so rho() stays inside [-1, 1].
        let p = p.clamp(-q, q);
        Ok(GeometryState { q, p })
    }

    /// State with unit norm and similarity `rho`, the canonical post-LayerNorm input.
    pub fn normalized(rho: f64) -> Result<Self> {
        GeometryState::new(1.0, rho)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Cosine similarity `p / q`.
    ///
    /// The degenerate `q = 0` state reports `rho = 1`: it is the direction a
    /// fully collapsed attention branch points to (all outputs identical).
    pub fn rho(&self) -> f64 {
        if self.q == 0.0 {
            1.0
        } else {
            self.p / self.q
        }
    }
}

/// LayerNorm acting on the concentrated state: norms reset to 1, similarity kept.
pub fn layer_norm_geometry(state: GeometryState) -> Result<GeometryState> {
    if state.q() <= 0.0 {
        return Err(Error::domain(
            "layer_norm_geometry",
            format!("q must be positive, got {}", state.q()),
        ));
    }
    GeometryState::new(1.0, state.rho())
}

/// Residual addition of an independent branch: `out = branch + alpha * input`.
///
/// Branch and input are statistically independent at initialisation, so the
/// cross terms vanish in expectation and the squared quantities add.
pub fn residual_merge(
    branch: GeometryState,
    input: GeometryState,
    alpha: f64,
) -> Result<GeometryState> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::domain(
            "residual_merge",
            format!("alpha must be nonnegative, got {alpha}"),
        ));
    }
    let a2 = alpha * alpha;
    GeometryState::new(branch.q() + a2 * input.q(), branch.p() + a2 * input.p())
}

/// A depth profile of geometry states; index 0 is the input, index `l` the
/// state after block `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<GeometryState>,
}

impl Trajectory {
    pub fn new(states: Vec<GeometryState>) -> Self {
        Trajectory { states }
    }

    pub fn states(&self) -> &[GeometryState] {
        &self.states
    }

    /// Number of blocks traversed (states() has one more entry).
    pub fn layers(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn rho_at(&self, layer: usize) -> f64 {
        self.states[layer].rho()
    }

    pub fn final_rho(&self) -> f64 {
        self.states
            .last()
            .map(GeometryState::rho)
            .unwrap_or(f64::NAN)
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.states.iter().map(GeometryState::rho).collect()
    }
}
