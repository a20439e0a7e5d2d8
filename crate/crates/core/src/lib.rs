//! Signal propagation through transformer blocks at initialisation.
//!
//! The crate tracks one scalar, the typical pairwise cosine similarity of the
//! tokens in a sequence, through depth. The closed-form side (`attention`,
//! `mlp`, `block`) iterates the similarity update maps of a post-norm encoder
//! block; `regime` classifies hyperparameter choices into trainable,
//! rank-collapse and entropy-collapse regions and solves for critical residual
//! strengths; `sim` runs seeded Monte Carlo forward passes of real random
//! blocks to verify every theoretical curve; `report` handles configuration
//! files and result serialization.

pub mod attention;
pub mod block;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod mlp;
pub mod regime;
pub mod report;
pub mod sim;

pub use attention::{
    beta_critical, effective_beta, sa_update, sigma_a_from_beta, y_p, y_q, y_q_finite_size,
    AttentionParams, LogBase,
};
pub use block::{block_update, iterate_depth, BlockParams};
pub use error::{Error, Result};
pub use geometry::{layer_norm_geometry, residual_merge, GeometryState, Trajectory};
pub use kernel::{relu_kernel_f, GaussLegendre, GaussianQuad};
pub use mlp::{mlp_update, Activation, MlpParams};
pub use regime::{
    classify, critical_alpha, find_fixed_point, linspace, trainability_diagram, ClassifierConfig,
    DiagramGrid, RegimeLabel,
};
pub use sim::{
    attention_forward, block_forward, generate_sequence, layer_norm_apply, measure_geometry,
    mlp_forward, run_depth_experiment, run_ipr_experiment, run_sa_phase_experiment,
    AttentionStats, EmpiricalTrajectory, SequenceBatch, SimConfig,
};
