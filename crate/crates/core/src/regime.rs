//! Classification of initialisation configurations into trainable,
//! rank-collapse and entropy-collapse regimes, parameter-plane sweeps, and
//! solvers for the critical residual strength and depth fixed points.

use crate::attention::beta_critical;
use crate::block::{block_update, iterate_depth, BlockParams};
use crate::error::{Error, Result};
use crate::geometry::GeometryState;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Trainable,
    RankCollapse,
    EntropyCollapse,
}

impl RegimeLabel {
    /// Lowercase wire name used in CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Trainable => "trainable",
            RegimeLabel::RankCollapse => "rank_collapse",
            RegimeLabel::EntropyCollapse => "entropy_collapse",
        }
    }
}

/// Depth, collapse threshold and input similarity used by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub layers: usize,
    /// Final-layer similarity above this counts as rank collapse.
    pub collapse_threshold: f64,
    /// Input similarity; defaults to the 1/sqrt(d) convention at d = 600.
    pub rho0: f64,
}

impl ClassifierConfig {
    pub fn new(layers: usize, collapse_threshold: f64, rho0: f64) -> Result<Self> {
        if layers < 1 {
            return Err(Error::domain(
                "ClassifierConfig",
                format!("layers must be >= 1, got {layers}"),
            ));
        }
        if collapse_threshold.is_nan() || collapse_threshold <= 0.0 || collapse_threshold >= 1.0 {
            return Err(Error::domain(
                "ClassifierConfig",
                format!("collapse_threshold must lie in (0, 1), got {collapse_threshold}"),
            ));
        }
        if !(-1.0..1.0).contains(&rho0) {
            return Err(Error::domain(
                "ClassifierConfig",
                format!("rho0 must lie in [-1, 1), got {rho0}"),
            ));
        }
        Ok(ClassifierConfig {
            layers,
            collapse_threshold,
            rho0,
        })
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            layers: 60,
            collapse_threshold: 0.99,
            rho0: 0.04,
        }
    }
}

/// Regime map over a (alpha_SA, beta) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramGrid {
    pub alpha_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    /// Row-major, alpha-major: `labels[i][j]` is (alpha_axis[i], beta_axis[j]).
    pub labels: Vec<Vec<RegimeLabel>>,
    pub template: BlockParams,
    pub classifier: ClassifierConfig,
}

/// Classify one configuration.
///
/// Entropy collapse is a first-layer criterion: it fires when `beta` exceeds
/// the critical temperature of the input similarity, regardless of residual
/// strengths or the MLP. Otherwise the block map is iterated for the
/// configured depth and the final similarity decides between rank collapse and
/// trainable.
pub fn classify(params: &BlockParams, cfg: &ClassifierConfig) -> Result<RegimeLabel> {
    let bc = beta_critical(cfg.rho0)?;
    if params.attn.beta > bc {
        return Ok(RegimeLabel::EntropyCollapse);
    }
    let traj = iterate_depth(cfg.rho0, params, cfg.layers)?;
    if traj.final_rho() >= cfg.collapse_threshold {
        Ok(RegimeLabel::RankCollapse)
    } else {
        Ok(RegimeLabel::Trainable)
    }
}

/// Inclusive linearly spaced grid; `n = 1` degenerates to `[lo]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Sweep `classify` over the Cartesian product of residual strengths and
/// inverse temperatures. Cells are independent and evaluated in parallel;
/// the grid is assembled in axis order afterwards.
pub fn trainability_diagram(
    template: &BlockParams,
    alpha_range: (f64, f64, usize),
    beta_range: (f64, f64, usize),
    cfg: &ClassifierConfig,
) -> Result<DiagramGrid> {
    let (alo, ahi, an) = alpha_range;
    let (blo, bhi, bn) = beta_range;
    if an < 1 || bn < 1 {
        return Err(Error::precondition(
            "trainability_diagram",
            "grid axes must have at least one point",
        ));
    }
    if alo.is_nan() || ahi.is_nan() || alo > ahi || blo.is_nan() || bhi.is_nan() || blo > bhi {
        return Err(Error::precondition(
            "trainability_diagram",
            "ranges must be ordered lo <= hi",
        ));
    }
    let alpha_axis = linspace(alo, ahi, an);
    let beta_axis = linspace(blo, bhi, bn);

    let cells: Vec<(usize, usize)> = (0..an)
        .flat_map(|i| (0..bn).map(move |j| (i, j)))
        .collect();
    let flat: Vec<Result<RegimeLabel>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut p = *template;
            p.alpha_sa = alpha_axis[i];
            p.attn.beta = beta_axis[j];
            classify(&p, cfg)
        })
        .collect();

    let mut labels = vec![Vec::with_capacity(bn); an];
    for (&(i, _), res) in cells.iter().zip(flat) {
        labels[i].push(res?);
    }
    Ok(DiagramGrid {
        alpha_axis,
        beta_axis,
        labels,
        template: *template,
        classifier: *cfg,
    })
}

const ALPHA_DOUBLING_CAP: f64 = 64.0;
const BOUNDARY_PROBES: usize = 8;

/// Smallest residual strength above which the configuration is trainable,
/// located by bisection on a bracket that is first verified to contain a
/// single RankCollapse -> Trainable flip.
pub fn critical_alpha(template: &BlockParams, cfg: &ClassifierConfig, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::precondition(
            "critical_alpha",
            format!("tol must be positive, got {tol}"),
        ));
    }
    let bc = beta_critical(cfg.rho0)?;
    if template.attn.beta >= bc {
        return Err(Error::precondition(
            "critical_alpha",
            format!(
                "beta = {} is not below the entropy-collapse threshold {bc}",
                template.attn.beta
            ),
        ));
    }
    let label_at = |alpha: f64| -> Result<RegimeLabel> {
        let mut p = *template;
        p.alpha_sa = alpha;
        classify(&p, cfg)
    };

    if label_at(0.0)? == RegimeLabel::Trainable {
        return Ok(0.0);
    }
    // Find a trainable upper end by doubling.
    let mut hi = 1.0;
    while label_at(hi)? != RegimeLabel::Trainable {
        hi *= 2.0;
        if hi > ALPHA_DOUBLING_CAP {
            return Err(Error::NoTrainableRegion {
                max_alpha: ALPHA_DOUBLING_CAP,
            });
        }
    }
    let mut lo = 0.0;

    // Probe the bracket: the labels must be a prefix of RankCollapse followed
    // by a suffix of Trainable, i.e. exactly one flip.
    let probes = linspace(lo, hi, BOUNDARY_PROBES);
    let labels: Vec<RegimeLabel> = probes
        .iter()
        .map(|&a| label_at(a))
        .collect::<Result<_>>()?;
    let flips = labels
        .windows(2)
        .filter(|w| w[0] != w[1])
        .count();
    let monotone = flips <= 1
        && labels
            .windows(2)
            .all(|w| !(w[0] == RegimeLabel::Trainable && w[1] == RegimeLabel::RankCollapse));
    if !monotone {
        return Err(Error::NonMonotoneBoundary {
            labels: labels.iter().map(|l| l.as_str().to_string()).collect(),
            lo,
            hi,
        });
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if label_at(mid)? == RegimeLabel::Trainable {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Iterate the block map to a fixed point: returns the last similarity and
/// whether successive iterates came within `tol` of each other.
pub fn find_fixed_point(
    params: &BlockParams,
    rho_init: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(f64, bool)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::precondition(
            "find_fixed_point",
            format!("tol must be positive, got {tol}"),
        ));
    }
    let mut state = GeometryState::normalized(rho_init)?;
    let mut rho = state.rho();
    for _ in 0..max_iter {
        state = block_update(state, params)?;
        let next = state.rho();
        if (next - rho).abs() < tol {
            return Ok((next, true));
        }
        rho = next;
    }
    Ok((rho, false))
}
