//! Run-configuration parsing (TOML), CSV/JSON serialization of results, and
//! theory-vs-simulation comparison tables.
//!
//! Output files are self-describing: every writer emits `#`-prefixed header
//! comments carrying the full parameter set, then a fixed-format data table.
//! Floats are printed with 10 significant digits so identical inputs always
//! produce byte-identical files.

use crate::attention::{AttentionParams, LogBase};
use crate::block::BlockParams;
use crate::error::{Error, Result};
use crate::geometry::Trajectory;
use crate::mlp::{Activation, MlpParams};
use crate::regime::{ClassifierConfig, DiagramGrid};
use crate::sim::{EmpiricalTrajectory, SimConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One axis of a parameter sweep: inclusive `lo..hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl RangeSpec {
    pub fn validate(&self, key: &'static str) -> Result<()> {
        if self.lo.is_nan() || self.hi.is_nan() || self.lo > self.hi {
            return Err(Error::ConfigInvalid {
                key,
                message: format!("range must satisfy lo <= hi, got {} > {}", self.lo, self.hi),
            });
        }
        if self.n < 1 {
            return Err(Error::ConfigInvalid {
                key,
                message: "range needs at least one point".into(),
            });
        }
        Ok(())
    }

    pub fn as_tuple(&self) -> (f64, f64, usize) {
        (self.lo, self.hi, self.n)
    }
}

/// Block-parameter section of the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockSection {
    pub beta: f64,
    pub seq_len: usize,
    pub finite_size: bool,
    pub alpha_sa: f64,
    pub alpha_mlp: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub sigma_v2: f64,
    pub activation: Activation,
    pub quad_nodes: usize,
}

impl Default for BlockSection {
    fn default() -> Self {
        BlockSection {
            beta: 1.0,
            seq_len: 1024,
            finite_size: false,
            alpha_sa: 1.0,
            alpha_mlp: 1.0,
            sigma_w2: 1.0,
            sigma_b2: 0.0,
            sigma_v2: 1.0,
            activation: Activation::Relu,
            quad_nodes: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub d: usize,
    pub t: usize,
    pub seeds: usize,
    pub sequences: usize,
    pub base_seed: u64,
    pub rho0: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            d: 512,
            t: 1024,
            seeds: 10,
            sequences: 1,
            base_seed: 0,
            rho0: 0.04,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub layers: usize,
    pub collapse_threshold: f64,
    pub rho0: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            layers: 60,
            collapse_threshold: 0.99,
            rho0: 0.04,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub alpha: Option<RangeSpec>,
    pub beta: Option<RangeSpec>,
    pub rho: Option<RangeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<String>,
}

/// Full run configuration as read from a TOML document. Every section and
/// key is optional; missing values take the documented defaults. Unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub block: BlockSection,
    pub sim: SimSection,
    pub classifier: ClassifierSection,
    pub grid: GridSection,
    pub output: OutputSection,
    pub log_base: LogBase,
}

impl RunConfigFile {
    /// Assemble validated theory-side block parameters.
    pub fn block_params(&self) -> Result<BlockParams> {
        let attn = AttentionParams::new(self.block.beta, self.block.seq_len, self.block.finite_size)?;
        let mlp = MlpParams::new(
            self.block.sigma_w2,
            self.block.sigma_b2,
            self.block.activation,
            self.block.quad_nodes,
        )?;
        BlockParams::new(
            attn,
            mlp,
            self.block.alpha_sa,
            self.block.alpha_mlp,
            self.block.sigma_v2,
        )
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        ClassifierConfig::new(
            self.classifier.layers,
            self.classifier.collapse_threshold,
            self.classifier.rho0,
        )
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            d: self.sim.d,
            t: self.sim.t,
            block: self.block_params()?,
            n_seeds: self.sim.seeds,
            n_sequences: self.sim.sequences,
            base_seed: self.sim.base_seed,
            rho0: self.sim.rho0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfigFile> {
    let cfg: RunConfigFile =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Serialize a configuration back to TOML. `parse_config` of the output
/// reproduces the input exactly.
pub fn serialize_config(cfg: &RunConfigFile) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::ConfigParse(e.to_string()))
}

fn validate_config(cfg: &RunConfigFile) -> Result<()> {
    if cfg.block.beta.is_nan() || cfg.block.beta < 0.0 {
        return Err(Error::ConfigInvalid {
            key: "beta",
            message: format!("must be nonnegative, got {}", cfg.block.beta),
        });
    }
    if cfg.block.seq_len < 2 {
        return Err(Error::ConfigInvalid {
            key: "seq_len",
            message: format!("must be >= 2, got {}", cfg.block.seq_len),
        });
    }
    if cfg.block.sigma_w2.is_nan() || cfg.block.sigma_w2 <= 0.0 {
        return Err(Error::ConfigInvalid {
            key: "sigma_w2",
            message: format!("must be positive, got {}", cfg.block.sigma_w2),
        });
    }
    if cfg.block.sigma_b2.is_nan() || cfg.block.sigma_b2 < 0.0 {
        return Err(Error::ConfigInvalid {
            key: "sigma_b2",
            message: format!("must be nonnegative, got {}", cfg.block.sigma_b2),
        });
    }
    if cfg.block.sigma_v2.is_nan() || cfg.block.sigma_v2 < 0.0 {
        return Err(Error::ConfigInvalid {
            key: "sigma_v2",
            message: format!("must be nonnegative, got {}", cfg.block.sigma_v2),
        });
    }
    if cfg.block.alpha_sa.is_nan()
        || cfg.block.alpha_sa < 0.0
        || cfg.block.alpha_mlp.is_nan()
        || cfg.block.alpha_mlp < 0.0
    {
        return Err(Error::ConfigInvalid {
            key: "alpha_sa",
            message: "residual strengths must be nonnegative".into(),
        });
    }
    if cfg.block.quad_nodes < 8 {
        return Err(Error::ConfigInvalid {
            key: "quad_nodes",
            message: format!("must be >= 8, got {}", cfg.block.quad_nodes),
        });
    }
    if cfg.classifier.collapse_threshold.is_nan()
        || cfg.classifier.collapse_threshold <= 0.0
        || cfg.classifier.collapse_threshold >= 1.0
    {
        return Err(Error::ConfigInvalid {
            key: "collapse_threshold",
            message: format!("must lie in (0, 1), got {}", cfg.classifier.collapse_threshold),
        });
    }
    if let Some(r) = &cfg.grid.alpha {
        r.validate("grid.alpha")?;
    }
    if let Some(r) = &cfg.grid.beta {
        r.validate("grid.beta")?;
    }
    if let Some(r) = &cfg.grid.rho {
        r.validate("grid.rho")?;
    }
    Ok(())
}

/// 10 significant digits, scientific notation; the fixed wire format.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.9e}")
}

/// Commented metadata header: one `# key = value` line per entry.
pub fn metadata_lines(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}

pub fn block_metadata(params: &BlockParams) -> Vec<(&'static str, String)> {
    vec![
        ("beta", fmt_float(params.attn.beta)),
        ("seq_len", params.attn.seq_len.to_string()),
        ("finite_size", params.attn.finite_size.to_string()),
        ("alpha_sa", fmt_float(params.alpha_sa)),
        ("alpha_mlp", fmt_float(params.alpha_mlp)),
        ("sigma_w2", fmt_float(params.mlp.sigma_w2)),
        ("sigma_b2", fmt_float(params.mlp.sigma_b2)),
        ("sigma_v2", fmt_float(params.sigma_v2)),
        (
            "activation",
            match params.mlp.activation {
                Activation::Relu => "relu".to_string(),
                Activation::Tanh => "tanh".to_string(),
            },
        ),
        ("quad_nodes", params.mlp.quad_nodes.to_string()),
    ]
}

/// Render a theory trajectory as CSV (`layer,rho_theory`).
pub fn trajectory_csv(traj: &Trajectory, metadata: &[(&str, String)]) -> String {
    let mut out = metadata_lines(metadata);
    out.push_str("layer,rho_theory\n");
    for (l, state) in traj.states().iter().enumerate() {
        out.push_str(&format!("{l},{}\n", fmt_float(state.rho())));
    }
    out
}

/// Render an empirical trajectory as CSV
/// (`layer,rho_mean,rho_std,ipr,entropy`; layer 0 has no attention columns).
pub fn empirical_csv(traj: &EmpiricalTrajectory, metadata: &[(&str, String)]) -> String {
    let mut out = metadata_lines(metadata);
    out.push_str("layer,rho_mean,rho_std,ipr,entropy\n");
    for l in 0..traj.rho_mean.len() {
        let (ipr, ent) = if l == 0 {
            (String::new(), String::new())
        } else {
            let s = traj.attn[l - 1];
            (fmt_float(s.ipr), fmt_float(s.entropy))
        };
        out.push_str(&format!(
            "{l},{},{},{ipr},{ent}\n",
            fmt_float(traj.rho_mean[l]),
            fmt_float(traj.rho_std[l]),
        ));
    }
    out
}

/// Render matched theory and Monte Carlo trajectories side by side
/// (`layer,rho_theory,rho_mean,rho_std,ipr,entropy`).
pub fn combined_csv(
    theory: &Trajectory,
    empirical: &EmpiricalTrajectory,
    metadata: &[(&str, String)],
) -> Result<String> {
    if theory.states().len() != empirical.rho_mean.len() {
        return Err(Error::LengthMismatch {
            theory: theory.states().len(),
            empirical: empirical.rho_mean.len(),
        });
    }
    let mut out = metadata_lines(metadata);
    out.push_str("layer,rho_theory,rho_mean,rho_std,ipr,entropy\n");
    for l in 0..empirical.rho_mean.len() {
        let (ipr, ent) = if l == 0 {
            (String::new(), String::new())
        } else {
            let s = empirical.attn[l - 1];
            (fmt_float(s.ipr), fmt_float(s.entropy))
        };
        out.push_str(&format!(
            "{l},{},{},{},{ipr},{ent}\n",
            fmt_float(theory.rho_at(l)),
            fmt_float(empirical.rho_mean[l]),
            fmt_float(empirical.rho_std[l]),
        ));
    }
    Ok(out)
}

/// Render a trainability diagram in long format
/// (`alpha_sa,beta,regime`), alpha-major row order.
pub fn diagram_csv(grid: &DiagramGrid) -> String {
    let mut metadata = block_metadata(&grid.template);
    metadata.push(("layers", grid.classifier.layers.to_string()));
    metadata.push((
        "collapse_threshold",
        fmt_float(grid.classifier.collapse_threshold),
    ));
    metadata.push(("rho0", fmt_float(grid.classifier.rho0)));
    let mut out = metadata_lines(&metadata);
    out.push_str("alpha_sa,beta,regime\n");
    for (i, row) in grid.labels.iter().enumerate() {
        for (j, label) in row.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_float(grid.alpha_axis[i]),
                fmt_float(grid.beta_axis[j]),
                label.as_str()
            ));
        }
    }
    out
}

/// Write a rendered document to disk.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Row of a theory-vs-simulation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub layer: usize,
    pub theory: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub max_deviation: f64,
    pub mean_deviation: f64,
}

/// Layer-wise |theory - empirical| table with max and mean summary.
pub fn compare_report(
    theory: &Trajectory,
    empirical: &EmpiricalTrajectory,
) -> Result<ComparisonReport> {
    if theory.states().len() != empirical.rho_mean.len() {
        return Err(Error::LengthMismatch {
            theory: theory.states().len(),
            empirical: empirical.rho_mean.len(),
        });
    }
    let rows: Vec<ComparisonRow> = (0..empirical.rho_mean.len())
        .map(|l| {
            let theory_rho = theory.rho_at(l);
            let mean = empirical.rho_mean[l];
            ComparisonRow {
                layer: l,
                theory: theory_rho,
                empirical_mean: mean,
                empirical_std: empirical.rho_std[l],
                deviation: (theory_rho - mean).abs(),
            }
        })
        .collect();
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let mean_deviation =
        rows.iter().map(|r| r.deviation).sum::<f64>() / rows.len().max(1) as f64;
    Ok(ComparisonReport {
        rows,
        max_deviation,
        mean_deviation,
    })
}
