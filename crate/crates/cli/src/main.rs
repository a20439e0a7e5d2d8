//! `sigprop`: signal propagation through transformer blocks at initialisation.
//!
//! Subcommands cover the closed-form theory (`theory curve`, `theory depth`,
//! `theory fixed-point`), regime diagrams (`diagram`), seeded Monte Carlo
//! verification (`sim depth`, `sim sa-phase`, `sim ipr`) and the effective
//! inverse temperature of standard initialisations (`effective-beta`).
//!
//! Exit codes: 0 success, 1 assertion failure (`--assert-max-dev` exceeded),
//! 2 usage or configuration error, 3 numerical/runtime error.

mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{Format, Table};
use sigprop::report::{self, fmt_float, RangeSpec, RunConfigFile};
use sigprop::{
    beta_critical, critical_alpha, find_fixed_point, iterate_depth, sa_update,
    trainability_diagram, y_p, y_q, y_q_finite_size, Activation, AttentionParams, ClassifierConfig,
    Error, GeometryState, LogBase,
};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_ASSERTION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "sigprop", version, about, disable_help_subcommand = true)]
struct Cli {
    /// TOML run-configuration file; command-line flags override file values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Write the result to this path instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Base seed for Monte Carlo subcommands.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Aggregates are identical for any
    /// thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogBaseArg {
    Natural,
    Ten,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

/// Overrides for the transformer-block parameters.
#[derive(Args, Clone)]
struct BlockOverrides {
    /// Query/key inverse temperature.
    #[arg(long)]
    beta: Option<f64>,
    /// Sequence length entering the temperature scale and finite-size terms.
    #[arg(long)]
    seq_len: Option<usize>,
    /// Apply finite-size corrections in the theory maps.
    #[arg(long)]
    finite_size: bool,
    /// Self-attention residual strength.
    #[arg(long)]
    alpha_sa: Option<f64>,
    /// MLP residual strength.
    #[arg(long)]
    alpha_mlp: Option<f64>,
    /// MLP weight variance scale.
    #[arg(long)]
    sigma_w2: Option<f64>,
    /// MLP bias variance.
    #[arg(long)]
    sigma_b2: Option<f64>,
    /// Value-projection variance scale.
    #[arg(long)]
    sigma_v2: Option<f64>,
    /// MLP activation.
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Quadrature order for tanh expectations.
    #[arg(long)]
    quad_nodes: Option<usize>,
}

impl BlockOverrides {
    fn apply(&self, cfg: &mut RunConfigFile) {
        if let Some(v) = self.beta {
            cfg.block.beta = v;
        }
        if let Some(v) = self.seq_len {
            cfg.block.seq_len = v;
        }
        if self.finite_size {
            cfg.block.finite_size = true;
        }
        if let Some(v) = self.alpha_sa {
            cfg.block.alpha_sa = v;
        }
        if let Some(v) = self.alpha_mlp {
            cfg.block.alpha_mlp = v;
        }
        if let Some(v) = self.sigma_w2 {
            cfg.block.sigma_w2 = v;
        }
        if let Some(v) = self.sigma_b2 {
            cfg.block.sigma_b2 = v;
        }
        if let Some(v) = self.sigma_v2 {
            cfg.block.sigma_v2 = v;
        }
        if let Some(v) = self.activation {
            cfg.block.activation = match v {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            };
        }
        if let Some(v) = self.quad_nodes {
            cfg.block.quad_nodes = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form theory evaluation.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Trainability diagram over the (alpha_SA, beta) plane.
    Diagram(DiagramArgs),
    /// Seeded Monte Carlo experiments.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Effective inverse temperature of a constant-std initialisation.
    EffectiveBeta(EffectiveBetaArgs),
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Single-layer attention quantities over an input-similarity grid.
    Curve(CurveArgs),
    /// Iterate the block map through depth.
    Depth(DepthArgs),
    /// Fixed point of the block map.
    FixedPoint(FixedPointArgs),
}

#[derive(Args)]
struct CurveArgs {
    /// Inverse temperature.
    #[arg(long, required = true)]
    beta: f64,
    /// Single input similarity.
    #[arg(long, conflicts_with = "rho_range")]
    rho: Option<f64>,
    /// Input-similarity grid LO:HI:N.
    #[arg(long, value_name = "LO:HI:N")]
    rho_range: Option<String>,
    /// Sequence length; when given, finite-size columns are emitted as well.
    #[arg(long)]
    t: Option<usize>,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    block: BlockOverrides,
    /// Number of blocks to iterate.
    #[arg(long)]
    layers: Option<usize>,
    /// Input similarity.
    #[arg(long)]
    rho0: Option<f64>,
}

#[derive(Args)]
struct FixedPointArgs {
    #[command(flatten)]
    block: BlockOverrides,
    /// Starting similarity for the iteration.
    #[arg(long)]
    rho_init: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct DiagramArgs {
    #[command(flatten)]
    block: BlockOverrides,
    /// Residual-strength axis LO:HI:N.
    #[arg(long, value_name = "LO:HI:N")]
    alpha_range: Option<String>,
    /// Inverse-temperature axis LO:HI:N.
    #[arg(long, value_name = "LO:HI:N")]
    beta_range: Option<String>,
    /// Classifier depth.
    #[arg(long)]
    layers: Option<usize>,
    /// Final-layer similarity above this counts as rank collapse.
    #[arg(long)]
    collapse_threshold: Option<f64>,
    /// Classifier input similarity.
    #[arg(long)]
    rho0: Option<f64>,
    /// Also bisect the rank-collapse/trainable boundary for each beta.
    #[arg(long)]
    critical_alpha: bool,
    /// Bisection tolerance for --critical-alpha.
    #[arg(long, default_value_t = 1e-4)]
    alpha_tol: f64,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Depth experiment: theory and Monte Carlo trajectories side by side.
    Depth(SimDepthArgs),
    /// Single-layer attention phase grid over (beta, rho).
    SaPhase(SaPhaseArgs),
    /// Streamed large-T inverse participation ratio scan.
    Ipr(IprArgs),
}

#[derive(Args)]
struct SimDepthArgs {
    #[command(flatten)]
    block: BlockOverrides,
    /// Embedding dimension.
    #[arg(short, long)]
    d: Option<usize>,
    /// Sequence length of the simulated batches.
    #[arg(long)]
    t: Option<usize>,
    /// Number of weight initialisations.
    #[arg(long)]
    seeds: Option<usize>,
    /// Number of input sequences per initialisation.
    #[arg(long)]
    sequences: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Input similarity of generated sequences.
    #[arg(long)]
    rho0: Option<f64>,
    /// Exit with code 1 if the max per-layer |theory - MC| exceeds this.
    #[arg(long, value_name = "X")]
    assert_max_dev: Option<f64>,
}

#[derive(Args)]
struct SaPhaseArgs {
    #[command(flatten)]
    block: BlockOverrides,
    #[arg(short, long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, value_name = "LO:HI:N")]
    beta_range: Option<String>,
    #[arg(long, value_name = "LO:HI:N")]
    rho_range: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Args)]
struct IprArgs {
    #[command(flatten)]
    block: BlockOverrides,
    #[arg(short, long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Inverse-temperature grid LO:HI:N (alternative to --beta).
    #[arg(long, value_name = "LO:HI:N", conflicts_with = "beta")]
    beta_range: Option<String>,
    /// Input similarity of the streamed tokens.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Scored attention rows per seed.
    #[arg(long, default_value_t = 1)]
    rows: usize,
}

#[derive(Args)]
struct EffectiveBetaArgs {
    /// Embedding dimension.
    #[arg(short, long, required = true)]
    d: usize,
    /// Number of attention heads.
    #[arg(long, required = true)]
    heads: usize,
    /// Sequence length.
    #[arg(long, required = true)]
    t: usize,
    /// Initialisation standard deviation.
    #[arg(long, default_value_t = 0.02)]
    init_std: f64,
    /// Logarithm base in the temperature scale.
    #[arg(long, value_enum, default_value_t = LogBaseArg::Natural)]
    log_base: LogBaseArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("error: thread pool already initialised");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::ConfigParse(_) | Error::ConfigInvalid { .. } => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let mut cfg = load_config(cli)?;
    if let Some(seed) = cli.seed {
        cfg.sim.base_seed = seed;
    }
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };

    let (table, exit) = match &cli.command {
        Command::Theory(TheoryCommand::Curve(args)) => (cmd_theory_curve(args)?, ExitCode::SUCCESS),
        Command::Theory(TheoryCommand::Depth(args)) => {
            args.block.apply(&mut cfg);
            (cmd_theory_depth(args, &cfg)?, ExitCode::SUCCESS)
        }
        Command::Theory(TheoryCommand::FixedPoint(args)) => {
            args.block.apply(&mut cfg);
            (cmd_theory_fixed_point(args, &cfg)?, ExitCode::SUCCESS)
        }
        Command::Diagram(args) => {
            args.block.apply(&mut cfg);
            (cmd_diagram(args, &cfg)?, ExitCode::SUCCESS)
        }
        Command::Sim(SimCommand::Depth(args)) => {
            args.block.apply(&mut cfg);
            cmd_sim_depth(args, &cfg)?
        }
        Command::Sim(SimCommand::SaPhase(args)) => {
            args.block.apply(&mut cfg);
            (cmd_sim_sa_phase(args, &cfg)?, ExitCode::SUCCESS)
        }
        Command::Sim(SimCommand::Ipr(args)) => {
            args.block.apply(&mut cfg);
            (cmd_sim_ipr(args, &cfg)?, ExitCode::SUCCESS)
        }
        Command::EffectiveBeta(args) => (cmd_effective_beta(args)?, ExitCode::SUCCESS),
    };

    let rendered = table.render(&format);
    match &cli.output {
        Some(path) => report::write_text(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(exit)
}

fn load_config(cli: &Cli) -> Result<RunConfigFile, Error> {
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            report::parse_config(&text)
        }
        None => Ok(RunConfigFile::default()),
    }
}

fn parse_range(spec: &str, key: &'static str) -> Result<RangeSpec, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = |m: String| Error::ConfigInvalid { key, message: m };
    if parts.len() != 3 {
        return Err(err(format!("expected LO:HI:N, got `{spec}`")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| err(format!("bad LO in `{spec}`")))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| err(format!("bad HI in `{spec}`")))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| err(format!("bad N in `{spec}`")))?;
    let range = RangeSpec { lo, hi, n };
    range.validate(key)?;
    Ok(range)
}

fn resolve_range(
    flag: &Option<String>,
    config_value: Option<RangeSpec>,
    key: &'static str,
) -> Result<RangeSpec, Error> {
    match flag {
        Some(s) => parse_range(s, key),
        None => config_value.ok_or(Error::ConfigInvalid {
            key,
            message: "range required (flag or config)".into(),
        }),
    }
}

fn grid_points(range: &RangeSpec) -> Vec<f64> {
    sigprop::linspace(range.lo, range.hi, range.n)
}

fn meta_own(entries: Vec<(&'static str, String)>) -> Vec<(String, String)> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn cmd_theory_curve(args: &CurveArgs) -> Result<Table, Error> {
    let rhos: Vec<f64> = match (&args.rho, &args.rho_range) {
        (Some(r), None) => vec![*r],
        (None, Some(spec)) => grid_points(&parse_range(spec, "rho_range")?),
        (None, None) => {
            return Err(Error::ConfigInvalid {
                key: "rho",
                message: "pass --rho or --rho-range".into(),
            })
        }
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    };
    let mut metadata = vec![
        ("command".to_string(), "theory curve".to_string()),
        ("beta".to_string(), fmt_float(args.beta)),
    ];
    let mut columns = vec!["rho", "beta_c", "y_q", "sa_rho"];
    if let Some(t) = args.t {
        metadata.push(("seq_len".to_string(), t.to_string()));
        columns.extend(["y_q_finite", "y_p_finite", "sa_rho_finite"]);
    }
    let mut table = Table::numeric(metadata, columns);
    for &rho in &rhos {
        let bc = beta_critical(rho)?;
        let yq = y_q(args.beta, rho)?;
        // The asymptotic update ignores the sequence length entirely.
        let state = GeometryState::normalized(rho)?;
        let sa = sa_update(
            state,
            &AttentionParams::new(args.beta, args.t.unwrap_or(2), false)?,
        )?;
        let mut row = vec![Some(rho), Some(bc), Some(yq), Some(sa.rho())];
        if let Some(t) = args.t {
            let yq_fs = y_q_finite_size(args.beta, rho, t)?;
            let yp_fs = y_p(args.beta, rho, t, true)?;
            let sa_fs = sa_update(state, &AttentionParams::new(args.beta, t, true)?)?;
            row.extend([Some(yq_fs), Some(yp_fs), Some(sa_fs.rho())]);
        }
        table.rows.push(row);
    }
    Ok(table)
}

fn cmd_theory_depth(args: &DepthArgs, cfg: &RunConfigFile) -> Result<Table, Error> {
    let params = cfg.block_params()?;
    let layers = args.layers.unwrap_or(cfg.classifier.layers);
    let rho0 = args.rho0.unwrap_or(cfg.sim.rho0);
    let traj = iterate_depth(rho0, &params, layers)?;
    let mut metadata = vec![
        ("command", "theory depth".to_string()),
        ("layers", layers.to_string()),
        ("rho0", fmt_float(rho0)),
    ];
    metadata.extend(report::block_metadata(&params));
    let mut table = Table::numeric(meta_own(metadata), vec!["layer", "rho_theory"]);
    for (l, state) in traj.states().iter().enumerate() {
        table.rows.push(vec![Some(l as f64), Some(state.rho())]);
    }
    Ok(table)
}

fn cmd_theory_fixed_point(args: &FixedPointArgs, cfg: &RunConfigFile) -> Result<Table, Error> {
    let params = cfg.block_params()?;
    let rho_init = args.rho_init.unwrap_or(cfg.sim.rho0);
    let (rho_star, converged) = find_fixed_point(&params, rho_init, args.max_iter, args.tol)?;
    let mut metadata = vec![
        ("command", "theory fixed-point".to_string()),
        ("rho_init", fmt_float(rho_init)),
        ("max_iter", args.max_iter.to_string()),
        ("tol", fmt_float(args.tol)),
    ];
    metadata.extend(report::block_metadata(&params));
    let mut table = Table::numeric(meta_own(metadata), vec!["rho_star", "converged"]);
    table
        .rows
        .push(vec![Some(rho_star), Some(if converged { 1.0 } else { 0.0 })]);
    Ok(table)
}

fn cmd_diagram(args: &DiagramArgs, cfg: &RunConfigFile) -> Result<Table, Error> {
    let template = cfg.block_params()?;
    let classifier = ClassifierConfig::new(
        args.layers.unwrap_or(cfg.classifier.layers),
        args.collapse_threshold
            .unwrap_or(cfg.classifier.collapse_threshold),
        args.rho0.unwrap_or(cfg.classifier.rho0),
    )?;
    let alpha = resolve_range(&args.alpha_range, cfg.grid.alpha, "grid.alpha")?;
    let beta = resolve_range(&args.beta_range, cfg.grid.beta, "grid.beta")?;
    let grid = trainability_diagram(&template, alpha.as_tuple(), beta.as_tuple(), &classifier)?;

    let mut metadata = vec![("command", "diagram".to_string())];
    metadata.extend(report::block_metadata(&template));
    metadata.push(("layers", classifier.layers.to_string()));
    metadata.push((
        "collapse_threshold",
        fmt_float(classifier.collapse_threshold),
    ));
    metadata.push(("classifier_rho0", fmt_float(classifier.rho0)));
    let mut table = Table::numeric(meta_own(metadata), vec!["alpha_sa", "beta"]);
    table.text_columns = vec!["regime"];
    for (i, row) in grid.labels.iter().enumerate() {
        for (j, label) in row.iter().enumerate() {
            table
                .rows
                .push(vec![Some(grid.alpha_axis[i]), Some(grid.beta_axis[j])]);
            table.text_rows.push(vec![label.as_str().to_string()]);
        }
    }

    if args.critical_alpha {
        // One bisected boundary per beta column, where one exists; emitted as
        // extra rows with regime = "critical_alpha" and alpha_sa = alpha*.
        table
            .metadata
            .push(("critical_alpha_tol".to_string(), fmt_float(args.alpha_tol)));
        let bc = beta_critical(classifier.rho0)?;
        for &b in &grid.beta_axis {
            if b >= bc {
                continue;
            }
            let mut p = template;
            p.attn.beta = b;
            match critical_alpha(&p, &classifier, args.alpha_tol) {
                Ok(a) => {
                    table.rows.push(vec![Some(a), Some(b)]);
                    table.text_rows.push(vec!["critical_alpha".to_string()]);
                }
                // No boundary in this column: every probed strength collapses.
                Err(Error::NoTrainableRegion { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(table)
}

fn cmd_sim_depth(args: &SimDepthArgs, cfg: &RunConfigFile) -> Result<(Table, ExitCode), Error> {
    let mut cfg = cfg.clone();
    if let Some(v) = args.d {
        cfg.sim.d = v;
    }
    if let Some(v) = args.t {
        cfg.sim.t = v;
        // The simulated sequence length is also the attention temperature scale.
        cfg.block.seq_len = v;
    }
    if let Some(v) = args.seeds {
        cfg.sim.seeds = v;
    }
    if let Some(v) = args.sequences {
        cfg.sim.sequences = v;
    }
    if let Some(v) = args.rho0 {
        cfg.sim.rho0 = v;
    }
    let layers = args.layers.unwrap_or(cfg.classifier.layers);
    let sim_cfg = cfg.sim_config()?;
    let empirical = sigprop::run_depth_experiment(&sim_cfg, layers)?;
    let theory = iterate_depth(sim_cfg.rho0, &sim_cfg.block, layers)?;
    let report = report::compare_report(&theory, &empirical)?;

    let mut metadata = vec![
        ("command", "sim depth".to_string()),
        ("d", sim_cfg.d.to_string()),
        ("t", sim_cfg.t.to_string()),
        ("seeds", sim_cfg.n_seeds.to_string()),
        ("sequences", sim_cfg.n_sequences.to_string()),
        ("base_seed", sim_cfg.base_seed.to_string()),
        ("rho0", fmt_float(sim_cfg.rho0)),
        ("layers", layers.to_string()),
    ];
    metadata.extend(report::block_metadata(&sim_cfg.block));
    metadata.push(("max_deviation", fmt_float(report.max_deviation)));
    metadata.push(("mean_deviation", fmt_float(report.mean_deviation)));
    let mut table = Table::numeric(
        meta_own(metadata),
        vec!["layer", "rho_theory", "rho_mean", "rho_std", "ipr", "entropy"],
    );
    for row in &report.rows {
        let (ipr, ent) = if row.layer == 0 {
            (None, None)
        } else {
            let s = empirical.attn[row.layer - 1];
            (Some(s.ipr), Some(s.entropy))
        };
        table.rows.push(vec![
            Some(row.layer as f64),
            Some(row.theory),
            Some(row.empirical_mean),
            Some(row.empirical_std),
            ipr,
            ent,
        ]);
    }

    let exit = match args.assert_max_dev {
        Some(bound) if report.max_deviation > bound => {
            eprintln!(
                "assertion failed: max deviation {} exceeds bound {}",
                fmt_float(report.max_deviation),
                fmt_float(bound)
            );
            ExitCode::from(EXIT_ASSERTION)
        }
        _ => ExitCode::SUCCESS,
    };
    Ok((table, exit))
}

fn cmd_sim_sa_phase(args: &SaPhaseArgs, cfg: &RunConfigFile) -> Result<Table, Error> {
    let d = args.d.unwrap_or(cfg.sim.d);
    let t = args.t.unwrap_or(cfg.sim.t);
    let seeds = args.seeds.unwrap_or(cfg.sim.seeds);
    let beta = resolve_range(&args.beta_range, cfg.grid.beta, "grid.beta")?;
    let rho = resolve_range(&args.rho_range, cfg.grid.rho, "grid.rho")?;
    let beta_grid = grid_points(&beta);
    let rho_grid = grid_points(&rho);
    let cells =
        sigprop::run_sa_phase_experiment(d, t, &beta_grid, &rho_grid, seeds, cfg.sim.base_seed)?;

    let metadata = vec![
        ("command", "sim sa-phase".to_string()),
        ("d", d.to_string()),
        ("t", t.to_string()),
        ("seeds", seeds.to_string()),
        ("base_seed", cfg.sim.base_seed.to_string()),
    ];
    let mut table = Table::numeric(
        meta_own(metadata),
        vec![
            "beta",
            "rho",
            "sa_empirical",
            "ipr",
            "entropy",
            "sa_theory",
            "y_q",
            "y_q_finite",
        ],
    );
    for cell in &cells {
        let state = GeometryState::normalized(cell.rho)?;
        let sa_theory = sa_update(state, &AttentionParams::new(cell.beta, t, false)?)?.rho();
        table.rows.push(vec![
            Some(cell.beta),
            Some(cell.rho),
            Some(cell.sa_rho),
            Some(cell.ipr),
            Some(cell.entropy),
            Some(sa_theory),
            Some(y_q(cell.beta, cell.rho)?),
            Some(y_q_finite_size(cell.beta, cell.rho, t)?),
        ]);
    }
    Ok(table)
}

fn cmd_sim_ipr(args: &IprArgs, cfg: &RunConfigFile) -> Result<Table, Error> {
    let d = args.d.unwrap_or(cfg.sim.d);
    let t = args.t.unwrap_or(cfg.sim.t);
    let seeds = args.seeds.unwrap_or(cfg.sim.seeds);
    let rho = args.rho.unwrap_or(0.0);
    let beta_grid: Vec<f64> = match (&args.block.beta, &args.beta_range) {
        (Some(b), None) => vec![*b],
        (None, Some(spec)) => grid_points(&parse_range(spec, "beta_range")?),
        (None, None) => vec![cfg.block.beta],
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    };
    let points =
        sigprop::run_ipr_experiment(d, t, &beta_grid, rho, seeds, args.rows, cfg.sim.base_seed)?;

    let metadata = vec![
        ("command", "sim ipr".to_string()),
        ("d", d.to_string()),
        ("t", t.to_string()),
        ("rho", fmt_float(rho)),
        ("seeds", seeds.to_string()),
        ("rows_per_seed", args.rows.to_string()),
        ("base_seed", cfg.sim.base_seed.to_string()),
    ];
    let mut table = Table::numeric(
        meta_own(metadata),
        vec![
            "beta",
            "ipr_mean",
            "ipr_std",
            "entropy_mean",
            "y_q",
            "y_q_finite",
        ],
    );
    for p in &points {
        table.rows.push(vec![
            Some(p.beta),
            Some(p.ipr_mean),
            Some(p.ipr_std),
            Some(p.entropy_mean),
            Some(y_q(p.beta, rho)?),
            Some(y_q_finite_size(p.beta, rho, t)?),
        ]);
    }
    Ok(table)
}

fn cmd_effective_beta(args: &EffectiveBetaArgs) -> Result<Table, Error> {
    if args.heads == 0 || args.d == 0 || !args.d.is_multiple_of(args.heads) {
        return Err(Error::ConfigInvalid {
            key: "heads",
            message: format!(
                "d must be a positive multiple of heads, got d = {}, heads = {}",
                args.d, args.heads
            ),
        });
    }
    let base = match args.log_base {
        LogBaseArg::Natural => LogBase::Natural,
        LogBaseArg::Ten => LogBase::Ten,
    };
    let value = sigprop::effective_beta(args.d / args.heads, args.t, args.init_std, base)?;
    let metadata = vec![
        ("command", "effective-beta".to_string()),
        ("d", args.d.to_string()),
        ("heads", args.heads.to_string()),
        ("t", args.t.to_string()),
        ("init_std", fmt_float(args.init_std)),
        (
            "log_base",
            match base {
                LogBase::Natural => "natural".to_string(),
                LogBase::Ten => "ten".to_string(),
            },
        ),
    ];
    let mut table = Table::numeric(meta_own(metadata), vec!["effective_beta"]);
    table.rows.push(vec![Some(value)]);
    Ok(table)
}
