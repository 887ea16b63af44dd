use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rtg_core::graph::{connected_components, degree_stats};
use rtg_core::io::{load_weights, save_weights};
use rtg_core::metrics::{
    binomial_fit, edge_expansion, mean_edge_kl, region_entropy, DegreeFitReport, EdgeKlReport,
    EntropyReport, ExpansionReport, DEFAULT_EXPANSION_SAMPLES, DEFAULT_EXPANSION_SUBSET_SIZE,
    DEFAULT_KL_EPSILON,
};
use rtg_core::mlp::{init_mlp, MlpConfig};
use rtg_core::regions::OutputMode;
use rtg_core::spectral::{lambda2, LaplacianKind, SpectralReport};

use rtg_harness::artifact::{load_rtg, save_rtg};
use rtg_harness::config::ExperimentConfig;
use rtg_harness::experiment::{build_rtg_for, run_experiment};
use rtg_harness::verify;

#[derive(Parser)]
#[command(
    name = "rtg",
    about = "Build ReLU transition graphs and reproduce the five RTG experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputsArg {
    Raw,
    Softmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build a region table and transition graph from saved weights, or from
    /// a freshly initialized network, and write them to a directory.
    Build {
        /// Weights JSON produced by a previous run; omit to initialize fresh
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        /// Initialization seed (ignored when --weights is given)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        grid_resolution: usize,
        /// Store raw network outputs or softmax probabilities per region
        #[arg(long, value_enum, default_value_t = OutputsArg::Raw)]
        outputs: OutputsArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the metric battery for a built RTG directory.
    Metrics {
        /// Directory written by `rtg build`
        #[arg(long)]
        rtg: PathBuf,
        /// Seed for expansion subset sampling
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the five experiments from a TOML config.
    Experiment {
        /// e1 | e2 | e3 | e4 | e5
        name: String,
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        grid_resolution: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Echo the written CSV or record JSON to stdout
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run the oracle verification suites.
    Verify {
        /// all | graph | spectral | fiedler | gradcheck
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// Metric battery for one stored RTG.
#[derive(Serialize)]
struct MetricsDoc {
    regions: usize,
    edges: usize,
    n_bits: usize,
    components: usize,
    largest_component: usize,
    degree_fit: DegreeFitReport,
    entropy: EntropyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    expansion: Option<ExpansionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda2_normalized: Option<SpectralReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda2_combinatorial: Option<SpectralReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_kl: Option<EdgeKlSummary>,
}

#[derive(Serialize)]
struct EdgeKlSummary {
    mean_kl: f64,
    mean_symmetrized_kl: f64,
    edgeless: bool,
}

impl MetricsDoc {
    fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from(
            "regions,edges,n_bits,components,largest_component,mean_degree,p_hat,tv_distance,\
             entropy_nats,n_eff,expansion_min,expansion_mean,expansion_max,\
             lambda2_normalized,lambda2_combinatorial,mean_edge_kl\n",
        );
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.regions,
            self.edges,
            self.n_bits,
            self.components,
            self.largest_component,
            self.degree_fit.p_hat * self.n_bits as f64,
            self.degree_fit.p_hat,
            self.degree_fit.tv_distance,
            self.entropy.entropy_nats,
            self.entropy.n_eff,
            opt(self.expansion.as_ref().map(|e| e.min)),
            opt(self.expansion.as_ref().map(|e| e.mean)),
            opt(self.expansion.as_ref().map(|e| e.max)),
            opt(self.lambda2_normalized.as_ref().map(|r| r.lambda2)),
            opt(self.lambda2_combinatorial.as_ref().map(|r| r.lambda2)),
            opt(self.edge_kl.as_ref().map(|k| k.mean_kl)),
        ));
        s
    }
}

fn cmd_build(
    weights: Option<PathBuf>,
    depth: usize,
    width: usize,
    seed: u64,
    grid_resolution: usize,
    outputs: OutputsArg,
    out: PathBuf,
) -> anyhow::Result<()> {
    let (params, fresh) = match weights {
        Some(path) => (load_weights(&path)?, false),
        None => (init_mlp(&MlpConfig::new(2, depth, width, 2, seed))?, true),
    };
    let mode = match outputs {
        OutputsArg::Raw => OutputMode::Raw,
        OutputsArg::Softmax => OutputMode::Softmax,
    };
    let (g, table) = build_rtg_for(&params, grid_resolution, -1.0, 1.0, mode)?;
    save_rtg(&g, &table, &out)?;
    if fresh {
        save_weights(&out.join("weights.json"), &params)?;
    }
    let comp = connected_components(&g);
    println!(
        "built {} regions, {} edges, {} components (largest {}) -> {}",
        g.node_count,
        g.edge_count(),
        comp.count(),
        comp.sizes[0],
        out.display()
    );
    Ok(())
}

fn cmd_metrics(rtg: PathBuf, seed: u64, format: FormatArg, out: Option<PathBuf>) -> anyhow::Result<()> {
    let (g, table) = load_rtg(&rtg)?;
    let comp = connected_components(&g);
    let stats = degree_stats(&g)?;
    let doc = MetricsDoc {
        regions: table.len(),
        edges: g.edge_count(),
        n_bits: g.n_bits,
        components: comp.count(),
        largest_component: comp.sizes[0],
        degree_fit: binomial_fit(&stats)?,
        entropy: region_entropy(&table)?,
        expansion: if comp.sizes[0] > DEFAULT_EXPANSION_SUBSET_SIZE {
            Some(edge_expansion(
                &g,
                DEFAULT_EXPANSION_SUBSET_SIZE,
                DEFAULT_EXPANSION_SAMPLES,
                seed,
            )?)
        } else {
            None
        },
        lambda2_normalized: if comp.sizes[0] >= 2 {
            Some(lambda2(&g, LaplacianKind::Normalized)?)
        } else {
            None
        },
        lambda2_combinatorial: if comp.sizes[0] >= 2 {
            Some(lambda2(&g, LaplacianKind::Combinatorial)?)
        } else {
            None
        },
        edge_kl: distributional_kl(&g, &table),
    };
    let text = match format {
        FormatArg::Json => serde_json::to_string_pretty(&doc)? + "\n",
        FormatArg::Csv => doc.csv(),
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Mean edge KL is only meaningful when the stored per-region outputs are
/// probability vectors; raw-output tables get no KL entry.
fn distributional_kl(g: &rtg_core::graph::Rtg, table: &rtg_core::regions::RegionTable) -> Option<EdgeKlSummary> {
    let is_distribution = table.regions.iter().all(|r| {
        r.mean_output.iter().all(|&v| v >= 0.0)
            && (r.mean_output.sum() - 1.0).abs() < 1e-6
    });
    if !is_distribution {
        return None;
    }
    mean_edge_kl(g, table, DEFAULT_KL_EPSILON)
        .ok()
        .map(|k: EdgeKlReport| EdgeKlSummary {
            mean_kl: k.mean_kl,
            mean_symmetrized_kl: k.mean_symmetrized_kl,
            edgeless: k.edgeless,
        })
}

fn cmd_experiment(
    name: String,
    config: PathBuf,
    seed: Option<u64>,
    width: Option<usize>,
    depth: Option<usize>,
    grid_resolution: Option<usize>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
) -> anyhow::Result<bool> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if cfg.experiment.short_name() != name {
        anyhow::bail!(
            "stage=config: requested experiment {name} but {} configures {}",
            config.display(),
            cfg.experiment.short_name()
        );
    }
    cfg.apply_overrides(seed, width, depth, grid_resolution, out);
    let record = run_experiment(&cfg)?;

    let csv_path = cfg.output_dir.join(format!("{}.csv", record.experiment));
    match format {
        Some(FormatArg::Csv) => print!("{}", std::fs::read_to_string(&csv_path)?),
        Some(FormatArg::Json) => {
            print!(
                "{}",
                std::fs::read_to_string(cfg.output_dir.join("record.json"))?
            )
        }
        None => {
            println!(
                "{}: {} rows, {} failures, {:.1}s -> {}",
                record.experiment,
                record.rows.len(),
                record.failures.len(),
                record.duration_seconds,
                cfg.output_dir.display()
            );
            for agg in &record.aggregates {
                println!(
                    "  depth {} width {} {}: mean {:.6} stddev {:.6}",
                    agg.depth, agg.width, agg.metric, agg.mean, agg.stddev
                );
            }
        }
    }
    for f in &record.failures {
        eprintln!(
            "error[stage={} depth={} width={} seed={}]: {}",
            f.stage, f.depth, f.width, f.seed, f.message
        );
    }
    Ok(record.failures.is_empty())
}

fn cmd_verify(suite: String) -> anyhow::Result<bool> {
    let reports = match suite.as_str() {
        "all" => verify::run_all()?,
        "graph" => vec![verify::graph_oracle(50)?],
        "spectral" => vec![verify::spectral_oracle(50)?],
        "fiedler" => vec![verify::fiedler_property(100)?],
        "gradcheck" => vec![verify::gradient_check(20)?],
        other => anyhow::bail!("unknown suite {other}; use all|graph|spectral|fiedler|gradcheck"),
    };
    let mut ok = true;
    for r in &reports {
        if r.passed() {
            println!("{}: pass ({} cases)", r.name, r.cases);
        } else {
            ok = false;
            println!("{}: FAIL ({} of {} cases)", r.name, r.failures.len(), r.cases);
            for f in &r.failures {
                eprintln!("error[stage={}]: {f}", r.name);
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Build {
            weights,
            depth,
            width,
            seed,
            grid_resolution,
            outputs,
            out,
        } => cmd_build(weights, depth, width, seed, grid_resolution, outputs, out).map(|_| true),
        Command::Metrics {
            rtg,
            seed,
            format,
            out,
        } => cmd_metrics(rtg, seed, format, out).map(|_| true),
        Command::Experiment {
            name,
            config,
            seed,
            width,
            depth,
            grid_resolution,
            out,
            format,
        } => cmd_experiment(name, config, seed, width, depth, grid_resolution, out, format),
        Command::Verify { suite } => cmd_verify(suite),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
