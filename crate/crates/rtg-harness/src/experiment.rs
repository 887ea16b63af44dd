//! The five experiment pipelines: seeded sweeps over architectures, each
//! producing per-seed metric rows plus seed aggregates on disk.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rtg_core::graph::{build_rtg, connected_components, degree_stats, DegreeStats, Rtg};
use rtg_core::metrics::{
    binomial_fit, edge_expansion, generalization_gap, mean_edge_kl, region_entropy,
    DEFAULT_KL_EPSILON,
};
use rtg_core::mlp::{
    balanced_circle_radius, estimate_lipschitz_upper, init_mlp, make_circle_dataset,
    make_random_label_dataset, train, LabeledDataset, MlpConfig, MlpParams, TrainConfig,
};
use rtg_core::regions::{extract_regions, make_grid, InputSet, OutputMode, RegionTable};
use rtg_core::spectral::{lambda2, LaplacianKind};

use crate::config::{
    derive_seed, DatasetKind, ExperimentConfig, ExperimentKind, SeedStream, TrainSpec,
};
use crate::record::{write_meta, PooledDegreeFit, RunRecord};
use crate::HarnessError;

/// Column names for each experiment's CSV; fixed so downstream plotting can
/// rely on them.
pub fn columns_for(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::E1Expansion => &[
            "regions",
            "edges",
            "largest_component",
            "expansion_min",
            "expansion_mean",
            "expansion_max",
        ],
        ExperimentKind::E2Spectral => &[
            "train_accuracy",
            "test_accuracy",
            "generalization_gap",
            "lambda2_normalized",
            "lambda2_combinatorial",
            "lipschitz_upper",
            "regions",
            "edges",
            "largest_component",
            "epochs_run",
        ],
        ExperimentKind::E3Entropy => &["regions", "entropy_nats", "n_eff", "max_entropy"],
        ExperimentKind::E4Degree => &["regions", "mean_degree", "p_hat", "tv_distance"],
        ExperimentKind::E5Kl => &[
            "train_accuracy",
            "test_accuracy",
            "generalization_gap",
            "mean_edge_kl",
            "mean_symmetrized_kl",
            "regions",
            "edges",
            "epochs_run",
        ],
    }
}

/// A failed pipeline stage at one sweep point.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

fn at<T>(stage: &'static str, r: rtg_core::Result<T>) -> Result<T, StageError> {
    r.map_err(|e| StageError {
        stage,
        message: e.to_string(),
    })
}

struct PointOutput {
    values: Vec<f64>,
    /// Raw degree sequence for cross-seed pooling (experiment 4 only).
    degrees: Option<Vec<usize>>,
}

/// Runs the configured experiment end to end and writes `<e>.csv`,
/// `record.json`, and `meta.json` into the output directory. Sweep points
/// that fail are recorded and skipped; the rest of the sweep still runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();

    let mut record = RunRecord::new(cfg, columns_for(cfg.experiment));
    let mut pooled: Vec<((usize, usize), Vec<usize>)> = Vec::new();

    for &depth in &cfg.architecture.depths {
        for &width in &cfg.architecture.widths {
            for &seed in &cfg.seeds {
                match run_point(cfg, depth, width, seed) {
                    Ok(out) => {
                        record.push_row(seed, depth, width, out.values);
                        if let Some(degrees) = out.degrees {
                            match pooled.iter_mut().find(|(k, _)| *k == (depth, width)) {
                                Some((_, acc)) => acc.extend(degrees),
                                None => pooled.push(((depth, width), degrees)),
                            }
                        }
                    }
                    Err(e) => record.push_failure(e.stage, seed, depth, width, e.message),
                }
            }
        }
    }

    if cfg.experiment == ExperimentKind::E4Degree && !pooled.is_empty() {
        let mut fits = Vec::new();
        for ((depth, width), degrees) in pooled {
            let n_bits = depth * width;
            let stats = DegreeStats::from_degrees(degrees, n_bits)?;
            let fit = binomial_fit(&stats)?;
            fits.push(PooledDegreeFit {
                depth,
                width,
                n_bits,
                mean_degree: stats.mean_degree,
                p_hat: stats.p_hat,
                tv_distance: fit.tv_distance,
            });
        }
        record.pooled_degree_fit = Some(fits);
    }

    record.finalize_aggregates();
    record.duration_seconds = clock.elapsed().as_secs_f64();
    record.write_to(&cfg.output_dir)?;
    write_meta(&cfg.output_dir, started_unix, record.duration_seconds)?;
    Ok(record)
}

fn run_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    match cfg.experiment {
        ExperimentKind::E1Expansion => e1_point(cfg, depth, width, seed),
        ExperimentKind::E2Spectral => e2_point(cfg, depth, width, seed),
        ExperimentKind::E3Entropy => e3_point(cfg, depth, width, seed),
        ExperimentKind::E4Degree => e4_point(cfg, depth, width, seed),
        ExperimentKind::E5Kl => e5_point(cfg, depth, width, seed),
    }
}

fn init_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<MlpParams, StageError> {
    let mlp_cfg = MlpConfig::new(
        cfg.architecture.input_dim,
        depth,
        width,
        cfg.architecture.output_dim,
        derive_seed(seed, SeedStream::Init),
    );
    at("init", init_mlp(&mlp_cfg))
}

fn extract_on_grid(
    cfg: &ExperimentConfig,
    params: &MlpParams,
    mode: OutputMode,
) -> Result<RegionTable, StageError> {
    let spec = cfg.grid.as_ref().expect("validated");
    let grid = at("inputs", make_grid(spec.resolution, spec.lo, spec.hi))?;
    at("regions", extract_regions(params, &grid, mode))
}

fn make_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledDataset, StageError> {
    let spec = cfg.dataset.as_ref().expect("validated");
    let data_seed = derive_seed(seed, SeedStream::Dataset);
    let data = match spec.kind {
        DatasetKind::Circle => make_circle_dataset(
            spec.count,
            spec.radius.unwrap_or_else(balanced_circle_radius),
            data_seed,
        ),
        DatasetKind::RandomLabels => make_random_label_dataset(spec.count, spec.classes, data_seed),
    };
    at("dataset", data)
}

/// Trains with optional step decay by chaining fixed-rate segments; each
/// segment reshuffles from its own derived seed. Returns the trained
/// parameters and the number of epochs actually run.
fn run_training(
    spec: &TrainSpec,
    params: &MlpParams,
    data: &LabeledDataset,
    seed: u64,
) -> rtg_core::Result<(MlpParams, usize)> {
    let (Some(factor), Some(every)) = (spec.decay_factor, spec.decay_every) else {
        let (trained, history) = train(params, data, &spec.to_train_config(seed))?;
        return Ok((trained, history.len()));
    };
    let mut current = params.clone();
    let mut total = 0usize;
    let mut lr = spec.learning_rate;
    let mut segment = 0u64;
    while total < spec.epochs {
        let tc = TrainConfig {
            learning_rate: lr,
            epochs: every.min(spec.epochs - total),
            seed: seed.wrapping_add(segment),
            ..spec.to_train_config(seed)
        };
        let (p, history) = train(&current, data, &tc)?;
        current = p;
        total += history.len();
        let memorized = history.last().is_some_and(|r| r.train_accuracy == 1.0);
        if memorized || history.len() < tc.epochs {
            break;
        }
        lr *= factor;
        segment += 1;
    }
    Ok((current, total))
}

fn e1_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    let spec = cfg.expansion.unwrap_or_default();
    let params = init_point(cfg, depth, width, seed)?;
    let table = extract_on_grid(cfg, &params, OutputMode::Raw)?;
    let g = at("graph", build_rtg(&table))?;
    let comp = connected_components(&g);
    let expansion = at(
        "metrics",
        edge_expansion(
            &g,
            spec.subset_size,
            spec.samples,
            derive_seed(seed, SeedStream::Subsets),
        ),
    )?;
    Ok(PointOutput {
        values: vec![
            table.len() as f64,
            g.edge_count() as f64,
            comp.sizes[0] as f64,
            expansion.min,
            expansion.mean,
            expansion.max,
        ],
        degrees: None,
    })
}

fn e2_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    let data = make_dataset(cfg, seed)?;
    let params = init_point(cfg, depth, width, seed)?;
    let spec = cfg.training.as_ref().expect("validated");
    let (trained, epochs_run) = at(
        "train",
        run_training(spec, &params, &data, derive_seed(seed, SeedStream::Train)),
    )?;
    let gen = at("metrics", generalization_gap(&trained, &data))?;
    let table = extract_on_grid(cfg, &trained, OutputMode::Raw)?;
    let g = at("graph", build_rtg(&table))?;
    let comp = connected_components(&g);
    let normalized = at("spectral", lambda2(&g, LaplacianKind::Normalized))?;
    let combinatorial = at("spectral", lambda2(&g, LaplacianKind::Combinatorial))?;
    let lipschitz = at("metrics", estimate_lipschitz_upper(&trained))?;
    Ok(PointOutput {
        values: vec![
            gen.train_accuracy,
            gen.test_accuracy,
            gen.gap,
            normalized.lambda2,
            combinatorial.lambda2,
            lipschitz,
            table.len() as f64,
            g.edge_count() as f64,
            comp.sizes[0] as f64,
            epochs_run as f64,
        ],
        degrees: None,
    })
}

fn e3_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    let params = init_point(cfg, depth, width, seed)?;
    let table = extract_on_grid(cfg, &params, OutputMode::Raw)?;
    let entropy = at("metrics", region_entropy(&table))?;
    Ok(PointOutput {
        values: vec![
            entropy.region_count as f64,
            entropy.entropy_nats,
            entropy.n_eff as f64,
            entropy.max_entropy,
        ],
        degrees: None,
    })
}

fn e4_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    let params = init_point(cfg, depth, width, seed)?;
    let table = extract_on_grid(cfg, &params, OutputMode::Raw)?;
    let g = at("graph", build_rtg(&table))?;
    let stats = at("metrics", degree_stats(&g))?;
    let fit = at("metrics", binomial_fit(&stats))?;
    Ok(PointOutput {
        values: vec![
            table.len() as f64,
            stats.mean_degree,
            stats.p_hat,
            fit.tv_distance,
        ],
        degrees: Some(stats.degrees),
    })
}

fn e5_point(
    cfg: &ExperimentConfig,
    depth: usize,
    width: usize,
    seed: u64,
) -> Result<PointOutput, StageError> {
    let data = make_dataset(cfg, seed)?;
    let params = init_point(cfg, depth, width, seed)?;
    let spec = cfg.training.as_ref().expect("validated");
    let (trained, epochs_run) = at(
        "train",
        run_training(spec, &params, &data, derive_seed(seed, SeedStream::Train)),
    )?;
    let gen = at("metrics", generalization_gap(&trained, &data))?;
    // The graph is built over the training inputs themselves, not an
    // evaluation grid: the compression claim concerns how the trained net
    // partitions the points it memorized.
    let inputs = at("inputs", InputSet::explicit(data.train_points().to_owned()))?;
    let table = at(
        "regions",
        extract_regions(&trained, &inputs, OutputMode::Softmax),
    )?;
    let g = at("graph", build_rtg(&table))?;
    let kl = at("metrics", mean_edge_kl(&g, &table, DEFAULT_KL_EPSILON))?;
    Ok(PointOutput {
        values: vec![
            gen.train_accuracy,
            gen.test_accuracy,
            gen.gap,
            kl.mean_kl,
            kl.mean_symmetrized_kl,
            table.len() as f64,
            g.edge_count() as f64,
            epochs_run as f64,
        ],
        degrees: None,
    })
}

/// Builds a region table and RTG for one architecture without any metrics —
/// the `build` CLI subcommand.
pub fn build_rtg_for(
    params: &MlpParams,
    resolution: usize,
    lo: f64,
    hi: f64,
    mode: OutputMode,
) -> Result<(Rtg, RegionTable), HarnessError> {
    let grid = make_grid(resolution, lo, hi)?;
    let table = extract_regions(params, &grid, mode)?;
    let g = build_rtg(&table)?;
    Ok((g, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ArchitectureSweep, ExpansionSpec, GridSpec};
    use std::path::PathBuf;

    fn tiny_e1(dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentKind::E1Expansion,
            output_dir: dir,
            seeds: vec![0, 1],
            architecture: ArchitectureSweep {
                input_dim: 2,
                depths: vec![2],
                widths: vec![12],
                output_dim: 1,
            },
            grid: Some(GridSpec {
                resolution: 40,
                lo: -1.0,
                hi: 1.0,
            }),
            expansion: Some(ExpansionSpec {
                subset_size: 5,
                samples: 50,
            }),
            dataset: None,
            training: None,
        }
    }

    #[test]
    fn e1_writes_csv_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_e1(dir.path().to_path_buf());
        let record = run_experiment(&cfg).unwrap();
        assert_eq!(record.rows.len(), 2);
        assert!(record.failures.is_empty());
        let csv = std::fs::read_to_string(dir.path().join("e1.csv")).unwrap();
        assert!(csv.starts_with(
            "experiment,seed,depth,width,regions,edges,largest_component,expansion_min"
        ));
        assert_eq!(csv.lines().count(), 3);
        assert!(dir.path().join("record.json").exists());
        assert!(dir.path().join("meta.json").exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_experiment(&tiny_e1(dir_a.path().to_path_buf())).unwrap();
        run_experiment(&tiny_e1(dir_b.path().to_path_buf())).unwrap();
        let a = std::fs::read(dir_a.path().join("e1.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("e1.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut cfg = tiny_e1(out.clone());
        cfg.expansion = Some(ExpansionSpec {
            subset_size: 10,
            samples: 0,
        });
        assert!(run_experiment(&cfg).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn failed_sweep_points_are_recorded_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_e1(dir.path().to_path_buf());
        // subset size larger than any component at this scale → metrics stage fails
        cfg.expansion = Some(ExpansionSpec {
            subset_size: 100_000,
            samples: 10,
        });
        let record = run_experiment(&cfg).unwrap();
        assert_eq!(record.rows.len(), 0);
        assert_eq!(record.failures.len(), 2);
        assert_eq!(record.failures[0].stage, "metrics");
        assert!(dir.path().join("e1.csv").exists());
    }

    #[test]
    fn e3_row_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: ExperimentKind::E3Entropy,
            output_dir: dir.path().to_path_buf(),
            seeds: vec![3],
            architecture: ArchitectureSweep {
                input_dim: 2,
                depths: vec![2],
                widths: vec![4, 8],
                output_dim: 1,
            },
            grid: Some(GridSpec {
                resolution: 30,
                lo: -1.0,
                hi: 1.0,
            }),
            expansion: None,
            dataset: None,
            training: None,
        };
        let record = run_experiment(&cfg).unwrap();
        assert_eq!(record.rows.len(), 2);
        for row in &record.rows {
            assert_eq!(row.values.len(), 4);
            let (regions, entropy) = (row.values[0], row.values[1]);
            assert!(regions >= 1.0);
            assert!(entropy >= 0.0 && entropy <= row.values[3]);
        }
        // wider nets refine the partition at this scale
        assert!(record.rows[1].values[0] >= record.rows[0].values[0]);
    }
}
