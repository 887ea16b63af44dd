//! End-to-end acceptance checks: the five experiment pipelines against their
//! quantitative targets, the brute-force/dense oracles, and CSV determinism.
//!
//! Runs as a plain binary (`harness = false`) so every criterion prints one
//! PASS/FAIL line regardless of capture settings; the process exits nonzero
//! if any criterion fails, which fails `cargo test`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rtg_harness::config::ExperimentConfig;
use rtg_harness::experiment::run_experiment;
use rtg_harness::record::RunRecord;
use rtg_harness::verify;

fn main() {
    let mut all_ok = true;
    let mut check = |name: &str, outcome: (bool, String)| {
        let (ok, detail) = outcome;
        all_ok &= ok;
        println!(
            "criterion {name}: {} - {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    };

    check("01 region-growth+entropy (e3)", entropy_saturation());
    check("02 degree-binomial-fit (e4)", degree_law());
    check("03 edge-expansion (e1)", expansion());
    check("04 spectral-gap (e2)", spectral_gap());
    check("05 depth-compression (e5)", depth_compression());
    check("06 graph-oracle", suite(verify::graph_oracle(50)));
    check("07 spectral-oracle", suite(verify::spectral_oracle(50)));
    check("08 fiedler-bound", suite(verify::fiedler_property(100)));
    check("09 gradient-check", suite(verify::gradient_check(20)));
    check("10 csv-determinism", determinism());

    std::process::exit(if all_ok { 0 } else { 1 });
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load_config(name: &str, out: &Path) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(&config_path(name)).map_err(|e| e.to_string())?;
    cfg.output_dir = out.to_path_buf();
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<RunRecord, String> {
    let record = run_experiment(cfg).map_err(|e| e.to_string())?;
    if let Some(f) = record.failures.first() {
        return Err(format!(
            "stage {} failed at depth {} width {} seed {}: {}",
            f.stage, f.depth, f.width, f.seed, f.message
        ));
    }
    Ok(record)
}

fn column(record: &RunRecord, name: &str) -> usize {
    record
        .columns
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("missing column {name}"))
}

fn row_value(record: &RunRecord, seed: u64, depth: usize, width: usize, name: &str) -> f64 {
    let idx = column(record, name);
    record
        .rows
        .iter()
        .find(|r| r.seed == seed && r.depth == depth && r.width == width)
        .map(|r| r.values[idx])
        .unwrap_or(f64::NAN)
}

fn aggregate_mean(record: &RunRecord, depth: usize, width: usize, metric: &str) -> f64 {
    record
        .aggregates
        .iter()
        .find(|a| a.depth == depth && a.width == width && a.metric == metric)
        .map(|a| a.mean)
        .unwrap_or(f64::NAN)
}

fn suite(r: Result<rtg_harness::verify::SuiteReport, rtg_harness::HarnessError>) -> (bool, String) {
    match r {
        Ok(report) => {
            if report.passed() {
                (true, format!("{} cases, no mismatches", report.cases))
            } else {
                (
                    false,
                    format!(
                        "{} of {} cases failed; first: {}",
                        report.failures.len(),
                        report.cases,
                        report.failures[0]
                    ),
                )
            }
        }
        Err(e) => (false, format!("suite error: {e}")),
    }
}

/// Width sweep at depth 2 on the 100x100 grid: region counts non-decreasing
/// in width (at most one inversion over all 10 seeds), and at width 1024 the
/// mean count reaches >= 9900 with mean entropy inside [9.15, 9.2103] nats.
/// Budget: 5 minutes.
fn entropy_saturation() -> (bool, String) {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let cfg = load_config("e3.toml", dir.path())?;
        let record = run(&cfg)?;
        let mut widths = cfg.architecture.widths.clone();
        widths.sort_unstable();
        let depth = cfg.architecture.depths[0];

        let mut inversions = 0usize;
        for &seed in &cfg.seeds {
            for pair in widths.windows(2) {
                let a = row_value(&record, seed, depth, pair[0], "regions");
                let b = row_value(&record, seed, depth, pair[1], "regions");
                if b < a {
                    inversions += 1;
                }
            }
        }
        let top = *widths.last().unwrap();
        let regions = aggregate_mean(&record, depth, top, "regions");
        let entropy = aggregate_mean(&record, depth, top, "entropy_nats");
        let secs = clock.elapsed().as_secs_f64();
        let ok = inversions <= 1
            && regions >= 9900.0
            && (9.15..=9.2103).contains(&entropy)
            && secs < 300.0;
        Ok::<_, String>((
            ok,
            format!(
                "inversions {inversions}, width-{top} mean regions {regions:.1}, \
                 mean entropy {entropy:.4} nats, {secs:.0}s"
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}

/// Degree distributions pooled over 20 seeds at widths 16/32/64: total
/// variation against Binomial(n, p_hat) below 0.2, with p_hat decreasing in
/// width and within +-0.06 of 0.11 / 0.05 / 0.02. Budget: 10 minutes.
fn degree_law() -> (bool, String) {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let cfg = load_config("e4.toml", dir.path())?;
        let record = run(&cfg)?;
        let mut fits = record
            .pooled_degree_fit
            .clone()
            .ok_or("no pooled degree fit in record")?;
        fits.sort_by_key(|f| f.width);
        if fits.len() != 3 {
            return Err(format!("expected 3 pooled fits, got {}", fits.len()));
        }
        let tv: Vec<f64> = fits.iter().map(|f| f.tv_distance).collect();
        let p: Vec<f64> = fits.iter().map(|f| f.p_hat).collect();
        let targets = [0.11, 0.05, 0.02];
        let secs = clock.elapsed().as_secs_f64();
        let ok = tv.iter().all(|&t| t < 0.2)
            && p[0] > p[1]
            && p[1] > p[2]
            && p.iter()
                .zip(targets)
                .all(|(&got, want)| (got - want).abs() <= 0.06)
            && secs < 600.0;
        Ok::<_, String>((
            ok,
            format!(
                "tv {:.3}/{:.3}/{:.3} (bar < 0.2), p_hat {:.3}/{:.3}/{:.3} \
                 (targets 0.11/0.05/0.02), {secs:.0}s",
                tv[0], tv[1], tv[2], p[0], p[1], p[2]
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}

/// Sampled edge expansion on the default architecture, 500 subsets of size
/// 10 per seed: every sampled h(S) stays above 1.0 and the mean over 10
/// seeds lands in [2.0, 5.0]. Budget: 2 minutes.
fn expansion() -> (bool, String) {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let cfg = load_config("e1.toml", dir.path())?;
        let record = run(&cfg)?;
        let min_idx = column(&record, "expansion_min");
        let mean_idx = column(&record, "expansion_mean");
        let worst_min = record
            .rows
            .iter()
            .map(|r| r.values[min_idx])
            .fold(f64::INFINITY, f64::min);
        let mean_of_means = record.rows.iter().map(|r| r.values[mean_idx]).sum::<f64>()
            / record.rows.len() as f64;
        let secs = clock.elapsed().as_secs_f64();
        let ok = worst_min > 1.0 && (2.0..=5.0).contains(&mean_of_means) && secs < 120.0;
        Ok::<_, String>((
            ok,
            format!(
                "min h(S) {worst_min:.3} (bar > 1), mean {mean_of_means:.3} \
                 (window [2, 5]), {secs:.0}s"
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}

/// Depth-4 width-64 networks trained on the circle task across five seeds:
/// every run memorizes (train accuracy 1.0) with generalization gap <= 0.02,
/// and the largest component's normalized lambda_2 sits in (0, 0.1] and
/// specifically within [0.005, 0.1]. Budget: 10 minutes.
fn spectral_gap() -> (bool, String) {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let mut cfg = load_config("e2.toml", dir.path())?;
        cfg.seeds = vec![0, 1, 2, 3, 5];
        let record = run(&cfg)?;
        let depth = cfg.architecture.depths[0];
        let width = cfg.architecture.widths[0];
        let mut worst_acc = f64::INFINITY;
        let mut worst_gap = f64::NEG_INFINITY;
        let mut lam_lo = f64::INFINITY;
        let mut lam_hi = f64::NEG_INFINITY;
        for &seed in &cfg.seeds {
            worst_acc = worst_acc.min(row_value(&record, seed, depth, width, "train_accuracy"));
            worst_gap = worst_gap.max(row_value(&record, seed, depth, width, "generalization_gap"));
            let lam = row_value(&record, seed, depth, width, "lambda2_normalized");
            lam_lo = lam_lo.min(lam);
            lam_hi = lam_hi.max(lam);
        }
        let secs = clock.elapsed().as_secs_f64();
        let ok = worst_acc == 1.0
            && worst_gap <= 0.02
            && lam_lo >= 0.005
            && lam_hi <= 0.1
            && secs < 600.0;
        Ok::<_, String>((
            ok,
            format!(
                "min train acc {worst_acc}, max gap {worst_gap:.4}, lambda2 in \
                 [{lam_lo:.4}, {lam_hi:.4}] (window [0.005, 0.1]), {secs:.0}s"
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}

/// Depths 2-6 at width 256 memorizing 1000 random-label points to >= 0.99:
/// mean edge KL decreases with depth (at most one adjacent inversion) and
/// drops below a tenth of its depth-2 value by depth 6. Budget: 20 minutes.
fn depth_compression() -> (bool, String) {
    let clock = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let cfg = load_config("e5.toml", dir.path())?;
        let record = run(&cfg)?;
        let mut depths = cfg.architecture.depths.clone();
        depths.sort_unstable();
        let width = cfg.architecture.widths[0];
        let seed = cfg.seeds[0];
        let accs: Vec<f64> = depths
            .iter()
            .map(|&d| row_value(&record, seed, d, width, "train_accuracy"))
            .collect();
        let kls: Vec<f64> = depths
            .iter()
            .map(|&d| row_value(&record, seed, d, width, "mean_edge_kl"))
            .collect();
        let inversions = kls.windows(2).filter(|w| w[1] >= w[0]).count();
        let ratio = kls[kls.len() - 1] / kls[0];
        let secs = clock.elapsed().as_secs_f64();
        let ok = accs.iter().all(|&a| a >= 0.99)
            && inversions <= 1
            && ratio < 0.1
            && secs < 1200.0;
        let kl_text = kls
            .iter()
            .map(|k| format!("{k:.4}"))
            .collect::<Vec<_>>()
            .join(" -> ");
        Ok::<_, String>((
            ok,
            format!(
                "min train acc {:.4}, KL by depth {kl_text}, inversions {inversions}, \
                 depth6/depth2 ratio {ratio:.4} (bar < 0.1), {secs:.0}s",
                accs.iter().fold(f64::INFINITY, |a, &b| a.min(b))
            ),
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}

/// The same config run twice must emit byte-identical CSV.
fn determinism() -> (bool, String) {
    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_b = tempfile::tempdir().expect("tempdir");
    let outcome = (|| {
        let cfg_a = load_config("e1.toml", dir_a.path())?;
        let cfg_b = load_config("e1.toml", dir_b.path())?;
        run(&cfg_a)?;
        run(&cfg_b)?;
        let bytes_a =
            std::fs::read(dir_a.path().join("e1.csv")).map_err(|e| e.to_string())?;
        let bytes_b =
            std::fs::read(dir_b.path().join("e1.csv")).map_err(|e| e.to_string())?;
        let identical = bytes_a == bytes_b;
        Ok::<_, String>((
            identical,
            if identical {
                format!("two runs, {} identical bytes", bytes_a.len())
            } else {
                "reruns differ".to_string()
            },
        ))
    })();
    outcome.unwrap_or_else(|e| (false, e))
}
