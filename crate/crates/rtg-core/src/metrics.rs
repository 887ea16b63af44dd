//! Functional metrics over transition graphs: sampled edge expansion,
//! region entropy, binomial degree fit, edge-wise KL divergence, and the
//! train/test accuracy gap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{connected_components, DegreeStats, Rtg};
use crate::mlp::{evaluate, LabeledDataset, MlpParams};
use crate::regions::RegionTable;

pub const DEFAULT_EXPANSION_SUBSET_SIZE: usize = 10;
pub const DEFAULT_EXPANSION_SAMPLES: usize = 500;
pub const DEFAULT_KL_EPSILON: f64 = 1e-8;

/// Sampled edge expansion h(S) = |∂S| / |S| over random subsets of the
/// largest component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub subset_size: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub values: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Expansion of one explicit subset: boundary edges (exactly one endpoint
/// inside) divided by subset size.
pub fn subset_expansion(g: &Rtg, subset: &[u32]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut inside = vec![false; g.node_count];
    for &v in subset {
        if v as usize >= g.node_count {
            return Err(Error::Malformed(format!("node {v} out of range")));
        }
        if inside[v as usize] {
            return Err(Error::Malformed(format!("node {v} listed twice")));
        }
        inside[v as usize] = true;
    }
    let mut boundary = 0usize;
    for &v in subset {
        for &w in g.neighbors(v) {
            if !inside[w as usize] {
                boundary += 1;
            }
        }
    }
    Ok(boundary as f64 / subset.len() as f64)
}

/// Draws `samples` uniform subsets of `subset_size` nodes (without
/// replacement) from the largest connected component and reports the
/// distribution of their expansions. Identical inputs and seed give an
/// identical report.
pub fn edge_expansion(g: &Rtg, subset_size: usize, samples: usize, seed: u64) -> Result<ExpansionReport> {
    if subset_size == 0 || samples == 0 {
        return Err(Error::InvalidConfig(
            "subset_size and samples must both be >= 1".into(),
        ));
    }
    let info = connected_components(g);
    let component = &info.largest;
    if subset_size >= component.len() {
        return Err(Error::GraphTooSmall {
            component: component.len(),
            needed: subset_size + 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(samples);
    let mut subset = Vec::with_capacity(subset_size);
    for _ in 0..samples {
        subset.clear();
        let picks = rand::seq::index::sample(&mut rng, component.len(), subset_size);
        subset.extend(picks.iter().map(|i| component[i]));
        values.push(subset_expansion(g, &subset)?);
    }
    let mean = values.iter().sum::<f64>() / samples as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExpansionReport {
        subset_size,
        sample_count: samples,
        seed,
        values,
        mean,
        min,
        max,
    })
}

/// Entropy of the region mass distribution, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    /// −Σ mass·ln(mass); at most ln(region_count).
    pub entropy_nats: f64,
    pub region_count: usize,
    /// ln(total sample points): the ceiling any sample of that size allows.
    pub max_entropy: f64,
    /// Number of top-mass regions needed to cover 99% of the mass.
    pub n_eff: usize,
}

pub fn region_entropy(table: &RegionTable) -> Result<EntropyReport> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let entropy_nats: f64 = table
        .regions
        .iter()
        .map(|r| -r.mass * r.mass.ln())
        .sum();
    let mut masses: Vec<f64> = table.regions.iter().map(|r| r.mass).collect();
    masses.sort_by(|a, b| b.total_cmp(a));
    let mut covered = 0.0;
    let mut n_eff = masses.len();
    for (i, m) in masses.iter().enumerate() {
        covered += m;
        if covered >= 0.99 {
            n_eff = i + 1;
            break;
        }
    }
    Ok(EntropyReport {
        entropy_nats: entropy_nats.max(0.0),
        region_count: table.len(),
        max_entropy: (table.total_points as f64).ln(),
        n_eff,
    })
}

/// Goodness of a Binomial(n, p̂) fit to an empirical degree distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeFitReport {
    /// Pattern length (maximum degree).
    pub n: usize,
    pub p_hat: f64,
    /// ½ Σₖ |empirical(k) − Binomial(n,p̂)(k)|, in [0, 1].
    pub tv_distance: f64,
}

/// Total-variation distance between the observed degree histogram and the
/// binomial law with the matching mean. The binomial mass function is
/// evaluated in log space.
pub fn binomial_fit(stats: &DegreeStats) -> Result<DegreeFitReport> {
    let n = stats.n_bits;
    if n == 0 {
        return Err(Error::InvalidConfig("pattern length must be >= 1".into()));
    }
    let p = stats.p_hat;
    let total = stats.degrees.len() as f64;
    let mut tv = 0.0;
    for k in 0..=n {
        let empirical = stats.histogram.get(&k).copied().unwrap_or(0) as f64 / total;
        tv += (empirical - binomial_pmf(n, p, k)).abs();
    }
    Ok(DegreeFitReport {
        n,
        p_hat: p,
        tv_distance: tv / 2.0,
    })
}

fn binomial_pmf(n: usize, p: f64, k: usize) -> f64 {
    // degenerate p collapses to a point mass, where logs blow up
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Mean KL divergence across edges, between the per-region mean softmax
/// outputs of the two endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeKlReport {
    /// KL(lower-id ‖ higher-id) per edge, in edge order.
    pub per_edge_kl: Vec<f64>,
    pub mean_kl: f64,
    /// Mean of ½(KL(p‖q) + KL(q‖p)) over edges; direction-free companion.
    pub mean_symmetrized_kl: f64,
    pub epsilon: f64,
    /// True when the graph had no edges and the means default to 0.
    pub edgeless: bool,
}

/// Computes per-edge KL divergences over `g`'s edges from the mean outputs
/// stored in `table` (extract regions in softmax mode first). Each
/// distribution is floored at `epsilon` and renormalized, so saturated
/// outputs give large but finite divergences. An edgeless graph yields mean
/// 0 with the `edgeless` flag raised.
pub fn mean_edge_kl(g: &Rtg, table: &RegionTable, epsilon: f64) -> Result<EdgeKlReport> {
    if g.node_count != table.len() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes but table has {} regions",
            g.node_count,
            table.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if g.edges.is_empty() {
        return Ok(EdgeKlReport {
            per_edge_kl: Vec::new(),
            mean_kl: 0.0,
            mean_symmetrized_kl: 0.0,
            epsilon,
            edgeless: true,
        });
    }
    let smoothed: Vec<Vec<f64>> = table
        .regions
        .iter()
        .map(|r| {
            let mut p: Vec<f64> = r.mean_output.iter().map(|&v| v.max(epsilon)).collect();
            let sum: f64 = p.iter().sum();
            for v in &mut p {
                *v /= sum;
            }
            p
        })
        .collect();
    let mut per_edge_kl = Vec::with_capacity(g.edges.len());
    let mut sym_total = 0.0;
    for &(a, b) in &g.edges {
        let forward = kl(&smoothed[a as usize], &smoothed[b as usize]);
        let backward = kl(&smoothed[b as usize], &smoothed[a as usize]);
        per_edge_kl.push(forward);
        sym_total += 0.5 * (forward + backward);
    }
    let mean_kl = per_edge_kl.iter().sum::<f64>() / per_edge_kl.len() as f64;
    Ok(EdgeKlReport {
        mean_kl,
        mean_symmetrized_kl: sym_total / g.edges.len() as f64,
        per_edge_kl,
        epsilon,
        edgeless: false,
    })
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Train/test accuracy and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// `train_accuracy − test_accuracy`.
    pub gap: f64,
}

pub fn generalization_gap(params: &MlpParams, data: &LabeledDataset) -> Result<GenReport> {
    let (train_accuracy, _) = evaluate(params, data.train_points(), data.train_labels())?;
    let (test_accuracy, _) = evaluate(params, data.test_points(), data.test_labels())?;
    Ok(GenReport {
        train_accuracy,
        test_accuracy,
        gap: train_accuracy - test_accuracy,
    })
}
