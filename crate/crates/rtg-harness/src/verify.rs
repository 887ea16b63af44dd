//! Oracle suites: slow, independent recomputations that cross-check the fast
//! implementations. Run via `rtg verify` and by the acceptance tests.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rtg_core::graph::{build_rtg, connected_components, verify_rtg_bruteforce, Rtg};
use rtg_core::mlp::{init_mlp, loss_and_grads, MlpConfig, MlpParams};
use rtg_core::regions::{extract_regions, make_grid, OutputMode, RegionTable};
use rtg_core::spectral::{
    dirichlet_energy, lambda2_with_solver, signal_variance, LaplacianKind, RegionSignal,
    SolverChoice,
};

use crate::HarnessError;

/// Result of one oracle suite.
#[derive(Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Draws a small random architecture and builds its region table and graph.
fn random_rtg(rng: &mut ChaCha8Rng) -> Result<(MlpParams, RegionTable, Rtg), HarnessError> {
    let depth = rng.gen_range(1..=3);
    let width = rng.gen_range(4..=16);
    let resolution = rng.gen_range(20..=60);
    let seed = rng.gen::<u64>();
    let params = init_mlp(&MlpConfig::new(2, depth, width, 2, seed))?;
    let grid = make_grid(resolution, -1.0, 1.0)?;
    let table = extract_regions(&params, &grid, OutputMode::Raw)?;
    let g = build_rtg(&table)?;
    Ok((params, table, g))
}

/// Compares `build_rtg` against the quadratic all-pairs Hamming oracle on
/// `cases` random small networks.
pub fn graph_oracle(cases: usize) -> Result<SuiteReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f72_61c1);
    let mut failures = Vec::new();
    for case in 0..cases {
        let (_, table, g) = random_rtg(&mut rng)?;
        if !verify_rtg_bruteforce(&table, &g)? {
            failures.push(format!(
                "case {case}: adjacency differs from brute force ({} nodes)",
                g.node_count
            ));
        }
    }
    Ok(SuiteReport {
        name: "graph-oracle",
        cases,
        failures,
    })
}

/// Checks the iterative eigensolver against the dense one on random RTG
/// largest components whose size falls in [50, 2000], plus two graphs with
/// closed-form spectra.
pub fn spectral_oracle(cases: usize) -> Result<SuiteReport, HarnessError> {
    let mut failures = Vec::new();

    let k2 = Rtg::from_edges(2, 1, [(0, 1)])?;
    let c4 = Rtg::from_edges(4, 2, [(0, 1), (1, 2), (2, 3), (0, 3)])?;
    for (g, expect, label) in [(&k2, 2.0, "K2"), (&c4, 1.0, "C4")] {
        for choice in [SolverChoice::Dense, SolverChoice::Iterative] {
            let got = lambda2_with_solver(g, LaplacianKind::Normalized, choice)?.lambda2;
            if (got - expect).abs() > 1e-10 {
                failures.push(format!("{label} ({choice:?}): λ2 = {got}, want {expect}"));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5bec_77a1);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < cases {
        attempts += 1;
        if attempts > cases * 40 {
            return Err(HarnessError::Config {
                message: "could not sample enough mid-sized components".into(),
            });
        }
        let (_, _, g) = random_rtg(&mut rng)?;
        let comp = connected_components(&g);
        if !(50..=2000).contains(&comp.sizes[0]) {
            continue;
        }
        let kind = if accepted % 2 == 0 {
            LaplacianKind::Normalized
        } else {
            LaplacianKind::Combinatorial
        };
        let dense = lambda2_with_solver(&g, kind, SolverChoice::Dense)?;
        let iterative = lambda2_with_solver(&g, kind, SolverChoice::Iterative)?;
        let diff = (dense.lambda2 - iterative.lambda2).abs();
        if diff > 1e-6 {
            failures.push(format!(
                "case {accepted} ({kind:?}, {} nodes): dense {} vs iterative {} (Δ={diff:.2e})",
                dense.component_size, dense.lambda2, iterative.lambda2
            ));
        }
        accepted += 1;
    }

    Ok(SuiteReport {
        name: "spectral-oracle",
        cases: cases + 2,
        failures,
    })
}

/// Confirms dirichlet_energy ≥ λ₂(combinatorial) · variance on random
/// connected components with random signals.
pub fn fiedler_property(cases: usize) -> Result<SuiteReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1ed_1e2);
    let mut failures = Vec::new();
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < cases {
        attempts += 1;
        if attempts > cases * 40 {
            return Err(HarnessError::Config {
                message: "could not sample enough connected components".into(),
            });
        }
        let (_, _, g) = random_rtg(&mut rng)?;
        let comp = connected_components(&g);
        if comp.sizes[0] < 3 {
            continue;
        }
        let sub = g.induced_subgraph(&comp.largest)?;
        let dims = rng.gen_range(1..=3);
        let values = Array2::from_shape_fn((sub.node_count, dims), |_| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let signal = RegionSignal::new(values)?;
        let energy = dirichlet_energy(&sub, &signal)?;
        let variance = signal_variance(&signal)?;
        let l2 = lambda2_with_solver(&sub, LaplacianKind::Combinatorial, SolverChoice::Auto)?;
        if energy - l2.lambda2 * variance < -1e-9 {
            failures.push(format!(
                "case {accepted}: energy {energy} < λ2·var {} on {} nodes",
                l2.lambda2 * variance,
                sub.node_count
            ));
        }
        accepted += 1;
    }
    Ok(SuiteReport {
        name: "fiedler-property",
        cases,
        failures,
    })
}

/// Central finite difference of the mean cross-entropy loss under a single
/// parameter perturbation.
fn fd_loss_slope(
    params: &MlpParams,
    xs: ArrayView2<f64>,
    labels: &[usize],
    layer: usize,
    idx: (usize, usize),
    bias: bool,
    h: f64,
) -> f64 {
    let mut plus = params.clone();
    let mut minus = params.clone();
    if bias {
        plus.biases[layer][idx.1] += h;
        minus.biases[layer][idx.1] -= h;
    } else {
        plus.weights[layer][idx] += h;
        minus.weights[layer][idx] -= h;
    }
    let (lp, _, _) = loss_and_grads(&plus, xs, labels).unwrap();
    let (lm, _, _) = loss_and_grads(&minus, xs, labels).unwrap();
    (lp - lm) / (2.0 * h)
}

/// Smallest |pre-activation| over a batch: how close the net sits to an
/// activation boundary. Finite differences are only trusted away from kinks.
fn min_abs_preactivation(params: &MlpParams, xs: ArrayView2<f64>) -> f64 {
    let mut min_abs = f64::INFINITY;
    let mut acts = xs.to_owned();
    for l in 0..params.config.depth {
        let z = acts.dot(&params.weights[l].t()) + &params.biases[l];
        for &v in z.iter() {
            min_abs = min_abs.min(v.abs());
        }
        acts = z.mapv(|v| v.max(0.0));
    }
    min_abs
}

/// Verifies analytic backprop gradients against central finite differences
/// on `cases` random small networks, skipping draws that sit on a boundary.
pub fn gradient_check(cases: usize) -> Result<SuiteReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x66ad_c3ec);
    let mut failures = Vec::new();
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < cases {
        attempts += 1;
        if attempts > cases * 40 {
            return Err(HarnessError::Config {
                message: "could not sample boundary-free gradient cases".into(),
            });
        }
        let depth = rng.gen_range(1..=3);
        let width = rng.gen_range(3..=8);
        let classes = rng.gen_range(2..=4);
        let params = init_mlp(&MlpConfig::new(2, depth, width, classes, rng.gen::<u64>()))?;
        let batch = rng.gen_range(3..=8);
        let xs = Array2::from_shape_fn((batch, 2), |_| rng.gen_range(-1.0..=1.0));
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        if min_abs_preactivation(&params, xs.view()) < 1e-5 {
            continue;
        }

        let (_, gw, gb) = loss_and_grads(&params, xs.view(), &labels)?;
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for l in 0..=depth {
            let (rows, cols) = gw[l].dim();
            for _ in 0..6 {
                let idx = (rng.gen_range(0..rows), rng.gen_range(0..cols));
                let analytic = gw[l][idx];
                let numeric = fd_loss_slope(&params, xs.view(), &labels, l, idx, false, h);
                worst = worst.max((analytic - numeric).abs() / numeric.abs().max(1e-3));
            }
            let bidx = (0, rng.gen_range(0..gb[l].len()));
            let analytic = gb[l][bidx.1];
            let numeric = fd_loss_slope(&params, xs.view(), &labels, l, bidx, true, h);
            worst = worst.max((analytic - numeric).abs() / numeric.abs().max(1e-3));
        }
        if worst > 1e-4 {
            failures.push(format!(
                "case {accepted}: worst relative gradient error {worst:.2e}"
            ));
        }
        accepted += 1;
    }
    Ok(SuiteReport {
        name: "gradient-check",
        cases,
        failures,
    })
}

/// Runs every suite at its default size, in acceptance order.
pub fn run_all() -> Result<Vec<SuiteReport>, HarnessError> {
    Ok(vec![
        graph_oracle(50)?,
        spectral_oracle(50)?,
        fiedler_property(100)?,
        gradient_check(20)?,
    ])
}
