//! Graph Laplacians of a transition graph: the spectral gap λ₂, Dirichlet
//! energy of signals over regions, and signal variance.
//!
//! λ₂ is always computed on the largest connected component — a sampled
//! graph often has stray components, and the gap of a disconnected graph is
//! identically zero. Components small enough get a dense symmetric
//! eigensolve; larger ones use Lanczos iteration with the known null
//! eigenvector deflated, converged to a residual of 1e-8.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{connected_components, Rtg};
use crate::mlp::{forward_batch, MlpParams};
use crate::regions::RegionTable;

/// Largest component size handled by the dense eigensolver.
pub const DENSE_SOLVER_LIMIT: usize = 2000;
/// Convergence requirement on ‖L·v − λ·v‖ for the iterative solver.
pub const SOLVER_TOLERANCE: f64 = 1e-8;
const MAX_LANCZOS_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `I − D^{−1/2} A D^{−1/2}`; eigenvalues lie in [0, 2].
    Normalized,
    /// `D − A`.
    Combinatorial,
}

/// Which eigensolver to run; `Auto` switches on component size at
/// [`DENSE_SOLVER_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dense,
    Iterative,
}

/// The spectral gap of one Laplacian on the largest component, with solver
/// provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralReport {
    /// Second-smallest eigenvalue of the chosen Laplacian.
    pub lambda2: f64,
    pub kind: LaplacianKind,
    /// Component label the computation ran on.
    pub component_id: u32,
    pub component_size: usize,
    pub solver: SolverKind,
    /// Achieved ‖L·v − λ₂·v‖ for the reported eigenpair.
    pub residual: f64,
    /// Lanczos steps taken; 0 for the dense path.
    pub iterations: usize,
}

/// Spectral gap of the largest connected component, solver chosen by size.
pub fn lambda2(g: &Rtg, kind: LaplacianKind) -> Result<SpectralReport> {
    lambda2_with_solver(g, kind, SolverChoice::Auto)
}

/// As [`lambda2`] with explicit solver control (used to cross-check the
/// two paths against each other).
pub fn lambda2_with_solver(g: &Rtg, kind: LaplacianKind, choice: SolverChoice) -> Result<SpectralReport> {
    let info = connected_components(g);
    let size = info.largest.len();
    if size < 2 {
        return Err(Error::DegenerateComponent);
    }
    let component_id = info.component_id[info.largest[0] as usize];
    let sub = g.induced_subgraph(&info.largest)?;
    let solver = match choice {
        SolverChoice::Dense => SolverKind::Dense,
        SolverChoice::Iterative => SolverKind::Iterative,
        SolverChoice::Auto if size <= DENSE_SOLVER_LIMIT => SolverKind::Dense,
        SolverChoice::Auto => SolverKind::Iterative,
    };
    let (lambda2, residual, iterations) = match solver {
        SolverKind::Dense => dense_lambda2(&sub, kind)?,
        SolverKind::Iterative => lanczos_lambda2(&sub, kind)?,
    };
    Ok(SpectralReport {
        lambda2,
        kind,
        component_id,
        component_size: size,
        solver,
        residual,
        iterations,
    })
}

fn laplacian_matrix(g: &Rtg, kind: LaplacianKind) -> DMatrix<f64> {
    let n = g.node_count;
    let mut l = DMatrix::zeros(n, n);
    match kind {
        LaplacianKind::Combinatorial => {
            for v in 0..n {
                l[(v, v)] = g.degree(v as u32) as f64;
            }
            for &(a, b) in &g.edges {
                l[(a as usize, b as usize)] = -1.0;
                l[(b as usize, a as usize)] = -1.0;
            }
        }
        LaplacianKind::Normalized => {
            let dinv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / (g.degree(v as u32) as f64).sqrt()).collect();
            for v in 0..n {
                l[(v, v)] = 1.0;
            }
            for &(a, b) in &g.edges {
                let w = -dinv_sqrt[a as usize] * dinv_sqrt[b as usize];
                l[(a as usize, b as usize)] = w;
                l[(b as usize, a as usize)] = w;
            }
        }
    }
    l
}

/// Full dense solve; assumes `g` is connected with no isolated nodes.
fn dense_lambda2(g: &Rtg, kind: LaplacianKind) -> Result<(f64, f64, usize)> {
    let l = laplacian_matrix(g, kind);
    let eigen = l.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let idx = order[1];
    let lambda = eigen.eigenvalues[idx].max(0.0);
    let v = eigen.eigenvectors.column(idx);
    let residual = (&l * v - eigen.eigenvalues[idx] * v).norm();
    Ok((lambda, residual, 0))
}

/// Sorted eigenvalues of the normalized Laplacian of the largest component.
/// Diagnostic for tests and small graphs; capped at the dense size limit.
pub fn normalized_spectrum_dense(g: &Rtg) -> Result<Vec<f64>> {
    let info = connected_components(g);
    if info.largest.len() < 2 {
        return Err(Error::DegenerateComponent);
    }
    if info.largest.len() > DENSE_SOLVER_LIMIT {
        return Err(Error::InvalidConfig(format!(
            "dense spectrum limited to {DENSE_SOLVER_LIMIT} nodes, component has {}",
            info.largest.len()
        )));
    }
    let sub = g.induced_subgraph(&info.largest)?;
    let eigen = laplacian_matrix(&sub, LaplacianKind::Normalized).symmetric_eigen();
    let mut vals: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// λ₂ via Lanczos on `B = c·I − L`, whose top eigenvalue in the complement
/// of the known null vector is `c − λ₂`. Full reorthogonalization keeps the
/// basis clean; the known eigenvector is deflated explicitly.
fn lanczos_lambda2(g: &Rtg, kind: LaplacianKind) -> Result<(f64, f64, usize)> {
    let n = g.node_count;
    let dinv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / (g.degree(v as u32) as f64).sqrt()).collect();
    let dmax = (0..n).map(|v| g.degree(v as u32)).max().unwrap_or(0) as f64;
    let c = match kind {
        LaplacianKind::Normalized => 2.0,
        LaplacianKind::Combinatorial => 2.0 * dmax,
    };
    // B·v, computed edge-wise
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        match kind {
            LaplacianKind::Normalized => {
                // B = I + D^{-1/2} A D^{-1/2}
                for i in 0..n {
                    out[i] = v[i];
                }
                for &(a, b) in &g.edges {
                    let (a, b) = (a as usize, b as usize);
                    let w = dinv_sqrt[a] * dinv_sqrt[b];
                    out[a] += w * v[b];
                    out[b] += w * v[a];
                }
            }
            LaplacianKind::Combinatorial => {
                // B = (c·I − D) + A
                for i in 0..n {
                    out[i] = (c - g.degree(i as u32) as f64) * v[i];
                }
                for &(a, b) in &g.edges {
                    let (a, b) = (a as usize, b as usize);
                    out[a] += v[b];
                    out[b] += v[a];
                }
            }
        }
        out
    };
    // null vector of L (top of B): D^{1/2}·1 normalized, or 1/√n
    let mut null = match kind {
        LaplacianKind::Normalized => {
            DVector::from_fn(n, |i, _| (g.degree(i as u32) as f64).sqrt())
        }
        LaplacianKind::Combinatorial => DVector::from_element(n, 1.0),
    };
    null /= null.norm();

    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut q = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    q -= &null * null.dot(&q);
    let norm = q.norm();
    if norm == 0.0 {
        return Err(Error::SolverFailure { residual: f64::INFINITY, iterations: 0 });
    }
    q /= norm;

    let max_steps = MAX_LANCZOS_STEPS.min(n.saturating_sub(1)).max(1);
    let mut basis: Vec<DVector<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best: Option<(f64, f64, usize)> = None;

    for step in 1..=max_steps {
        let j = basis.len() - 1;
        let mut r = apply(&basis[j]);
        let alpha = basis[j].dot(&r);
        alphas.push(alpha);
        r -= alpha * &basis[j];
        if j > 0 {
            r -= betas[j - 1] * &basis[j - 1];
        }
        // explicit deflation plus two full reorthogonalization sweeps
        for _ in 0..2 {
            r -= &null * null.dot(&r);
            for b in &basis {
                r -= b * b.dot(&r);
            }
        }
        let beta = r.norm();
        let exhausted = beta < 1e-12;
        if !exhausted {
            betas.push(beta);
            basis.push(r / beta);
        }

        if exhausted || step % 10 == 0 || step == max_steps {
            let (theta, ritz) = top_ritz_pair(&alphas, &betas[..alphas.len() - 1], &basis[..alphas.len()]);
            let residual = (apply(&ritz) - theta * &ritz).norm();
            let lambda = (c - theta).max(0.0);
            if best.map_or(true, |(_, r0, _)| residual < r0) {
                best = Some((lambda, residual, step));
            }
            if residual <= SOLVER_TOLERANCE {
                return Ok((lambda, residual, step));
            }
            if exhausted {
                break;
            }
        }
    }
    let (_, residual, iterations) = best.unwrap_or((0.0, f64::INFINITY, max_steps));
    Err(Error::SolverFailure { residual, iterations })
}

/// Largest Ritz pair of the current tridiagonal matrix, mapped back to the
/// full space.
fn top_ritz_pair(alphas: &[f64], betas: &[f64], basis: &[DVector<f64>]) -> (f64, DVector<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eigen = t.symmetric_eigen();
    let mut top = 0;
    for i in 1..k {
        if eigen.eigenvalues[i] > eigen.eigenvalues[top] {
            top = i;
        }
    }
    let coeffs = eigen.eigenvectors.column(top);
    let n = basis[0].len();
    let mut v = DVector::zeros(n);
    for (i, b) in basis.iter().enumerate() {
        v += coeffs[i] * b;
    }
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    (eigen.eigenvalues[top], v)
}

/// A vector per node, e.g. network outputs at region centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSignal {
    /// Row `i` is the signal at node `i`.
    pub values: Array2<f64>,
}

impl RegionSignal {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("signal values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Signal restricted to a node subset, in the given order (matches
    /// [`Rtg::induced_subgraph`] relabeling).
    pub fn restrict(&self, nodes: &[u32]) -> Result<Self> {
        let mut out = Array2::zeros((nodes.len(), self.values.ncols()));
        for (row, &node) in nodes.iter().enumerate() {
            if node as usize >= self.len() {
                return Err(Error::Malformed(format!("node {node} outside signal")));
            }
            out.row_mut(row).assign(&self.values.row(node as usize));
        }
        Self::new(out)
    }
}

/// Network output (raw, no softmax) at each region centroid, in region-id
/// order.
pub fn region_signal_from_centroids(params: &MlpParams, table: &RegionTable) -> Result<RegionSignal> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut centroids = Array2::zeros((table.len(), params.config.input_dim));
    for (row, region) in table.regions.iter().enumerate() {
        centroids.row_mut(row).assign(&region.centroid);
    }
    let (outputs, _) = forward_batch(params, centroids.view())?;
    RegionSignal::new(outputs)
}

/// Smoothness energy: the sum of ‖φᵢ − φⱼ‖² over undirected edges (half
/// the sum over ordered adjacent pairs). Equals the combinatorial-Laplacian
/// quadratic form φᵀLφ, so the bound ℰ(φ) ≥ λ₂·Var(φ) holds exactly.
pub fn dirichlet_energy(g: &Rtg, phi: &RegionSignal) -> Result<f64> {
    if phi.len() != g.node_count {
        return Err(Error::ShapeMismatch(format!(
            "signal covers {} nodes, graph has {}",
            phi.len(),
            g.node_count
        )));
    }
    let mut energy = 0.0;
    for &(a, b) in &g.edges {
        let diff = &phi.values.row(a as usize) - &phi.values.row(b as usize);
        energy += diff.iter().map(|d| d * d).sum::<f64>();
    }
    Ok(energy)
}

/// Total squared deviation from the mean signal: Σᵢ ‖φᵢ − φ̄‖².
pub fn signal_variance(phi: &RegionSignal) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = phi.values.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let mut total = 0.0;
    for row in phi.values.rows() {
        let diff = &row - &mean;
        total += diff.iter().map(|d| d * d).sum::<f64>();
    }
    Ok(total)
}
