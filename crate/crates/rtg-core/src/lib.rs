//! Construction and analysis of ReLU transition graphs.
//!
//! A trained or randomly initialized ReLU network carves its input space
//! into linear regions, one per activation pattern. Sampling a set of
//! inputs, deduplicating their patterns, and connecting patterns that
//! differ in exactly one bit yields the transition graph studied here: a
//! subgraph of the `n`-dimensional hypercube whose shape tracks how the
//! network organizes its input space. This crate covers the whole
//! pipeline — networks and training ([`mlp`]), region extraction
//! ([`regions`]), graph construction ([`graph`]), Laplacian spectra
//! ([`spectral`]), and derived metrics such as expansion, entropy, and
//! edge-wise divergence ([`metrics`]).

pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod mlp;
pub mod pattern;
pub mod regions;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{build_rtg, connected_components, degree_stats, ComponentInfo, DegreeStats, Rtg};
pub use metrics::{
    binomial_fit, edge_expansion, generalization_gap, mean_edge_kl, region_entropy,
    DegreeFitReport, EdgeKlReport, EntropyReport, ExpansionReport, GenReport,
};
pub use mlp::{
    forward, forward_batch, init_mlp, train, LabeledDataset, MlpConfig, MlpParams, TrainConfig,
};
pub use pattern::ActivationPattern;
pub use regions::{extract_regions, make_grid, InputSet, OutputMode, Region, RegionTable};
pub use spectral::{
    dirichlet_energy, lambda2, signal_variance, LaplacianKind, RegionSignal, SpectralReport,
};
