//! Experiment configuration: TOML files checked into `configs/`, with CLI
//! overrides applied on top.

use std::path::{Path, PathBuf};

use rtg_core::mlp::{LossKind, OptimizerKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Which of the five experiments a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    E1Expansion,
    E2Spectral,
    E3Entropy,
    E4Degree,
    E5Kl,
}

impl ExperimentKind {
    /// Short name used by the CLI and in output file names.
    pub fn short_name(self) -> &'static str {
        match self {
            ExperimentKind::E1Expansion => "e1",
            ExperimentKind::E2Spectral => "e2",
            ExperimentKind::E3Entropy => "e3",
            ExperimentKind::E4Degree => "e4",
            ExperimentKind::E5Kl => "e5",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        match name {
            "e1" => Some(ExperimentKind::E1Expansion),
            "e2" => Some(ExperimentKind::E2Spectral),
            "e3" => Some(ExperimentKind::E3Entropy),
            "e4" => Some(ExperimentKind::E4Degree),
            "e5" => Some(ExperimentKind::E5Kl),
            _ => None,
        }
    }

    /// True for experiments that train a network before building the graph.
    pub fn trains(self) -> bool {
        matches!(self, ExperimentKind::E2Spectral | ExperimentKind::E5Kl)
    }
}

/// Architecture sweep: the cross product of `depths` and `widths` is run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchitectureSweep {
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    #[serde(default = "default_output_dim")]
    pub output_dim: usize,
}

fn default_input_dim() -> usize {
    2
}

fn default_output_dim() -> usize {
    1
}

/// Uniform evaluation grid over `[lo, hi]^2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
}

fn default_lo() -> f64 {
    -1.0
}

fn default_hi() -> f64 {
    1.0
}

/// Subset sampling parameters for edge-expansion estimation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpansionSpec {
    pub subset_size: usize,
    pub samples: usize,
}

impl Default for ExpansionSpec {
    fn default() -> Self {
        ExpansionSpec {
            subset_size: rtg_core::metrics::DEFAULT_EXPANSION_SUBSET_SIZE,
            samples: rtg_core::metrics::DEFAULT_EXPANSION_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Circle,
    RandomLabels,
}

/// Synthetic dataset used by the training experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub count: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Circle radius; defaults to the class-balancing value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

fn default_classes() -> usize {
    2
}

/// Training hyperparameters (the per-run seed is injected separately).
///
/// When both decay fields are set, the learning rate is multiplied by
/// `decay_factor` after every `decay_every` epochs — step decay. `epochs`
/// stays the total budget, and training still stops early at accuracy 1.0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_every: Option<usize>,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}

impl TrainSpec {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            loss: LossKind::CrossEntropy,
            seed,
        }
    }
}

/// Full declarative description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub architecture: ArchitectureSweep,
    /// Evaluation grid; required by every experiment except the depth sweep,
    /// which builds its graph over the training inputs instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainSpec>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| HarnessError::Config {
            message: format!("cannot parse {}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        width: Option<usize>,
        depth: Option<usize>,
        grid_resolution: Option<usize>,
        out: Option<PathBuf>,
    ) {
        if let Some(s) = seed {
            self.seeds = vec![s];
        }
        if let Some(w) = width {
            self.architecture.widths = vec![w];
        }
        if let Some(d) = depth {
            self.architecture.depths = vec![d];
        }
        if let (Some(r), Some(grid)) = (grid_resolution, self.grid.as_mut()) {
            grid.resolution = r;
        }
        if let Some(dir) = out {
            self.output_dir = dir;
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |message: String| Err(HarnessError::Config { message });

        if self.seeds.is_empty() {
            return fail("seeds list is empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        if self.architecture.depths.is_empty() || self.architecture.widths.is_empty() {
            return fail("architecture sweep lists must be non-empty".into());
        }
        if self.architecture.depths.iter().any(|&d| d == 0)
            || self.architecture.widths.iter().any(|&w| w == 0)
        {
            return fail("depths and widths must be positive".into());
        }
        if self.architecture.input_dim == 0 || self.architecture.output_dim == 0 {
            return fail("input_dim and output_dim must be positive".into());
        }
        if self.experiment == ExperimentKind::E5Kl {
            if self.grid.is_some() {
                return fail(
                    "e5 builds its graph over the training inputs; remove the [grid] section"
                        .into(),
                );
            }
        } else {
            let Some(grid) = &self.grid else {
                return fail(format!(
                    "experiment {} requires a [grid] section",
                    self.experiment.short_name()
                ));
            };
            if grid.resolution < 2 {
                return fail("grid resolution must be at least 2".into());
            }
            if !(grid.lo.is_finite() && grid.hi.is_finite() && grid.lo < grid.hi) {
                return fail("grid bounds must be finite with lo < hi".into());
            }
        }

        if self.experiment == ExperimentKind::E1Expansion {
            let spec = self.expansion.unwrap_or_default();
            if spec.samples == 0 {
                return fail("expansion samples must be positive".into());
            }
            if spec.subset_size == 0 {
                return fail("expansion subset size must be positive".into());
            }
        }

        if self.experiment.trains() {
            let Some(dataset) = &self.dataset else {
                return fail(format!(
                    "experiment {} requires a [dataset] section",
                    self.experiment.short_name()
                ));
            };
            if dataset.count == 0 {
                return fail("dataset count must be positive".into());
            }
            if dataset.classes < 2 {
                return fail("dataset needs at least two classes".into());
            }
            if dataset.classes != self.architecture.output_dim {
                return fail(format!(
                    "output_dim {} must equal the class count {}",
                    self.architecture.output_dim, dataset.classes
                ));
            }
            if let Some(r) = dataset.radius {
                if !(r.is_finite() && r > 0.0) {
                    return fail("dataset radius must be positive and finite".into());
                }
            }
            let Some(train) = &self.training else {
                return fail(format!(
                    "experiment {} requires a [training] section",
                    self.experiment.short_name()
                ));
            };
            if train.epochs == 0 || train.batch_size == 0 {
                return fail("training epochs and batch size must be positive".into());
            }
            if !(train.learning_rate.is_finite() && train.learning_rate > 0.0) {
                return fail("learning rate must be positive and finite".into());
            }
            match (train.decay_factor, train.decay_every) {
                (None, None) => {}
                (Some(f), Some(e)) => {
                    if !(f.is_finite() && f > 0.0 && f < 1.0) {
                        return fail("decay_factor must lie strictly between 0 and 1".into());
                    }
                    if e == 0 {
                        return fail("decay_every must be positive".into());
                    }
                }
                _ => {
                    return fail(
                        "decay_factor and decay_every must be set together or not at all".into(),
                    );
                }
            }
        }
        Ok(())
    }
}

/// Stream identifiers for [`derive_seed`].
#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    Init,
    Dataset,
    Train,
    Subsets,
}

/// Decorrelates the RNG streams that share one run seed, so that e.g. weight
/// initialization and dataset sampling never consume the same ChaCha output.
pub fn derive_seed(seed: u64, stream: SeedStream) -> u64 {
    let idx = match stream {
        SeedStream::Init => 0u64,
        SeedStream::Dataset => 1,
        SeedStream::Train => 2,
        SeedStream::Subsets => 3,
    };
    seed ^ (idx.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
