use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{Pruning, TrainingConfig};
use crate::error::{Error, Result};
use crate::pq::NnParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnMode {
    /// Lookup in the precomputed neighbour matrix.
    Knn,
    /// Sampled approximate search over PQ codes.
    #[default]
    Ann,
}

impl NnMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NnMode::Knn => "knn",
            NnMode::Ann => "ann",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Per-bucket roulette over classifier, nearest-neighbour and explorer.
    #[default]
    Adaptive,
    /// Pure relevance feedback: every slot goes to the classifier.
    ClassifierOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub nn_mode: NnMode,
    /// Sliding-window length in rounds.
    pub w: u64,
    /// Probability of replacing a classifier suggestion by an oracle query.
    pub o: f64,
    #[serde(flatten)]
    pub training: TrainingConfig,
    /// Suggestions per active bucket per round.
    pub s_b: usize,
    pub explorer_multiplier: usize,
    /// Explorer suggestions per round not tied to any bucket.
    pub extra_explore: usize,
    pub split: SplitMode,
    #[serde(flatten)]
    pub nn: NnParams,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            nn_mode: NnMode::Ann,
            w: 5,
            o: 0.2,
            training: TrainingConfig::default(),
            s_b: 5,
            explorer_multiplier: 100,
            extra_explore: 2,
            split: SplitMode::Adaptive,
            nn: NnParams::default(),
            seed: 0,
        }
    }
}

impl EngineConfig {
    /// Classifier-only relevance feedback with oracle proportion `o`.
    pub fn baseline(o: f64) -> Self {
        EngineConfig {
            o,
            split: SplitMode::ClassifierOnly,
            extra_explore: 0,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidParameter("w must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.o) {
            return Err(Error::InvalidParameter("o must lie in [0, 1]".into()));
        }
        if self.s_b < 1 {
            return Err(Error::InvalidParameter("s_b must be at least 1".into()));
        }
        if self.explorer_multiplier < 1 {
            return Err(Error::InvalidParameter("explorer_multiplier must be at least 1".into()));
        }
        self.training.validate()
    }

    fn oracle_tag(&self) -> String {
        if self.o == 0.0 {
            "rf".to_owned()
        } else {
            format!("al_{}", self.o)
        }
    }

    /// Run identifier, e.g. `ii20-ann_5-al_0.2-all-100` or `baseline-rf`.
    pub fn identifier(&self) -> String {
        match self.split {
            SplitMode::ClassifierOnly => format!("baseline-{}", self.oracle_tag()),
            SplitMode::Adaptive => format!(
                "ii20-{}_{}-{}-{}-{}",
                self.nn_mode.as_str(),
                self.w,
                self.oracle_tag(),
                self.training.pruning.as_str(),
                self.training.n_tr
            ),
        }
    }

    /// Load from a `.json` or `.toml` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EngineConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Pruning {
    pub fn all() -> [Pruning; 4] {
        [Pruning::All, Pruning::Rf, Pruning::Al, Pruning::Hybrid]
    }
}
