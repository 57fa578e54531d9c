//! Trainable link predictors with hand-written gradients.
//!
//! Encoders: `mlp` (no message passing), `gcn` (`ReLU(Â H W + b)`), `sage`
//! (`ReLU([h_u | mean_{v in N(u)} h_v] W + b)`), `gae` (GCN encoder whose last
//! layer is linear). Decoders: a one-hidden-layer scorer on `h_u ⊙ h_v` for
//! mlp/gcn/sage, the inner product for gae, and for `ncn` the scorer on
//! `[h_u ⊙ h_v | sum of h_w over common neighbors w]` on top of a GCN
//! encoder. `ncn` is only the common-neighbor aggregation idea, not the full
//! published NCN model.
//!
//! Message passing always uses the training edges.

mod gradcheck;
mod model;
mod sparse;
mod train;

pub use gradcheck::{gradient_check, GradCheckInstance};
pub use model::{Graph, ModelParams};
pub use sparse::{mean_aggregator, normalized_adjacency, Csr};
pub use train::{evaluate, score_edges, test_metrics, train, EpochLog, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Mlp,
    Gcn,
    Sage,
    Gae,
    Ncn,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Mlp, Arch::Gcn, Arch::Sage, Arch::Gae, Arch::Ncn];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
            Arch::Gae => "gae",
            Arch::Ncn => "ncn",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Arch::Mlp),
            "gcn" => Ok(Arch::Gcn),
            "sage" | "graphsage" => Ok(Arch::Sage),
            "gae" => Ok(Arch::Gae),
            "ncn" => Ok(Arch::Ncn),
            other => Err(Error::InvalidConfig(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(arch: Arch) -> Self {
        Self {
            arch,
            layers: 2,
            hidden: 256,
            dropout: 0.5,
            lr: 1e-3,
            epochs: 500,
            patience: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 || self.hidden < 1 {
            return Err(Error::InvalidConfig("layers and hidden must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.patience < 1 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}
