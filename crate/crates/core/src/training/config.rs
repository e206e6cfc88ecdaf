use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbdata::CorruptionStrategy;
use crate::scoring::ModelKind;

/// Norm control on entity embeddings and relation matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Regularization {
    None,
    /// Project onto norm balls after each minibatch.
    Hard {
        rho_e: f64,
        rho_l: f64,
    },
    /// Hinged squared-norm penalties weighted by `c1` (bigram side) and
    /// `c2` (trigram side).
    Soft {
        c1: f64,
        c2: f64,
        rho_e: f64,
        rho_l: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMetric {
    AucPr,
    FilteredMeanRank,
    RawMeanRank,
    /// Raw mean rank of the true label among all relations.
    LabelMeanRank,
}

impl ValidationMetric {
    pub fn higher_is_better(self) -> bool {
        self == ValidationMetric::AucPr
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationMetric::AucPr => "auc_pr",
            ValidationMetric::FilteredMeanRank => "filtered_mean_rank",
            ValidationMetric::RawMeanRank => "raw_mean_rank",
            ValidationMetric::LabelMeanRank => "label_mean_rank",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ValidationMetric::AucPr,
            ValidationMetric::FilteredMeanRank,
            ValidationMetric::RawMeanRank,
            ValidationMetric::LabelMeanRank,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }
}

impl fmt::Display for ValidationMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything that defines one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Bigram (and translation) dimension.
    pub d1: usize,
    /// Trigram dimension.
    pub d2: usize,
    /// Learning rate of bigram-side and translation parameters.
    pub lambda1: f64,
    /// Learning rate of trigram-side parameters.
    pub lambda2: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub corruption: CorruptionStrategy,
    pub regularization: Regularization,
    /// Validate every this many epochs; 0 validates only after the last.
    pub validation_every: usize,
    pub validation_metric: ValidationMetric,
    /// Size of the validation subsample; `None` uses the whole set.
    pub validation_sample: Option<usize>,
    pub seed: u64,
    /// Penalty budget of the linear combination.
    pub alpha: f64,
    /// Stabilizer in the linear-combination penalty denominator.
    pub epsilon: f64,
    /// Presets or config files used to pre-train the constituents of
    /// combined models.
    pub pretrain_bigram: Option<String>,
    pub pretrain_trigram: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Bigram,
            d1: 40,
            d2: 40,
            lambda1: 0.01,
            lambda2: 0.01,
            gamma: 1.0,
            batch_size: 100,
            epochs: 100,
            negatives_per_positive: 1,
            corruption: CorruptionStrategy::HeadOrTail,
            regularization: Regularization::None,
            validation_every: 10,
            validation_metric: ValidationMetric::FilteredMeanRank,
            validation_sample: None,
            seed: 0,
            alpha: 1.0,
            epsilon: 1e-3,
            pretrain_bigram: None,
            pretrain_trigram: None,
        }
    }
}

impl TrainConfig {
    /// Checks value ranges and cross-field requirements.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be > 0, got {v}")))
            }
        };
        let uses_b = self.model.uses_bigram() || self.model == ModelKind::Transe;
        let uses_t = self.model.uses_trigram();
        // The linear combination is not trained by SGD.
        let sgd = self.model != ModelKind::TatecLc;
        if uses_b {
            if sgd {
                positive("lambda1", self.lambda1)?;
            }
            if self.d1 == 0 {
                return Err(Error::config(format!("{} requires d1 >= 1", self.model)));
            }
        }
        if uses_t {
            if sgd {
                positive("lambda2", self.lambda2)?;
            }
            if self.d2 == 0 {
                return Err(Error::config(format!("{} requires d2 >= 1", self.model)));
            }
        }
        positive("gamma", self.gamma)?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(1..=2).contains(&self.negatives_per_positive) {
            return Err(Error::config(format!(
                "negatives_per_positive must be 1 or 2, got {}",
                self.negatives_per_positive
            )));
        }
        match self.regularization {
            Regularization::None => {}
            Regularization::Hard { rho_e, rho_l } => {
                positive("rho_e", rho_e)?;
                positive("rho_l", rho_l)?;
            }
            Regularization::Soft {
                c1,
                c2,
                rho_e,
                rho_l,
            } => {
                positive("rho_e", rho_e)?;
                positive("rho_l", rho_l)?;
                for (n, c) in [("c1", c1), ("c2", c2)] {
                    if !(c >= 0.0 && c.is_finite()) {
                        return Err(Error::config(format!("{n} must be >= 0, got {c}")));
                    }
                }
            }
        }
        if self.model == ModelKind::TatecFtShared && self.d1 != self.d2 {
            return Err(Error::config(format!(
                "tatec_ft_shared requires d1 == d2, got {} and {}",
                self.d1, self.d2
            )));
        }
        if self.model == ModelKind::TatecLc {
            positive("alpha", self.alpha)?;
            positive("epsilon", self.epsilon)?;
        }
        Ok(())
    }
}
