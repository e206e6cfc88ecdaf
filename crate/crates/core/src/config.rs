//! Flat `key=value` configuration files and the shipped presets.
//!
//! A config file may name a `preset` to start from; the remaining keys
//! override it. Blank lines and lines starting with `#` are ignored and
//! unknown keys are rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kbdata::CorruptionStrategy;
use crate::scoring::ModelKind;
use crate::training::{Regularization, TrainConfig, ValidationMetric};

/// Per-dataset protocol shared by all presets of that dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Umls,
    Kinships,
    Fb15k,
    Svo,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [
        Dataset::Umls,
        Dataset::Kinships,
        Dataset::Fb15k,
        Dataset::Svo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Umls => "umls",
            Dataset::Kinships => "kinships",
            Dataset::Fb15k => "fb15k",
            Dataset::Svo => "svo",
        }
    }

    fn protocol(self, model: ModelKind) -> TrainConfig {
        let base = TrainConfig {
            seed: 1,
            batch_size: DEFAULT_BATCH,
            ..TrainConfig::default()
        };
        match self {
            Dataset::Umls | Dataset::Kinships => TrainConfig {
                epochs: 100,
                validation_every: 10,
                validation_metric: ValidationMetric::AucPr,
                validation_sample: Some(1000),
                negatives_per_positive: 1,
                corruption: CorruptionStrategy::AllDiffer,
                ..base
            },
            Dataset::Fb15k => TrainConfig {
                epochs: 500,
                validation_every: 10,
                validation_metric: ValidationMetric::FilteredMeanRank,
                validation_sample: None,
                negatives_per_positive: 2,
                corruption: CorruptionStrategy::HeadOrTail,
                ..base
            },
            Dataset::Svo => {
                let combined = model.uses_bigram() && model.uses_trigram();
                TrainConfig {
                    epochs: if combined { 10 } else { 500 },
                    validation_every: if combined { 1 } else { 10 },
                    validation_metric: ValidationMetric::LabelMeanRank,
                    validation_sample: Some(1000),
                    negatives_per_positive: 1,
                    corruption: CorruptionStrategy::LabelOnly,
                    ..base
                }
            }
        }
    }
}

/// Minibatch size used by every preset.
pub const DEFAULT_BATCH: usize = 100;

#[derive(Clone, Copy)]
enum Scheme {
    Soft,
    Hard,
    /// Linear combination; no regularization of its own.
    Lc,
}

/// One hyperparameter row: `(dataset, name, kind, scheme, d1, d2, lambda1,
/// lambda2, gamma, c1, c2, rho_l, alpha)`.
type Row = (
    Dataset,
    &'static str,
    ModelKind,
    Scheme,
    usize,
    usize,
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
);

use Dataset::{Fb15k, Kinships, Svo, Umls};
use ModelKind::{Bigram, TatecFt, TatecFtNoPretrain, TatecFtShared, TatecLc, Transe, Trigram};
use Scheme::{Hard, Lc, Soft};

#[rustfmt::skip]
const ROWS: &[Row] = &[
    // dataset   name                       kind               scheme d1   d2   lam1    lam2    gamma c1      c2      rho_l alpha
    (Umls,     "transe-soft",              Transe,            Soft,  40,  0,   0.01,   0.0,    0.5,  0.0,    0.0,    1.0,  0.0),
    (Umls,     "bigram-soft",              Bigram,            Soft,  40,  0,   0.01,   0.0,    0.5,  0.1,    0.0,    1.0,  0.0),
    (Umls,     "trigram-soft",             Trigram,           Soft,  0,   40,  0.0,    0.01,   1.0,  0.0,    0.1,    5.0,  0.0),
    (Umls,     "tatec-ft-soft",            TatecFt,           Soft,  40,  40,  0.001,  0.001,  1.0,  0.01,   0.01,   5.0,  0.0),
    (Umls,     "transe-hard",              Transe,            Hard,  40,  0,   0.01,   0.0,    0.1,  0.0,    0.0,    1.0,  0.0),
    (Umls,     "bigram-hard",              Bigram,            Hard,  40,  0,   0.01,   0.0,    0.5,  0.0,    0.0,    1.0,  0.0),
    (Umls,     "trigram-hard",             Trigram,           Hard,  0,   40,  0.0,    0.01,   1.0,  0.0,    0.0,    10.0, 0.0),
    (Umls,     "tatec-ft-hard",            TatecFt,           Hard,  40,  40,  0.001,  0.001,  1.0,  0.0,    0.0,    10.0, 0.0),
    (Umls,     "tatec-lc",                 TatecLc,           Lc,    40,  40,  0.0,    0.0,    0.5,  0.0,    0.0,    0.0,  50.0),
    (Kinships, "transe-soft",              Transe,            Soft,  40,  0,   0.01,   0.0,    1.0,  0.0,    0.0,    1.0,  0.0),
    (Kinships, "bigram-soft",              Bigram,            Soft,  40,  0,   0.01,   0.0,    1.0,  1.0,    0.0,    1.0,  0.0),
    (Kinships, "trigram-soft",             Trigram,           Soft,  0,   40,  0.0,    0.01,   0.5,  0.0,    0.1,    5.0,  0.0),
    (Kinships, "tatec-ft-soft",            TatecFt,           Soft,  40,  40,  0.001,  0.001,  1.0,  100.0,  0.0001, 10.0, 0.0),
    (Kinships, "transe-hard",              Transe,            Hard,  40,  0,   0.01,   0.0,    1.0,  0.0,    0.0,    1.0,  0.0),
    (Kinships, "bigram-hard",              Bigram,            Hard,  40,  0,   0.01,   0.0,    1.0,  0.0,    0.0,    1.0,  0.0),
    (Kinships, "trigram-hard",             Trigram,           Hard,  0,   40,  0.0,    0.01,   0.5,  0.0,    0.0,    10.0, 0.0),
    (Kinships, "tatec-ft-hard",            TatecFt,           Hard,  40,  40,  0.001,  0.001,  1.0,  0.0,    0.0,    10.0, 0.0),
    (Kinships, "tatec-lc",                 TatecLc,           Lc,    40,  40,  0.0,    0.0,    1.0,  0.0,    0.0,    0.0,  10.0),
    (Fb15k,    "transe-soft",              Transe,            Soft,  100, 0,   0.01,   0.0,    0.25, 0.1,    0.0,    1.0,  0.0),
    (Fb15k,    "bigram-soft",              Bigram,            Soft,  100, 0,   0.01,   0.0,    1.0,  0.0,    0.0,    1.0,  0.0),
    (Fb15k,    "trigram-soft",             Trigram,           Soft,  0,   50,  0.0,    0.01,   0.25, 0.0,    0.001,  1.0,  0.0),
    (Fb15k,    "tatec-ft-soft",            TatecFt,           Soft,  100, 50,  0.001,  0.001,  0.5,  0.0,    0.0,    1.0,  0.0),
    (Fb15k,    "transe-hard",              Transe,            Hard,  100, 0,   0.01,   0.0,    0.25, 0.0,    0.0,    1.0,  0.0),
    (Fb15k,    "bigram-hard",              Bigram,            Hard,  100, 0,   0.01,   0.0,    0.25, 0.0,    0.0,    1.0,  0.0),
    (Fb15k,    "trigram-hard",             Trigram,           Hard,  0,   50,  0.0,    0.01,   0.25, 0.0,    0.0,    5.0,  0.0),
    (Fb15k,    "tatec-ft-hard",            TatecFt,           Hard,  100, 50,  0.001,  0.001,  0.25, 0.0,    0.0,    5.0,  0.0),
    (Fb15k,    "tatec-ft-no-pretrain",     TatecFtNoPretrain, Soft,  100, 50,  0.01,   0.01,   0.25, 0.0,    0.001,  1.0,  0.0),
    (Fb15k,    "tatec-ft-shared",          TatecFtShared,     Soft,  75,  75,  0.01,   0.01,   0.25, 0.001,  0.001,  5.0,  0.0),
    (Fb15k,    "tatec-lc",                 TatecLc,           Lc,    100, 50,  0.0,    0.0,    0.25, 0.0,    0.0,    0.0,  200.0),
    (Svo,      "transe-soft",              Transe,            Soft,  50,  0,   0.01,   0.0,    0.5,  1.0,    0.0,    1.0,  0.0),
    (Svo,      "bigram-soft",              Bigram,            Soft,  50,  0,   0.01,   0.0,    1.0,  0.1,    0.0,    1.0,  0.0),
    (Svo,      "trigram-soft",             Trigram,           Soft,  0,   50,  0.0,    0.01,   1.0,  0.0,    10.0,   20.0, 0.0),
    (Svo,      "tatec-ft-soft",            TatecFt,           Soft,  50,  50,  0.0001, 0.0001, 1.0,  0.1,    1.0,    20.0, 0.0),
    (Svo,      "transe-hard",              Transe,            Hard,  50,  0,   0.01,   0.0,    0.5,  0.0,    0.0,    1.0,  0.0),
    (Svo,      "bigram-hard",              Bigram,            Hard,  50,  0,   0.01,   0.0,    1.0,  0.0,    0.0,    1.0,  0.0),
    (Svo,      "trigram-hard",             Trigram,           Hard,  0,   50,  0.0,    0.01,   1.0,  0.0,    0.0,    20.0, 0.0),
    (Svo,      "tatec-ft-hard",            TatecFt,           Hard,  50,  50,  0.0001, 0.0001, 1.0,  0.0,    0.0,    20.0, 0.0),
    (Svo,      "tatec-lc",                 TatecLc,           Lc,    50,  50,  0.0,    0.0,    1.0,  0.0,    0.0,    0.0,  50.0),
];

fn row_config(r: &Row) -> TrainConfig {
    let &(ds, name, kind, scheme, d1, d2, lambda1, lambda2, gamma, c1, c2, rho_l, alpha) = r;
    let regularization = match scheme {
        Soft => Regularization::Soft {
            c1,
            c2,
            rho_e: 1.0,
            rho_l,
        },
        Hard => Regularization::Hard { rho_e: 1.0, rho_l },
        Lc => Regularization::None,
    };
    let (pretrain_bigram, pretrain_trigram) = match (kind, scheme) {
        (TatecFt, Hard) => (
            Some(format!("{}-bigram-hard", ds.as_str())),
            Some(format!("{}-trigram-hard", ds.as_str())),
        ),
        (TatecFt, _) | (TatecLc, _) => (
            Some(format!("{}-bigram-soft", ds.as_str())),
            Some(format!("{}-trigram-soft", ds.as_str())),
        ),
        _ => (None, None),
    };
    debug_assert!(!name.is_empty());
    TrainConfig {
        model: kind,
        d1,
        d2,
        lambda1,
        lambda2,
        gamma,
        regularization,
        alpha: if kind == TatecLc { alpha } else { 1.0 },
        pretrain_bigram,
        pretrain_trigram,
        ..ds.protocol(kind)
    }
}

/// Every shipped preset name, e.g. `umls-trigram-soft`.
pub fn preset_names() -> Vec<String> {
    ROWS.iter()
        .map(|r| format!("{}-{}", r.0.as_str(), r.1))
        .collect()
}

/// The configuration of a named preset.
pub fn preset(name: &str) -> Result<TrainConfig> {
    ROWS.iter()
        .find(|r| format!("{}-{}", r.0.as_str(), r.1) == name)
        .map(row_config)
        .ok_or_else(|| Error::config(format!("unknown preset `{name}`")))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("invalid value `{v}` for `{key}`")))
}

/// Regularization fields edited independently of the active scheme.
#[derive(Clone, Copy)]
struct RegFields {
    scheme: &'static str,
    c1: f64,
    c2: f64,
    rho_e: f64,
    rho_l: f64,
}

impl RegFields {
    fn of(r: Regularization) -> Self {
        match r {
            Regularization::None => RegFields {
                scheme: "none",
                c1: 0.0,
                c2: 0.0,
                rho_e: 1.0,
                rho_l: 1.0,
            },
            Regularization::Hard { rho_e, rho_l } => RegFields {
                scheme: "hard",
                c1: 0.0,
                c2: 0.0,
                rho_e,
                rho_l,
            },
            Regularization::Soft {
                c1,
                c2,
                rho_e,
                rho_l,
            } => RegFields {
                scheme: "soft",
                c1,
                c2,
                rho_e,
                rho_l,
            },
        }
    }

    fn build(self) -> Regularization {
        match self.scheme {
            "hard" => Regularization::Hard {
                rho_e: self.rho_e,
                rho_l: self.rho_l,
            },
            "soft" => Regularization::Soft {
                c1: self.c1,
                c2: self.c2,
                rho_e: self.rho_e,
                rho_l: self.rho_l,
            },
            _ => Regularization::None,
        }
    }
}

/// Sets one key on `cfg`.
pub fn apply_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let mut reg = RegFields::of(cfg.regularization);
    match key {
        "model" => cfg.model = value.parse()?,
        "d1" => cfg.d1 = parse_num(key, value)?,
        "d2" => cfg.d2 = parse_num(key, value)?,
        "lambda" => {
            cfg.lambda1 = parse_num(key, value)?;
            cfg.lambda2 = cfg.lambda1;
        }
        "lambda1" => cfg.lambda1 = parse_num(key, value)?,
        "lambda2" => cfg.lambda2 = parse_num(key, value)?,
        "gamma" => cfg.gamma = parse_num(key, value)?,
        "batch_size" => cfg.batch_size = parse_num(key, value)?,
        "epochs" => cfg.epochs = parse_num(key, value)?,
        "negatives_per_positive" => cfg.negatives_per_positive = parse_num(key, value)?,
        "corruption" => {
            cfg.corruption = CorruptionStrategy::parse(value)
                .ok_or_else(|| Error::config(format!("unknown corruption `{value}`")))?
        }
        "regularization" => {
            reg.scheme = match value {
                "none" => "none",
                "hard" => "hard",
                "soft" => "soft",
                _ => return Err(Error::config(format!("unknown regularization `{value}`"))),
            }
        }
        "c" => {
            let c = parse_num(key, value)?;
            if cfg.model.uses_bigram() || cfg.model == ModelKind::Transe {
                reg.c1 = c;
            }
            if cfg.model.uses_trigram() {
                reg.c2 = c;
            }
        }
        "c1" => reg.c1 = parse_num(key, value)?,
        "c2" => reg.c2 = parse_num(key, value)?,
        "rho_e" => reg.rho_e = parse_num(key, value)?,
        "rho_l" => reg.rho_l = parse_num(key, value)?,
        "validation_every" => cfg.validation_every = parse_num(key, value)?,
        "validation_metric" => {
            cfg.validation_metric = ValidationMetric::parse(value)
                .ok_or_else(|| Error::config(format!("unknown validation metric `{value}`")))?
        }
        "validation_sample" => {
            cfg.validation_sample = match value {
                "all" => None,
                v => Some(parse_num(key, v)?),
            }
        }
        "seed" => cfg.seed = parse_num(key, value)?,
        "alpha" => cfg.alpha = parse_num(key, value)?,
        "epsilon" => cfg.epsilon = parse_num(key, value)?,
        "pretrain_bigram" => cfg.pretrain_bigram = Some(value.to_string()),
        "pretrain_trigram" => cfg.pretrain_trigram = Some(value.to_string()),
        _ => return Err(Error::config(format!("unknown config key `{key}`"))),
    }
    cfg.regularization = reg.build();
    Ok(())
}

/// Parses config text. A `preset` key, wherever it appears, is applied
/// before all other keys.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut pairs = Vec::new();
    let mut base = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k == "preset" {
            base = Some(preset(v)?);
        } else {
            pairs.push((k, v));
        }
    }
    let mut cfg = base.unwrap_or_default();
    // `c` depends on the model kind, so it goes last.
    pairs.sort_by_key(|&(k, _)| k == "c");
    for (k, v) in pairs {
        apply_key(&mut cfg, k, v)?;
    }
    Ok(cfg)
}

/// Renders `cfg` in the format read by [`parse_config`].
pub fn render_config(cfg: &TrainConfig) -> String {
    let reg = RegFields::of(cfg.regularization);
    let mut lines = vec![
        format!("model={}", cfg.model),
        format!("d1={}", cfg.d1),
        format!("d2={}", cfg.d2),
        format!("lambda1={}", cfg.lambda1),
        format!("lambda2={}", cfg.lambda2),
        format!("gamma={}", cfg.gamma),
        format!("batch_size={}", cfg.batch_size),
        format!("epochs={}", cfg.epochs),
        format!("negatives_per_positive={}", cfg.negatives_per_positive),
        format!("corruption={}", cfg.corruption.name()),
        format!("regularization={}", reg.scheme),
        format!("c1={}", reg.c1),
        format!("c2={}", reg.c2),
        format!("rho_e={}", reg.rho_e),
        format!("rho_l={}", reg.rho_l),
        format!("validation_every={}", cfg.validation_every),
        format!("validation_metric={}", cfg.validation_metric),
        format!(
            "validation_sample={}",
            cfg.validation_sample
                .map_or("all".to_string(), |n| n.to_string())
        ),
        format!("seed={}", cfg.seed),
        format!("alpha={}", cfg.alpha),
        format!("epsilon={}", cfg.epsilon),
    ];
    if let Some(b) = &cfg.pretrain_bigram {
        lines.push(format!("pretrain_bigram={b}"));
    }
    if let Some(t) = &cfg.pretrain_trigram {
        lines.push(format!("pretrain_trigram={t}"));
    }
    lines.join("\n") + "\n"
}

/// Resolves a preset name, or else reads a config file at that path.
pub fn resolve(name_or_path: &str) -> Result<TrainConfig> {
    match preset(name_or_path) {
        Ok(c) => Ok(c),
        Err(_) if Path::new(name_or_path).is_file() => {
            parse_config(&std::fs::read_to_string(name_or_path)?)
        }
        Err(e) => Err(e),
    }
}
