//! End-to-end training of any model kind, including pre-training the
//! constituents of combined models.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, MAGIC};
use crate::config::{render_config, resolve};
use crate::error::{Error, Result};
use crate::kbdata::TripleSet;
use crate::lincomb::{fit_combination, LcLog};
use crate::scoring::{Model, ModelKind};
use crate::training::{fit, TrainConfig, TrainingLog, Validation};

/// Training triples, optional validation data and the vocabulary size.
#[derive(Debug, Clone, Copy)]
pub struct RunData<'a> {
    pub train: &'a TripleSet,
    pub valid: Option<Validation<'a>>,
    pub num_entities: usize,
    pub num_relations: usize,
}

/// Trace of a run and of any constituent runs it triggered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: TrainConfig,
    pub training: Option<TrainingLog>,
    pub combination: Option<LcLog>,
    /// Name and log of each constituent trained for this run; constituents
    /// loaded from checkpoints or the cache have no entry.
    pub constituents: Vec<(String, RunLog)>,
}

/// Trained constituents keyed by their resolved configuration, so that
/// several combined runs on the same data share pre-training.
#[derive(Debug, Default)]
pub struct PretrainCache {
    models: HashMap<String, Model>,
}

impl PretrainCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, cfg: &TrainConfig) -> Option<&Model> {
        self.models.get(&render_config(cfg))
    }

    pub fn insert(&mut self, cfg: &TrainConfig, model: Model) {
        self.models.insert(render_config(cfg), model);
    }
}

/// Where a constituent comes from.
enum Source {
    Train(TrainConfig),
    Load(Model),
}

fn is_checkpoint(path: &Path) -> bool {
    let mut buf = [0u8; 5];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .is_ok_and(|_| buf == *MAGIC.as_bytes())
}

/// A preset name, config file or checkpoint; trained constituents inherit
/// the parent's seed.
fn source(reference: &str, seed: u64) -> Result<Source> {
    let path = Path::new(reference);
    if path.is_file() && is_checkpoint(path) {
        return Ok(Source::Load(Checkpoint::load(path)?.model));
    }
    let mut cfg = resolve(reference)?;
    cfg.seed = seed;
    Ok(Source::Train(cfg))
}

fn constituent(
    reference: Option<&str>,
    want: ModelKind,
    parent: &TrainConfig,
    data: RunData<'_>,
    cache: &mut PretrainCache,
    log: &mut RunLog,
) -> Result<Model> {
    let reference = reference.ok_or_else(|| {
        Error::config(format!(
            "{} needs pretrain_{} (a preset, config file or checkpoint)",
            parent.model,
            want.as_str()
        ))
    })?;
    let model = match source(reference, parent.seed)? {
        Source::Load(m) => m,
        Source::Train(cfg) => match cache.get(&cfg) {
            Some(m) => m.clone(),
            None => {
                let out = run(&cfg, data, cache)?;
                cache.insert(&cfg, out.model.clone());
                log.constituents.push((reference.to_string(), out.log));
                out.model
            }
        },
    };
    if model.kind() != want {
        return Err(Error::config(format!(
            "pretrain_{} `{reference}` is a {} model",
            want.as_str(),
            model.kind()
        )));
    }
    Ok(model)
}

/// Trains `cfg.model`. Fine-tuned and linearly combined models first obtain
/// their constituents from `pretrain_bigram` and `pretrain_trigram`.
pub fn run(cfg: &TrainConfig, data: RunData<'_>, cache: &mut PretrainCache) -> Result<RunOutput> {
    cfg.validate()?;
    let mut log = RunLog {
        config: cfg.clone(),
        training: None,
        combination: None,
        constituents: Vec::new(),
    };
    let (e, l) = (data.num_entities, data.num_relations);
    let model = match cfg.model {
        ModelKind::TatecFt | ModelKind::TatecLc => {
            let b = constituent(
                cfg.pretrain_bigram.as_deref(),
                ModelKind::Bigram,
                cfg,
                data,
                cache,
                &mut log,
            )?;
            let t = constituent(
                cfg.pretrain_trigram.as_deref(),
                ModelKind::Trigram,
                cfg,
                data,
                cache,
                &mut log,
            )?;
            let (Model::Bigram(b), Model::Trigram(t)) = (b, t) else {
                unreachable!("kinds checked by constituent()")
            };
            if cfg.model == ModelKind::TatecFt {
                let start = Model::fine_tune_from(b, t)?;
                let (m, tl) = fit(cfg, data.train, data.valid, e, l, Some(start))?;
                log.training = Some(tl);
                m
            } else {
                let (w, lc) = fit_combination(&b, &t, data.train, data.valid, cfg)?;
                log.combination = Some(lc);
                Model::LinearCombination {
                    bigram: b,
                    trigram: t,
                    weights: w,
                }
            }
        }
        _ => {
            let (m, tl) = fit(cfg, data.train, data.valid, e, l, None)?;
            log.training = Some(tl);
            m
        }
    };
    Ok(RunOutput { model, log })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: Model,
    pub log: RunLog,
}
