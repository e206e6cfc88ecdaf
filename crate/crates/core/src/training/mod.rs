//! Minibatch SGD on the margin ranking loss, with hard (projection) or soft
//! (penalty) norm regularization and early stopping on a validation metric.

mod config;
mod regularize;

pub use config::{Regularization, TrainConfig, ValidationMetric};
pub use regularize::{apply_hard_projection, soft_penalty_terms};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{entity_ranks, eval_auc, eval_label_prediction, stratified_sample};
use crate::kbdata::{
    balance_positives, corrupt_side, sample_corrupted, CorruptionStrategy, Side, Triple, TripleSet,
};
use crate::scoring::{init_params, Block, Model, ModelKind, Scorer, SparseGrad, Term};

/// RNG stream ids derived from the run seed.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_DATA: u64 = 2;
pub(crate) const STREAM_VALID: u64 = 3;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Training examples for one run.
///
/// For sets with truth flags the positives are replicated once to match the
/// number of observed negatives, and every epoch pairs each positive with a
/// distinct observed negative. Otherwise negatives are drawn by corruption.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    positives: Vec<Triple>,
    negatives: Option<Vec<Triple>>,
}

impl TrainingSet {
    pub fn new<R: Rng + ?Sized>(train: &TripleSet, rng: &mut R) -> Result<Self> {
        let positives = train.positives().triples().to_vec();
        if positives.is_empty() {
            return Err(Error::domain("training set has no positive triples"));
        }
        let negatives = train.negatives();
        if negatives.is_empty() {
            return Ok(TrainingSet {
                positives,
                negatives: None,
            });
        }
        let positives = balance_positives(&positives, &negatives, rng)?;
        Ok(TrainingSet {
            positives,
            negatives: Some(negatives),
        })
    }

    /// Positives only; negatives come from corruption.
    pub fn from_positives(positives: Vec<Triple>) -> Self {
        TrainingSet {
            positives,
            negatives: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn positives(&self) -> &[Triple] {
        &self.positives
    }

    pub fn negatives(&self) -> Option<&[Triple]> {
        self.negatives.as_deref()
    }
}

/// Per-epoch statistics; `mean_loss` averages the hinge over all pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub pairs: usize,
    pub mean_loss: f64,
    pub active_fraction: f64,
}

pub(crate) fn draw_negatives<R: Rng + ?Sized>(
    pos: Triple,
    cfg: &TrainConfig,
    e: usize,
    l: usize,
    rng: &mut R,
    out: &mut Vec<Triple>,
) -> Result<()> {
    out.clear();
    if cfg.negatives_per_positive == 2 && cfg.corruption == CorruptionStrategy::HeadOrTail {
        out.push(corrupt_side(pos, Side::Head, e, rng));
        out.push(corrupt_side(pos, Side::Tail, e, rng));
        return Ok(());
    }
    for _ in 0..cfg.negatives_per_positive {
        out.push(sample_corrupted(pos, cfg.corruption, e, l, rng)?);
    }
    Ok(())
}

/// Entity rows and relation matrices of `t` that the soft penalty acts on.
fn penalized_blocks(model: &Model, t: Triple, out: &mut Vec<Block>) {
    out.clear();
    let kind = model.kind();
    let has_e1 = kind.uses_bigram() || kind == ModelKind::Transe;
    if has_e1 {
        out.extend([Block::Entity(t.head), Block::Entity(t.tail)]);
    }
    if kind.uses_trigram() {
        if kind != ModelKind::TatecFtShared {
            out.extend([Block::Entity2(t.head), Block::Entity2(t.tail)]);
        }
        out.push(Block::RelMatrix(t.label));
    }
}

/// Applies one accumulated minibatch gradient: soft penalty, SGD step with
/// the term's learning rate, then hard projection of the updated blocks.
fn apply_update(
    model: &mut Model,
    g: &mut SparseGrad,
    cfg: &TrainConfig,
    epoch: usize,
    batch: usize,
) -> Result<()> {
    let shared = model.kind() == ModelKind::TatecFtShared;
    for (&block, gv) in g.blocks.iter_mut() {
        let lr = match block.term() {
            Term::Bigram => cfg.lambda1,
            Term::Trigram => cfg.lambda2,
        };
        let p = model
            .block_mut(block)
            .ok_or_else(|| Error::domain(format!("model has no parameter block {block:?}")))?;
        if let Regularization::Soft {
            c1,
            c2,
            rho_e,
            rho_l,
        } = cfg.regularization
        {
            if let Some((c, rho)) =
                regularize::soft_coefficient(block, shared, c1, c2, rho_e, rho_l)
            {
                regularize::add_soft_subgradient(p, c, rho, gv);
            }
        }
        for (x, d) in p.iter_mut().zip(gv.iter()) {
            *x -= lr * d;
        }
        if let Regularization::Hard { rho_e, rho_l } = cfg.regularization {
            regularize::project_block(block, p, rho_e, rho_l);
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                batch,
                detail: format!("{block:?} holds {bad}"),
            });
        }
    }
    Ok(())
}

/// One pass over `data`, observing the model after every minibatch.
pub fn train_epoch_observed<R: Rng + ?Sized>(
    model: &mut Model,
    data: &TrainingSet,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut R,
    observe: &mut dyn FnMut(&Model, usize),
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::domain("empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be >= 1"));
    }
    let (e, l) = (model.num_entities(), model.num_relations());
    if let Regularization::Hard { rho_e, rho_l } = cfg.regularization {
        apply_hard_projection(model, rho_e, rho_l);
    }
    let soft_active =
        matches!(cfg.regularization, Regularization::Soft { c1, c2, .. } if c1 > 0.0 || c2 > 0.0);

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let neg_order: Option<Vec<usize>> = data.negatives.as_ref().map(|negs| {
        let mut o: Vec<usize> = (0..negs.len()).collect();
        o.shuffle(rng);
        o
    });

    let mut g = SparseGrad::new();
    let mut negs = Vec::with_capacity(2);
    let mut touched = Vec::with_capacity(5);
    let (mut pairs, mut active, mut loss) = (0usize, 0usize, 0.0);

    for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
        g.clear();
        for (j, &i) in chunk.iter().enumerate() {
            let pos = data.positives[i];
            match (&data.negatives, &neg_order) {
                (Some(all), Some(o)) => {
                    negs.clear();
                    negs.push(all[o[(batch * cfg.batch_size + j) % o.len()]]);
                }
                _ => draw_negatives(pos, cfg, e, l, rng, &mut negs)?,
            }
            let sp = model.score(pos);
            for &neg in &negs {
                pairs += 1;
                let h = cfg.gamma - sp + model.score(neg);
                if !h.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch,
                        detail: format!("non-finite loss for {pos:?} against {neg:?}"),
                    });
                }
                if h > 0.0 {
                    active += 1;
                    loss += h;
                    model.accumulate_grad(pos, -1.0, &mut g);
                    model.accumulate_grad(neg, 1.0, &mut g);
                }
            }
            if soft_active {
                for &t in std::iter::once(&pos).chain(&negs) {
                    penalized_blocks(model, t, &mut touched);
                    for &b in &touched {
                        let len = model.block(b).map_or(0, <[f64]>::len);
                        g.slot(b, len);
                    }
                }
            }
        }
        apply_update(model, &mut g, cfg, epoch, batch)?;
        observe(model, batch);
    }
    Ok(EpochStats {
        epoch,
        pairs,
        mean_loss: loss / pairs.max(1) as f64,
        active_fraction: active as f64 / pairs.max(1) as f64,
    })
}

/// One pass over `data` in shuffled minibatches of `cfg.batch_size`.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut Model,
    data: &TrainingSet,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochStats> {
    train_epoch_observed(model, data, cfg, epoch, rng, &mut |_, _| {})
}

/// A validation measurement taken during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub epoch: usize,
    pub value: f64,
}

/// Full trace of one [`fit`] call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainConfig,
    pub epochs: Vec<EpochStats>,
    pub validation: Vec<ValidationPoint>,
    /// Epoch of the returned snapshot (0 for the starting parameters).
    pub best_epoch: usize,
    pub best_value: Option<f64>,
}

/// Validation data: the triples to score and, for filtered ranking, every
/// known positive.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub set: &'a TripleSet,
    pub known: &'a TripleSet,
}

/// Value of `metric` for `model` on `set`.
pub fn validation_value(
    model: &Model,
    metric: ValidationMetric,
    set: &TripleSet,
    known: &TripleSet,
) -> Result<f64> {
    match metric {
        ValidationMetric::AucPr => eval_auc(model, set),
        ValidationMetric::FilteredMeanRank | ValidationMetric::RawMeanRank => {
            let pos = set.positives();
            if pos.is_empty() {
                return Err(Error::domain("validation set has no positive triples"));
            }
            let ranks = entity_ranks(model, pos.triples(), known);
            let sum: usize = ranks
                .iter()
                .map(|r| match metric {
                    ValidationMetric::FilteredMeanRank => r.head_filtered + r.tail_filtered,
                    _ => r.head_raw + r.tail_raw,
                })
                .sum();
            Ok(sum as f64 / (2 * ranks.len()) as f64)
        }
        ValidationMetric::LabelMeanRank => Ok(eval_label_prediction(model, set, 5)?.mean_rank),
    }
}

/// Starting parameters for `cfg`: fresh random ones, or `pretrained` where
/// the model kind calls for it.
pub fn starting_model(
    cfg: &TrainConfig,
    e: usize,
    l: usize,
    pretrained: Option<Model>,
) -> Result<Model> {
    match (cfg.model, pretrained) {
        (ModelKind::TatecLc, _) => Err(Error::config(
            "tatec_lc weights are fitted by the linear-combination solver, not by SGD",
        )),
        (ModelKind::TatecFt, None) => Err(Error::config(
            "tatec_ft needs pre-trained bigram and trigram parameters",
        )),
        (ModelKind::TatecFt, Some(m)) => match m {
            Model::Combined {
                bigram, trigram, ..
            } => Model::fine_tune_from(bigram, trigram),
            other => Err(Error::config(format!(
                "tatec_ft cannot start from a {} model",
                other.kind()
            ))),
        },
        (kind, Some(m)) if m.kind() == kind => Ok(m),
        (kind, Some(m)) => Err(Error::config(format!(
            "cannot start {kind} training from a {} model",
            m.kind()
        ))),
        (kind, None) => init_params(
            kind,
            cfg.d1,
            cfg.d2,
            e,
            l,
            &mut stream_rng(cfg.seed, STREAM_INIT),
        ),
    }
}

/// Trains `cfg.model` on `train` and returns the snapshot with the best
/// validation metric together with the full trace.
///
/// Validation happens every `validation_every` epochs and after the last
/// one. Without validation data the final parameters are returned.
pub fn fit(
    cfg: &TrainConfig,
    train: &TripleSet,
    valid: Option<Validation<'_>>,
    num_entities: usize,
    num_relations: usize,
    pretrained: Option<Model>,
) -> Result<(Model, TrainingLog)> {
    cfg.validate()?;
    train.validate(num_entities, num_relations)?;
    let mut model = starting_model(cfg, num_entities, num_relations, pretrained)?;
    let mut data_rng = stream_rng(cfg.seed, STREAM_DATA);
    let data = TrainingSet::new(train, &mut data_rng)?;
    if data.negatives().is_some() && cfg.negatives_per_positive != 1 {
        return Err(Error::config(
            "observed negatives give exactly one negative per positive; set negatives_per_positive=1",
        ));
    }

    let sample = match valid {
        Some(v) if !v.set.is_empty() => {
            let mut rng = stream_rng(cfg.seed, STREAM_VALID);
            let s = match cfg.validation_sample {
                Some(n) => stratified_sample(v.set, n, &mut rng),
                None => v.set.clone(),
            };
            Some((s, v.known))
        }
        _ => None,
    };

    let mut log = TrainingLog {
        config: cfg.clone(),
        epochs: Vec::with_capacity(cfg.epochs),
        validation: Vec::new(),
        best_epoch: 0,
        best_value: None,
    };
    let mut best: Option<Model> = None;
    // Ties go to the later, longer-trained snapshot.
    let better = |a: f64, b: f64| match cfg.validation_metric.higher_is_better() {
        true => a >= b,
        false => a <= b,
    };

    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(&mut model, &data, cfg, epoch, &mut data_rng)?;
        log::debug!(
            "epoch {epoch}: loss {:.5}, active {:.3}",
            stats.mean_loss,
            stats.active_fraction
        );
        log.epochs.push(stats);
        let due =
            epoch == cfg.epochs || (cfg.validation_every > 0 && epoch % cfg.validation_every == 0);
        if let (true, Some((set, known))) = (due, &sample) {
            let value = validation_value(&model, cfg.validation_metric, set, known)?;
            log::info!(
                "{} epoch {epoch}: {} = {value:.5}",
                cfg.model,
                cfg.validation_metric
            );
            log.validation.push(ValidationPoint { epoch, value });
            if log.best_value.is_none_or(|b| better(value, b)) {
                log.best_value = Some(value);
                log.best_epoch = epoch;
                best = Some(model.clone());
            }
        }
    }
    if sample.is_none() {
        log.best_epoch = cfg.epochs;
    }
    Ok((best.unwrap_or(model), log))
}
