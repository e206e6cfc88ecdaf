//! Per-relation weighting of frozen bigram and trigram sub-scores.
//!
//! The weights `delta` (one 4-vector per relation) minimize the margin
//! ranking loss over pre-sampled pairs plus `sum_l ||delta_l||^2 / (sigma_l + eps)`.
//! Fitting alternates L-BFGS steps in `delta` with the closed-form `sigma`
//! update under `sum_l sigma_l = alpha`.

mod lbfgs;

pub use lbfgs::{minimize, LbfgsOptions, LbfgsResult};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::stratified_sample;
use crate::kbdata::{Triple, TripleSet};
use crate::scoring::{BigramParams, CombinationWeights, Model, TrigramParams};
use crate::training::{
    draw_negatives, stream_rng, validation_value, TrainConfig, TrainingSet, Validation,
    ValidationPoint, STREAM_DATA, STREAM_VALID,
};

/// The four frozen sub-scores of one triple.
pub type Features = [f64; 4];

/// `(head-label, label-tail, head-tail, 3-way)` sub-scores of every triple.
pub fn precompute_features(
    b: &BigramParams,
    tr: &TrigramParams,
    triples: &[Triple],
) -> Result<Vec<Features>> {
    let (e, l) = (b.num_entities(), b.num_relations());
    if tr.num_entities() != e || tr.num_relations() != l {
        return Err(Error::domain(
            "bigram and trigram constituents disagree on E or L",
        ));
    }
    if let Some(t) = triples
        .iter()
        .find(|t| t.head >= e || t.tail >= e || t.label >= l)
    {
        return Err(Error::domain(format!(
            "triple ({}, {}, {}) out of range for E={e}, L={l}",
            t.head, t.label, t.tail
        )));
    }
    Ok(triples
        .par_iter()
        .map(|&t| {
            let [x, y, z] = b.terms(t);
            [x, y, z, tr.score(t)]
        })
        .collect())
}

/// Features of one positive and one negative sharing the positive's label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcPair {
    pub label: usize,
    pub pos: Features,
    pub neg: Features,
}

fn dot4(a: &[f64], b: &Features) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Objective value and its subgradient with respect to `delta`.
pub fn lc_objective(
    delta: &Array2<f64>,
    sigma: &Array1<f64>,
    pairs: &[LcPair],
    gamma: f64,
    epsilon: f64,
) -> (f64, Array2<f64>) {
    let d = delta.as_slice().expect("row-major weights");
    let mut grad = Array2::zeros(delta.raw_dim());
    let g = grad.as_slice_mut().expect("row-major weights");
    let mut value = 0.0;
    for p in pairs {
        let w = &d[4 * p.label..4 * p.label + 4];
        let h = gamma - dot4(w, &p.pos) + dot4(w, &p.neg);
        if h > 0.0 {
            value += h;
            for k in 0..4 {
                g[4 * p.label + k] += p.neg[k] - p.pos[k];
            }
        }
    }
    for (l, &s) in sigma.iter().enumerate() {
        let den = s + epsilon;
        for k in 0..4 {
            let x = d[4 * l + k];
            value += x * x / den;
            g[4 * l + k] += 2.0 * x / den;
        }
    }
    (value, grad)
}

/// `sigma_l = alpha ||delta_l|| / sum_k ||delta_k||`. When every row is
/// zero the allocation is uniform and the second value is `true`.
pub fn update_sigma(delta: &Array2<f64>, alpha: f64) -> (Array1<f64>, bool) {
    let norms: Array1<f64> = delta.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let total: f64 = norms.sum();
    let l = norms.len().max(1) as f64;
    if total > 0.0 && total.is_finite() {
        (norms.mapv(|n| alpha * n / total), false)
    } else {
        (Array1::from_elem(norms.len(), alpha / l), true)
    }
}

/// Stopping rules for the alternating loop.
#[derive(Debug, Clone, Copy)]
pub struct LcOptions {
    pub max_outer: usize,
    /// Stop when the objective changes by less than this fraction.
    pub rel_tol: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for LcOptions {
    fn default() -> Self {
        LcOptions {
            max_outer: 50,
            rel_tol: 1e-5,
            lbfgs: LbfgsOptions::default(),
        }
    }
}

/// Trace of one [`fit_combination`] call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcLog {
    /// Objective at the start and after each accepted outer iteration.
    pub objective: Vec<f64>,
    /// Validation metric per outer iteration, iteration 0 being the
    /// all-ones start.
    pub validation: Vec<ValidationPoint>,
    pub best_iteration: usize,
    pub best_value: Option<f64>,
    /// Outer iterations whose `sigma` fell back to uniform.
    pub sigma_fallbacks: usize,
}

/// One pre-sampled pair per training positive: observed negatives when the
/// set has truth flags, otherwise a single corruption of each positive.
pub fn sample_pairs(
    b: &BigramParams,
    tr: &TrigramParams,
    train: &TripleSet,
    cfg: &TrainConfig,
) -> Result<Vec<LcPair>> {
    let mut rng = stream_rng(cfg.seed, STREAM_DATA);
    let data = TrainingSet::new(train, &mut rng)?;
    let mut pos = data.positives().to_vec();
    let neg = match data.negatives() {
        Some(n) => {
            let mut n = n.to_vec();
            pos.shuffle(&mut rng);
            n.shuffle(&mut rng);
            n
        }
        None => {
            let single = TrainConfig {
                negatives_per_positive: 1,
                ..cfg.clone()
            };
            let mut out = Vec::with_capacity(1);
            let mut negs = Vec::with_capacity(pos.len());
            for &p in &pos {
                draw_negatives(
                    p,
                    &single,
                    b.num_entities(),
                    b.num_relations(),
                    &mut rng,
                    &mut out,
                )?;
                negs.push(out[0]);
            }
            negs
        }
    };
    let fp = precompute_features(b, tr, &pos)?;
    let fn_ = precompute_features(b, tr, &neg)?;
    Ok(pos
        .iter()
        .zip(fp.into_iter().zip(fn_))
        .map(|(p, (pf, nf))| LcPair {
            label: p.label,
            pos: pf,
            neg: nf,
        })
        .collect())
}

/// Fits combination weights with the default stopping rules.
pub fn fit_combination(
    b: &BigramParams,
    tr: &TrigramParams,
    train: &TripleSet,
    valid: Option<Validation<'_>>,
    cfg: &TrainConfig,
) -> Result<(CombinationWeights, LcLog)> {
    fit_combination_with(b, tr, train, valid, cfg, LcOptions::default())
}

/// Alternates a `delta` minimization with the `sigma` update, starting from
/// all-ones weights, and returns the weights that scored best on
/// validation (the last accepted ones without validation data).
///
/// An outer iteration is kept only if it does not raise the objective.
pub fn fit_combination_with(
    b: &BigramParams,
    tr: &TrigramParams,
    train: &TripleSet,
    valid: Option<Validation<'_>>,
    cfg: &TrainConfig,
    opts: LcOptions,
) -> Result<(CombinationWeights, LcLog)> {
    if !(cfg.alpha > 0.0 && cfg.epsilon > 0.0) {
        return Err(Error::config("alpha and epsilon must be > 0"));
    }
    let pairs = sample_pairs(b, tr, train, cfg)?;
    let nl = b.num_relations();
    let sample = valid.filter(|v| !v.set.is_empty()).map(|v| {
        let s = match cfg.validation_sample {
            Some(n) => stratified_sample(v.set, n, &mut stream_rng(cfg.seed, STREAM_VALID)),
            None => v.set.clone(),
        };
        (s, v.known)
    });

    let mut model = Model::linear_combination_from(b.clone(), tr.clone(), cfg.alpha)?;
    let mut w = CombinationWeights::ones(nl, cfg.alpha);
    let objective =
        |w: &CombinationWeights| lc_objective(&w.delta, &w.sigma, &pairs, cfg.gamma, cfg.epsilon).0;
    let mut current = objective(&w);
    let mut log = LcLog {
        objective: vec![current],
        validation: Vec::new(),
        best_iteration: 0,
        best_value: None,
        sigma_fallbacks: 0,
    };
    // Ties go to the later, longer-trained snapshot.
    let better = |a: f64, b: f64| match cfg.validation_metric.higher_is_better() {
        true => a >= b,
        false => a <= b,
    };
    let mut best = w.clone();
    let mut validate = |w: &CombinationWeights,
                        iter: usize,
                        log: &mut LcLog,
                        best: &mut CombinationWeights|
     -> Result<()> {
        let Some((set, known)) = &sample else {
            *best = w.clone();
            return Ok(());
        };
        if let Model::LinearCombination { weights, .. } = &mut model {
            *weights = w.clone();
        }
        let value = validation_value(&model, cfg.validation_metric, set, known)?;
        log.validation.push(ValidationPoint { epoch: iter, value });
        if log.best_value.is_none_or(|v| better(value, v)) {
            log.best_value = Some(value);
            log.best_iteration = iter;
            *best = w.clone();
        }
        Ok(())
    };
    validate(&w, 0, &mut log, &mut best)?;

    for iter in 1..=opts.max_outer {
        let sigma = w.sigma.clone();
        let f = |x: &[f64]| {
            let delta = Array2::from_shape_vec((nl, 4), x.to_vec()).expect("shape");
            let (v, g) = lc_objective(&delta, &sigma, &pairs, cfg.gamma, cfg.epsilon);
            (v, g.into_raw_vec_and_offset().0)
        };
        let x0 = w.delta.as_slice().expect("row-major weights").to_vec();
        let r = minimize(f, x0, opts.lbfgs);
        if !r.value.is_finite() {
            return Err(Error::Divergence {
                epoch: iter,
                batch: 0,
                detail: format!("linear-combination objective is {}", r.value),
            });
        }
        let delta = Array2::from_shape_vec((nl, 4), r.x).expect("shape");
        let (sigma, fallback) = update_sigma(&delta, cfg.alpha);
        if fallback {
            log::warn!("all combination weights are zero; using uniform sigma");
            log.sigma_fallbacks += 1;
        }
        let mut candidate = CombinationWeights {
            delta,
            sigma,
            alpha: cfg.alpha,
        };
        let mut value = objective(&candidate);
        if value > current {
            // The sigma step may not lower the objective when eps > 0; keep
            // the old allocation in that case.
            candidate.sigma = w.sigma.clone();
            value = objective(&candidate);
            if value > current {
                break;
            }
        }
        let change = (current - value).abs() / current.abs().max(f64::MIN_POSITIVE);
        log::debug!(
            "lc outer {iter}: objective {value:.6} ({} inner)",
            r.iterations
        );
        w = candidate;
        current = value;
        log.objective.push(value);
        validate(&w, iter, &mut log, &mut best)?;
        if change < opts.rel_tol {
            break;
        }
    }
    Ok((best, log))
}
