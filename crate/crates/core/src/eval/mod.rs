//! Ranking metrics for link and label prediction, and AUC-PR for fully
//! observed knowledge bases.
//!
//! Ranks use the midrank convention: a target ties with `n` other
//! candidates gets `1 + higher + floor(n / 2)`.

mod auc;
mod report;

pub use auc::auc_pr;
pub use report::{
    CategoryMetrics, EvalReport, LabelMetrics, LinkMetrics, RankMetrics, SubsampleStats,
};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbdata::{classify_relations, RelationCategory, Side, Triple, TripleSet};
use crate::scoring::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    Raw,
    Filtered,
}

/// Midrank of `scores[target]`, ignoring candidates listed in `skip`
/// (other than the target itself).
fn midrank(scores: &[f64], target: usize, skip: &[usize]) -> usize {
    let s = scores[target];
    let (mut higher, mut tied) = (0usize, 0usize);
    for (i, &x) in scores.iter().enumerate() {
        if i == target {
            continue;
        }
        if x > s {
            higher += 1;
        } else if x == s {
            tied += 1;
        }
    }
    for &i in skip {
        if i == target {
            continue;
        }
        if scores[i] > s {
            higher -= 1;
        } else if scores[i] == s {
            tied -= 1;
        }
    }
    1 + higher + tied / 2
}

fn known_side<'a>(known: &'a TripleSet, t: Triple, side: Side) -> &'a [usize] {
    match side {
        Side::Head => known.heads_of(t.label, t.tail),
        Side::Tail => known.tails_of(t.label, t.head),
    }
}

fn side_scores<S: Scorer + ?Sized>(scorer: &S, t: Triple, side: Side, buf: &mut [f64]) {
    match side {
        Side::Head => scorer.score_heads(t.label, t.tail, buf),
        Side::Tail => scorer.score_tails(t.head, t.label, buf),
    }
}

/// Rank of the true head or tail of `t` among all entity substitutions.
///
/// In filtered mode, candidates that complete a triple of `known` are removed
/// first, the target excepted.
pub fn rank_entity<S: Scorer + ?Sized>(
    scorer: &S,
    t: Triple,
    side: Side,
    mode: RankMode,
    known: &TripleSet,
) -> usize {
    let mut buf = vec![0.0; scorer.num_entities()];
    side_scores(scorer, t, side, &mut buf);
    let target = match side {
        Side::Head => t.head,
        Side::Tail => t.tail,
    };
    match mode {
        RankMode::Raw => midrank(&buf, target, &[]),
        RankMode::Filtered => midrank(&buf, target, known_side(known, t, side)),
    }
}

/// Raw and filtered ranks of one test triple on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRanks {
    pub head_raw: usize,
    pub head_filtered: usize,
    pub tail_raw: usize,
    pub tail_filtered: usize,
}

/// Ranks every triple of `test`, in order. Scoring runs in parallel; the
/// result does not depend on the thread count.
pub fn entity_ranks<S: Scorer + ?Sized>(
    scorer: &S,
    test: &[Triple],
    known: &TripleSet,
) -> Vec<TripleRanks> {
    let e = scorer.num_entities();
    test.par_iter()
        .map_init(
            || vec![0.0; e],
            |buf, &t| {
                side_scores(scorer, t, Side::Head, buf);
                let head_raw = midrank(buf, t.head, &[]);
                let head_filtered = midrank(buf, t.head, known.heads_of(t.label, t.tail));
                side_scores(scorer, t, Side::Tail, buf);
                let tail_raw = midrank(buf, t.tail, &[]);
                let tail_filtered = midrank(buf, t.tail, known.tails_of(t.label, t.head));
                TripleRanks {
                    head_raw,
                    head_filtered,
                    tail_raw,
                    tail_filtered,
                }
            },
        )
        .collect()
}

fn rank_metrics(ranks: impl Iterator<Item = usize>, k: usize) -> RankMetrics {
    let (mut n, mut sum, mut hits) = (0usize, 0u64, 0usize);
    for r in ranks {
        n += 1;
        sum += r as u64;
        if r <= k {
            hits += 1;
        }
    }
    RankMetrics {
        mean_rank: sum as f64 / n.max(1) as f64,
        hits_at_k: 100.0 * hits as f64 / n.max(1) as f64,
        count: n,
    }
}

fn link_metrics(ranks: &[&TripleRanks], sides: &[Side], k: usize) -> LinkMetrics {
    let raw = |r: &TripleRanks, s: Side| match s {
        Side::Head => r.head_raw,
        Side::Tail => r.tail_raw,
    };
    let filt = |r: &TripleRanks, s: Side| match s {
        Side::Head => r.head_filtered,
        Side::Tail => r.tail_filtered,
    };
    LinkMetrics {
        raw: rank_metrics(
            ranks
                .iter()
                .flat_map(|r| sides.iter().map(move |&s| raw(r, s))),
            k,
        ),
        filtered: rank_metrics(
            ranks
                .iter()
                .flat_map(|r| sides.iter().map(move |&s| filt(r, s))),
            k,
        ),
    }
}

/// How test-set confidence intervals are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsample {
    None,
    /// `repeats` random splits of the test set into `parts` subsets.
    Splits {
        parts: usize,
        repeats: usize,
        seed: u64,
    },
}

impl Subsample {
    /// Four subsets, five repetitions.
    pub fn standard(seed: u64) -> Self {
        Subsample::Splits {
            parts: 4,
            repeats: 5,
            seed,
        }
    }
}

fn mean_std(xs: &[f64]) -> SubsampleStats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    SubsampleStats {
        mean,
        std: var.sqrt(),
    }
}

/// Head and tail prediction on `test`, with per-category breakdown.
///
/// `train` decides relation categories; relations missing from it are
/// classified on `known`.
pub fn eval_link_prediction<S: Scorer + ?Sized>(
    scorer: &S,
    test: &TripleSet,
    train: &TripleSet,
    known: &TripleSet,
    k: usize,
    subsample: Subsample,
) -> Result<EvalReport> {
    let test = test.positives();
    if test.is_empty() {
        return Err(Error::domain(
            "link prediction needs at least one test triple",
        ));
    }
    test.validate(scorer.num_entities(), scorer.num_relations())?;
    let ranks = entity_ranks(scorer, test.triples(), known);
    let all: Vec<&TripleRanks> = ranks.iter().collect();
    let both = [Side::Head, Side::Tail];
    let overall = link_metrics(&all, &both, k);

    let mut categories = classify_relations(train);
    for (l, c) in classify_relations(known) {
        categories.entry(l).or_insert(c);
    }
    let mut per_category = BTreeMap::new();
    for cat in RelationCategory::ALL {
        let members: Vec<&TripleRanks> = test
            .triples()
            .iter()
            .zip(&ranks)
            .filter(|(t, _)| categories.get(&t.label) == Some(&cat))
            .map(|(_, r)| r)
            .collect();
        if members.is_empty() {
            continue;
        }
        per_category.insert(
            cat,
            CategoryMetrics {
                triples: members.len(),
                relations: categories.values().filter(|&&c| c == cat).count(),
                head: link_metrics(&members, &[Side::Head], k),
                tail: link_metrics(&members, &[Side::Tail], k),
            },
        );
    }

    let subsample = match subsample {
        Subsample::None => None,
        Subsample::Splits {
            parts,
            repeats,
            seed,
        } => {
            if parts == 0 || repeats == 0 || parts > ranks.len() {
                return Err(Error::domain(format!(
                    "cannot split {} test triples into {parts} parts",
                    ranks.len()
                )));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut values: [Vec<f64>; 4] = Default::default();
            let mut idx: Vec<usize> = (0..ranks.len()).collect();
            for _ in 0..repeats {
                idx.shuffle(&mut rng);
                for p in 0..parts {
                    let lo = p * idx.len() / parts;
                    let hi = (p + 1) * idx.len() / parts;
                    let sub: Vec<&TripleRanks> = idx[lo..hi].iter().map(|&i| &ranks[i]).collect();
                    let m = link_metrics(&sub, &both, k);
                    values[0].push(m.raw.mean_rank);
                    values[1].push(m.filtered.mean_rank);
                    values[2].push(m.raw.hits_at_k);
                    values[3].push(m.filtered.hits_at_k);
                }
            }
            Some(report::LinkSubsample {
                mean_rank_raw: mean_std(&values[0]),
                mean_rank_filtered: mean_std(&values[1]),
                hits_at_k_raw: mean_std(&values[2]),
                hits_at_k_filtered: mean_std(&values[3]),
                parts,
                repeats,
                seed,
            })
        }
    };

    Ok(EvalReport {
        k,
        num_test: test.len(),
        link: Some(overall),
        per_category,
        link_subsample: subsample,
        ..EvalReport::default()
    })
}

/// Raw rank of the true label of `t` among all relation substitutions.
pub fn rank_label<S: Scorer + ?Sized>(scorer: &S, t: Triple) -> usize {
    let mut buf = vec![0.0; scorer.num_relations()];
    scorer.score_labels(t.head, t.tail, &mut buf);
    midrank(&buf, t.label, &[])
}

/// `floor(pct * L / 100)`, at least 1.
pub fn label_threshold(num_relations: usize, pct: usize) -> usize {
    (pct * num_relations / 100).max(1)
}

/// Label prediction in the raw setting: mean rank and the share of triples
/// whose label is ranked within the top `pct` percent of relations.
pub fn eval_label_prediction<S: Scorer + ?Sized>(
    scorer: &S,
    test: &TripleSet,
    pct: usize,
) -> Result<LabelMetrics> {
    let l = scorer.num_relations();
    if l < 2 {
        return Err(Error::domain(format!(
            "label prediction needs L >= 2, got {l}"
        )));
    }
    let test = test.positives();
    if test.is_empty() {
        return Err(Error::domain(
            "label prediction needs at least one test triple",
        ));
    }
    test.validate(scorer.num_entities(), l)?;
    let threshold = label_threshold(l, pct);
    let ranks: Vec<usize> = test
        .triples()
        .par_iter()
        .map_init(
            || vec![0.0; l],
            |buf, &t| {
                scorer.score_labels(t.head, t.tail, buf);
                midrank(buf, t.label, &[])
            },
        )
        .collect();
    let m = rank_metrics(ranks.into_iter(), threshold);
    Ok(LabelMetrics {
        mean_rank: m.mean_rank,
        hits: m.hits_at_k,
        pct,
        threshold,
        count: m.count,
    })
}

/// AUC-PR of `scorer` over a set carrying truth flags.
pub fn eval_auc<S: Scorer + ?Sized>(scorer: &S, set: &TripleSet) -> Result<f64> {
    let truth = set
        .truth()
        .ok_or_else(|| Error::domain("AUC-PR needs triples with truth flags"))?;
    set.validate(scorer.num_entities(), scorer.num_relations())?;
    let scores: Vec<f64> = set.triples().par_iter().map(|&t| scorer.score(t)).collect();
    auc_pr(&scores, truth)
}

/// `n` triples of `set` drawn without replacement, keeping the share of
/// positives (rounded to nearest) when truth flags are present.
pub fn stratified_sample<R: Rng + ?Sized>(set: &TripleSet, n: usize, rng: &mut R) -> TripleSet {
    if n >= set.len() {
        return set.clone();
    }
    let picked: Vec<usize> = match set.truth() {
        None => rand::seq::index::sample(rng, set.len(), n).into_vec(),
        Some(truth) => {
            let pos: Vec<usize> = (0..set.len()).filter(|&i| truth[i]).collect();
            let neg: Vec<usize> = (0..set.len()).filter(|&i| !truth[i]).collect();
            let mut n_pos = ((n as f64) * pos.len() as f64 / set.len() as f64).round() as usize;
            n_pos = n_pos.clamp(usize::from(!pos.is_empty()), pos.len());
            let n_neg = (n - n_pos).min(neg.len());
            let mut out: Vec<usize> = pos.choose_multiple(rng, n_pos).copied().collect();
            out.extend(neg.choose_multiple(rng, n_neg).copied());
            out.sort_unstable();
            out
        }
    };
    set.select(&picked)
}

#[cfg(test)]
mod tests;
