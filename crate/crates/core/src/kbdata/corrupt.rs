use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Triple;
use crate::error::{Error, Result};

/// How a positive triple is turned into a negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionStrategy {
    /// Head, label and tail all replaced by different values.
    AllDiffer,
    /// Exactly one of head or tail replaced; label kept.
    HeadOrTail,
    /// Only the label replaced.
    LabelOnly,
}

impl CorruptionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            CorruptionStrategy::AllDiffer => "all_differ",
            CorruptionStrategy::HeadOrTail => "head_or_tail",
            CorruptionStrategy::LabelOnly => "label_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all_differ" => Some(CorruptionStrategy::AllDiffer),
            "head_or_tail" => Some(CorruptionStrategy::HeadOrTail),
            "label_only" => Some(CorruptionStrategy::LabelOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Head,
    Tail,
}

/// Uniform draw from `[0, n)` excluding `skip`; requires `n >= 2`.
fn uniform_other<R: Rng + ?Sized>(n: usize, skip: usize, rng: &mut R) -> usize {
    let x = rng.gen_range(0..n - 1);
    if x >= skip {
        x + 1
    } else {
        x
    }
}

/// Draws one corrupted version of `t`. The positive set is not consulted, so
/// a drawn negative may occasionally be a true fact.
pub fn sample_corrupted<R: Rng + ?Sized>(
    t: Triple,
    strategy: CorruptionStrategy,
    num_entities: usize,
    num_relations: usize,
    rng: &mut R,
) -> Result<Triple> {
    let need_entities = matches!(
        strategy,
        CorruptionStrategy::AllDiffer | CorruptionStrategy::HeadOrTail
    );
    let need_relations = matches!(
        strategy,
        CorruptionStrategy::AllDiffer | CorruptionStrategy::LabelOnly
    );
    if need_entities && num_entities < 2 {
        return Err(Error::domain(format!(
            "{} corruption needs at least 2 entities, have {num_entities}",
            strategy.name()
        )));
    }
    if need_relations && num_relations < 2 {
        return Err(Error::domain(format!(
            "{} corruption needs at least 2 relations, have {num_relations}",
            strategy.name()
        )));
    }
    Ok(match strategy {
        CorruptionStrategy::AllDiffer => Triple::new(
            uniform_other(num_entities, t.head, rng),
            uniform_other(num_relations, t.label, rng),
            uniform_other(num_entities, t.tail, rng),
        ),
        CorruptionStrategy::HeadOrTail => {
            let side = if rng.gen_bool(0.5) {
                Side::Head
            } else {
                Side::Tail
            };
            corrupt_side(t, side, num_entities, rng)
        }
        CorruptionStrategy::LabelOnly => {
            Triple::new(t.head, uniform_other(num_relations, t.label, rng), t.tail)
        }
    })
}

/// Replaces the given side of `t` with a uniformly drawn different entity.
pub fn corrupt_side<R: Rng + ?Sized>(
    t: Triple,
    side: Side,
    num_entities: usize,
    rng: &mut R,
) -> Triple {
    match side {
        Side::Head => Triple::new(uniform_other(num_entities, t.head, rng), t.label, t.tail),
        Side::Tail => Triple::new(t.head, t.label, uniform_other(num_entities, t.tail, rng)),
    }
}

/// Replicates positives until there are as many as negatives.
///
/// Every positive appears `n / p` times; the `n % p` remaining slots go to
/// distinct positives chosen uniformly at random. Pairing with negatives is
/// left to the caller.
pub fn balance_positives<R: Rng + ?Sized>(
    positives: &[Triple],
    negatives: &[Triple],
    rng: &mut R,
) -> Result<Vec<Triple>> {
    if positives.is_empty() {
        return Err(Error::domain("cannot balance an empty positive set"));
    }
    if negatives.is_empty() {
        return Err(Error::domain(
            "cannot balance against an empty negative set",
        ));
    }
    let p = positives.len();
    let n = negatives.len();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / p {
        out.extend_from_slice(positives);
    }
    out.extend(positives.choose_multiple(rng, n % p).copied());
    Ok(out)
}
