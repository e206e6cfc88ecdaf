//! Scoring functions and their parameter containers.
//!
//! Every model scores a triple so that higher means more plausible. The
//! translation baseline returns a negated distance to fit that convention.

mod grad;
mod init;
mod params;

pub use grad::{grad_pair, hinge, Block, SparseGrad, Term};
pub use init::{init_params, uniform_init};
pub use params::{BigramParams, CombinationWeights, SharedParams, TransEParams, TrigramParams};

pub(crate) use params::{dot, mat_t_vec, mat_vec, matrix, row};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kbdata::Triple;

/// Model families handled by the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bigram,
    Trigram,
    Transe,
    /// Sum of pre-trained bigram and trigram terms, fine-tuned jointly.
    TatecFt,
    /// Same score as `TatecFt`, trained from random initialization.
    TatecFtNoPretrain,
    /// Sum of both terms sharing one entity table, trained from scratch.
    TatecFtShared,
    /// Frozen constituents combined with per-relation weights.
    TatecLc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Bigram,
        ModelKind::Trigram,
        ModelKind::Transe,
        ModelKind::TatecFt,
        ModelKind::TatecFtNoPretrain,
        ModelKind::TatecFtShared,
        ModelKind::TatecLc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bigram => "bigram",
            ModelKind::Trigram => "trigram",
            ModelKind::Transe => "transe",
            ModelKind::TatecFt => "tatec_ft",
            ModelKind::TatecFtNoPretrain => "tatec_ft_no_pretrain",
            ModelKind::TatecFtShared => "tatec_ft_shared",
            ModelKind::TatecLc => "tatec_lc",
        }
    }

    pub fn uses_bigram(self) -> bool {
        !matches!(self, ModelKind::Trigram | ModelKind::Transe)
    }

    pub fn uses_trigram(self) -> bool {
        !matches!(self, ModelKind::Bigram | ModelKind::Transe)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown model kind `{s}`")))
    }
}

/// Anything that assigns a plausibility score to triples over a fixed vocabulary.
pub trait Scorer: Sync {
    fn num_entities(&self) -> usize;
    fn num_relations(&self) -> usize;
    fn score(&self, t: Triple) -> f64;

    /// Scores `(head, label, x)` for every entity `x`.
    fn score_tails(&self, head: usize, label: usize, out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            *o = self.score(Triple::new(head, label, x));
        }
    }

    /// Scores `(x, label, tail)` for every entity `x`.
    fn score_heads(&self, label: usize, tail: usize, out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            *o = self.score(Triple::new(x, label, tail));
        }
    }

    /// Scores `(head, x, tail)` for every relation `x`.
    fn score_labels(&self, head: usize, tail: usize, out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            *o = self.score(Triple::new(head, x, tail));
        }
    }
}

/// A trained or trainable model with all of its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Bigram(BigramParams),
    Trigram(TrigramParams),
    Transe(TransEParams),
    /// Bigram + trigram with separate entity tables (`TatecFt` or `TatecFtNoPretrain`).
    Combined {
        kind: ModelKind,
        bigram: BigramParams,
        trigram: TrigramParams,
    },
    Shared(SharedParams),
    LinearCombination {
        bigram: BigramParams,
        trigram: TrigramParams,
        weights: CombinationWeights,
    },
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Bigram(_) => ModelKind::Bigram,
            Model::Trigram(_) => ModelKind::Trigram,
            Model::Transe(_) => ModelKind::Transe,
            Model::Combined { kind, .. } => *kind,
            Model::Shared(_) => ModelKind::TatecFtShared,
            Model::LinearCombination { .. } => ModelKind::TatecLc,
        }
    }

    /// Sum of two pre-trained constituents, ready for joint fine-tuning.
    pub fn fine_tune_from(bigram: BigramParams, trigram: TrigramParams) -> Result<Self> {
        check_constituents(&bigram, &trigram)?;
        Ok(Model::Combined {
            kind: ModelKind::TatecFt,
            bigram,
            trigram,
        })
    }

    /// Frozen constituents with all-ones combination weights.
    pub fn linear_combination_from(
        bigram: BigramParams,
        trigram: TrigramParams,
        alpha: f64,
    ) -> Result<Self> {
        check_constituents(&bigram, &trigram)?;
        let weights = CombinationWeights::ones(bigram.num_relations(), alpha);
        Ok(Model::LinearCombination {
            bigram,
            trigram,
            weights,
        })
    }

    /// `(d1, d2)`; zero for absent terms. The translation model reports its
    /// dimension as `d1`.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Model::Bigram(b) => (b.dim(), 0),
            Model::Trigram(t) => (0, t.dim()),
            Model::Transe(p) => (p.dim(), 0),
            Model::Combined {
                bigram, trigram, ..
            }
            | Model::LinearCombination {
                bigram, trigram, ..
            } => (bigram.dim(), trigram.dim()),
            Model::Shared(s) => (s.dim(), s.dim()),
        }
    }

    pub fn bigram(&self) -> Option<&BigramParams> {
        match self {
            Model::Bigram(b) => Some(b),
            Model::Combined { bigram, .. } | Model::LinearCombination { bigram, .. } => {
                Some(bigram)
            }
            _ => None,
        }
    }

    pub fn trigram(&self) -> Option<&TrigramParams> {
        match self {
            Model::Trigram(t) => Some(t),
            Model::Combined { trigram, .. } | Model::LinearCombination { trigram, .. } => {
                Some(trigram)
            }
            _ => None,
        }
    }

    pub fn weights(&self) -> Option<&CombinationWeights> {
        match self {
            Model::LinearCombination { weights, .. } => Some(weights),
            _ => None,
        }
    }

    fn check_triple(&self, t: Triple) -> Result<()> {
        let e = self.num_entities();
        let l = self.num_relations();
        if t.head >= e || t.tail >= e || t.label >= l {
            return Err(Error::domain(format!(
                "triple ({}, {}, {}) out of range for E={e}, L={l}",
                t.head, t.label, t.tail
            )));
        }
        Ok(())
    }

    /// Index-checked [`Scorer::score`].
    pub fn checked_score(&self, t: Triple) -> Result<f64> {
        self.check_triple(t)?;
        Ok(self.score(t))
    }

    /// The four sub-scores `(head-label, label-tail, head-tail, 3-way)` for
    /// models with separate constituents.
    pub fn sub_scores(&self, t: Triple) -> Option<[f64; 4]> {
        let (b, tr) = (self.bigram()?, self.trigram()?);
        let [a, c, d] = b.terms(t);
        Some([a, c, d, tr.score(t)])
    }

    /// Whether every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.blocks_iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn blocks_iter(&self) -> Box<dyn Iterator<Item = &[f64]> + '_> {
        fn a2(a: &ndarray::Array2<f64>) -> &[f64] {
            a.as_slice().expect("row-major parameters")
        }
        fn a3(a: &ndarray::Array3<f64>) -> &[f64] {
            a.as_slice().expect("row-major parameters")
        }
        fn a1(a: &ndarray::Array1<f64>) -> &[f64] {
            a.as_slice().expect("contiguous")
        }
        fn big(b: &BigramParams) -> [&[f64]; 4] {
            [
                a2(&b.entities),
                a2(&b.rel_head),
                a2(&b.rel_tail),
                a1(&b.diag),
            ]
        }
        fn tri(t: &TrigramParams) -> [&[f64]; 2] {
            [a2(&t.entities), a3(&t.relations)]
        }
        match self {
            Model::Bigram(b) => Box::new(big(b).into_iter()),
            Model::Trigram(t) => Box::new(tri(t).into_iter()),
            Model::Transe(p) => Box::new([a2(&p.entities), a2(&p.relations)].into_iter()),
            Model::Combined {
                bigram, trigram, ..
            } => Box::new(big(bigram).into_iter().chain(tri(trigram))),
            Model::LinearCombination {
                bigram,
                trigram,
                weights,
            } => Box::new(
                big(bigram)
                    .into_iter()
                    .chain(tri(trigram))
                    .chain([a2(&weights.delta), a1(&weights.sigma)]),
            ),
            Model::Shared(s) => Box::new(
                [
                    a2(&s.entities),
                    a2(&s.rel_head),
                    a2(&s.rel_tail),
                    a1(&s.diag),
                    a3(&s.relations),
                ]
                .into_iter(),
            ),
        }
    }
}

fn check_constituents(b: &BigramParams, t: &TrigramParams) -> Result<()> {
    if b.num_entities() != t.num_entities() || b.num_relations() != t.num_relations() {
        return Err(Error::domain(format!(
            "constituent vocabularies differ: bigram E={} L={}, trigram E={} L={}",
            b.num_entities(),
            b.num_relations(),
            t.num_entities(),
            t.num_relations()
        )));
    }
    Ok(())
}

/// `out[x] = c + <q, E[x]>` for every row of `E`.
fn affine_rows(ent: &ndarray::Array2<f64>, q: &[f64], c: f64, out: &mut [f64]) {
    let d = ent.ncols();
    let data = ent.as_slice().expect("row-major parameters");
    for (o, e) in out.iter_mut().zip(data.chunks_exact(d)) {
        *o = c + dot(q, e);
    }
}

fn add_affine_rows(ent: &ndarray::Array2<f64>, q: &[f64], out: &mut [f64]) {
    let d = ent.ncols();
    let data = ent.as_slice().expect("row-major parameters");
    for (o, e) in out.iter_mut().zip(data.chunks_exact(d)) {
        *o += dot(q, e);
    }
}

/// Query vector for the bigram term with the head (or tail) fixed:
/// `score(x) = <fixed_rel, e> + <other_rel + D o e, e_x>`.
fn bigram_query(
    b: &BigramParams,
    label: usize,
    fixed: usize,
    fixed_is_head: bool,
    w: [f64; 3],
) -> (f64, Vec<f64>) {
    let e = row(&b.entities, fixed);
    let diag = b.diag.as_slice().expect("contiguous");
    let (own, other, w_own, w_other) = if fixed_is_head {
        (row(&b.rel_head, label), row(&b.rel_tail, label), w[0], w[1])
    } else {
        (row(&b.rel_tail, label), row(&b.rel_head, label), w[1], w[0])
    };
    let c = w_own * dot(own, e);
    let q = other
        .iter()
        .zip(diag)
        .zip(e)
        .map(|((r, d), x)| w_other * r + w[2] * d * x)
        .collect();
    (c, q)
}

fn trigram_query(
    t: &TrigramParams,
    label: usize,
    fixed: usize,
    fixed_is_head: bool,
    w: f64,
) -> Vec<f64> {
    let e = row(&t.entities, fixed);
    let m = matrix(&t.relations, label);
    let mut q = vec![0.0; t.dim()];
    if fixed_is_head {
        mat_t_vec(m, e, &mut q);
    } else {
        mat_vec(m, e, &mut q);
    }
    if w != 1.0 {
        q.iter_mut().for_each(|v| *v *= w);
    }
    q
}

impl Model {
    fn score_entities(&self, label: usize, fixed: usize, fixed_is_head: bool, out: &mut [f64]) {
        match self {
            Model::Bigram(b) => {
                let (c, q) = bigram_query(b, label, fixed, fixed_is_head, [1.0; 3]);
                affine_rows(&b.entities, &q, c, out);
            }
            Model::Trigram(t) => {
                let q = trigram_query(t, label, fixed, fixed_is_head, 1.0);
                affine_rows(&t.entities, &q, 0.0, out);
            }
            Model::Combined {
                bigram, trigram, ..
            } => {
                let (c, q) = bigram_query(bigram, label, fixed, fixed_is_head, [1.0; 3]);
                affine_rows(&bigram.entities, &q, c, out);
                let q2 = trigram_query(trigram, label, fixed, fixed_is_head, 1.0);
                add_affine_rows(&trigram.entities, &q2, out);
            }
            Model::LinearCombination {
                bigram,
                trigram,
                weights,
            } => {
                let w = weights.row(label);
                let (c, q) = bigram_query(bigram, label, fixed, fixed_is_head, [w[0], w[1], w[2]]);
                affine_rows(&bigram.entities, &q, c, out);
                let q2 = trigram_query(trigram, label, fixed, fixed_is_head, w[3]);
                add_affine_rows(&trigram.entities, &q2, out);
            }
            Model::Shared(s) => {
                let e = row(&s.entities, fixed);
                let diag = s.diag.as_slice().expect("contiguous");
                let m = matrix(&s.relations, label);
                let (own, other) = if fixed_is_head {
                    (row(&s.rel_head, label), row(&s.rel_tail, label))
                } else {
                    (row(&s.rel_tail, label), row(&s.rel_head, label))
                };
                let mut q = vec![0.0; s.dim()];
                if fixed_is_head {
                    mat_t_vec(m, e, &mut q);
                } else {
                    mat_vec(m, e, &mut q);
                }
                for (((qi, r), d), x) in q.iter_mut().zip(other).zip(diag).zip(e) {
                    *qi += r + d * x;
                }
                affine_rows(&s.entities, &q, dot(own, e), out);
            }
            Model::Transe(_) => {
                for (x, o) in out.iter_mut().enumerate() {
                    let t = if fixed_is_head {
                        Triple::new(fixed, label, x)
                    } else {
                        Triple::new(x, label, fixed)
                    };
                    *o = self.score(t);
                }
            }
        }
    }
}

impl Scorer for Model {
    fn num_entities(&self) -> usize {
        match self {
            Model::Bigram(b) => b.num_entities(),
            Model::Trigram(t) => t.num_entities(),
            Model::Transe(p) => p.num_entities(),
            Model::Combined { bigram, .. } | Model::LinearCombination { bigram, .. } => {
                bigram.num_entities()
            }
            Model::Shared(s) => s.num_entities(),
        }
    }

    fn num_relations(&self) -> usize {
        match self {
            Model::Bigram(b) => b.num_relations(),
            Model::Trigram(t) => t.num_relations(),
            Model::Transe(p) => p.num_relations(),
            Model::Combined { bigram, .. } | Model::LinearCombination { bigram, .. } => {
                bigram.num_relations()
            }
            Model::Shared(s) => s.num_relations(),
        }
    }

    #[inline]
    fn score(&self, t: Triple) -> f64 {
        match self {
            Model::Bigram(b) => b.score(t),
            Model::Trigram(tr) => tr.score(t),
            Model::Transe(p) => p.score(t),
            Model::Combined {
                bigram, trigram, ..
            } => bigram.score(t) + trigram.score(t),
            Model::Shared(s) => s.score(t),
            Model::LinearCombination {
                bigram,
                trigram,
                weights,
            } => {
                let w = weights.row(t.label);
                let [a, b, c] = bigram.terms(t);
                w[0] * a + w[1] * b + w[2] * c + w[3] * trigram.score(t)
            }
        }
    }

    fn score_tails(&self, head: usize, label: usize, out: &mut [f64]) {
        self.score_entities(label, head, true, out);
    }

    fn score_heads(&self, label: usize, tail: usize, out: &mut [f64]) {
        self.score_entities(label, tail, false, out);
    }
}

/// Index-checked bigram score.
pub fn score_bigram(p: &BigramParams, t: Triple) -> Result<f64> {
    check(p.num_entities(), p.num_relations(), t)?;
    Ok(p.score(t))
}

/// Index-checked trigram score.
pub fn score_trigram(p: &TrigramParams, t: Triple) -> Result<f64> {
    check(p.num_entities(), p.num_relations(), t)?;
    Ok(p.score(t))
}

/// Index-checked sum of both terms.
pub fn score_ft(b: &BigramParams, tr: &TrigramParams, t: Triple) -> Result<f64> {
    Ok(score_bigram(b, t)? + score_trigram(tr, t)?)
}

/// Index-checked weighted combination of the four sub-scores.
pub fn score_lc(
    b: &BigramParams,
    tr: &TrigramParams,
    w: &CombinationWeights,
    t: Triple,
) -> Result<f64> {
    check(b.num_entities(), b.num_relations(), t)?;
    check(tr.num_entities(), tr.num_relations(), t)?;
    check(b.num_entities(), w.num_relations(), t)?;
    let d = w.row(t.label);
    let [x, y, z] = b.terms(t);
    Ok(d[0] * x + d[1] * y + d[2] * z + d[3] * tr.score(t))
}

/// Index-checked translation score `-||e_h + r_l - e_t||`.
pub fn score_transe(p: &TransEParams, t: Triple) -> Result<f64> {
    check(p.num_entities(), p.num_relations(), t)?;
    Ok(p.score(t))
}

fn check(e: usize, l: usize, t: Triple) -> Result<()> {
    if t.head >= e || t.tail >= e || t.label >= l {
        return Err(Error::domain(format!(
            "triple ({}, {}, {}) out of range for E={e}, L={l}",
            t.head, t.label, t.tail
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
