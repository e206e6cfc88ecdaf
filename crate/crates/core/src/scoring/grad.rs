use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};

use super::params::{dot, mat_t_vec, mat_vec, matrix, matrix_mut, row, row_mut};
use super::{Model, Scorer};
use crate::kbdata::Triple;

/// One independently updated parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    /// Row of the bigram entity table; also the single table of the shared
    /// and translation models.
    Entity(usize),
    /// Row of the trigram entity table.
    Entity2(usize),
    RelHead(usize),
    RelTail(usize),
    Diag,
    /// Trigram relation matrix.
    RelMatrix(usize),
    /// Translation vector of the baseline model.
    Translation(usize),
}

/// Which term a block belongs to, selecting its learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Bigram,
    Trigram,
}

impl Block {
    pub fn term(self) -> Term {
        match self {
            Block::Entity2(_) | Block::RelMatrix(_) => Term::Trigram,
            _ => Term::Bigram,
        }
    }

    pub fn is_entity(self) -> bool {
        matches!(self, Block::Entity(_) | Block::Entity2(_))
    }
}

/// Gradient restricted to the blocks touched by some triples.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    pub blocks: BTreeMap<Block, Vec<f64>>,
    /// Buffers released by [`SparseGrad::clear`], reused by later slots.
    spare: Vec<Vec<f64>>,
}

impl PartialEq for SparseGrad {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
    }
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn clear(&mut self) {
        let blocks = std::mem::take(&mut self.blocks);
        self.spare.extend(blocks.into_values());
    }

    pub fn get(&self, b: Block) -> Option<&[f64]> {
        self.blocks.get(&b).map(Vec::as_slice)
    }

    pub(crate) fn slot(&mut self, b: Block, len: usize) -> &mut [f64] {
        let spare = &mut self.spare;
        self.blocks.entry(b).or_insert_with(|| match spare.pop() {
            Some(mut v) => {
                v.clear();
                v.resize(len, 0.0);
                v
            }
            None => vec![0.0; len],
        })
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &SparseGrad, scale: f64) {
        for (&b, v) in &other.blocks {
            let s = self.slot(b, v.len());
            for (x, y) in s.iter_mut().zip(v) {
                *x += scale * y;
            }
        }
    }
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

#[allow(clippy::too_many_arguments)]
fn acc_bigram(
    ent: &Array2<f64>,
    rel_head: &Array2<f64>,
    rel_tail: &Array2<f64>,
    diag: &Array1<f64>,
    ent_block: fn(usize) -> Block,
    t: Triple,
    coeff: f64,
    w: [f64; 3],
    g: &mut SparseGrad,
) {
    let d = ent.ncols();
    let eh = row(ent, t.head);
    let et = row(ent, t.tail);
    let r1 = row(rel_head, t.label);
    let r2 = row(rel_tail, t.label);
    let dg = diag.as_slice().expect("contiguous");

    let gh = g.slot(ent_block(t.head), d);
    for i in 0..d {
        gh[i] += coeff * (w[0] * r1[i] + w[2] * dg[i] * et[i]);
    }
    let gt = g.slot(ent_block(t.tail), d);
    for i in 0..d {
        gt[i] += coeff * (w[1] * r2[i] + w[2] * dg[i] * eh[i]);
    }
    axpy(g.slot(Block::RelHead(t.label), d), coeff * w[0], eh);
    axpy(g.slot(Block::RelTail(t.label), d), coeff * w[1], et);
    let gd = g.slot(Block::Diag, d);
    for i in 0..d {
        gd[i] += coeff * w[2] * eh[i] * et[i];
    }
}

fn acc_trigram(
    ent: &Array2<f64>,
    rels: &Array3<f64>,
    ent_block: fn(usize) -> Block,
    t: Triple,
    coeff: f64,
    g: &mut SparseGrad,
) {
    let d = ent.ncols();
    let eh = row(ent, t.head);
    let et = row(ent, t.tail);
    let m = matrix(rels, t.label);
    let mut buf = vec![0.0; d];

    mat_vec(m, et, &mut buf);
    axpy(g.slot(ent_block(t.head), d), coeff, &buf);
    mat_t_vec(m, eh, &mut buf);
    axpy(g.slot(ent_block(t.tail), d), coeff, &buf);
    let gm = g.slot(Block::RelMatrix(t.label), d * d);
    for (i, grow) in gm.chunks_exact_mut(d).enumerate() {
        axpy(grow, coeff * eh[i], et);
    }
}

impl Model {
    /// Adds `coeff * d score(t) / d theta` to `g`.
    pub fn accumulate_grad(&self, t: Triple, coeff: f64, g: &mut SparseGrad) {
        match self {
            Model::Bigram(b) => acc_bigram(
                &b.entities,
                &b.rel_head,
                &b.rel_tail,
                &b.diag,
                Block::Entity,
                t,
                coeff,
                [1.0; 3],
                g,
            ),
            Model::Trigram(tr) => {
                acc_trigram(&tr.entities, &tr.relations, Block::Entity2, t, coeff, g)
            }
            Model::Combined {
                bigram: b,
                trigram: tr,
                ..
            } => {
                acc_bigram(
                    &b.entities,
                    &b.rel_head,
                    &b.rel_tail,
                    &b.diag,
                    Block::Entity,
                    t,
                    coeff,
                    [1.0; 3],
                    g,
                );
                acc_trigram(&tr.entities, &tr.relations, Block::Entity2, t, coeff, g);
            }
            Model::LinearCombination {
                bigram: b,
                trigram: tr,
                weights,
            } => {
                let w = weights.row(t.label);
                acc_bigram(
                    &b.entities,
                    &b.rel_head,
                    &b.rel_tail,
                    &b.diag,
                    Block::Entity,
                    t,
                    coeff,
                    [w[0], w[1], w[2]],
                    g,
                );
                acc_trigram(
                    &tr.entities,
                    &tr.relations,
                    Block::Entity2,
                    t,
                    coeff * w[3],
                    g,
                );
            }
            Model::Shared(s) => {
                acc_bigram(
                    &s.entities,
                    &s.rel_head,
                    &s.rel_tail,
                    &s.diag,
                    Block::Entity,
                    t,
                    coeff,
                    [1.0; 3],
                    g,
                );
                acc_trigram(&s.entities, &s.relations, Block::Entity, t, coeff, g);
            }
            Model::Transe(p) => {
                let d = p.dim();
                let mut v = vec![0.0; d];
                p.residual(t, &mut v);
                let norm = dot(&v, &v).sqrt();
                if norm == 0.0 {
                    // Non-differentiable point; take the zero subgradient.
                    return;
                }
                let s = coeff / norm;
                axpy(g.slot(Block::Entity(t.head), d), -s, &v);
                axpy(g.slot(Block::Translation(t.label), d), -s, &v);
                axpy(g.slot(Block::Entity(t.tail), d), s, &v);
            }
        }
    }

    /// Read access to one parameter block; `None` if the model has no such block.
    pub fn block(&self, b: Block) -> Option<&[f64]> {
        let (e1, e2, rh, rt, dg, rm, tr) = self.tables();
        fn r2(a: Option<&Array2<f64>>, i: usize) -> Option<&[f64]> {
            a.filter(|a| i < a.nrows()).map(|a| row(a, i))
        }
        match b {
            Block::Entity(i) => r2(e1, i),
            Block::Entity2(i) => r2(e2, i),
            Block::RelHead(l) => r2(rh, l),
            Block::RelTail(l) => r2(rt, l),
            Block::Translation(l) => r2(tr, l),
            Block::Diag => dg.map(|d| d.as_slice().expect("contiguous")),
            Block::RelMatrix(l) => rm.filter(|m| l < m.shape()[0]).map(|m| matrix(m, l)),
        }
    }

    /// Write access to one parameter block.
    pub fn block_mut(&mut self, b: Block) -> Option<&mut [f64]> {
        let (e1, e2, rh, rt, dg, rm, tr) = self.tables_mut();
        fn r2(a: Option<&mut Array2<f64>>, i: usize) -> Option<&mut [f64]> {
            a.filter(|a| i < a.nrows()).map(|a| row_mut(a, i))
        }
        match b {
            Block::Entity(i) => r2(e1, i),
            Block::Entity2(i) => r2(e2, i),
            Block::RelHead(l) => r2(rh, l),
            Block::RelTail(l) => r2(rt, l),
            Block::Translation(l) => r2(tr, l),
            Block::Diag => dg.map(|d| d.as_slice_mut().expect("contiguous")),
            Block::RelMatrix(l) => rm.filter(|m| l < m.shape()[0]).map(|m| matrix_mut(m, l)),
        }
    }

    /// Every block of the model, in a fixed order.
    pub fn all_blocks(&self) -> Vec<Block> {
        let (e1, e2, rh, rt, dg, rm, tr) = self.tables();
        let mut out = Vec::new();
        if let Some(a) = e1 {
            out.extend((0..a.nrows()).map(Block::Entity));
        }
        if let Some(a) = e2 {
            out.extend((0..a.nrows()).map(Block::Entity2));
        }
        if let Some(a) = rh {
            out.extend((0..a.nrows()).map(Block::RelHead));
        }
        if let Some(a) = rt {
            out.extend((0..a.nrows()).map(Block::RelTail));
        }
        if dg.is_some() {
            out.push(Block::Diag);
        }
        if let Some(a) = rm {
            out.extend((0..a.shape()[0]).map(Block::RelMatrix));
        }
        if let Some(a) = tr {
            out.extend((0..a.nrows()).map(Block::Translation));
        }
        out
    }

    #[allow(clippy::type_complexity)]
    fn tables(
        &self,
    ) -> (
        Option<&Array2<f64>>,
        Option<&Array2<f64>>,
        Option<&Array2<f64>>,
        Option<&Array2<f64>>,
        Option<&Array1<f64>>,
        Option<&Array3<f64>>,
        Option<&Array2<f64>>,
    ) {
        match self {
            Model::Bigram(b) => (
                Some(&b.entities),
                None,
                Some(&b.rel_head),
                Some(&b.rel_tail),
                Some(&b.diag),
                None,
                None,
            ),
            Model::Trigram(t) => (
                None,
                Some(&t.entities),
                None,
                None,
                None,
                Some(&t.relations),
                None,
            ),
            Model::Transe(p) => (
                Some(&p.entities),
                None,
                None,
                None,
                None,
                None,
                Some(&p.relations),
            ),
            Model::Combined {
                bigram: b,
                trigram: t,
                ..
            }
            | Model::LinearCombination {
                bigram: b,
                trigram: t,
                ..
            } => (
                Some(&b.entities),
                Some(&t.entities),
                Some(&b.rel_head),
                Some(&b.rel_tail),
                Some(&b.diag),
                Some(&t.relations),
                None,
            ),
            Model::Shared(s) => (
                Some(&s.entities),
                None,
                Some(&s.rel_head),
                Some(&s.rel_tail),
                Some(&s.diag),
                Some(&s.relations),
                None,
            ),
        }
    }

    #[allow(clippy::type_complexity)]
    fn tables_mut(
        &mut self,
    ) -> (
        Option<&mut Array2<f64>>,
        Option<&mut Array2<f64>>,
        Option<&mut Array2<f64>>,
        Option<&mut Array2<f64>>,
        Option<&mut Array1<f64>>,
        Option<&mut Array3<f64>>,
        Option<&mut Array2<f64>>,
    ) {
        match self {
            Model::Bigram(b) => (
                Some(&mut b.entities),
                None,
                Some(&mut b.rel_head),
                Some(&mut b.rel_tail),
                Some(&mut b.diag),
                None,
                None,
            ),
            Model::Trigram(t) => (
                None,
                Some(&mut t.entities),
                None,
                None,
                None,
                Some(&mut t.relations),
                None,
            ),
            Model::Transe(p) => (
                Some(&mut p.entities),
                None,
                None,
                None,
                None,
                None,
                Some(&mut p.relations),
            ),
            Model::Combined {
                bigram: b,
                trigram: t,
                ..
            }
            | Model::LinearCombination {
                bigram: b,
                trigram: t,
                ..
            } => (
                Some(&mut b.entities),
                Some(&mut t.entities),
                Some(&mut b.rel_head),
                Some(&mut b.rel_tail),
                Some(&mut b.diag),
                Some(&mut t.relations),
                None,
            ),
            Model::Shared(s) => (
                Some(&mut s.entities),
                None,
                Some(&mut s.rel_head),
                Some(&mut s.rel_tail),
                Some(&mut s.diag),
                Some(&mut s.relations),
                None,
            ),
        }
    }
}

/// `[gamma - s(pos) + s(neg)]_+`
pub fn hinge(model: &Model, pos: Triple, neg: Triple, gamma: f64) -> f64 {
    (gamma - model.score(pos) + model.score(neg)).max(0.0)
}

/// Subgradient of the pairwise margin loss over every block touched by
/// `pos` or `neg`; empty when the margin is already satisfied.
pub fn grad_pair(model: &Model, pos: Triple, neg: Triple, gamma: f64) -> SparseGrad {
    let mut g = SparseGrad::new();
    if gamma - model.score(pos) + model.score(neg) > 0.0 {
        model.accumulate_grad(pos, -1.0, &mut g);
        model.accumulate_grad(neg, 1.0, &mut g);
    }
    g
}
