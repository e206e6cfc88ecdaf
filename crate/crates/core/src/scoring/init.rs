use ndarray::{Array1, Array2, Array3};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::params::{matrix_mut, row_mut};
use super::{
    BigramParams, CombinationWeights, Model, ModelKind, SharedParams, TransEParams, TrigramParams,
};
use crate::error::{Error, Result};

/// `rows x cols` entries drawn from `uniform(-6/sqrt(d), 6/sqrt(d))`.
pub fn uniform_init<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    d: usize,
    rng: &mut R,
) -> Array2<f64> {
    let bound = 6.0 / (d as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn unit_rows<R: Rng + ?Sized>(rows: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut a = uniform_init(rows, d, d, rng);
    for i in 0..rows {
        normalize(row_mut(&mut a, i));
    }
    a
}

fn unit_matrices<R: Rng + ?Sized>(count: usize, d: usize, rng: &mut R) -> Array3<f64> {
    let flat = uniform_init(count, d * d, d, rng);
    let mut a = flat.into_shape_with_order((count, d, d)).expect("shape");
    for l in 0..count {
        normalize(matrix_mut(&mut a, l));
    }
    a
}

fn bigram<R: Rng + ?Sized>(e: usize, l: usize, d: usize, rng: &mut R) -> BigramParams {
    BigramParams {
        entities: unit_rows(e, d, rng),
        rel_head: uniform_init(l, d, d, rng),
        rel_tail: uniform_init(l, d, d, rng),
        diag: uniform_init(1, d, d, rng)
            .into_shape_with_order(d)
            .expect("shape"),
    }
}

fn trigram<R: Rng + ?Sized>(e: usize, l: usize, d: usize, rng: &mut R) -> TrigramParams {
    TrigramParams {
        entities: unit_rows(e, d, rng),
        relations: unit_matrices(l, d, rng),
    }
}

/// Random initialization for `kind`.
///
/// Entries are uniform in `+-6/sqrt(d)` for the owning term's dimension;
/// entity rows and relation matrices are then rescaled to unit norm. Relation
/// vectors and the diagonal keep their raw draws. A linear combination starts
/// from random constituents with all-ones weights and `alpha = 1`.
pub fn init_params<R: Rng + ?Sized>(
    kind: ModelKind,
    d1: usize,
    d2: usize,
    num_entities: usize,
    num_relations: usize,
    rng: &mut R,
) -> Result<Model> {
    let need = |d: usize, name: &str| {
        if d == 0 {
            Err(Error::config(format!("{kind} requires {name} >= 1")))
        } else {
            Ok(())
        }
    };
    let (e, l) = (num_entities, num_relations);
    Ok(match kind {
        ModelKind::Bigram => {
            need(d1, "d1")?;
            Model::Bigram(bigram(e, l, d1, rng))
        }
        ModelKind::Trigram => {
            need(d2, "d2")?;
            Model::Trigram(trigram(e, l, d2, rng))
        }
        ModelKind::Transe => {
            need(d1, "d1")?;
            Model::Transe(TransEParams {
                entities: unit_rows(e, d1, rng),
                relations: uniform_init(l, d1, d1, rng),
            })
        }
        ModelKind::TatecFt | ModelKind::TatecFtNoPretrain => {
            need(d1, "d1")?;
            need(d2, "d2")?;
            let b = bigram(e, l, d1, rng);
            let t = trigram(e, l, d2, rng);
            Model::Combined {
                kind,
                bigram: b,
                trigram: t,
            }
        }
        ModelKind::TatecFtShared => {
            need(d1, "d1")?;
            if d1 != d2 {
                return Err(Error::config(format!(
                    "tatec_ft_shared requires d1 == d2, got {d1} and {d2}"
                )));
            }
            let d = d1;
            let entities = unit_rows(e, d, rng);
            let rel_head = uniform_init(l, d, d, rng);
            let rel_tail = uniform_init(l, d, d, rng);
            let diag: Array1<f64> = uniform_init(1, d, d, rng)
                .into_shape_with_order(d)
                .expect("shape");
            let relations = unit_matrices(l, d, rng);
            Model::Shared(SharedParams {
                entities,
                rel_head,
                rel_tail,
                diag,
                relations,
            })
        }
        ModelKind::TatecLc => {
            need(d1, "d1")?;
            need(d2, "d2")?;
            Model::LinearCombination {
                bigram: bigram(e, l, d1, rng),
                trigram: trigram(e, l, d2, rng),
                weights: CombinationWeights::ones(l, 1.0),
            }
        }
    })
}
