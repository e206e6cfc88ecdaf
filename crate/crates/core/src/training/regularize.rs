use crate::scoring::{Block, Model, ModelKind, SparseGrad};

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn project(x: &mut [f64], radius: f64) {
    let mut n = sq_norm(x).sqrt();
    if n > radius {
        let mut s = radius / n;
        // Rounding can leave the norm a hair above the radius; shrink until it
        // is not, so that projecting twice is a no-op.
        while n > radius {
            x.iter_mut().for_each(|v| *v *= s);
            n = sq_norm(x).sqrt();
            s = 1.0 - f64::EPSILON;
        }
    }
}

/// Projects one block if it is subject to a norm constraint.
pub(crate) fn project_block(block: Block, x: &mut [f64], rho_e: f64, rho_l: f64) {
    match block {
        Block::Entity(_) | Block::Entity2(_) => project(x, rho_e),
        Block::RelMatrix(_) => project(x, rho_l),
        _ => {}
    }
}

/// Rescales every entity row to norm at most `rho_e` and every relation
/// matrix to Frobenius norm at most `rho_l`. Relation vectors, translations
/// and the diagonal are left alone.
pub fn apply_hard_projection(model: &mut Model, rho_e: f64, rho_l: f64) {
    for block in model.all_blocks() {
        if let Some(x) = model.block_mut(block) {
            project_block(block, x, rho_e, rho_l);
        }
    }
}

/// Penalty weight and radius for `block`, if it is penalized.
///
/// Bigram-side and translation entity rows use `c1`, trigram entity rows
/// and relation matrices `c2`. A table shared by both terms carries both
/// penalties.
pub(crate) fn soft_coefficient(
    block: Block,
    shared: bool,
    c1: f64,
    c2: f64,
    rho_e: f64,
    rho_l: f64,
) -> Option<(f64, f64)> {
    let (c, rho) = match block {
        Block::Entity(_) if shared => (c1 + c2, rho_e),
        Block::Entity(_) => (c1, rho_e),
        Block::Entity2(_) => (c2, rho_e),
        Block::RelMatrix(_) => (c2, rho_l),
        _ => return None,
    };
    (c > 0.0).then_some((c, rho))
}

/// `g += 2 c x` when `||x||^2 > rho^2`.
pub(crate) fn add_soft_subgradient(x: &[f64], c: f64, rho: f64, g: &mut [f64]) {
    if sq_norm(x) > rho * rho {
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += 2.0 * c * xi;
        }
    }
}

/// Total hinged norm penalty over all entity rows and relation matrices, and
/// its subgradient on the violating blocks.
pub fn soft_penalty_terms(
    model: &Model,
    c1: f64,
    c2: f64,
    rho_e: f64,
    rho_l: f64,
) -> (f64, SparseGrad) {
    let shared = model.kind() == ModelKind::TatecFtShared;
    let mut value = 0.0;
    let mut g = SparseGrad::new();
    for block in model.all_blocks() {
        let Some((c, rho)) = soft_coefficient(block, shared, c1, c2, rho_e, rho_l) else {
            continue;
        };
        let x = model.block(block).expect("listed block exists");
        let excess = sq_norm(x) - rho * rho;
        if excess > 0.0 {
            value += c * excess;
            add_soft_subgradient(x, c, rho, g.slot(block, x.len()));
        }
    }
    (value, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{init_params, BigramParams, TrigramParams};
    use ndarray::{array, Array3};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bigram_with(rows: ndarray::Array2<f64>) -> Model {
        let mut b = BigramParams::zeros(rows.nrows(), 1, rows.ncols());
        b.entities = rows;
        Model::Bigram(b)
    }

    #[test]
    fn interior_rows_are_untouched() {
        let mut m = bigram_with(array![[0.3, 0.4], [3.0, 4.0]]);
        apply_hard_projection(&mut m, 1.0, 1.0);
        let b = m.bigram().unwrap();
        assert_eq!(b.entities.row(0).to_vec(), vec![0.3, 0.4]);
        assert!((b.entities[[1, 0]] - 0.6).abs() < 1e-15);
        assert!((b.entities[[1, 1]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn relation_vectors_are_never_projected() {
        let mut b = BigramParams::zeros(1, 1, 2);
        b.rel_head[[0, 0]] = 10.0;
        b.diag[0] = 7.0;
        let mut m = Model::Bigram(b);
        apply_hard_projection(&mut m, 1.0, 1.0);
        assert_eq!(m.bigram().unwrap().rel_head[[0, 0]], 10.0);
        assert_eq!(m.bigram().unwrap().diag[0], 7.0);
    }

    #[test]
    fn trigram_entity_penalty_hand_value() {
        let mut t = TrigramParams::zeros(1, 1, 2);
        t.entities = array![[1.0, 1.0]];
        let m = Model::Trigram(t);
        let (v, g) = soft_penalty_terms(&m, 0.0, 0.1, 1.0, 5.0);
        assert!((v - 0.1).abs() < 1e-15);
        let gr = g.get(Block::Entity2(0)).unwrap();
        assert!((gr[0] - 0.2).abs() < 1e-15 && (gr[1] - 0.2).abs() < 1e-15);
        assert!(g.get(Block::RelMatrix(0)).is_none());
    }

    #[test]
    fn inactive_penalty_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = init_params(crate::scoring::ModelKind::TatecFt, 3, 3, 5, 2, &mut rng).unwrap();
        let (v, g) = soft_penalty_terms(&m, 1.0, 1.0, 1.0 + 1e-9, 1.0 + 1e-9);
        assert_eq!(v, 0.0);
        assert!(g.is_empty());
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [
            ModelKind::Bigram,
            ModelKind::Trigram,
            ModelKind::TatecFt,
            ModelKind::TatecFtShared,
            ModelKind::Transe,
        ] {
            let mut m = init_params(kind, 3, 3, 4, 2, &mut rng).unwrap();
            // Push everything outside the balls.
            for b in m.all_blocks() {
                m.block_mut(b).unwrap().iter_mut().for_each(|v| *v *= 3.0);
            }
            let (c1, c2, re, rl) = (0.3, 0.7, 1.0, 1.5);
            let (_, g) = soft_penalty_terms(&m, c1, c2, re, rl);
            assert!(!g.is_empty());
            let h = 1e-5;
            for (&b, gv) in &g.blocks {
                for i in 0..gv.len() {
                    let orig = m.block(b).unwrap()[i];
                    m.block_mut(b).unwrap()[i] = orig + h;
                    let up = soft_penalty_terms(&m, c1, c2, re, rl).0;
                    m.block_mut(b).unwrap()[i] = orig - h;
                    let down = soft_penalty_terms(&m, c1, c2, re, rl).0;
                    m.block_mut(b).unwrap()[i] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let err = (fd - gv[i]).abs() / fd.abs().max(gv[i].abs()).max(1e-8);
                    assert!(err < 1e-4, "{kind} {b:?}[{i}]: fd {fd} vs {}", gv[i]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(
            data in prop::collection::vec(-10.0f64..10.0, 12),
            rho_e in 0.1f64..3.0,
            rho_l in 0.1f64..3.0,
        ) {
            let mut t = TrigramParams::zeros(2, 1, 2);
            t.entities = ndarray::Array2::from_shape_vec((2, 2), data[..4].to_vec()).unwrap();
            t.relations = Array3::from_shape_vec((1, 2, 2), data[4..8].to_vec()).unwrap();
            let mut m = Model::Trigram(t);
            apply_hard_projection(&mut m, rho_e, rho_l);
            let once = m.clone();
            apply_hard_projection(&mut m, rho_e, rho_l);
            prop_assert_eq!(&once, &m);
            for b in m.all_blocks() {
                let n = sq_norm(m.block(b).unwrap()).sqrt();
                let r = if matches!(b, Block::RelMatrix(_)) { rho_l } else { rho_e };
                prop_assert!(n <= r + 1e-9);
            }
        }
    }
}
