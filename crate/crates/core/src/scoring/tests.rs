use super::params::diag_form;
use super::*;
use approx::assert_relative_eq;
use ndarray::{array, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(h: usize, l: usize, tl: usize) -> Triple {
    Triple::new(h, l, tl)
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(11)
}

/// d1 = 2 example: e_h = (0.5, 0.5), e_t = (1, 0), r1 = (1, 0), r2 = (0, 1), D = (2, 1).
fn hand_bigram() -> BigramParams {
    BigramParams {
        entities: array![[0.5, 0.5], [1.0, 0.0]],
        rel_head: array![[1.0, 0.0]],
        rel_tail: array![[0.0, 1.0]],
        diag: array![2.0, 1.0],
    }
}

/// d2 = 2 example: e_h = (1, 0), R = ((0, 1), (1, 0)), e_t = (0, 1).
fn hand_trigram() -> TrigramParams {
    TrigramParams {
        entities: array![[1.0, 0.0], [0.0, 1.0]],
        relations: Array3::from_shape_vec((1, 2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap(),
    }
}

#[test]
fn bigram_hand_values() {
    let b = hand_bigram();
    assert_eq!(b.terms(t(0, 0, 1)), [0.5, 0.0, 1.0]);
    assert_eq!(score_bigram(&b, t(0, 0, 1)).unwrap(), 1.5);
    assert_eq!(
        score_bigram(&BigramParams::zeros(3, 2, 4), t(0, 1, 2)).unwrap(),
        0.0
    );
    assert!(score_bigram(&b, t(0, 1, 1)).is_err());
    assert!(score_bigram(&b, t(2, 0, 1)).is_err());
}

#[test]
fn trigram_hand_values() {
    let tr = hand_trigram();
    assert_eq!(score_trigram(&tr, t(0, 0, 1)).unwrap(), 1.0);
    assert_eq!(
        score_trigram(&TrigramParams::zeros(3, 2, 4), t(1, 1, 2)).unwrap(),
        0.0
    );
    assert!(score_trigram(&tr, t(0, 0, 5)).is_err());
}

#[test]
fn ft_and_lc_hand_values() {
    let (b, tr) = (hand_bigram(), hand_trigram());
    assert_eq!(score_ft(&b, &tr, t(0, 0, 1)).unwrap(), 2.5);
    let mut w = CombinationWeights::ones(1, 1.0);
    w.delta = array![[2.0, 0.0, 0.0, 0.0]];
    assert_eq!(score_lc(&b, &tr, &w, t(0, 0, 1)).unwrap(), 1.0);
    let zb = BigramParams::zeros(2, 1, 2);
    let zt = TrigramParams::zeros(2, 1, 2);
    assert_eq!(score_ft(&zb, &zt, t(0, 0, 1)).unwrap(), 0.0);
}

#[test]
fn transe_hand_values() {
    let p = TransEParams {
        entities: array![[0.0, 0.0], [1.0, 0.0]],
        relations: array![[1.0, 0.0]],
    };
    assert_eq!(score_transe(&p, t(0, 0, 1)).unwrap(), 0.0);
    assert_eq!(score_transe(&p, t(0, 0, 0)).unwrap(), -1.0);
    assert!(score_transe(&p, t(0, 3, 0)).is_err());
}

fn random_model(kind: ModelKind, e: usize, l: usize, d1: usize, d2: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = init_params(kind, d1, d2, e, l, &mut rng).unwrap();
    if let Model::LinearCombination { weights, .. } = &mut m {
        weights.delta.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
    }
    m
}

#[test]
fn transe_is_rotation_invariant() {
    let m = random_model(ModelKind::Transe, 6, 3, 2, 0, 5);
    let Model::Transe(p) = &m else { unreachable!() };
    let (s, c) = (0.3f64.sin(), 0.3f64.cos());
    let rot = array![[c, -s], [s, c]];
    let rotated = TransEParams {
        entities: p.entities.dot(&rot.t()),
        relations: p.relations.dot(&rot.t()),
    };
    for h in 0..6 {
        for tl in 0..6 {
            assert_relative_eq!(
                p.score(t(h, 1, tl)),
                rotated.score(t(h, 1, tl)),
                epsilon = 1e-12
            );
        }
    }
}

#[test]
fn diagonal_form_is_symmetric() {
    let mut rng = rng();
    for _ in 0..100 {
        let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert_relative_eq!(
            diag_form(&x, &d, &y),
            diag_form(&y, &d, &x),
            epsilon = 1e-14
        );
    }
}

#[test]
fn trigram_symmetry_under_swap() {
    let mut rng = rng();
    let d = 5;
    let raw = uniform_init(d, d, d, &mut rng);
    let sym = &raw + &raw.t();
    let anti = &raw - &raw.t();
    let ent = uniform_init(4, d, d, &mut rng);
    let mk = |m: &Array2<f64>| TrigramParams {
        entities: ent.clone(),
        relations: m.clone().into_shape_with_order((1, d, d)).unwrap(),
    };
    let (ps, pa) = (mk(&sym), mk(&anti));
    let eye = mk(&Array2::eye(d));
    for h in 0..4 {
        for tl in 0..4 {
            assert_relative_eq!(
                ps.score(t(h, 0, tl)),
                ps.score(t(tl, 0, h)),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                pa.score(t(h, 0, tl)),
                -pa.score(t(tl, 0, h)),
                epsilon = 1e-12
            );
            let ip = dot(row(&ent, h), row(&ent, tl));
            assert_relative_eq!(eye.score(t(h, 0, tl)), ip, epsilon = 1e-12);
        }
    }
}

#[test]
fn lc_with_identity_weights_equals_ft_and_selector_equals_trigram() {
    let m = random_model(ModelKind::TatecFt, 8, 3, 4, 5, 3);
    let (b, tr) = (m.bigram().unwrap().clone(), m.trigram().unwrap().clone());
    let ones = CombinationWeights::ones(3, 1.0);
    let mut sel = CombinationWeights::ones(3, 1.0);
    sel.delta.column_mut(0).fill(0.0);
    sel.delta.column_mut(1).fill(0.0);
    sel.delta.column_mut(2).fill(0.0);
    let mut rng = rng();
    for _ in 0..100 {
        let x = t(
            rng.gen_range(0..8),
            rng.gen_range(0..3),
            rng.gen_range(0..8),
        );
        let ft = score_ft(&b, &tr, x).unwrap();
        assert_relative_eq!(
            score_lc(&b, &tr, &ones, x).unwrap(),
            ft,
            max_relative = 1e-12
        );
        assert_eq!(m.score(x), b.score(x) + tr.score(x));
        assert_relative_eq!(
            score_lc(&b, &tr, &sel, x).unwrap(),
            tr.score(x),
            max_relative = 1e-12
        );
    }
}

#[test]
fn batch_candidate_scoring_matches_pointwise() {
    for kind in ModelKind::ALL {
        let (d1, d2) = if kind == ModelKind::TatecFtShared {
            (4, 4)
        } else {
            (4, 3)
        };
        let m = random_model(kind, 9, 3, d1, d2, 21);
        let mut out = vec![0.0; 9];
        for l in 0..3 {
            for fixed in 0..9 {
                m.score_tails(fixed, l, &mut out);
                for (x, &s) in out.iter().enumerate() {
                    assert_relative_eq!(
                        s,
                        m.score(t(fixed, l, x)),
                        max_relative = 1e-10,
                        epsilon = 1e-12
                    );
                }
                m.score_heads(l, fixed, &mut out);
                for (x, &s) in out.iter().enumerate() {
                    assert_relative_eq!(
                        s,
                        m.score(t(x, l, fixed)),
                        max_relative = 1e-10,
                        epsilon = 1e-12
                    );
                }
            }
        }
        let mut labels = vec![0.0; 3];
        m.score_labels(2, 5, &mut labels);
        for (l, &s) in labels.iter().enumerate() {
            assert_eq!(s, m.score(t(2, l, 5)));
        }
    }
}

#[test]
fn init_normalizes_entities_and_matrices_only() {
    let m = random_model(ModelKind::TatecFt, 30, 5, 6, 4, 1);
    let (b, tr) = (m.bigram().unwrap(), m.trigram().unwrap());
    for i in 0..30 {
        let n1 = dot(row(&b.entities, i), row(&b.entities, i)).sqrt();
        let n2 = dot(row(&tr.entities, i), row(&tr.entities, i)).sqrt();
        assert!((n1 - 1.0).abs() < 1e-12 && (n2 - 1.0).abs() < 1e-12);
    }
    for l in 0..5 {
        let mm = matrix(&tr.relations, l);
        assert!((dot(mm, mm).sqrt() - 1.0).abs() < 1e-12);
    }
    let bound = 6.0 / 6f64.sqrt();
    assert!(b
        .rel_head
        .iter()
        .chain(b.rel_tail.iter())
        .chain(b.diag.iter())
        .all(|v| v.abs() <= bound));
    let raw_norm = dot(row(&b.rel_head, 0), row(&b.rel_head, 0)).sqrt();
    assert!((raw_norm - 1.0).abs() > 1e-6);
}

#[test]
fn uniform_init_bounds_and_mean() {
    let d = 16;
    let a = uniform_init(1000, 100, d, &mut rng());
    let bound = 6.0 / (d as f64).sqrt();
    assert!(a.iter().all(|v| v.abs() <= bound));
    let n = a.len() as f64;
    let mean = a.sum() / n;
    // uniform(-b, b) has variance b^2 / 3
    let sigma = (bound * bound / 3.0 / n).sqrt();
    assert!(
        mean.abs() <= 3.0 * sigma,
        "mean {mean} vs 3 sigma {}",
        3.0 * sigma
    );
}

#[test]
fn shared_requires_equal_dims() {
    assert!(init_params(ModelKind::TatecFtShared, 4, 5, 3, 2, &mut rng()).is_err());
    assert!(init_params(ModelKind::Bigram, 0, 5, 3, 2, &mut rng()).is_err());
}

#[test]
fn satisfied_margin_gives_empty_gradient() {
    let m = Model::Bigram(hand_bigram());
    // s(pos) = 1.5; neg (1, 0, 0): <r1,(1,0)> + <r2,(0.5,0.5)> + 2*1*0.5 = 1 + 0.5 + 1 = 2.5
    assert!(grad_pair(&m, t(1, 0, 0), t(0, 0, 1), 0.5).is_empty());
    assert!(!grad_pair(&m, t(0, 0, 1), t(1, 0, 0), 0.5).is_empty());
}

#[test]
fn bigram_relation_gradient_closed_form() {
    // Shared label, active hinge: dloss/dr1 = e_neg_head - e_pos_head.
    let m = random_model(ModelKind::Bigram, 6, 2, 3, 0, 9);
    let (pos, neg) = (t(0, 1, 2), t(3, 1, 4));
    let g = grad_pair(&m, pos, neg, 100.0);
    let Model::Bigram(b) = &m else { unreachable!() };
    let got = g.get(Block::RelHead(1)).unwrap();
    for i in 0..3 {
        assert_relative_eq!(
            got[i],
            b.entities[[3, i]] - b.entities[[0, i]],
            epsilon = 1e-14
        );
    }
    let got = g.get(Block::RelTail(1)).unwrap();
    for i in 0..3 {
        assert_relative_eq!(
            got[i],
            b.entities[[4, i]] - b.entities[[2, i]],
            epsilon = 1e-14
        );
    }
}

/// Central differences of the hinge loss over every touched coordinate.
fn check_fd(model: &Model, pos: Triple, neg: Triple, gamma: f64) {
    let g = grad_pair(model, pos, neg, gamma);
    assert!(!g.is_empty());
    let h = 1e-5;
    let mut probe = model.clone();
    for (&block, analytic) in &g.blocks {
        for i in 0..analytic.len() {
            let orig = probe.block(block).unwrap()[i];
            probe.block_mut(block).unwrap()[i] = orig + h;
            let up = hinge(&probe, pos, neg, gamma);
            probe.block_mut(block).unwrap()[i] = orig - h;
            let down = hinge(&probe, pos, neg, gamma);
            probe.block_mut(block).unwrap()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs());
            if scale > 1e-7 {
                assert!(
                    (analytic[i] - numeric).abs() / scale < 1e-4,
                    "{:?} {block:?}[{i}]: analytic {} numeric {numeric}",
                    model.kind(),
                    analytic[i]
                );
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = rng();
    for kind in ModelKind::ALL {
        let (d1, d2) = if kind == ModelKind::TatecFtShared {
            (4, 4)
        } else {
            (4, 3)
        };
        for trial in 0..10 {
            let m = random_model(kind, 7, 3, d1, d2, 100 + trial);
            let pos = t(
                rng.gen_range(0..7),
                rng.gen_range(0..3),
                rng.gen_range(0..7),
            );
            let neg = t(
                rng.gen_range(0..7),
                rng.gen_range(0..3),
                rng.gen_range(0..7),
            );
            let gamma = 5.0 + (m.score(pos) - m.score(neg)).abs();
            check_fd(&m, pos, neg, gamma);
        }
    }
}

#[test]
fn block_access_and_bounds() {
    let mut m = random_model(ModelKind::TatecFt, 5, 2, 3, 2, 4);
    assert_eq!(m.block(Block::Entity(4)).unwrap().len(), 3);
    assert_eq!(m.block(Block::Entity2(4)).unwrap().len(), 2);
    assert_eq!(m.block(Block::RelMatrix(1)).unwrap().len(), 4);
    assert!(m.block(Block::Entity(5)).is_none());
    assert!(m.block(Block::Translation(0)).is_none());
    m.block_mut(Block::Diag).unwrap()[0] = 7.0;
    assert_eq!(m.bigram().unwrap().diag[0], 7.0);
    assert_eq!(m.all_blocks().len(), 5 + 5 + 2 + 2 + 1 + 2);
    assert!(m.all_finite());
    m.block_mut(Block::RelHead(0)).unwrap()[1] = f64::NAN;
    assert!(!m.all_finite());
}

#[test]
fn shared_entity_table_is_aliased() {
    let mut m = random_model(ModelKind::TatecFtShared, 5, 2, 3, 3, 8);
    let x = t(1, 0, 2);
    let Model::Shared(s) = &m else { unreachable!() };
    let (b0, t0) = (s.bigram_score(x), s.trigram_score(x));
    m.block_mut(Block::Entity(1))
        .unwrap()
        .iter_mut()
        .for_each(|v| *v += 0.5);
    let Model::Shared(s) = &m else { unreachable!() };
    assert_ne!(s.bigram_score(x), b0);
    assert_ne!(s.trigram_score(x), t0);
}

#[test]
fn model_kind_names_round_trip() {
    for k in ModelKind::ALL {
        assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
    }
    assert!("rescal".parse::<ModelKind>().is_err());
}

#[test]
fn scores_finite_for_finite_params() {
    let mut rng = rng();
    for kind in ModelKind::ALL {
        let m = random_model(kind, 6, 2, 3, 3, 2);
        for _ in 0..50 {
            let x = t(
                rng.gen_range(0..6),
                rng.gen_range(0..2),
                rng.gen_range(0..6),
            );
            assert!(m.score(x).is_finite());
        }
    }
}
