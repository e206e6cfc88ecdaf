use std::collections::HashMap;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scoring::{init_params, Model, ModelKind};

/// Scores looked up in a table; missing triples score 0.
struct Table {
    e: usize,
    l: usize,
    scores: HashMap<Triple, f64>,
}

impl Scorer for Table {
    fn num_entities(&self) -> usize {
        self.e
    }
    fn num_relations(&self) -> usize {
        self.l
    }
    fn score(&self, t: Triple) -> f64 {
        self.scores.get(&t).copied().unwrap_or(0.0)
    }
}

/// Applies `f` to another scorer's output.
struct Mapped<'a, S: Scorer>(&'a S, fn(f64) -> f64);

impl<S: Scorer> Scorer for Mapped<'_, S> {
    fn num_entities(&self) -> usize {
        self.0.num_entities()
    }
    fn num_relations(&self) -> usize {
        self.0.num_relations()
    }
    fn score(&self, t: Triple) -> f64 {
        (self.1)(self.0.score(t))
    }
}

fn t(h: usize, l: usize, tl: usize) -> Triple {
    Triple::new(h, l, tl)
}

fn tail_table(scores: &[f64]) -> Table {
    let map = scores
        .iter()
        .enumerate()
        .map(|(x, &s)| (t(0, 0, x), s))
        .collect();
    Table {
        e: scores.len(),
        l: 1,
        scores: map,
    }
}

#[test]
fn unique_max_ranks_first() {
    let s = tail_table(&[0.1, 0.2, 0.9, 0.3]);
    let known = TripleSet::new(vec![t(0, 0, 0), t(0, 0, 1)]);
    for mode in [RankMode::Raw, RankMode::Filtered] {
        assert_eq!(rank_entity(&s, t(0, 0, 2), Side::Tail, mode, &known), 1);
    }
}

#[test]
fn filtering_removes_known_competitors() {
    // Target (tail 0) scores 0.4 against {0.9, 0.6, 0.3, 0.1}.
    let s = tail_table(&[0.4, 0.9, 0.6, 0.3, 0.1]);
    let none = TripleSet::default();
    assert_eq!(
        rank_entity(&s, t(0, 0, 0), Side::Tail, RankMode::Raw, &none),
        3
    );
    let known = TripleSet::new(vec![t(0, 0, 1), t(0, 0, 0)]);
    assert_eq!(
        rank_entity(&s, t(0, 0, 0), Side::Tail, RankMode::Filtered, &known),
        2
    );
    assert_eq!(
        rank_entity(&s, t(0, 0, 0), Side::Tail, RankMode::Raw, &known),
        3
    );
}

#[test]
fn ties_use_midrank() {
    // One higher, three tied with the target.
    let s = tail_table(&[0.5, 0.5, 0.9, 0.5, 0.5]);
    let none = TripleSet::default();
    assert_eq!(
        rank_entity(&s, t(0, 0, 0), Side::Tail, RankMode::Raw, &none),
        1 + 1 + 1
    );
    let s = tail_table(&[0.5, 0.5, 0.5]);
    assert_eq!(
        rank_entity(&s, t(0, 0, 1), Side::Tail, RankMode::Raw, &none),
        2
    );
}

#[test]
fn random_scorer_mean_rank_is_central() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let e = 50;
    let trials = 4000;
    let none = TripleSet::default();
    let mut sum = 0.0;
    for _ in 0..trials {
        let scores: Vec<f64> = (0..e).map(|_| rng.gen()).collect();
        sum += rank_entity(
            &tail_table(&scores),
            t(0, 0, 7),
            Side::Tail,
            RankMode::Raw,
            &none,
        ) as f64;
    }
    let mean = sum / trials as f64;
    let expected = (e as f64 + 1.0) / 2.0;
    let sigma = (((e * e - 1) as f64) / 12.0 / trials as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * sigma, "mean rank {mean}");
}

#[test]
fn label_threshold_floors() {
    assert_eq!(label_threshold(4547, 5), 227);
    assert_eq!(label_threshold(20, 5), 1);
    assert_eq!(label_threshold(10, 5), 1);
    assert_eq!(label_threshold(100, 5), 5);
}

#[test]
fn label_rank_one_is_hit_at_small_l() {
    let mut scores = HashMap::new();
    for l in 0..20 {
        scores.insert(t(0, l, 1), if l == 4 { 1.0 } else { 0.0 });
    }
    let s = Table {
        e: 2,
        l: 20,
        scores,
    };
    assert_eq!(rank_label(&s, t(0, 4, 1)), 1);
    let m = eval_label_prediction(&s, &TripleSet::new(vec![t(0, 4, 1)]), 5).unwrap();
    assert_eq!(m.threshold, 1);
    assert_eq!(m.hits, 100.0);
}

#[test]
fn perfect_scorer_metrics() {
    let test = TripleSet::new(vec![t(0, 0, 1), t(2, 0, 3), t(1, 0, 2)]);
    let scores = test.triples().iter().map(|&x| (x, 1.0)).collect();
    let s = Table { e: 4, l: 1, scores };
    // Raw ranks may be hurt by other test triples; filtered ranks are not.
    let r = eval_link_prediction(&s, &test, &test, &test, 10, Subsample::None).unwrap();
    let l = r.link.unwrap();
    assert_eq!(l.filtered.mean_rank, 1.0);
    assert_eq!(l.filtered.hits_at_k, 100.0);
    assert_eq!(l.raw.hits_at_k, 100.0);
}

#[test]
fn empty_test_is_rejected() {
    let s = tail_table(&[0.0, 1.0]);
    let empty = TripleSet::default();
    assert!(eval_link_prediction(&s, &empty, &empty, &empty, 10, Subsample::None).is_err());
}

fn random_kb(rng: &mut ChaCha8Rng, e: usize, l: usize, n: usize) -> TripleSet {
    let mut v: Vec<Triple> = (0..n)
        .map(|_| {
            t(
                rng.gen_range(0..e),
                rng.gen_range(0..l),
                rng.gen_range(0..e),
            )
        })
        .collect();
    v.sort();
    v.dedup();
    TripleSet::new(v)
}

/// Straightforward per-candidate ranking straight from the definition.
fn naive_rank(s: &dyn Scorer, x: Triple, head: bool, filtered: bool, known: &TripleSet) -> usize {
    let st = s.score(x);
    let (mut higher, mut tied) = (0, 0);
    for c in 0..s.num_entities() {
        let cand = if head {
            t(c, x.label, x.tail)
        } else {
            t(x.head, x.label, c)
        };
        if cand == x || (filtered && known.contains(&cand)) {
            continue;
        }
        let sc = s.score(cand);
        if sc > st {
            higher += 1;
        } else if sc == st {
            tied += 1;
        }
    }
    1 + higher + tied / 2
}

fn naive_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let p = labels.iter().filter(|&&y| y).count() as f64;
    let mut pts = vec![(0.0, 1.0)];
    for th in thresholds {
        let tp = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &y)| s >= th && y)
            .count() as f64;
        let all = scores.iter().filter(|&&s| s >= th).count() as f64;
        pts.push((tp / p, tp / all));
    }
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Scores rounded to a coarse grid so that ties actually occur.
fn coarse(x: f64) -> f64 {
    (x * 4.0).round()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimized_path_equals_exhaustive_oracle(
        seed in any::<u64>(),
        e in 2usize..=20,
        l in 1usize..=5,
        kind_ix in 0usize..ModelKind::ALL.len(),
        quantize in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = ModelKind::ALL[kind_ix];
        let model = init_params(kind, 3, 3, e, l, &mut rng).unwrap();
        let q = Mapped(&model, coarse);
        let s: &dyn Scorer = if quantize { &q } else { &model };
        let known = random_kb(&mut rng, e, l, 3 * e);
        let test = known.select(&(0..known.len()).filter(|i| i % 2 == 0).collect::<Vec<_>>());
        let k = 3;

        let report = eval_link_prediction(s, &test, &known, &known, k, Subsample::None).unwrap();
        let mut raw = Vec::new();
        let mut filt = Vec::new();
        for &x in test.triples() {
            for head in [true, false] {
                raw.push(naive_rank(s, x, head, false, &known));
                filt.push(naive_rank(s, x, head, true, &known));
            }
        }
        let mr = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        let hits = |v: &[usize]| 100.0 * v.iter().filter(|&&r| r <= k).count() as f64 / v.len() as f64;
        let link = report.link.unwrap();
        prop_assert_eq!(link.raw.mean_rank, mr(&raw));
        prop_assert_eq!(link.filtered.mean_rank, mr(&filt));
        prop_assert_eq!(link.raw.hits_at_k, hits(&raw));
        prop_assert_eq!(link.filtered.hits_at_k, hits(&filt));
        for (r, f) in raw.iter().zip(&filt) {
            prop_assert!(f <= r);
        }

        // AUC over the whole closed-world tensor.
        let full = crate::kbdata::closed_world_tensor(&known, e, l);
        let scores: Vec<f64> = full.triples().iter().map(|&x| s.score(x)).collect();
        let truth = full.truth().unwrap();
        if truth.iter().any(|&y| !y) {
            let a = eval_auc(s, &full).unwrap();
            prop_assert!((a - naive_auc(&scores, truth)).abs() < 1e-12);
        }

        if l >= 2 {
            let m = eval_label_prediction(s, &test, 5).unwrap();
            let naive: Vec<usize> = test.triples().iter().map(|&x| {
                let st = s.score(x);
                let (mut hi, mut ti) = (0, 0);
                for c in 0..l {
                    if c == x.label { continue; }
                    let sc = s.score(t(x.head, c, x.tail));
                    if sc > st { hi += 1 } else if sc == st { ti += 1 }
                }
                1 + hi + ti / 2
            }).collect();
            prop_assert_eq!(m.mean_rank, mr(&naive));
        }
    }

    #[test]
    fn ranks_invariant_under_monotone_maps(seed in any::<u64>(), e in 2usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = init_params(ModelKind::Bigram, 4, 0, e, 2, &mut rng).unwrap();
        let mapped = Mapped(&model, |x| 3.0 * x.powi(3) - 1.0);
        let known = random_kb(&mut rng, e, 2, 2 * e);
        let a = entity_ranks(&model, known.triples(), &known);
        let b = entity_ranks(&mapped, known.triples(), &known);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn category_hits_average_to_overall() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (e, l) = (40, 6);
    let model = init_params(ModelKind::TatecFt, 5, 5, e, l, &mut rng).unwrap();
    let train = random_kb(&mut rng, e, l, 300);
    let test = random_kb(&mut rng, e, l, 120);
    let known = TripleSet::union_positives(&[&train, &test]);
    let r = eval_link_prediction(&model, &test, &train, &known, 10, Subsample::None).unwrap();
    let total: usize = r.per_category.values().map(|m| m.triples).sum();
    assert_eq!(total, test.len());
    let weighted: f64 = r
        .per_category
        .values()
        .map(|m| m.triples as f64 * (m.head.filtered.hits_at_k + m.tail.filtered.hits_at_k) / 2.0)
        .sum::<f64>()
        / total as f64;
    assert_relative_eq!(weighted, r.link.unwrap().filtered.hits_at_k, epsilon = 1e-9);
}

#[test]
fn subsampling_reports_twenty_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model: Model = init_params(ModelKind::Trigram, 0, 4, 30, 3, &mut rng).unwrap();
    let test = random_kb(&mut rng, 30, 3, 100);
    let r = eval_link_prediction(&model, &test, &test, &test, 10, Subsample::standard(1)).unwrap();
    let sub = r.link_subsample.unwrap();
    assert_eq!((sub.parts, sub.repeats), (4, 5));
    // Equal-size parts average exactly to the whole when the size divides.
    if test.len() % 4 == 0 {
        assert_relative_eq!(
            sub.mean_rank_raw.mean,
            r.link.unwrap().raw.mean_rank,
            epsilon = 1e-9
        );
    }
    assert!(sub.mean_rank_raw.std > 0.0);
    let again =
        eval_link_prediction(&model, &test, &test, &test, 10, Subsample::standard(1)).unwrap();
    assert_eq!(r, again);
}

#[test]
fn stratified_sample_keeps_proportion() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let triples: Vec<Triple> = (0..10_000).map(|i| t(i, 0, 0)).collect();
    let truth: Vec<bool> = (0..10_000).map(|i| i % 10 == 0).collect();
    let set = TripleSet::with_truth(triples, truth).unwrap();
    let s = stratified_sample(&set, 1000, &mut rng);
    assert_eq!(s.len(), 1000);
    assert_eq!(s.truth().unwrap().iter().filter(|&&y| y).count(), 100);
}

#[test]
fn report_text_is_key_value_and_json_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = init_params(ModelKind::Bigram, 4, 0, 25, 4, &mut rng).unwrap();
    let test = random_kb(&mut rng, 25, 4, 80);
    let mut r =
        eval_link_prediction(&model, &test, &test, &test, 10, Subsample::standard(3)).unwrap();
    r.auc_pr = Some(0.5);
    r.label = Some(eval_label_prediction(&model, &test, 5).unwrap());
    let text = r.to_text();
    for line in text.lines() {
        let (k, v) = line.split_once(": ").expect("key: value");
        assert!(!k.is_empty() && !k.contains(' '), "{line}");
        assert!(!v.trim().is_empty(), "{line}");
    }
    assert!(text.contains("hits_at_10_filtered: "));
    let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let table = r.category_table();
    assert_eq!(table.lines().count(), 3);
}
