use std::path::PathBuf;

use kbembed::config::{apply_key, preset};
use kbembed::datasets::{ClosedWorld, SplitData};
use kbembed::lincomb::fit_combination;
use kbembed::scoring::Model;
use kbembed::training::fit;

fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

#[test]
fn umls_hinge_loss_decreases_over_first_epochs() {
    let kb =
        ClosedWorld::from_split(&SplitData::load_dir(&data_dir("umls")).unwrap(), 10, 1).unwrap();
    let split = kb.fold(0).unwrap();
    let mut cfg = preset("umls-trigram-soft").unwrap();
    apply_key(&mut cfg, "epochs", "5").unwrap();
    let (_, log) = fit(
        &cfg,
        &split.train,
        None,
        kb.vocab.num_entities(),
        kb.vocab.num_relations(),
        None,
    )
    .unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.mean_loss).collect();
    let increases = losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(increases <= 1, "{losses:?}");
    assert!(losses[4] < losses[0], "{losses:?}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn kinships_combination_leans_on_the_three_way_term() {
    let kb = ClosedWorld::from_split(&SplitData::load_dir(&data_dir("kinships")).unwrap(), 10, 1)
        .unwrap();
    let split = kb.fold(0).unwrap();
    let (e, l) = (kb.vocab.num_entities(), kb.vocab.num_relations());
    let train = |name: &str| {
        let mut cfg = preset(name).unwrap();
        apply_key(&mut cfg, "epochs", "20").unwrap();
        fit(&cfg, &split.train, None, e, l, None).unwrap().0
    };
    let (Model::Bigram(b), Model::Trigram(t)) = (
        train("kinships-bigram-soft"),
        train("kinships-trigram-soft"),
    ) else {
        panic!("presets fix the model kinds")
    };
    let cfg = preset("kinships-tatec-lc").unwrap();
    let (w, _) = fit_combination(&b, &t, &split.train, None, &cfg).unwrap();
    let ratios: Vec<f64> = (0..l)
        .map(|r| {
            let [d1, d2, d3, d4] = w.row(r);
            (d1 * d1 + d2 * d2 + d3 * d3).sqrt() / d4.abs()
        })
        .collect();
    assert!(median(ratios.clone()) < 1.0, "{ratios:?}");
}
