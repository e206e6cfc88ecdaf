//! Trains a bigram and a trigram model on a positives-only split, fine-tunes
//! their sum, and reports raw and filtered ranking metrics with the
//! per-category breakdown.
//!
//! cargo run --release --example link_prediction -- data/umls 30

use std::path::PathBuf;

use kbembed::config::{apply_key, preset};
use kbembed::datasets::SplitData;
use kbembed::eval::{eval_link_prediction, Subsample};
use kbembed::kbdata::TripleSet;
use kbembed::scoring::Model;
use kbembed::training::{fit, TrainConfig, Validation};

fn main() -> kbembed::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/umls".into()));
    let epochs = args.next().unwrap_or_else(|| "30".into());

    let d = SplitData::load_dir(&dir)?;
    let (e, l) = (d.vocab.num_entities(), d.vocab.num_relations());
    let seen = TripleSet::union_positives(&[&d.train, &d.valid]);
    let valid = Some(Validation {
        set: &d.valid,
        known: &seen,
    });
    let known = d.known();
    let cfg = |name: &str| -> kbembed::Result<TrainConfig> {
        let mut c = preset(name)?;
        apply_key(&mut c, "epochs", &epochs)?;
        Ok(c)
    };
    let report = |name: &str, m: &Model| -> kbembed::Result<()> {
        let r = eval_link_prediction(m, &d.test, &d.train, &known, 10, Subsample::standard(1))?;
        println!("== {name}\n{}{}", r.to_text(), r.category_table());
        Ok(())
    };

    let (bigram, _) = fit(&cfg("fb15k-bigram-soft")?, &d.train, valid, e, l, None)?;
    report("fb15k-bigram-soft", &bigram)?;
    let (trigram, _) = fit(&cfg("fb15k-trigram-soft")?, &d.train, valid, e, l, None)?;
    report("fb15k-trigram-soft", &trigram)?;

    let (Model::Bigram(b), Model::Trigram(t)) = (bigram, trigram) else {
        unreachable!("presets fix the model kinds")
    };
    let start = Model::fine_tune_from(b, t)?;
    let (ft, log) = fit(
        &cfg("fb15k-tatec-ft-soft")?,
        &d.train,
        valid,
        e,
        l,
        Some(start),
    )?;
    println!(
        "fine-tuning kept epoch {} of {}",
        log.best_epoch,
        log.epochs.len()
    );
    report("fb15k-tatec-ft-soft", &ft)
}
