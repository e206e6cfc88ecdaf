//! Trains a small model and answers completion queries: the best tails for
//! a (head, relation) pair, the best heads for a (relation, tail) pair and
//! the best relations between two entities.
//!
//! cargo run --release --example predict -- data/kinships

use std::path::PathBuf;

use kbembed::cli::predict_top;
use kbembed::config::{apply_key, preset};
use kbembed::datasets::SplitData;
use kbembed::training::fit;

fn main() -> kbembed::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/kinships".into()),
    );
    let d = SplitData::load_dir(&dir)?;
    let mut cfg = preset("fb15k-trigram-soft")?;
    apply_key(&mut cfg, "epochs", "20")?;
    let (model, _) = fit(
        &cfg,
        &d.train,
        None,
        d.vocab.num_entities(),
        d.vocab.num_relations(),
        None,
    )?;

    let q = d.test.triples()[0];
    let (h, r, t) = (
        d.vocab.entity_name(q.head).unwrap_or_default(),
        d.vocab.relation_name(q.label).unwrap_or_default(),
        d.vocab.entity_name(q.tail).unwrap_or_default(),
    );
    println!("held-out triple: ({h}, {r}, {t})");
    for (label, head, rel, tail) in [
        ("tails", Some(h), Some(r), None),
        ("heads", None, Some(r), Some(t)),
        ("relations", Some(h), None, Some(t)),
    ] {
        // Candidates that complete a training fact are skipped.
        let top = predict_top(&model, &d.vocab, head, rel, tail, 5, Some(&d.train))?;
        let ranked: Vec<String> = top.iter().map(|(n, s)| format!("{n} ({s:.2})")).collect();
        println!("{label:<10} {}", ranked.join(", "));
    }
    Ok(())
}
