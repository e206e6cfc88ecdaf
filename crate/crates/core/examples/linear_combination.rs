//! Fits per-relation combination weights on top of frozen bigram and
//! trigram models and prints how each relation splits its weight.
//!
//! cargo run --release --example linear_combination -- data/umls 20

use std::path::PathBuf;

use kbembed::config::{apply_key, preset};
use kbembed::datasets::SplitData;
use kbembed::kbdata::TripleSet;
use kbembed::lincomb::fit_combination;
use kbembed::scoring::Model;
use kbembed::training::{fit, Validation};

fn main() -> kbembed::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/umls".into()));
    let epochs = args.next().unwrap_or_else(|| "20".into());

    let d = SplitData::load_dir(&dir)?;
    let (e, l) = (d.vocab.num_entities(), d.vocab.num_relations());
    let seen = TripleSet::union_positives(&[&d.train, &d.valid]);
    let valid = Some(Validation {
        set: &d.valid,
        known: &seen,
    });

    let mut constituents = Vec::new();
    for name in ["fb15k-bigram-soft", "fb15k-trigram-soft"] {
        let mut c = preset(name)?;
        apply_key(&mut c, "epochs", &epochs)?;
        constituents.push(fit(&c, &d.train, valid, e, l, None)?.0);
    }
    let (Some(Model::Trigram(t)), Some(Model::Bigram(b))) =
        (constituents.pop(), constituents.pop())
    else {
        unreachable!("presets fix the model kinds")
    };

    let cfg = preset("fb15k-tatec-lc")?;
    let (w, log) = fit_combination(&b, &t, &d.train, valid, &cfg)?;
    println!(
        "objective {:.3} -> {:.3} in {} outer iterations; best validation {:?} at iteration {}",
        log.objective[0],
        log.objective[log.objective.len() - 1],
        log.objective.len() - 1,
        log.best_value,
        log.best_iteration
    );
    println!(
        "{:<32} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "relation", "d_hl", "d_lt", "d_ht", "d_hlt", "sigma"
    );
    for r in 0..l {
        let [a, bb, c, dd] = w.row(r);
        let name = d.vocab.relation_name(r).unwrap_or("?");
        println!(
            "{name:<32} {a:>8.3} {bb:>8.3} {c:>8.3} {dd:>8.3} {:>8.3}",
            w.sigma[r]
        );
    }
    Ok(())
}
