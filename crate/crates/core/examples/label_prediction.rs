//! Label prediction in the SVO style: rank every relation for each
//! (head, tail) pair and report mean rank and hits within the top 5%.
//!
//! cargo run --release --example label_prediction -- data/umls 20

use std::path::PathBuf;

use kbembed::config::{apply_key, preset};
use kbembed::datasets::SplitData;
use kbembed::eval::eval_label_prediction;
use kbembed::training::{fit, Validation};

fn main() -> kbembed::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/umls".into()));
    let epochs = args.next().unwrap_or_else(|| "20".into());
    let d = SplitData::load_dir(&dir)?;
    let known = d.known();
    for name in ["svo-transe-soft", "svo-bigram-soft", "svo-trigram-soft"] {
        let mut cfg = preset(name)?;
        apply_key(&mut cfg, "epochs", &epochs)?;
        apply_key(&mut cfg, "validation_every", "5")?;
        let valid = Some(Validation {
            set: &d.valid,
            known: &known,
        });
        let (model, _) = fit(
            &cfg,
            &d.train,
            valid,
            d.vocab.num_entities(),
            d.vocab.num_relations(),
            None,
        )?;
        let m = eval_label_prediction(&model, &d.test, 5)?;
        println!(
            "{name:<18} mean rank {:>6.2}  hits@{}% (top {}) {:>5.1}%",
            m.mean_rank, m.pct, m.threshold, m.hits
        );
    }
    Ok(())
}
