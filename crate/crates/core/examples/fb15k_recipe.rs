//! Full FB15k recipe: pre-train both constituents for 500 epochs, fine-tune
//! their sum, and report filtered mean rank and hits@10 with subsampled
//! spreads. Expect many hours on one core.
//!
//! cargo run --release --example fb15k_recipe -- /path/to/FB15k [preset]

use std::path::PathBuf;
use std::time::Instant;

use kbembed::config::resolve;
use kbembed::datasets::SplitData;
use kbembed::eval::{eval_link_prediction, Subsample};
use kbembed::kbdata::TripleSet;
use kbembed::pipeline::{run, PretrainCache, RunData};
use kbembed::training::Validation;

fn main() -> kbembed::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: fb15k_recipe <split dir with train.txt, valid.txt, test.txt> [preset]");
        std::process::exit(2);
    };
    let cfg = resolve(&args.next().unwrap_or_else(|| "fb15k-tatec-ft-soft".into()))?;

    let d = SplitData::load_dir(&dir)?;
    let seen = TripleSet::union_positives(&[&d.train, &d.valid]);
    let data = RunData {
        train: &d.train,
        valid: Some(Validation {
            set: &d.valid,
            known: &seen,
        }),
        num_entities: d.vocab.num_entities(),
        num_relations: d.vocab.num_relations(),
    };
    let start = Instant::now();
    let out = run(&cfg, data, &mut PretrainCache::new())?;
    let report = eval_link_prediction(
        &out.model,
        &d.test,
        &d.train,
        &d.known(),
        10,
        Subsample::standard(cfg.seed),
    )?;
    print!("{}{}", report.to_text(), report.category_table());
    println!("elapsed: {:.0}s", start.elapsed().as_secs_f64());
    Ok(())
}
