//! Trains one preset on one cross-validation fold of a fully observed KB and
//! reports test AUC-PR.
//!
//! cargo run --release --example closed_world_fold -- data/umls umls-trigram-soft [fold] [key=value ...]

use std::path::PathBuf;
use std::time::Instant;

use kbembed::config::{apply_key, resolve};
use kbembed::datasets::{ClosedWorld, SplitData};
use kbembed::eval::eval_auc;
use kbembed::pipeline::{run, PretrainCache, RunData};
use kbembed::training::Validation;

fn main() -> kbembed::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("data/umls", String::as_str));
    let mut cfg = resolve(args.get(1).map_or("umls-trigram-soft", String::as_str))?;
    let fold: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').expect("key=value");
        apply_key(&mut cfg, k, v)?;
    }

    let kb = ClosedWorld::from_split(&SplitData::load_dir(&dir)?, 10, 1)?;
    let split = kb.fold(fold)?;
    let known = split.train.positives();
    let data = RunData {
        train: &split.train,
        valid: Some(Validation {
            set: &split.valid,
            known: &known,
        }),
        num_entities: kb.vocab.num_entities(),
        num_relations: kb.vocab.num_relations(),
    };
    let start = Instant::now();
    let out = run(&cfg, data, &mut PretrainCache::new())?;
    for p in out.log.training.iter().flat_map(|t| &t.validation) {
        println!(
            "epoch {:>4}  valid {} = {:.4}",
            p.epoch, cfg.validation_metric, p.value
        );
    }
    println!(
        "fold {fold}: test AUC-PR {:.4} ({:.1}s)",
        eval_auc(&out.model, &split.test)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
