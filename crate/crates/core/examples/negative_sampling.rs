//! Draws corrupted triples under the three corruption strategies, balances a
//! closed-world fold, and classifies relations by cardinality.

use std::collections::BTreeMap;

use kbembed::datasets::{ClosedWorld, SplitData};
use kbembed::kbdata::{
    balance_positives, classify_relations, sample_corrupted, CorruptionStrategy, Triple,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kbembed::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = Triple::new(2, 5, 7);
    for s in [
        CorruptionStrategy::AllDiffer,
        CorruptionStrategy::HeadOrTail,
        CorruptionStrategy::LabelOnly,
    ] {
        let negs: Vec<String> = (0..4)
            .map(|_| {
                sample_corrupted(t, s, 10, 8, &mut rng)
                    .map(|n| format!("({}, {}, {})", n.head, n.label, n.tail))
            })
            .collect::<kbembed::Result<_>>()?;
        println!("{:<12} {}", s.name(), negs.join(" "));
    }

    let d = SplitData::load_dir(std::path::Path::new("data/umls"))?;
    let fold = ClosedWorld::from_split(&d, 10, 1)?.fold(0)?;
    let pos = fold.train.positives();
    let neg = fold.train.negatives();
    let balanced = balance_positives(pos.triples(), &neg, &mut rng)?;
    println!(
        "\nfold 0 training cells: {} positives, {} negatives -> {} positive instances",
        pos.len(),
        neg.len(),
        balanced.len()
    );

    let mut counts = BTreeMap::new();
    for c in classify_relations(&d.train).values() {
        *counts.entry(c.as_str()).or_insert(0) += 1;
    }
    println!("relation categories: {counts:?}");
    Ok(())
}
