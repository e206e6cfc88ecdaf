//! Scores a few triples under every model kind from one random
//! initialization, and shows the four sub-scores a linear combination
//! weighs.

use kbembed::kbdata::Triple;
use kbembed::scoring::{init_params, ModelKind, Scorer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kbembed::Result<()> {
    let (e, l) = (6, 2);
    let triples = [
        Triple::new(0, 0, 1),
        Triple::new(1, 0, 0),
        Triple::new(2, 1, 5),
    ];
    for kind in ModelKind::ALL {
        let (d1, d2) = if kind == ModelKind::TatecFtShared {
            (4, 4)
        } else {
            (4, 3)
        };
        let model = init_params(kind, d1, d2, e, l, &mut ChaCha8Rng::seed_from_u64(3))?;
        let scores: Vec<String> = triples
            .iter()
            .map(|&t| format!("{:+.4}", model.score(t)))
            .collect();
        println!("{:<22} {}", kind.as_str(), scores.join("  "));
        if let Some(sub) = model.sub_scores(triples[0]) {
            println!("{:<22} sub-scores of (0, 0, 1): {sub:+.4?}", "");
        }
    }
    Ok(())
}
