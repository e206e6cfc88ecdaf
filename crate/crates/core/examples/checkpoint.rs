//! Writes a trained model to a checkpoint, reads it back and shows that
//! parameters and scores survive bit for bit.

use kbembed::checkpoint::{read_header, Checkpoint};
use kbembed::kbdata::{Triple, Vocab};
use kbembed::scoring::{init_params, ModelKind, Scorer};
use kbembed::training::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kbembed::Result<()> {
    let vocab = Vocab::from_names(
        ["alice", "bob", "carol"].map(String::from).to_vec(),
        ["knows", "likes"].map(String::from).to_vec(),
    )?;
    let model = init_params(
        ModelKind::TatecFtNoPretrain,
        4,
        3,
        3,
        2,
        &mut ChaCha8Rng::seed_from_u64(1),
    )?;
    let cfg = TrainConfig {
        model: ModelKind::TatecFtNoPretrain,
        d1: 4,
        d2: 3,
        ..TrainConfig::default()
    };

    let mut bytes = Vec::new();
    Checkpoint::new(model.clone(), &vocab, Some(cfg))?.write(&mut bytes)?;
    let header = read_header(&mut bytes.as_slice())?;
    print!("{}", header.to_text());
    println!("({} bytes)", bytes.len());

    let back = Checkpoint::read(bytes.as_slice())?;
    back.header.check_vocab(&vocab)?;
    let t = Triple::new(0, 1, 2);
    assert_eq!(model.score(t).to_bits(), back.model.score(t).to_bits());
    println!(
        "score(alice, likes, carol) = {} before and after",
        model.score(t)
    );
    Ok(())
}
