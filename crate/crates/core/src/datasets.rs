//! On-disk dataset layouts.
//!
//! A split directory holds `train.txt`, `valid.txt` and `test.txt`. A
//! prepared closed-world directory holds `entities.txt`, `relations.txt`,
//! `positives.txt` and `folds.txt`; the latter lists `k` and `seed` on its
//! first line and then one fold id per tensor cell, in
//! [`closed_world_tensor`] order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::kbdata::{
    closed_world_tensor, kfold_assignment, load_triples, FoldSplit, TripleSet, Vocab, VocabMode,
};
use crate::training::stream_rng;

const STREAM_FOLDS: u64 = 4;
const STREAM_SUBSAMPLE: u64 = 5;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Train, validation and test triples over one vocabulary.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub vocab: Vocab,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
}

impl SplitData {
    /// Loads a split directory. The vocabulary grows in file order: train,
    /// then valid, then test.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let (train, vocab) = load_triples(open(&dir.join("train.txt"))?, VocabMode::Build)?;
        let (valid, vocab) = load_triples(open(&dir.join("valid.txt"))?, VocabMode::Extend(vocab))?;
        let (test, vocab) = load_triples(open(&dir.join("test.txt"))?, VocabMode::Extend(vocab))?;
        Ok(SplitData {
            vocab,
            train,
            valid,
            test,
        })
    }

    /// Positives of all three parts.
    pub fn known(&self) -> TripleSet {
        TripleSet::union_positives(&[&self.train, &self.valid, &self.test])
    }

    /// Seeded subsample keeping `fraction` of every part (at least one
    /// triple each). The vocabulary is unchanged.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::domain(format!(
                "subsample fraction must be in (0, 1], got {fraction}"
            )));
        }
        let mut rng = stream_rng(seed, STREAM_SUBSAMPLE);
        let mut part = |s: &TripleSet| {
            let n = ((s.len() as f64 * fraction).round() as usize).clamp(1.min(s.len()), s.len());
            let mut idx = sample(&mut rng, s.len(), n).into_vec();
            idx.sort_unstable();
            s.select(&idx)
        };
        Ok(SplitData {
            vocab: self.vocab.clone(),
            train: part(&self.train),
            valid: part(&self.valid),
            test: part(&self.test),
        })
    }
}

/// A fully observed knowledge base split into folds over its tensor cells.
#[derive(Debug, Clone)]
pub struct ClosedWorld {
    pub vocab: Vocab,
    pub positives: TripleSet,
    pub k: usize,
    pub seed: u64,
    /// Fold id of every tensor cell.
    pub folds: Vec<usize>,
}

impl ClosedWorld {
    /// Assigns every cell of the `E x L x E` tensor to one of `k` folds.
    pub fn prepare(vocab: Vocab, positives: TripleSet, k: usize, seed: u64) -> Result<Self> {
        if k < 3 {
            return Err(Error::domain(format!("need at least 3 folds, got {k}")));
        }
        positives.validate(vocab.num_entities(), vocab.num_relations())?;
        let n = vocab.num_entities() * vocab.num_relations() * vocab.num_entities();
        let folds = kfold_assignment(n, k, &mut stream_rng(seed, STREAM_FOLDS));
        Ok(ClosedWorld {
            vocab,
            positives,
            k,
            seed,
            folds,
        })
    }

    /// Pools the positives of a split directory before folding.
    pub fn from_split(data: &SplitData, k: usize, seed: u64) -> Result<Self> {
        Self::prepare(data.vocab.clone(), data.known(), k, seed)
    }

    pub fn tensor(&self) -> TripleSet {
        closed_world_tensor(
            &self.positives,
            self.vocab.num_entities(),
            self.vocab.num_relations(),
        )
    }

    /// Test on fold `fold`, validation on the next one, training on the rest.
    pub fn fold(&self, fold: usize) -> Result<FoldSplit> {
        FoldSplit::new(&self.tensor(), &self.folds, self.k, fold)
    }

    /// Whether `dir` looks like a prepared closed-world directory.
    pub fn is_prepared(dir: &Path) -> bool {
        dir.join("folds.txt").is_file()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        Vocab::write_names(
            self.vocab.entity_names(),
            BufWriter::new(File::create(dir.join("entities.txt"))?),
        )?;
        Vocab::write_names(
            self.vocab.relation_names(),
            BufWriter::new(File::create(dir.join("relations.txt"))?),
        )?;
        self.positives.write(
            &self.vocab,
            BufWriter::new(File::create(dir.join("positives.txt"))?),
        )?;
        let mut f = BufWriter::new(File::create(dir.join("folds.txt"))?);
        writeln!(f, "k={} seed={}", self.k, self.seed)?;
        for id in &self.folds {
            writeln!(f, "{id}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let entities = Vocab::read_names(open(&dir.join("entities.txt"))?)?;
        let relations = Vocab::read_names(open(&dir.join("relations.txt"))?)?;
        let vocab = Vocab::from_names(entities, relations)?;
        let (positives, _) =
            load_triples(open(&dir.join("positives.txt"))?, VocabMode::Reuse(&vocab))?;
        let mut lines = open(&dir.join("folds.txt"))?.lines();
        let head = lines.next().transpose()?.unwrap_or_default();
        let bad = |line: usize, m: &str| Error::Parse {
            line,
            message: format!("folds.txt: {m}"),
        };
        let mut k = None;
        let mut seed = None;
        for part in head.split_whitespace() {
            match part.split_once('=') {
                Some(("k", v)) => k = v.parse().ok(),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => return Err(bad(1, "expected `k=<folds> seed=<seed>`")),
            }
        }
        let (k, seed) = k
            .zip(seed)
            .ok_or_else(|| bad(1, "expected `k=<folds> seed=<seed>`"))?;
        let mut folds = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let id: usize = line
                .trim()
                .parse()
                .map_err(|_| bad(i + 2, "fold id is not an integer"))?;
            if id >= k {
                return Err(bad(i + 2, "fold id out of range"));
            }
            folds.push(id);
        }
        let n = vocab.num_entities() * vocab.num_relations() * vocab.num_entities();
        if folds.len() != n {
            return Err(Error::domain(format!(
                "folds.txt lists {} cells, expected {n}",
                folds.len()
            )));
        }
        Ok(ClosedWorld {
            vocab,
            positives,
            k,
            seed,
            folds,
        })
    }
}
