//! Binary model checkpoints.
//!
//! A checkpoint starts with the magic line `TATC1` and a text header of
//! `key: value` lines closed by a blank line. The parameter blocks follow as
//! row-major little-endian `f64`, in the order the header lists them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, render_config};
use crate::error::{Error, Result};
use crate::kbdata::Vocab;
use crate::scoring::Scorer;
use crate::scoring::{
    BigramParams, CombinationWeights, Model, ModelKind, SharedParams, TransEParams, TrigramParams,
};
use crate::training::TrainConfig;

pub const MAGIC: &str = "TATC1";
pub const VERSION: u32 = 1;

/// Hex SHA-256 of the names, one per line.
pub fn names_hash(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Everything in a checkpoint header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub version: u32,
    pub kind: ModelKind,
    pub num_entities: usize,
    pub num_relations: usize,
    pub d1: usize,
    pub d2: usize,
    pub entity_hash: String,
    pub relation_hash: String,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    /// `(name, shape)` of each stored block, in file order.
    pub blocks: Vec<(String, Vec<usize>)>,
}

impl Header {
    /// The header as written to disk, without the magic line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "version: {}\nkind: {}\nentities: {}\nrelations: {}\nd1: {}\nd2: {}\nentity_hash: {}\nrelation_hash: {}\nseed: {}\n",
            self.version,
            self.kind,
            self.num_entities,
            self.num_relations,
            self.d1,
            self.d2,
            self.entity_hash,
            self.relation_hash,
            self.seed
        );
        if let Some(c) = &self.config {
            for line in render_config(c).lines() {
                s.push_str(&format!("config: {line}\n"));
            }
        }
        for (name, shape) in &self.blocks {
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            s.push_str(&format!("block: {name} {}\n", dims.join("x")));
        }
        s
    }

    /// Fails unless the vocabulary hashes match `vocab`.
    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        if self.entity_hash != names_hash(vocab.entity_names())
            || self.relation_hash != names_hash(vocab.relation_names())
        {
            return Err(Error::Checkpoint(
                "entity or relation vocabulary differs from the one the model was trained on"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// A model with its header metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub model: Model,
}

type Block = (&'static str, Vec<usize>, Vec<f64>);

fn a1(name: &'static str, a: &Array1<f64>) -> Block {
    (name, vec![a.len()], a.to_vec())
}

fn a2(name: &'static str, a: &Array2<f64>) -> Block {
    (name, a.shape().to_vec(), a.iter().copied().collect())
}

fn a3(name: &'static str, a: &Array3<f64>) -> Block {
    (name, a.shape().to_vec(), a.iter().copied().collect())
}

fn bigram_blocks(b: &BigramParams) -> Vec<Block> {
    vec![
        a2("entities", &b.entities),
        a2("rel_head", &b.rel_head),
        a2("rel_tail", &b.rel_tail),
        a1("diag", &b.diag),
    ]
}

fn trigram_blocks(t: &TrigramParams) -> Vec<Block> {
    vec![
        a2("entities2", &t.entities),
        a3("rel_matrices", &t.relations),
    ]
}

fn model_blocks(model: &Model) -> Vec<Block> {
    match model {
        Model::Bigram(b) => bigram_blocks(b),
        Model::Trigram(t) => trigram_blocks(t),
        Model::Transe(p) => vec![
            a2("transe_entities", &p.entities),
            a2("translations", &p.relations),
        ],
        Model::Combined {
            bigram, trigram, ..
        } => [bigram_blocks(bigram), trigram_blocks(trigram)].concat(),
        Model::Shared(s) => vec![
            a2("shared_entities", &s.entities),
            a2("rel_head", &s.rel_head),
            a2("rel_tail", &s.rel_tail),
            a1("diag", &s.diag),
            a3("rel_matrices", &s.relations),
        ],
        Model::LinearCombination {
            bigram,
            trigram,
            weights,
        } => {
            let mut v = [bigram_blocks(bigram), trigram_blocks(trigram)].concat();
            v.push(a2("delta", &weights.delta));
            v.push(a1("sigma", &weights.sigma));
            v.push(("alpha", vec![1], vec![weights.alpha]));
            v
        }
    }
}

/// Block names and shapes implied by the header fields.
fn expected_blocks(
    kind: ModelKind,
    e: usize,
    l: usize,
    d1: usize,
    d2: usize,
) -> Vec<(&'static str, Vec<usize>)> {
    let bigram = || {
        vec![
            ("entities", vec![e, d1]),
            ("rel_head", vec![l, d1]),
            ("rel_tail", vec![l, d1]),
            ("diag", vec![d1]),
        ]
    };
    let trigram = || {
        vec![
            ("entities2", vec![e, d2]),
            ("rel_matrices", vec![l, d2, d2]),
        ]
    };
    match kind {
        ModelKind::Bigram => bigram(),
        ModelKind::Trigram => trigram(),
        ModelKind::Transe => vec![
            ("transe_entities", vec![e, d1]),
            ("translations", vec![l, d1]),
        ],
        ModelKind::TatecFt | ModelKind::TatecFtNoPretrain => [bigram(), trigram()].concat(),
        ModelKind::TatecFtShared => vec![
            ("shared_entities", vec![e, d1]),
            ("rel_head", vec![l, d1]),
            ("rel_tail", vec![l, d1]),
            ("diag", vec![d1]),
            ("rel_matrices", vec![l, d1, d1]),
        ],
        ModelKind::TatecLc => {
            let mut v = [bigram(), trigram()].concat();
            v.extend([
                ("delta", vec![l, 4]),
                ("sigma", vec![l]),
                ("alpha", vec![1]),
            ]);
            v
        }
    }
}

impl Checkpoint {
    pub fn new(model: Model, vocab: &Vocab, config: Option<TrainConfig>) -> Result<Self> {
        if model.num_entities() != vocab.num_entities()
            || model.num_relations() != vocab.num_relations()
        {
            return Err(Error::Checkpoint(format!(
                "model has E={} L={} but the vocabulary has {} entities and {} relations",
                model.num_entities(),
                model.num_relations(),
                vocab.num_entities(),
                vocab.num_relations()
            )));
        }
        let (d1, d2) = model.dims();
        let header = Header {
            version: VERSION,
            kind: model.kind(),
            num_entities: model.num_entities(),
            num_relations: model.num_relations(),
            d1,
            d2,
            entity_hash: names_hash(vocab.entity_names()),
            relation_hash: names_hash(vocab.relation_names()),
            seed: config.as_ref().map_or(0, |c| c.seed),
            config,
            blocks: model_blocks(&model)
                .into_iter()
                .map(|(n, s, _)| (n.to_string(), s))
                .collect(),
        };
        Ok(Checkpoint { header, model })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MAGIC}")?;
        out.write_all(self.header.to_text().as_bytes())?;
        writeln!(out)?;
        for (_, _, data) in model_blocks(&self.model) {
            for v in data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self> {
        let header = read_header(&mut input)?;
        let mut data = Vec::with_capacity(header.blocks.len());
        let mut buf = [0u8; 8];
        for (name, shape) in &header.blocks {
            let n: usize = shape.iter().product();
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                input
                    .read_exact(&mut buf)
                    .map_err(|_| Error::Checkpoint(format!("block `{name}` is truncated")))?;
                v.push(f64::from_le_bytes(buf));
            }
            data.push(v);
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint(
                "trailing bytes after the last block".into(),
            ));
        }
        let model = assemble(&header, data)?;
        Ok(Checkpoint { header, model })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Checkpoint(format!("header lacks `{key}`")))
}

fn num<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let v = field(fields, key)?;
    v.parse()
        .map_err(|_| Error::Checkpoint(format!("bad `{key}` value `{v}`")))
}

/// Reads the magic line and header, leaving `input` at the first block.
pub fn read_header<R: BufRead>(input: &mut R) -> Result<Header> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Checkpoint(format!(
            "not a checkpoint (expected `{MAGIC}` magic)"
        )));
    }
    let mut fields = Vec::new();
    let mut config_lines = Vec::new();
    let mut blocks = Vec::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Checkpoint(
                "header is not terminated by a blank line".into(),
            ));
        }
        let l = line.trim_end_matches(['\n', '\r']);
        if l.is_empty() {
            break;
        }
        let (k, v) = l
            .split_once(": ")
            .ok_or_else(|| Error::Checkpoint(format!("malformed header line `{l}`")))?;
        match k {
            "config" => config_lines.push(v.to_string()),
            "block" => {
                let (name, dims) = v
                    .split_once(' ')
                    .ok_or_else(|| Error::Checkpoint(format!("malformed block line `{v}`")))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Checkpoint(format!("bad shape `{dims}` for `{name}`")))?;
                blocks.push((name.to_string(), shape));
            }
            _ => fields.push((k.to_string(), v.to_string())),
        }
    }
    let version: u32 = num(&fields, "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind: ModelKind = field(&fields, "kind")?
        .parse()
        .map_err(|_| Error::Checkpoint("unknown model kind".into()))?;
    let (e, l, d1, d2) = (
        num(&fields, "entities")?,
        num(&fields, "relations")?,
        num(&fields, "d1")?,
        num(&fields, "d2")?,
    );
    let expected = expected_blocks(kind, e, l, d1, d2);
    let matches = expected.len() == blocks.len()
        && expected
            .iter()
            .zip(&blocks)
            .all(|((n, s), (bn, bs))| n == bn && s == bs);
    if !matches {
        return Err(Error::Checkpoint(format!(
            "blocks {blocks:?} do not fit a {kind} model with E={e} L={l} d1={d1} d2={d2}"
        )));
    }
    let config = if config_lines.is_empty() {
        None
    } else {
        Some(parse_config(&config_lines.join("\n"))?)
    };
    Ok(Header {
        version,
        kind,
        num_entities: e,
        num_relations: l,
        d1,
        d2,
        entity_hash: field(&fields, "entity_hash")?.to_string(),
        relation_hash: field(&fields, "relation_hash")?.to_string(),
        seed: num(&fields, "seed")?,
        config,
        blocks,
    })
}

/// Hands out stored blocks in file order.
struct Blocks {
    items: std::vec::IntoIter<(Vec<usize>, Vec<f64>)>,
}

impl Blocks {
    fn next(&mut self) -> (Vec<usize>, Vec<f64>) {
        self.items
            .next()
            .expect("block count checked against the header")
    }

    fn a1(&mut self) -> Array1<f64> {
        Array1::from(self.next().1)
    }

    fn a2(&mut self) -> Result<Array2<f64>> {
        let (s, v) = self.next();
        Array2::from_shape_vec((s[0], s[1]), v).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn a3(&mut self) -> Result<Array3<f64>> {
        let (s, v) = self.next();
        Array3::from_shape_vec((s[0], s[1], s[2]), v).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn bigram(&mut self) -> Result<BigramParams> {
        Ok(BigramParams {
            entities: self.a2()?,
            rel_head: self.a2()?,
            rel_tail: self.a2()?,
            diag: self.a1(),
        })
    }

    fn trigram(&mut self) -> Result<TrigramParams> {
        Ok(TrigramParams {
            entities: self.a2()?,
            relations: self.a3()?,
        })
    }
}

fn assemble(h: &Header, data: Vec<Vec<f64>>) -> Result<Model> {
    let shapes = h.blocks.iter().map(|(_, s)| s.clone());
    let mut b = Blocks {
        items: shapes.zip(data).collect::<Vec<_>>().into_iter(),
    };
    Ok(match h.kind {
        ModelKind::Bigram => Model::Bigram(b.bigram()?),
        ModelKind::Trigram => Model::Trigram(b.trigram()?),
        ModelKind::Transe => Model::Transe(TransEParams {
            entities: b.a2()?,
            relations: b.a2()?,
        }),
        kind @ (ModelKind::TatecFt | ModelKind::TatecFtNoPretrain) => Model::Combined {
            kind,
            bigram: b.bigram()?,
            trigram: b.trigram()?,
        },
        ModelKind::TatecFtShared => Model::Shared(SharedParams {
            entities: b.a2()?,
            rel_head: b.a2()?,
            rel_tail: b.a2()?,
            diag: b.a1(),
            relations: b.a3()?,
        }),
        ModelKind::TatecLc => {
            let bigram = b.bigram()?;
            let trigram = b.trigram()?;
            let delta = b.a2()?;
            let sigma = b.a1();
            let alpha = b.next().1[0];
            Model::LinearCombination {
                bigram,
                trigram,
                weights: CombinationWeights {
                    delta,
                    sigma,
                    alpha,
                },
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kbdata::Triple;
    use crate::scoring::init_params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab(e: usize, l: usize) -> Vocab {
        Vocab::from_names(
            (0..e).map(|i| format!("e{i}")).collect(),
            (0..l).map(|i| format!("r{i}")).collect(),
        )
        .unwrap()
    }

    fn model(kind: ModelKind, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = match kind {
            ModelKind::TatecLc | ModelKind::TatecFt => ModelKind::TatecFtNoPretrain,
            k => k,
        };
        let d2 = if kind == ModelKind::TatecFtShared {
            3
        } else {
            4
        };
        let m = init_params(base, 3, d2, 9, 3, &mut rng).unwrap();
        match kind {
            ModelKind::TatecLc => {
                let mut m = Model::linear_combination_from(
                    m.bigram().unwrap().clone(),
                    m.trigram().unwrap().clone(),
                    7.5,
                )
                .unwrap();
                if let Model::LinearCombination { weights, .. } = &mut m {
                    weights.delta.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
                    weights.sigma[1] = 0.1;
                }
                m
            }
            ModelKind::TatecFt => match m {
                Model::Combined {
                    bigram, trigram, ..
                } => Model::fine_tune_from(bigram, trigram).unwrap(),
                _ => unreachable!(),
            },
            _ => m,
        }
    }

    fn roundtrip(c: &Checkpoint) -> Checkpoint {
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        Checkpoint::read(&buf[..]).unwrap()
    }

    #[test]
    fn every_kind_round_trips_bit_exactly() {
        let v = vocab(9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in ModelKind::ALL {
            let m = model(kind, 5);
            let cfg = TrainConfig {
                model: kind,
                seed: 42,
                ..TrainConfig::default()
            };
            let c = Checkpoint::new(m.clone(), &v, Some(cfg)).unwrap();
            let back = roundtrip(&c);
            assert_eq!(back, c, "{kind}");
            for _ in 0..1000 {
                let t = Triple::new(
                    rng.gen_range(0..9),
                    rng.gen_range(0..3),
                    rng.gen_range(0..9),
                );
                assert_eq!(m.score(t).to_bits(), back.model.score(t).to_bits());
            }
            back.header.check_vocab(&v).unwrap();
            assert_eq!(back.header.seed, 42);
        }
    }

    #[test]
    fn vocab_mismatch_is_detected() {
        let c = Checkpoint::new(model(ModelKind::Bigram, 1), &vocab(9, 3), None).unwrap();
        let mut other = vocab(9, 3).entity_names().to_vec();
        other.swap(0, 1);
        let v2 = Vocab::from_names(other, vocab(9, 3).relation_names().to_vec()).unwrap();
        assert!(roundtrip(&c).header.check_vocab(&v2).is_err());
        assert!(Checkpoint::new(model(ModelKind::Bigram, 1), &vocab(8, 3), None).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let c = Checkpoint::new(model(ModelKind::Trigram, 2), &vocab(9, 3), None).unwrap();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert!(Checkpoint::read(&buf[..buf.len() - 3]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(Checkpoint::read(&extra[..]).is_err());
        let text = String::from_utf8_lossy(&buf).replace("d2: 4", "d2: 5");
        assert!(Checkpoint::read(text.as_bytes()).is_err());
        assert!(Checkpoint::read(&b"TATC2\n\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_floats_survive(vals in prop::collection::vec(any::<f64>(), 9 * 4 + 3 * 4 * 4)) {
            let mut t = TrigramParams::zeros(9, 3, 4);
            t.entities = Array2::from_shape_vec((9, 4), vals[..36].to_vec()).unwrap();
            t.relations = Array3::from_shape_vec((3, 4, 4), vals[36..].to_vec()).unwrap();
            let c = Checkpoint::new(Model::Trigram(t), &vocab(9, 3), None).unwrap();
            let back = roundtrip(&c);
            let bits = |m: &Model| m.trigram().unwrap().entities.iter().chain(m.trigram().unwrap().relations.iter()).map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.model), bits(&c.model));
        }
    }
}
