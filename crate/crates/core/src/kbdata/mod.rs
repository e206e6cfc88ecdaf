//! Triple files, vocabularies and the indexed triple store.
//!
//! A triple file holds one fact per line, `head<TAB>label<TAB>tail`, with an
//! optional fourth field `1`/`0` carrying the truth value for fully observed
//! knowledge bases. Entity and relation names are interned into a [`Vocab`]
//! in first-appearance order.

mod category;
mod corrupt;
mod folds;

pub use category::{classify_relation, classify_relations, RelationCategory};
pub use corrupt::{balance_positives, corrupt_side, sample_corrupted, CorruptionStrategy, Side};
pub use folds::{closed_world_tensor, kfold_assignment, FoldSplit};

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fact `(head, label, tail)` over vocabulary indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub label: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, label: usize, tail: usize) -> Self {
        Triple { head, label, tail }
    }
}

/// Bidirectional name/index maps for entities and relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_index: HashMap<String, usize>,
    relation_index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from explicit name lists; line order is index order.
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Vocab::new();
        for name in entities {
            if vocab.entity_index.contains_key(&name) {
                return Err(Error::domain(format!("duplicate entity name `{name}`")));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_index.contains_key(&name) {
                return Err(Error::domain(format!("duplicate relation name `{name}`")));
            }
            vocab.intern_relation(&name);
        }
        Ok(vocab)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_name(&self, index: usize) -> Option<&str> {
        self.entities.get(index).map(String::as_str)
    }

    pub fn relation_name(&self, index: usize) -> Option<&str> {
        self.relations.get(index).map(String::as_str)
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn intern_entity(&mut self, name: &str) -> usize {
        intern(&mut self.entities, &mut self.entity_index, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> usize {
        intern(&mut self.relations, &mut self.relation_index, name)
    }

    /// Resolves a `(head, label, tail)` name triple, failing on the first unknown symbol.
    pub fn resolve(&self, head: &str, label: &str, tail: &str) -> Result<Triple> {
        Ok(Triple::new(
            self.require_entity(head)?,
            self.require_relation(label)?,
            self.require_entity(tail)?,
        ))
    }

    pub fn require_entity(&self, name: &str) -> Result<usize> {
        self.entity_index(name).ok_or_else(|| Error::UnknownSymbol {
            kind: "entity",
            name: name.to_string(),
        })
    }

    pub fn require_relation(&self, name: &str) -> Result<usize> {
        self.relation_index(name)
            .ok_or_else(|| Error::UnknownSymbol {
                kind: "relation",
                name: name.to_string(),
            })
    }

    /// Writes one name per line; the line number is the index.
    pub fn write_names<W: Write>(names: &[String], mut out: W) -> Result<()> {
        for name in names {
            writeln!(out, "{name}")?;
        }
        Ok(())
    }

    pub fn read_names<R: BufRead>(input: R) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if !line.is_empty() {
                names.push(line.to_string());
            }
        }
        Ok(names)
    }
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = index.get(name) {
        return i;
    }
    let i = names.len();
    names.push(name.to_string());
    index.insert(name.to_string(), i);
    i
}

/// How [`load_triples`] treats names it has not seen.
pub enum VocabMode<'a> {
    /// Start from an empty vocabulary and intern every name.
    Build,
    /// Keep the given vocabulary and append new names after it.
    Extend(Vocab),
    /// Resolve against a fixed vocabulary; unknown names are errors.
    Reuse(&'a Vocab),
}

/// Indexed collection of triples with optional truth labels.
#[derive(Debug, Clone, Default)]
pub struct TripleSet {
    triples: Vec<Triple>,
    truth: Option<Vec<bool>>,
    counts: HashMap<Triple, usize>,
    heads: HashMap<(usize, usize), Vec<usize>>,
    tails: HashMap<(usize, usize), Vec<usize>>,
}

impl TripleSet {
    pub fn new(triples: Vec<Triple>) -> Self {
        Self::build(triples, None)
    }

    /// Builds a set whose triples carry truth flags; lengths must agree.
    pub fn with_truth(triples: Vec<Triple>, truth: Vec<bool>) -> Result<Self> {
        if truth.len() != triples.len() {
            return Err(Error::domain(format!(
                "{} truth flags for {} triples",
                truth.len(),
                triples.len()
            )));
        }
        Ok(Self::build(triples, Some(truth)))
    }

    fn build(triples: Vec<Triple>, truth: Option<Vec<bool>>) -> Self {
        let mut counts: HashMap<Triple, usize> = HashMap::with_capacity(triples.len());
        let mut heads: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut tails: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for &t in &triples {
            let c = counts.entry(t).or_insert(0);
            *c += 1;
            if *c == 1 {
                heads.entry((t.label, t.tail)).or_default().push(t.head);
                tails.entry((t.label, t.head)).or_default().push(t.tail);
            }
        }
        TripleSet {
            triples,
            truth,
            counts,
            heads,
            tails,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn truth(&self) -> Option<&[bool]> {
        self.truth.as_deref()
    }

    pub fn has_truth(&self) -> bool {
        self.truth.is_some()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.counts.contains_key(t)
    }

    /// Number of stored copies of `t`.
    pub fn count(&self, t: &Triple) -> usize {
        self.counts.get(t).copied().unwrap_or(0)
    }

    /// Distinct heads stored with `(label, tail)`.
    pub fn heads_of(&self, label: usize, tail: usize) -> &[usize] {
        self.heads.get(&(label, tail)).map_or(&[], Vec::as_slice)
    }

    /// Distinct tails stored with `(label, head)`.
    pub fn tails_of(&self, label: usize, head: usize) -> &[usize] {
        self.tails.get(&(label, head)).map_or(&[], Vec::as_slice)
    }

    /// Positive triples only. Without truth flags every triple counts as positive.
    pub fn positives(&self) -> TripleSet {
        match &self.truth {
            None => TripleSet::new(self.triples.clone()),
            Some(truth) => TripleSet::new(
                self.triples
                    .iter()
                    .zip(truth)
                    .filter(|(_, &y)| y)
                    .map(|(&t, _)| t)
                    .collect(),
            ),
        }
    }

    /// Negative triples (empty without truth flags).
    pub fn negatives(&self) -> Vec<Triple> {
        match &self.truth {
            None => Vec::new(),
            Some(truth) => self
                .triples
                .iter()
                .zip(truth)
                .filter(|(_, &y)| !y)
                .map(|(&t, _)| t)
                .collect(),
        }
    }

    /// Union of the positive triples of several sets, duplicates removed.
    pub fn union_positives(sets: &[&TripleSet]) -> TripleSet {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for set in sets {
            for t in set.positives().triples {
                if seen.insert(t) {
                    out.push(t);
                }
            }
        }
        TripleSet::new(out)
    }

    /// Subset by position, keeping truth flags.
    pub fn select(&self, indices: &[usize]) -> TripleSet {
        let triples = indices.iter().map(|&i| self.triples[i]).collect();
        let truth = self
            .truth
            .as_ref()
            .map(|y| indices.iter().map(|&i| y[i]).collect());
        Self::build(triples, truth)
    }

    /// Checks every triple against entity and relation counts.
    pub fn validate(&self, num_entities: usize, num_relations: usize) -> Result<()> {
        for (i, t) in self.triples.iter().enumerate() {
            if t.head >= num_entities || t.tail >= num_entities || t.label >= num_relations {
                return Err(Error::domain(format!(
                    "triple #{i} ({}, {}, {}) outside E={num_entities}, L={num_relations}",
                    t.head, t.label, t.tail
                )));
            }
        }
        Ok(())
    }

    /// Writes the set in triple-file format.
    pub fn write<W: Write>(&self, vocab: &Vocab, mut out: W) -> Result<()> {
        for (i, t) in self.triples.iter().enumerate() {
            let h = vocab
                .entity_name(t.head)
                .ok_or_else(|| Error::domain("head index"))?;
            let l = vocab
                .relation_name(t.label)
                .ok_or_else(|| Error::domain("label index"))?;
            let tl = vocab
                .entity_name(t.tail)
                .ok_or_else(|| Error::domain("tail index"))?;
            match &self.truth {
                Some(y) => writeln!(out, "{h}\t{l}\t{tl}\t{}", u8::from(y[i]))?,
                None => writeln!(out, "{h}\t{l}\t{tl}")?,
            }
        }
        Ok(())
    }
}

/// Parses a triple stream.
///
/// Every non-empty line must have three or four TAB-separated fields; the
/// optional fourth is a `1`/`0` truth flag and must then be present on all
/// lines.
pub fn load_triples<R: BufRead>(input: R, mode: VocabMode<'_>) -> Result<(TripleSet, Vocab)> {
    let (mut vocab, fixed) = match mode {
        VocabMode::Build => (Vocab::new(), None),
        VocabMode::Extend(v) => (v, None),
        VocabMode::Reuse(v) => (Vocab::new(), Some(v)),
    };
    let mut triples = Vec::new();
    let mut truth: Vec<bool> = Vec::new();
    let mut flagged: Option<bool> = None;

    for (n, line) in input.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "expected 3 or 4 TAB-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let has_flag = fields.len() == 4;
        match flagged {
            None => flagged = Some(has_flag),
            Some(f) if f != has_flag => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "truth flag present on some lines but not others".into(),
                })
            }
            _ => {}
        }
        if has_flag {
            truth.push(match fields[3] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("truth flag must be 1 or 0, found `{other}`"),
                    })
                }
            });
        }
        let triple = match fixed {
            Some(v) => v.resolve(fields[0], fields[1], fields[2])?,
            None => {
                let head = vocab.intern_entity(fields[0]);
                let label = vocab.intern_relation(fields[1]);
                let tail = vocab.intern_entity(fields[2]);
                Triple::new(head, label, tail)
            }
        };
        triples.push(triple);
    }

    let vocab = match fixed {
        Some(v) => v.clone(),
        None => vocab,
    };
    let set = if flagged == Some(true) {
        TripleSet::with_truth(triples, truth)?
    } else {
        TripleSet::new(triples)
    };
    Ok((set, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn counts_entities_and_relations() {
        let text = "a\tr\tb\nb\ts\tc\nc\tr\td\n";
        let (set, vocab) = load_triples(Cursor::new(text), VocabMode::Build).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(vocab.num_entities(), 4);
        assert_eq!(vocab.num_relations(), 2);
        assert_eq!(set.triples()[1], Triple::new(1, 1, 2));
    }

    #[test]
    fn two_fields_is_a_parse_error_with_line_number() {
        let text = "a\tr\tb\n\na\tr\n";
        match load_triples(Cursor::new(text), VocabMode::Build) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reuse_mode_rejects_unknown_names() {
        let (_, vocab) = load_triples(Cursor::new("a\tr\tb\n"), VocabMode::Build).unwrap();
        let err = load_triples(Cursor::new("a\tr\tzz\n"), VocabMode::Reuse(&vocab)).unwrap_err();
        match err {
            Error::UnknownSymbol { name, .. } => assert_eq!(name, "zz"),
            other => panic!("unexpected {other:?}"),
        }
        let (set, v2) = load_triples(Cursor::new("b\tr\ta\n"), VocabMode::Reuse(&vocab)).unwrap();
        assert_eq!(set.triples()[0], Triple::new(1, 0, 0));
        assert_eq!(v2, vocab);
    }

    #[test]
    fn extend_mode_appends() {
        let (_, vocab) = load_triples(Cursor::new("a\tr\tb\n"), VocabMode::Build).unwrap();
        let (set, v2) = load_triples(Cursor::new("c\tq\ta\n"), VocabMode::Extend(vocab)).unwrap();
        assert_eq!(set.triples()[0], Triple::new(2, 1, 0));
        assert_eq!(v2.num_entities(), 3);
    }

    #[test]
    fn truth_flags_parsed_and_mixing_rejected() {
        let (set, _) =
            load_triples(Cursor::new("a\tr\tb\t1\nb\tr\ta\t0\n"), VocabMode::Build).unwrap();
        assert_eq!(set.truth(), Some(&[true, false][..]));
        assert_eq!(set.positives().len(), 1);
        assert_eq!(set.negatives(), vec![Triple::new(1, 0, 0)]);
        assert!(load_triples(Cursor::new("a\tr\tb\t1\nb\tr\ta\n"), VocabMode::Build).is_err());
        assert!(load_triples(Cursor::new("a\tr\tb\tx\n"), VocabMode::Build).is_err());
    }

    #[test]
    fn membership_and_indices() {
        let t = |h, l, t| Triple::new(h, l, t);
        let set = TripleSet::new(vec![t(0, 0, 1), t(2, 0, 1), t(0, 0, 1), t(0, 0, 3)]);
        assert_eq!(set.count(&t(0, 0, 1)), 2);
        assert!(!set.contains(&t(1, 0, 0)));
        assert_eq!(set.heads_of(0, 1), &[0, 2]);
        assert_eq!(set.tails_of(0, 0), &[1, 3]);
        assert!(set.heads_of(1, 1).is_empty());
    }

    #[test]
    fn vocab_round_trip_and_export() {
        let (_, vocab) = load_triples(Cursor::new("x\tp\ty\ny\tq\tz\n"), VocabMode::Build).unwrap();
        for i in 0..vocab.num_entities() {
            assert_eq!(vocab.entity_index(vocab.entity_name(i).unwrap()), Some(i));
        }
        for i in 0..vocab.num_relations() {
            assert_eq!(
                vocab.relation_index(vocab.relation_name(i).unwrap()),
                Some(i)
            );
        }
        let mut buf = Vec::new();
        Vocab::write_names(vocab.entity_names(), &mut buf).unwrap();
        let names = Vocab::read_names(Cursor::new(buf)).unwrap();
        assert_eq!(names, vocab.entity_names());
        assert!(Vocab::from_names(vec!["a".into(), "a".into()], vec![]).is_err());
    }

    #[test]
    fn write_then_load_preserves_triples() {
        let text = "a\tr\tb\t1\nb\ts\ta\t0\n";
        let (set, vocab) = load_triples(Cursor::new(text), VocabMode::Build).unwrap();
        let mut buf = Vec::new();
        set.write(&vocab, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }
}
