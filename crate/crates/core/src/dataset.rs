//! Encoded-dataset container.
//!
//! # Layout (version 1)
//!
//! All integers little-endian; strings are `u32` byte length + UTF-8.
//!
//! ```text
//! magic        4 bytes "RNDS"
//! version      u32     1
//! context_len  u32
//! words        u32 count, then strings in id order
//! answers      u32 count, then strings in class order
//! 3 splits in the order train, valid, test:
//!   count      u32
//!   per sample:
//!     id         string
//!     task       u8
//!     label      u32
//!     sentences  u32 count, each: u32 length + u32 token ids
//!     question   u32 length + u32 token ids
//!     supporting u32 count + u32 indices
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::babi::{encode_sample, preprocess_context, DatasetSplits, EncodedSample, Split, Vocabulary};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"RNDS";
pub const DATASET_VERSION: u32 = 1;

/// Vocabulary plus the three encoded splits, all preprocessed to the same
/// context length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedDataset {
    pub vocab: Vocabulary,
    pub context_len: usize,
    pub train: Vec<EncodedSample>,
    pub valid: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

impl EncodedDataset {
    /// Builds the vocabulary from train + valid, then preprocesses and
    /// encodes every split.
    pub fn from_splits(splits: &DatasetSplits, context_len: usize) -> Result<Self> {
        let vocab = Vocabulary::build(splits.train.iter().chain(&splits.valid));
        let encode = |split: Split| -> Result<Vec<EncodedSample>> {
            splits
                .get(split)
                .iter()
                .map(|s| {
                    if s.context.is_empty() {
                        return Err(Error::Data(format!("sample {} has an empty context", s.id)));
                    }
                    encode_sample(&preprocess_context(s, context_len), &vocab)
                })
                .collect()
        };
        Ok(EncodedDataset {
            train: encode(Split::Train)?,
            valid: encode(Split::Valid)?,
            test: encode(Split::Test)?,
            vocab,
            context_len,
        })
    }

    pub fn get(&self, split: Split) -> &[EncodedSample] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn vocab_hash(&self) -> String {
        self.vocab.fingerprint()
    }

    /// Sample count per task for one split.
    pub fn task_counts(&self, split: Split) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for s in self.get(split) {
            *counts.entry(s.task).or_default() += 1;
        }
        counts
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        put_u32(w, DATASET_VERSION)?;
        put_len(w, self.context_len)?;
        for table in [self.vocab.words(), self.vocab.answers()] {
            put_len(w, table.len())?;
            for s in table {
                put_str(w, s)?;
            }
        }
        for split in Split::ALL {
            let samples = self.get(split);
            put_len(w, samples.len())?;
            for s in samples {
                put_str(w, &s.id)?;
                w.write_all(&[s.task])?;
                put_len(w, s.label)?;
                put_len(w, s.context.len())?;
                for sentence in &s.context {
                    put_ids(w, sentence)?;
                }
                put_ids(w, &s.question)?;
                put_ids(w, &s.supporting)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not an encoded dataset (bad magic)".into()));
        }
        let version = get_u32(r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let context_len = get_u32(r)? as usize;
        let mut tables = Vec::new();
        for _ in 0..2 {
            let n = get_u32(r)?;
            tables.push((0..n).map(|_| get_str(r)).collect::<Result<Vec<_>>>()?);
        }
        let answers = tables.pop().expect("two tables");
        let words = tables.pop().expect("two tables");
        let vocab = Vocabulary::from_tables(words, answers);
        let mut splits = Vec::new();
        for _ in Split::ALL {
            let n = get_u32(r)?;
            let mut samples = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let id = get_str(r)?;
                let mut task = [0u8];
                r.read_exact(&mut task)?;
                let label = get_u32(r)? as usize;
                let sentences = get_u32(r)?;
                let context = (0..sentences).map(|_| get_ids(r)).collect::<Result<_>>()?;
                samples.push(EncodedSample {
                    id,
                    task: task[0],
                    label,
                    context,
                    question: get_ids(r)?,
                    supporting: get_ids(r)?,
                });
            }
            splits.push(samples);
        }
        let test = splits.pop().expect("three splits");
        let valid = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        let ds = EncodedDataset {
            vocab,
            context_len,
            train,
            valid,
            test,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Context lengths, token ids and labels are all in range.
    pub fn validate(&self) -> Result<()> {
        let words = self.vocab.word_count();
        let classes = self.vocab.answer_count();
        for split in Split::ALL {
            for s in self.get(split) {
                let bad = s.context.len() != self.context_len
                    || s.label >= classes
                    || s.context.iter().chain([&s.question]).flatten().any(|&t| t >= words);
                if bad {
                    return Err(Error::Format(format!(
                        "sample {} is inconsistent with the vocabulary or context length",
                        s.id
                    )));
                }
            }
        }
        Ok(())
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_len<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    put_u32(w, v)
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    put_len(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn put_ids<W: Write>(w: &mut W, ids: &[usize]) -> Result<()> {
    put_len(w, ids.len())?;
    for &id in ids {
        put_len(w, id)?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let n = get_u32(r)? as usize;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))
}

fn get_ids<R: Read>(r: &mut R) -> Result<Vec<usize>> {
    let n = get_u32(r)?;
    (0..n).map(|_| get_u32(r).map(|v| v as usize)).collect()
}
