use serde::{Deserialize, Serialize};

/// Context length fed to the relation network.
pub const CONTEXT_SENTENCES: usize = 20;

/// Filler sentence used to pad short contexts. Tokenizes to the PAD id.
pub const PAD_SENTENCE: &str = "<pad>";

/// One question with the statements that precede it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// Task id in `1..=20`.
    pub task: u8,
    pub context: Vec<String>,
    pub question: String,
    pub answer: String,
    /// Indices into `context`.
    pub supporting: Vec<usize>,
}

impl Sample {
    pub fn is_pad(&self, index: usize) -> bool {
        self.context.get(index).is_some_and(|s| s == PAD_SENTENCE)
    }

    /// Context sentences that are not padding.
    pub fn real_context(&self) -> impl Iterator<Item = &str> {
        self.context
            .iter()
            .map(String::as_str)
            .filter(|s| *s != PAD_SENTENCE)
    }
}

/// Numeric form of a preprocessed sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub id: String,
    pub task: u8,
    pub context: Vec<Vec<usize>>,
    pub question: Vec<usize>,
    pub label: usize,
    pub supporting: Vec<usize>,
}

/// Fits the context to exactly `len` sentences.
///
/// Longer contexts keep their last `len` statements; shorter ones get PAD
/// sentences appended. Supporting-fact indices follow the kept sentences and
/// are dropped when their sentence is cut.
pub fn preprocess_context(sample: &Sample, len: usize) -> Sample {
    let mut out = sample.clone();
    let n = sample.context.len();
    if n > len {
        let drop = n - len;
        out.context = sample.context[drop..].to_vec();
        out.supporting = sample
            .supporting
            .iter()
            .filter(|&&i| i >= drop)
            .map(|&i| i - drop)
            .collect();
    } else {
        out.context.extend(std::iter::repeat(PAD_SENTENCE.to_string()).take(len - n));
    }
    out
}
