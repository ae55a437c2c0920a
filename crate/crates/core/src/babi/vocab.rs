use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use super::sample::{EncodedSample, Sample, PAD_SENTENCE};
use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
/// Tokens unseen at vocabulary construction map here.
pub const UNK_ID: usize = 1;

const PAD_TOKEN: &str = PAD_SENTENCE;
const UNK_TOKEN: &str = "<unk>";

/// Lowercase, strip sentence-final punctuation, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_end_matches(['.', '?', '!']).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Word ids (PAD = 0, UNK = 1, then sorted tokens) and answer classes
/// (sorted full answer strings).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    answers: Vec<String>,
    word_ids: HashMap<String, usize>,
    answer_ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds the vocabulary from the given samples (normally train + valid).
    pub fn build<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let mut tokens = BTreeSet::new();
        let mut answers = BTreeSet::new();
        for s in samples {
            for sentence in s.real_context().chain(std::iter::once(s.question.as_str())) {
                tokens.extend(tokenize(sentence));
            }
            answers.insert(s.answer.clone());
        }
        tokens.remove(PAD_TOKEN);
        tokens.remove(UNK_TOKEN);
        let words = [PAD_TOKEN.to_string(), UNK_TOKEN.to_string()]
            .into_iter()
            .chain(tokens)
            .collect();
        Self::from_tables(words, answers.into_iter().collect())
    }

    /// Rebuilds lookup maps from id-ordered tables.
    pub fn from_tables(words: Vec<String>, answers: Vec<String>) -> Self {
        let word_ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let answer_ids = answers.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Vocabulary {
            words,
            answers,
            word_ids,
            answer_ids,
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Number of answer classes (`dict_size`).
    pub fn answer_count(&self) -> usize {
        self.answers.len()
    }

    pub fn word_id(&self, token: &str) -> usize {
        self.word_ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn answer_id(&self, answer: &str) -> Option<usize> {
        self.answer_ids.get(answer).copied()
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.word_id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.words.get(i).map(String::as_str).unwrap_or(UNK_TOKEN))
            .collect()
    }

    /// SHA-256 over the id-ordered tables, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        h.update([1u8]);
        for a in &self.answers {
            h.update(a.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encodes a preprocessed sample. Unknown words become UNK; an unknown
/// answer is an error.
pub fn encode_sample(sample: &Sample, vocab: &Vocabulary) -> Result<EncodedSample> {
    let label = vocab.answer_id(&sample.answer).ok_or_else(|| {
        Error::Data(format!(
            "sample {}: answer `{}` is not in the answer vocabulary",
            sample.id, sample.answer
        ))
    })?;
    let context = sample
        .context
        .iter()
        .map(|s| {
            let ids = vocab.encode_text(s);
            if ids.is_empty() {
                vec![PAD_ID]
            } else {
                ids
            }
        })
        .collect();
    let question = vocab.encode_text(&sample.question);
    if question.is_empty() {
        return Err(Error::Data(format!("sample {}: empty question", sample.id)));
    }
    Ok(EncodedSample {
        id: sample.id.clone(),
        task: sample.task,
        context,
        question,
        label,
        supporting: sample.supporting.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::babi::preprocess_context;

    fn sample(context: &[&str], q: &str, a: &str) -> Sample {
        Sample {
            id: "s".into(),
            task: 2,
            context: context.iter().map(|s| s.to_string()).collect(),
            question: q.into(),
            answer: a.into(),
            supporting: vec![],
        }
    }

    #[test]
    fn tokenizer_rule() {
        assert_eq!(
            tokenize("Mary got the milk there."),
            vec!["mary", "got", "the", "milk", "there"]
        );
        assert_eq!(tokenize("Where is the milk?"), vec!["where", "is", "the", "milk"]);
        assert_eq!(tokenize(PAD_SENTENCE), vec![PAD_SENTENCE]);
    }

    #[test]
    fn ids_are_sorted_and_deterministic() {
        let samples = vec![
            sample(&["Mary got the milk there."], "Where is the milk?", "hallway"),
            sample(&["John moved to the office."], "Where is John?", "office"),
        ];
        let a = Vocabulary::build(&samples);
        let b = Vocabulary::build(&samples);
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.words()[PAD_ID], PAD_SENTENCE);
        assert_eq!(a.words()[UNK_ID], "<unk>");
        let rest = &a.words()[2..];
        assert!(rest.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.answers(), &["hallway", "office"]);
        assert_eq!(a.answer_id("hallway"), Some(0));
    }

    #[test]
    fn multi_word_answers_are_single_classes() {
        let v = Vocabulary::build(&[sample(&["x."], "What is Mary carrying?", "apple,milk")]);
        assert_eq!(v.answer_count(), 1);
        assert_eq!(v.answer_id("apple,milk"), Some(0));
    }

    #[test]
    fn pad_sentences_and_unknown_words() {
        let train = sample(&["Mary got the milk there."], "Where is the milk?", "hallway");
        let v = Vocabulary::build([&train]);
        let pre = preprocess_context(&train, 4);
        let enc = encode_sample(&pre, &v).unwrap();
        assert_eq!(enc.context.len(), 4);
        assert_eq!(enc.context[1], vec![PAD_ID]);
        assert_eq!(v.decode(&enc.context[0]), vec!["mary", "got", "the", "milk", "there"]);

        let unseen = sample(&["Zed got the milk there."], "Where is the milk?", "hallway");
        let enc = encode_sample(&unseen, &v).unwrap();
        assert_eq!(enc.context[0][0], UNK_ID);

        let bad = sample(&["Mary got the milk there."], "Where is the milk?", "garden");
        assert!(encode_sample(&bad, &v).is_err());
    }
}
