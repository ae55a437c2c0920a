//! bAbI QA corpus: parsing, sample extraction, preprocessing, vocabulary,
//! corpus layout and the task-16 ambiguity analysis.

mod ambiguity;
mod corpus;
mod parse;
mod sample;
mod vocab;

pub use ambiguity::{
    detect_task16_ambiguity, summarize_ambiguity, Ambiguity, AmbiguityReport, AmbiguitySummary,
};
pub use corpus::{find_split_file, split_dataset, DatasetSplits, Split, TASK_COUNT};
pub use parse::{extract_samples, parse_babi_file, parse_babi_str, serialize_stories, RawStory, StoryLine};
pub use sample::{preprocess_context, EncodedSample, Sample, CONTEXT_SENTENCES, PAD_SENTENCE};
pub use vocab::{encode_sample, tokenize, Vocabulary, PAD_ID, UNK_ID};
