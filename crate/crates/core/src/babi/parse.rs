//! bAbI line format.
//!
//! ```text
//! 1 Mary moved to the bathroom.
//! 2 John went to the hallway.
//! 3 Where is Mary? \tbathroom\t1
//! ```
//!
//! Statements are `<n> <sentence>`; questions carry a tab-separated answer
//! and space-separated supporting line numbers. A line numbered 1 starts a
//! new story.

use std::io::BufRead;
use std::path::Path;

use super::sample::Sample;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StoryLine {
    Statement {
        number: usize,
        text: String,
    },
    Question {
        number: usize,
        text: String,
        answer: String,
        supporting: Vec<usize>,
    },
}

impl StoryLine {
    pub fn number(&self) -> usize {
        match self {
            StoryLine::Statement { number, .. } | StoryLine::Question { number, .. } => *number,
        }
    }
}

/// One story in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawStory {
    pub lines: Vec<StoryLine>,
}

impl RawStory {
    pub fn statements(&self) -> impl Iterator<Item = (usize, &str)> {
        self.lines.iter().filter_map(|l| match l {
            StoryLine::Statement { number, text } => Some((*number, text.as_str())),
            _ => None,
        })
    }

    pub fn questions(&self) -> impl Iterator<Item = &StoryLine> {
        self.lines
            .iter()
            .filter(|l| matches!(l, StoryLine::Question { .. }))
    }
}

pub fn parse_babi_str(text: &str) -> Result<Vec<RawStory>> {
    parse_babi_file(text.as_bytes(), Path::new("<string>"))
}

/// Parses a bAbI task file. `path` is only used in error messages.
pub fn parse_babi_file<R: BufRead>(reader: R, path: &Path) -> Result<Vec<RawStory>> {
    let mut stories = Vec::new();
    let mut current = RawStory::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            file: path.to_path_buf(),
            line: line_no,
            message,
        };
        let (num, rest) = line
            .split_once(' ')
            .ok_or_else(|| err("expected `<number> <text>`".into()))?;
        let number: usize = num
            .parse()
            .map_err(|_| err(format!("invalid line number `{num}`")))?;
        if number == 0 {
            return Err(err("line numbers start at 1".into()));
        }
        if number == 1 {
            if !current.lines.is_empty() {
                stories.push(std::mem::take(&mut current));
            }
        } else if let Some(prev) = current.lines.last() {
            if number <= prev.number() {
                return Err(err(format!(
                    "line number {number} does not follow {}",
                    prev.number()
                )));
            }
        }

        let entry = if rest.contains('\t') {
            let mut fields = rest.split('\t');
            let text = fields.next().unwrap_or_default().trim().to_string();
            let answer = fields
                .next()
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .ok_or_else(|| err("question without an answer".into()))?
                .to_string();
            let supporting = fields
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| err(format!("invalid supporting fact `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            for &s in &supporting {
                let is_earlier_statement = current.lines.iter().any(
                    |l| matches!(l, StoryLine::Statement { number, .. } if *number == s),
                );
                if !is_earlier_statement {
                    return Err(err(format!(
                        "supporting fact {s} is not an earlier statement"
                    )));
                }
            }
            if text.is_empty() {
                return Err(err("empty question".into()));
            }
            StoryLine::Question {
                number,
                text,
                answer,
                supporting,
            }
        } else {
            let text = rest.trim().to_string();
            if text.is_empty() {
                return Err(err("empty statement".into()));
            }
            StoryLine::Statement { number, text }
        };
        current.lines.push(entry);
    }
    if !current.lines.is_empty() {
        stories.push(current);
    }
    Ok(stories)
}

/// Writes stories back in bAbI line format.
pub fn serialize_stories(stories: &[RawStory]) -> String {
    let mut out = String::new();
    for story in stories {
        for line in &story.lines {
            match line {
                StoryLine::Statement { number, text } => {
                    out.push_str(&format!("{number} {text}\n"));
                }
                StoryLine::Question {
                    number,
                    text,
                    answer,
                    supporting,
                } => {
                    let sup: Vec<String> = supporting.iter().map(|s| s.to_string()).collect();
                    out.push_str(&format!("{number} {text}\t{answer}\t{}\n", sup.join(" ")));
                }
            }
        }
    }
    out
}

/// One sample per question; the context is every statement before the
/// question within its story. Sample ids are `{id_prefix}/{index}`.
pub fn extract_samples(stories: &[RawStory], task: u8, id_prefix: &str) -> Vec<Sample> {
    let mut samples = Vec::new();
    for story in stories {
        let mut context: Vec<String> = Vec::new();
        let mut numbers: Vec<usize> = Vec::new();
        for line in &story.lines {
            match line {
                StoryLine::Statement { number, text } => {
                    context.push(text.clone());
                    numbers.push(*number);
                }
                StoryLine::Question {
                    text,
                    answer,
                    supporting,
                    ..
                } => {
                    let supporting = supporting
                        .iter()
                        .filter_map(|s| numbers.iter().position(|n| n == s))
                        .collect();
                    samples.push(Sample {
                        id: format!("{id_prefix}/{}", samples.len()),
                        task,
                        context: context.clone(),
                        question: text.clone(),
                        answer: answer.clone(),
                        supporting,
                    });
                }
            }
        }
    }
    samples
}
