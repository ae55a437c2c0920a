//! Corpus directory layout.
//!
//! Accepts the published 10k layout with a predefined validation split,
//! where task `N` lives in `qaN_train.txt`, `qaN_valid.txt` and
//! `qaN_test.txt`, and also the long names `qaN_<task-name>_<split>.txt`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::parse::{extract_samples, parse_babi_file};
use super::sample::Sample;
use crate::error::{Error, Result};

pub const TASK_COUNT: u8 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::config("split", format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSplits {
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl DatasetSplits {
    pub fn get(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut Vec<Sample> {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }
}

/// Locates the file for `task` and `split`, or `None` when absent.
pub fn find_split_file(dir: &Path, task: u8, split: Split) -> Result<Option<PathBuf>> {
    let short = dir.join(format!("qa{task}_{}.txt", split.as_str()));
    if short.is_file() {
        return Ok(Some(short));
    }
    let prefix = format!("qa{task}_");
    let suffix = format!("_{}.txt", split.as_str());
    let mut matches: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(&suffix))
        })
        .collect();
    matches.sort();
    Ok(matches.into_iter().next())
}

/// Loads the listed tasks with their published train/valid/test separation.
/// Every missing file is reported in one error.
pub fn split_dataset(dir: &Path, tasks: &[u8]) -> Result<DatasetSplits> {
    if !dir.is_dir() {
        return Err(Error::MissingFiles(vec![dir.to_path_buf()]));
    }
    let mut files = Vec::new();
    let mut missing = Vec::new();
    for &task in tasks {
        for split in Split::ALL {
            match find_split_file(dir, task, split)? {
                Some(p) => files.push((task, split, p)),
                None => missing.push(dir.join(format!("qa{task}_{}.txt", split.as_str()))),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let mut out = DatasetSplits::default();
    for (task, split, path) in files {
        let reader = BufReader::new(File::open(&path)?);
        let stories = parse_babi_file(reader, &path)?;
        let prefix = format!("qa{task}/{}", split.as_str());
        out.get_mut(split).extend(extract_samples(&stories, task, &prefix));
    }
    Ok(out)
}
