//! Small relational QA tasks in bAbI form.
//!
//! The chain length `k` is the number of supporting facts:
//!
//! * `k = 1`: `A went to the L.` → `Where is A?`
//! * `k = 2`: `A got the O.`, `A went to the L.` → `Where is the O?`
//! * `k = 3`: `A got the O.`, `A gave the O to B.`, `B went to the L.` →
//!   `Where is the O?`
//!
//! Chain facts keep their order; distractors about other people and other
//! objects are interleaved at random positions. People in the chain appear
//! in no other sentence and every object is picked up at most once, so the
//! chain facts are exactly the facts the answer depends on. The answer
//! location is drawn uniformly.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::babi::{tokenize, DatasetSplits, Sample};
use crate::error::{Error, Result};

pub const PEOPLE: [&str; 5] = ["Mary", "John", "Sandra", "Daniel", "Greg"];
pub const OBJECTS: [&str; 3] = ["milk", "apple", "football"];
pub const LOCATIONS: [&str; 4] = ["hallway", "office", "garden", "kitchen"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Supporting facts per question, `1..=3`.
    pub k: u8,
    pub people: usize,
    pub objects: usize,
    pub locations: usize,
    /// Maximum number of context sentences.
    pub context_len: usize,
    pub distractors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k: 2,
            people: 5,
            objects: 3,
            locations: 4,
            context_len: 20,
            distractors: 4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(Error::config("synth.k", "must be 1, 2 or 3"));
        }
        let chain_people = if self.k == 3 { 2 } else { 1 };
        let pools = [
            ("synth.people", self.people, PEOPLE.len()),
            ("synth.objects", self.objects, OBJECTS.len()),
            ("synth.locations", self.locations, LOCATIONS.len()),
        ];
        for (key, n, max) in pools {
            if n < 2 || n > max {
                return Err(Error::config(key, format!("must be in 2..={max}")));
            }
        }
        if self.distractors > 0 && self.people <= chain_people {
            return Err(Error::config(
                "synth.distractors",
                "distractors need people outside the chain",
            ));
        }
        if self.k as usize + self.distractors > self.context_len {
            return Err(Error::config(
                "synth.context_len",
                format!(
                    "{} chain facts plus {} distractors do not fit in {} sentences",
                    self.k, self.distractors, self.context_len
                ),
            ));
        }
        Ok(())
    }

    /// Token count of the generated language.
    pub fn vocabulary_size(&self) -> usize {
        let function_words = ["went", "to", "the", "got", "gave", "where", "is"];
        self.people + self.objects + self.locations + function_words.len()
    }
}

/// `count` samples with task id `k` and ids `{id_prefix}/{i}`.
pub fn generate(cfg: &SynthConfig, count: usize, id_prefix: &str) -> Result<Vec<Sample>> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::config("synth.count", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|i| generate_one(cfg, &mut rng, format!("{id_prefix}/{i}")))
        .collect()
}

fn generate_one(cfg: &SynthConfig, rng: &mut ChaCha8Rng, id: String) -> Result<Sample> {
    let people = &PEOPLE[..cfg.people];
    let objects = &OBJECTS[..cfg.objects];
    let locations = &LOCATIONS[..cfg.locations];
    let answer = locations[rng.gen_range(0..locations.len())];

    let mut order: Vec<usize> = (0..people.len()).collect();
    order.shuffle(rng);
    let carrier = people[order[0]];
    let object = objects[rng.gen_range(0..objects.len())];
    let (chain, question, busy) = match cfg.k {
        1 => (vec![format!("{carrier} went to the {answer}.")], format!("Where is {carrier}?"), 1),
        2 => (
            vec![
                format!("{carrier} got the {object}."),
                format!("{carrier} went to the {answer}."),
            ],
            format!("Where is the {object}?"),
            1,
        ),
        _ => {
            let receiver = people[order[1]];
            (
                vec![
                    format!("{carrier} got the {object}."),
                    format!("{carrier} gave the {object} to {receiver}."),
                    format!("{receiver} went to the {answer}."),
                ],
                format!("Where is the {object}?"),
                2,
            )
        }
    };
    let others: Vec<&str> = order[busy..].iter().map(|&i| people[i]).collect();
    let mut free_objects: Vec<&str> = objects.iter().copied().filter(|o| *o != object).collect();
    free_objects.shuffle(rng);

    let mut distractors = Vec::with_capacity(cfg.distractors);
    for _ in 0..cfg.distractors {
        let who = others[rng.gen_range(0..others.len())];
        if rng.gen_bool(0.3) {
            if let Some(o) = free_objects.pop() {
                distractors.push(format!("{who} got the {o}."));
                continue;
            }
        }
        let place = locations[rng.gen_range(0..locations.len())];
        distractors.push(format!("{who} went to the {place}."));
    }

    let total = chain.len() + distractors.len();
    let mut slots: Vec<usize> = rand::seq::index::sample(rng, total, chain.len()).into_vec();
    slots.sort_unstable();
    let mut context = Vec::with_capacity(total);
    let (mut c, mut d) = (chain.into_iter(), distractors.into_iter());
    for pos in 0..total {
        let next = if slots.contains(&pos) { c.next() } else { d.next() };
        context.push(next.expect("slot counts match"));
    }
    Ok(Sample {
        id,
        task: cfg.k,
        context,
        question,
        answer: answer.to_string(),
        supporting: slots,
    })
}

/// Answers a generated sample by following who holds what and who is where.
pub fn oracle_answer(sample: &Sample) -> Result<String> {
    let fail = |msg: String| Error::Data(format!("sample {}: {msg}", sample.id));
    let mut position: BTreeMap<String, String> = BTreeMap::new();
    let mut holder: BTreeMap<String, String> = BTreeMap::new();
    for sentence in sample.real_context() {
        let t = tokenize(sentence);
        let t: Vec<&str> = t.iter().map(String::as_str).collect();
        match t.as_slice() {
            [who, "went", "to", "the", place] => {
                position.insert(who.to_string(), place.to_string());
            }
            [who, "got", "the", obj] => {
                holder.insert(obj.to_string(), who.to_string());
            }
            [who, "gave", "the", obj, "to", to] => {
                if holder.get(*obj).map(String::as_str) != Some(*who) {
                    return Err(fail(format!("{who} gives the {obj} without holding it")));
                }
                holder.insert(obj.to_string(), to.to_string());
            }
            _ => return Err(fail(format!("unexpected statement `{sentence}`"))),
        }
    }
    let q = tokenize(&sample.question);
    let q: Vec<&str> = q.iter().map(String::as_str).collect();
    let person = match q.as_slice() {
        ["where", "is", "the", obj] => holder
            .get(*obj)
            .ok_or_else(|| fail(format!("nobody holds the {obj}")))?
            .clone(),
        ["where", "is", who] => who.to_string(),
        _ => return Err(fail(format!("unexpected question `{}`", sample.question))),
    };
    position
        .get(&person)
        .cloned()
        .ok_or_else(|| fail(format!("location of {person} is unknown")))
}

/// Train/valid/test splits from disjoint seed streams derived from `cfg.seed`.
pub fn synth_splits(cfg: &SynthConfig, train: usize, valid: usize, test: usize) -> Result<DatasetSplits> {
    let stream = |offset: u64, count: usize, name: &str| {
        let c = SynthConfig {
            seed: cfg.seed.wrapping_mul(3).wrapping_add(offset),
            ..cfg.clone()
        };
        generate(&c, count, &format!("synth-k{}/{name}", cfg.k))
    };
    Ok(DatasetSplits {
        train: stream(0, train, "train")?,
        valid: stream(1, valid, "valid")?,
        test: stream(2, test, "test")?,
    })
}

/// bAbI text form: one story per sample, statements numbered from 1 and the
/// question line carrying the answer and 1-based supporting line numbers.
pub fn render_babi(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        let real: Vec<&str> = s.real_context().collect();
        for (i, sentence) in real.iter().enumerate() {
            out.push_str(&format!("{} {sentence}\n", i + 1));
        }
        let support: Vec<String> = s.supporting.iter().map(|i| (i + 1).to_string()).collect();
        out.push_str(&format!(
            "{} {}\t{}\t{}\n",
            real.len() + 1,
            s.question,
            s.answer,
            support.join(" ")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::babi::{extract_samples, parse_babi_str};

    #[test]
    fn one_hop_shape() {
        let cfg = SynthConfig {
            k: 1,
            distractors: 0,
            ..SynthConfig::default()
        };
        let s = &generate(&cfg, 1, "x").unwrap()[0];
        assert_eq!(s.context.len(), 1);
        assert!(s.context[0].ends_with(&format!("went to the {}.", s.answer)));
        assert!(s.question.starts_with("Where is "));
        assert_eq!(s.supporting, vec![0]);
    }

    #[test]
    fn two_hop_mirrors_pickup_then_move() {
        let cfg = SynthConfig::default();
        for s in generate(&cfg, 50, "x").unwrap() {
            assert_eq!(s.supporting.len(), 2);
            assert!(s.context[s.supporting[0]].contains(" got the "));
            assert!(s.context[s.supporting[1]].contains(" went to the "));
            assert!(s.question.starts_with("Where is the "));
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let cfg = SynthConfig {
            k: 3,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg, 20, "x").unwrap(), generate(&cfg, 20, "x").unwrap());
    }

    #[test]
    fn vocabulary_is_small() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.vocabulary_size(), 19);
        let mut words = std::collections::BTreeSet::new();
        for k in 1..=3 {
            let c = SynthConfig { k, ..cfg.clone() };
            for s in generate(&c, 300, "x").unwrap() {
                for sentence in s.context.iter().chain([&s.question]) {
                    words.extend(tokenize(sentence));
                }
            }
        }
        assert!(words.len() <= 19, "{words:?}");
    }

    #[test]
    fn oversized_chain_is_rejected() {
        let cfg = SynthConfig {
            k: 3,
            context_len: 5,
            distractors: 3,
            ..SynthConfig::default()
        };
        assert!(generate(&cfg, 1, "x").is_err());
        assert!(generate(&SynthConfig { k: 4, ..SynthConfig::default() }, 1, "x").is_err());
    }

    #[test]
    fn removing_a_supporting_fact_breaks_the_oracle() {
        for k in 1..=3 {
            let cfg = SynthConfig { k, ..SynthConfig::default() };
            for s in generate(&cfg, 30, "x").unwrap() {
                for &drop in &s.supporting {
                    let mut t = s.clone();
                    t.context.remove(drop);
                    assert!(oracle_answer(&t).is_err(), "{t:?}");
                }
                let only = Sample {
                    context: s.supporting.iter().map(|&i| s.context[i].clone()).collect(),
                    ..s.clone()
                };
                assert_eq!(oracle_answer(&only).unwrap(), s.answer);
            }
        }
    }

    #[test]
    fn babi_rendering_parses_back() {
        let cfg = SynthConfig { k: 3, ..SynthConfig::default() };
        let samples = generate(&cfg, 10, "x").unwrap();
        let stories = parse_babi_str(&render_babi(&samples)).unwrap();
        let back = extract_samples(&stories, 3, "x");
        assert_eq!(back, samples);
    }
}
