//! From bAbI text to model input: parse, extract questions, pad to a fixed
//! context, build the vocabulary, encode, and run the task-16 ambiguity check.

use relnet::babi::{
    detect_task16_ambiguity, encode_sample, extract_samples, parse_babi_str, preprocess_context, Vocabulary,
};

const STORY: &str = "\
1 Daniel picked up the football there.
2 Sandra went to the garden.
3 Daniel went back to the bedroom.
4 Where is the football?\tbedroom\t1 3
5 Sandra travelled to the office.
6 Where is Sandra?\toffice\t5
";

const COLORS: &str = "\
1 Bernhard is a frog.
2 Lily is a frog.
3 Bernhard is yellow.
4 Lily is green.
5 Greg is a frog.
6 What color is Greg?\tyellow\t5 1 3
";

fn main() -> relnet::Result<()> {
    let stories = parse_babi_str(STORY)?;
    let samples = extract_samples(&stories, 2, "demo");
    for s in &samples {
        println!("{}: {:?} -> {}", s.id, s.question, s.answer);
        for &i in &s.supporting {
            println!("  supported by {:?}", s.context[i]);
        }
    }

    let vocab = Vocabulary::build(&samples);
    println!("{} words, {} answers", vocab.word_count(), vocab.answer_count());
    let padded = preprocess_context(&samples[1], 6);
    let encoded = encode_sample(&padded, &vocab)?;
    for (sentence, ids) in padded.context.iter().zip(&encoded.context) {
        println!("  {sentence:<32} {ids:?}");
    }
    println!("  question {:?}, label {}", encoded.question, encoded.label);

    let colors = extract_samples(&parse_babi_str(COLORS)?, 16, "colors");
    let report = detect_task16_ambiguity(&colors[0])?;
    println!(
        "task 16: colour votes {:?}, majority-ambiguous {}, multi-support {}",
        report.color_counts, report.majority_ambiguous, report.multi_support
    );
    Ok(())
}
