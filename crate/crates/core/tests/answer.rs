use proptest::prelude::*;
use symaudio_core::answer::{parse_agent_selection, parse_answer, AnswerError};
use symaudio_core::model::LayerSet;
use symaudio_core::prompt::{option_letter, MAX_OPTIONS};
use symaudio_core::Layer;

fn options(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("choice number {i}")).collect()
}

proptest! {
    #[test]
    fn letters_in_range_parse(n in 2..=MAX_OPTIONS, pick in 0usize..MAX_OPTIONS) {
        let opts = options(n);
        let i = pick % n;
        let l = option_letter(i);
        for raw in [format!("{l}"), format!("({l})"), format!("{l}."), format!("The answer is {l}"), format!("I pick ({l}) here")] {
            prop_assert_eq!(parse_answer(&raw, &opts), Ok(i), "{}", raw);
        }
        prop_assert_eq!(parse_answer(&opts[i].to_uppercase(), &opts), Ok(i));
    }

    #[test]
    fn letters_out_of_range_fail(n in 2..MAX_OPTIONS) {
        let l = option_letter(n);
        let got = parse_answer(&format!("({l})"), &options(n));
        prop_assert!(matches!(got, Err(AnswerError::AnswerUnparseable { .. })), "got {:?}", got);
    }

    #[test]
    fn arbitrary_text_never_panics(raw in "\\PC{0,40}") {
        let _ = parse_answer(&raw, &options(4));
    }
}

#[test]
fn earlier_rules_win() {
    let opts: Vec<String> = vec!["B".into(), "cat".into()];
    // Rule 1 reads the bare letter before option text is considered.
    assert_eq!(parse_answer("B", &opts), Ok(1));
    let opts: Vec<String> = vec!["dog".into(), "cat".into()];
    assert_eq!(parse_answer("(A) cat", &opts), Ok(0));
    assert_eq!(parse_answer("cat", &opts), Ok(1));
}

#[test]
fn ambiguity_is_unparseable() {
    let opts: Vec<String> = vec!["dog".into(), "cat".into(), "cow".into()];
    for raw in ["(A) or (B)", "dog or cat", "", "A B", "the answer is b"] {
        assert!(matches!(parse_answer(raw, &opts), Err(AnswerError::AnswerUnparseable { .. })), "{raw:?}");
    }
    assert_eq!(parse_answer("A", &opts[..1]), Err(AnswerError::InvalidOptions(1)));
}

#[test]
fn agent_selection_keeps_offered_layers() {
    let offered: LayerSet = [Layer::Events, Layer::Chords, Layer::Notes].into_iter().collect();
    assert_eq!(
        parse_agent_selection("chords, Notes, transcript", offered),
        Ok([Layer::Chords, Layer::Notes].into_iter().collect())
    );
    assert!(parse_agent_selection("none", offered).is_err());
}
