use commonality_core::corpus::{
    normalize, parse_enumerated_line, parse_pairs, ConceptPropertyPair, Relation, Triple, Vocabulary,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,40}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normalize_idempotent_on_messy_whitespace(s in "[ \\t_A-Za-z\u{c9}\u{df}\u{130}]{0,30}") {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once.clone());
        prop_assert!(!once.starts_with(' ') && !once.ends_with(' ') && !once.contains("  "));
    }

    #[test]
    fn verbalization_is_total_and_deterministic(
        head in "[a-z]{1,8}( [a-z]{1,8})?",
        tail in "[a-z]{1,8}( [a-z]{1,8})?",
        r in 0usize..5,
    ) {
        let t = Triple::new(&head, Relation::ALL[r], &tail).unwrap();
        let a = t.verbalize().unwrap();
        prop_assert_eq!(&a, &t.verbalize().unwrap());
        prop_assert_eq!(a.concept, normalize(&head));
        prop_assert!(a.property.ends_with(&normalize(&tail)));
    }

    #[test]
    fn enumerated_line_yields_one_pair_per_concept(
        concepts in prop::collection::vec("[b-z]{3,8}( [b-z]{3,8})?", 1..7),
        cue in prop::sample::select(vec!["have", "has", "are", "is", "can be"]),
        property in "[b-z]{3,8}( [b-z]{3,8}){0,2}",
        index in prop::option::of(1u32..40),
    ) {
        let prefix = index.map(|i| format!("{i}. ")).unwrap_or_default();
        let line = format!("{prefix}{} {cue} {property}", concepts.join(", "));
        let pairs = parse_enumerated_line(&line).unwrap();
        prop_assert_eq!(pairs.len(), concepts.len());
        for (pair, c) in pairs.iter().zip(&concepts) {
            prop_assert_eq!(&pair.concept, c);
        }
    }

    #[test]
    fn min_count_two_never_keeps_a_singleton_property(
        raw in prop::collection::vec((0u8..12, 0u8..8), 1..60),
    ) {
        let pairs: Vec<ConceptPropertyPair> = raw
            .iter()
            .map(|(c, p)| ConceptPropertyPair::positive(&format!("c{c}"), &format!("p{p}")).unwrap())
            .collect();
        let vocab = Vocabulary::build(&pairs, 2).unwrap();
        for (id, name) in vocab.properties.names().iter().enumerate() {
            let holders: std::collections::BTreeSet<&str> = pairs
                .iter()
                .filter(|p| &p.property == name)
                .map(|p| p.concept.as_str())
                .collect();
            prop_assert!(holders.len() >= 2);
            prop_assert_eq!(vocab.property_count(id as u32) as usize, holders.len());
        }
    }
}

#[test]
fn pair_file_with_bad_lines() {
    let text = "ball\ta round shape\nbroken line\nwheel\ta round shape\t1\ncone\ta round shape\t2\n";
    let parsed = parse_pairs(text, false).unwrap();
    assert_eq!(parsed.records.len(), 2);
    assert_eq!(parsed.rejected.len(), 2);
    assert!(parse_pairs(text, true).unwrap_err().to_string().starts_with("line 2:"));
}
