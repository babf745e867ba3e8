use commonality::fixtures::planted_corpus;
use commonality::formats::{
    format_embeddings, format_table_tsv, load_model, parse_embeddings, parse_table_tsv, save_model,
};
use commonality_core::commonality::TableRow;
use commonality_core::encoder::{train, EncoderConfig, Side};
use proptest::prelude::*;

#[test]
fn saved_model_loads_exactly() {
    let corpus = planted_corpus(4);
    let config = EncoderConfig {
        dim: 8,
        max_epochs: 3,
        patience: 1,
        ..EncoderConfig::default()
    };
    let model = train(&corpus.positives, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model("test", dir.path(), &model).unwrap();
    let back = load_model("test", dir.path()).unwrap();
    assert_eq!(back, model);
    for p in corpus.positives.iter().take(20) {
        let (a, b) = (
            model.score(&p.concept, &p.property).unwrap(),
            back.score(&p.concept, &p.property).unwrap(),
        );
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // a second save is byte-identical
    let again = tempfile::tempdir().unwrap();
    save_model("test", again.path(), &back).unwrap();
    for name in [
        "concept.bin",
        "property.bin",
        "concept.vocab",
        "property.vocab",
        "manifest.json",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap()
        );
    }
    assert_eq!(model.table(Side::Concept).dim(), 8);
}

#[test]
fn truncated_matrix_is_rejected() {
    let corpus = planted_corpus(0);
    let config = EncoderConfig {
        dim: 4,
        max_epochs: 1,
        patience: 1,
        ..EncoderConfig::default()
    };
    let model = train(&corpus.positives, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model("test", dir.path(), &model).unwrap();
    let path = dir.path().join("property.bin");
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(load_model("test", dir.path()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn embeddings_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..10)) {
        let named: Vec<(String, Vec<f64>)> = rows.iter().enumerate().map(|(i, v)| (format!("item {i}"), v.clone())).collect();
        let text = format_embeddings(named.iter().map(|(n, v)| (n.as_str(), v.as_slice())));
        let (dim, back) = parse_embeddings("test", std::path::Path::new("x"), &text).unwrap();
        prop_assert_eq!(dim, 3);
        prop_assert_eq!(back, named);
    }

    #[test]
    fn table_round_trip(groups in prop::collection::vec(prop::collection::btree_set("[a-z]{1,6}( [a-z]{1,6})?", 2..5), 1..6)) {
        let rows: Vec<TableRow> = groups
            .iter()
            .enumerate()
            .map(|(i, cs)| TableRow { property: format!("property {i}"), concepts: cs.iter().cloned().collect() })
            .collect();
        let text = format_table_tsv(&rows);
        prop_assert_eq!(parse_table_tsv("test", std::path::Path::new("x"), &text).unwrap(), rows);
    }
}
