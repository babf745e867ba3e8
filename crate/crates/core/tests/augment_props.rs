use commonality_core::augment::{
    augment_dataset, is_augmentation, strip_augmentations, AugmentationMap, LabeledExample,
};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    "[a-z]{1,6}( [a-z]{1,6})?"
}

fn dataset() -> impl Strategy<Value = Vec<LabeledExample>> {
    prop::collection::vec(
        (
            "[a-z ]{0,30}",
            prop::option::of((0usize..10, 0usize..10)),
            prop::collection::btree_set(label(), 0..5),
        ),
        0..20,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (text, span, labels))| LabeledExample {
                id: format!("ex{i}"),
                text,
                mention_span: span.map(|(a, b)| [a.min(b), a.max(b)]),
                labels: labels.into_iter().collect(),
            })
            .collect()
    })
}

fn map() -> impl Strategy<Value = AugmentationMap> {
    prop::collection::vec((label(), prop::bool::ANY, label()), 0..30).prop_map(|entries| {
        let mut m = AugmentationMap::new();
        for (base, is_prop, target) in entries {
            let aug = if is_prop {
                format!("prop::{target}")
            } else {
                format!("cluster::0.5::{target}")
            };
            m.insert(&base, aug);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn strip_undoes_augment(data in dataset(), m in map()) {
        let augmented = augment_dataset(&data, &m);
        prop_assert_eq!(strip_augmentations(&augmented), data);
    }

    #[test]
    fn augment_is_idempotent(data in dataset(), m in map()) {
        let once = augment_dataset(&data, &m);
        prop_assert_eq!(augment_dataset(&once, &m), once);
    }

    #[test]
    fn augment_keeps_examples_and_only_adds_labels(data in dataset(), m in map()) {
        let out = augment_dataset(&data, &m);
        prop_assert_eq!(out.len(), data.len());
        for (before, after) in data.iter().zip(&out) {
            prop_assert_eq!(&before.id, &after.id);
            prop_assert_eq!(&before.text, &after.text);
            prop_assert_eq!(before.mention_span, after.mention_span);
            prop_assert_eq!(&after.labels[..before.labels.len()], &before.labels[..]);
            prop_assert!(after.labels[before.labels.len()..].iter().all(|l| is_augmentation(l)));
        }
    }

    #[test]
    fn unmapped_labels_pass_through(data in dataset()) {
        let mut m = AugmentationMap::new();
        m.insert("label that no example uses 0", "prop::x".into());
        prop_assert_eq!(augment_dataset(&data, &m), data);
    }
}
