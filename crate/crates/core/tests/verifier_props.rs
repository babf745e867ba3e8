use std::collections::BTreeSet;

use commonality_core::corpus::{ConceptPropertyPair, Interner, Vocabulary};
use commonality_core::encoder::{sample_negatives, train, BiEncoderModel, EncoderConfig};
use commonality_core::mips::{Candidates, PropertyIndex, ScoredCandidate};
use commonality_core::verifier::{
    verify, BuiltinVerifierModel, FeatureExtractor, PairFeatures, PairScoreSet, Scorer, VerifierError, LAMBDA_SWEEP,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_candidates(rng: &mut ChaCha8Rng) -> (Candidates, PairScoreSet) {
    let n_c = rng.random_range(1..8);
    let n_p = rng.random_range(1..10);
    let concepts: Interner = (0..n_c).map(|i| format!("c{i}")).collect();
    let properties: Interner = (0..n_p).map(|i| format!("p{i}")).collect();
    let mut scores = PairScoreSet::new("random");
    let lists = (0..n_c)
        .map(|c| {
            let k = rng.random_range(1..=n_p);
            (0..k as u32)
                .map(|p| {
                    // snap some scores onto the sweep values to exercise the boundary
                    let s = if rng.random_bool(0.3) {
                        LAMBDA_SWEEP[rng.random_range(0..3)]
                    } else {
                        rng.random_range(0.0..=1.0)
                    };
                    scores.insert(&format!("c{c}"), &format!("p{p}"), s).unwrap();
                    ScoredCandidate::new(p, rng.random_range(-3.0..3.0))
                })
                .collect()
        })
        .collect();
    (
        Candidates {
            concepts,
            properties,
            lists,
        },
        scores,
    )
}

fn pairs_of(a: &commonality_core::commonality::PropertyAssignment) -> BTreeSet<(u32, u32)> {
    a.concepts()
        .flat_map(|c| a.properties(c).into_iter().map(move |(p, _)| (c, p)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lambda_monotone_and_subset_of_candidates(seed in any::<u64>(), l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cands, scores) = random_candidates(&mut rng);
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let scorer = Scorer::External(&scores);
        let a_lo = pairs_of(&verify(&cands, lo, &scorer).unwrap());
        let a_hi = pairs_of(&verify(&cands, hi, &scorer).unwrap());
        prop_assert!(a_hi.is_subset(&a_lo));
        let all: BTreeSet<(u32, u32)> = cands
            .lists
            .iter()
            .enumerate()
            .flat_map(|(c, l)| l.iter().map(move |x| (c as u32, x.property_id)))
            .collect();
        prop_assert!(a_lo.is_subset(&all));
        // exactly the pairs scoring at least lambda
        for &(c, p) in &all {
            let s = scores.get(&format!("c{c}"), &format!("p{p}")).unwrap();
            prop_assert_eq!(a_lo.contains(&(c, p)), s >= lo);
        }
    }

    #[test]
    fn sweep_values_nest(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cands, scores) = random_candidates(&mut rng);
        let scorer = Scorer::External(&scores);
        let sets: Vec<_> = LAMBDA_SWEEP.iter().map(|&l| pairs_of(&verify(&cands, l, &scorer).unwrap())).collect();
        prop_assert!(sets[2].is_subset(&sets[1]) && sets[1].is_subset(&sets[0]));
    }

    #[test]
    fn passthrough_at_zero_keeps_everything(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cands, _) = random_candidates(&mut rng);
        let a = verify(&cands, 0.0, &Scorer::Passthrough).unwrap();
        prop_assert_eq!(a.pair_count(), cands.pair_count());
    }
}

#[test]
fn boundary_is_inclusive() {
    let cands = Candidates {
        concepts: ["cone"].iter().collect(),
        properties: ["a round shape", "pointy"].iter().collect(),
        lists: vec![vec![ScoredCandidate::new(0, 1.0), ScoredCandidate::new(1, 0.5)]],
    };
    let mut scores = PairScoreSet::new("t");
    scores.insert("cone", "a round shape", 0.75).unwrap();
    scores.insert("cone", "pointy", 0.74999).unwrap();
    let a = verify(&cands, 0.75, &Scorer::External(&scores)).unwrap();
    assert_eq!(a.properties(0), vec![(0, 0.75)]);
}

#[test]
fn missing_external_scores_are_listed() {
    let cands = Candidates {
        concepts: ["cone"].iter().collect(),
        properties: ["a round shape"].iter().collect(),
        lists: vec![vec![ScoredCandidate::new(0, 1.0)]],
    };
    let err = verify(&cands, 0.75, &Scorer::External(&PairScoreSet::new("empty"))).unwrap_err();
    assert_eq!(
        err,
        VerifierError::MissingScores(vec![("cone".into(), "a round shape".into())])
    );
}

#[test]
fn score_file_rules() {
    let (set, dups) = PairScoreSet::parse_tsv("a\tx\t0.2\nb\tx\t0.5\na\tx\t0.9\n", "f").unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(set.get("a", "x"), Some(0.9));
    assert_eq!(dups.len(), 1);
    let err = PairScoreSet::parse_tsv("a\tx\t0.2\nb\tx\t1.2\n", "f").unwrap_err();
    assert!(err.to_string().starts_with("line 2:"), "{err}");
}

fn random_features(rng: &mut ChaCha8Rng, n: usize) -> (Vec<PairFeatures>, Vec<bool>) {
    let x = (0..n)
        .map(|_| core::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect();
    let y = (0..n).map(|i| i % 2 == 0).collect();
    (x, y)
}

fn accuracy(m: &BuiltinVerifierModel, x: &[PairFeatures], y: &[bool]) -> f64 {
    x.iter().zip(y).filter(|(f, &l)| (m.probability(f) >= 0.5) == l).count() as f64 / y.len() as f64
}

#[test]
fn random_features_give_chance_accuracy() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_features(&mut rng, 400);
        let model = BuiltinVerifierModel::fit(&x, &y, seed).unwrap();
        let (tx, ty) = random_features(&mut rng, 400);
        let acc = accuracy(&model, &tx, &ty);
        assert!((acc - 0.5).abs() <= 0.1, "seed {seed}: held-out accuracy {acc}");
    }
}

#[test]
fn separable_features_are_fit_exactly_and_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // separable with a margin of 0.1 around the plane
    let x: Vec<PairFeatures> = core::iter::repeat_with(|| core::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .filter(|f: &PairFeatures| (f[1] + 0.5 * f[4] - 0.1).abs() > 0.1)
        .take(200)
        .collect();
    let y: Vec<bool> = x.iter().map(|f| f[1] + 0.5 * f[4] > 0.1).collect();
    let model = BuiltinVerifierModel::fit(&x, &y, 0).unwrap();
    assert_eq!(accuracy(&model, &x, &y), 1.0);
    assert_eq!(
        BuiltinVerifierModel::fit(&x, &[true; 200], 0),
        Err(VerifierError::SingleClass)
    );

    // calibration on noisy labels
    let y: Vec<bool> = x.iter().map(|f| f[0] + rng.random_range(-1.0..1.0) > 0.3).collect();
    let model = BuiltinVerifierModel::fit(&x, &y, 0).unwrap();
    let mean_p = x.iter().map(|f| model.probability(f)).sum::<f64>() / x.len() as f64;
    let rate = y.iter().filter(|&&l| l).count() as f64 / y.len() as f64;
    assert!((mean_p - rate).abs() <= 0.05, "mean {mean_p} vs rate {rate}");
}

fn grouped() -> Vec<ConceptPropertyPair> {
    let mut pairs = Vec::new();
    for (g, word) in ["stone", "river", "cloud", "ember"].iter().enumerate() {
        for i in 0..6 {
            for j in 0..2 {
                pairs.push(
                    ConceptPropertyPair::positive(
                        &format!("{word} thing{}", g * 6 + i),
                        &format!("{word} trait{}", g * 2 + j),
                    )
                    .unwrap(),
                );
            }
        }
    }
    pairs
}

#[test]
fn external_round_trip_reproduces_builtin_assignment() {
    let pairs = grouped();
    let config = EncoderConfig {
        dim: 16,
        max_epochs: 20,
        patience: 5,
        ..EncoderConfig::default()
    };
    let model: BiEncoderModel = train(&pairs, &config).unwrap();
    let vocab = Vocabulary::build(&pairs, 2).unwrap();
    let index = PropertyIndex::build(&model, &vocab).unwrap();
    let cands = index.retrieve_all(&model, &vocab, 5).unwrap();

    let mut labeled: Vec<ConceptPropertyPair> = pairs.clone();
    labeled.extend(sample_negatives(&pairs, 2, 11).unwrap().pairs);
    let features = FeatureExtractor::new(&model, &index);
    let verifier = BuiltinVerifierModel::train(&labeled, &features, 5).unwrap();
    let builtin = Scorer::Builtin {
        model: &verifier,
        features: FeatureExtractor::new(&model, &index),
    };
    let scores = builtin.score_candidates(&cands).unwrap();

    // dump as text and read back, as an external file would be
    let mut text = String::new();
    for ((c, p, _), s) in cands.iter().zip(scores.iter().flatten()) {
        text.push_str(&format!("{c}\t{p}\t{s}\n"));
    }
    let (external, _) = PairScoreSet::parse_tsv(&text, "dump").unwrap();
    for lambda in LAMBDA_SWEEP {
        let a = verify(&cands, lambda, &builtin).unwrap();
        let b = verify(&cands, lambda, &Scorer::External(&external)).unwrap();
        assert_eq!(a, b);
        for c in a.concepts() {
            let (pa, pb) = (a.properties(c), b.properties(c));
            assert!(pa.iter().zip(&pb).all(|(x, y)| x.1.to_bits() == y.1.to_bits()));
        }
    }
}
