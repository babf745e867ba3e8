//! Synthetic corpora with known ground truth, plus the bundled filtering
//! fixture. Used by the acceptance suite and handy for smoke-testing the
//! command line.

use std::collections::BTreeSet;

use commonality_core::augment::LabeledExample;
use commonality_core::corpus::ConceptPropertyPair;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const THEMES: [&str; 8] = [
    "ocean", "forest", "kitchen", "metal", "music", "sport", "weather", "clinic",
];
const FACETS: [&str; 5] = ["bright", "heavy", "quiet", "sharp", "warm"];
// facet-arc length (in facets of 5 concepts) of each theme's five properties
const ARC_LENGTHS: [usize; 5] = [1, 1, 2, 1, 1];

/// Planted concept-property structure: 8 themes of 25 concepts, each theme
/// split into 5 facets of 5 concepts. Each theme owns 5 properties, and a
/// property is held by the concepts of a contiguous arc of facets, so
/// membership is a function of the theme and facet tokens in the concept
/// name. Every property is held by 5 to 20 concepts.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub concepts: Vec<String>,
    pub properties: Vec<String>,
    pub positives: Vec<ConceptPropertyPair>,
}

pub fn planted_corpus(seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut concepts = Vec::new();
    let mut properties = Vec::new();
    let mut positives = Vec::new();
    for (t, theme) in THEMES.iter().enumerate() {
        let first_concept = concepts.len();
        for (f, facet) in FACETS.iter().enumerate() {
            for k in 0..5 {
                concepts.push(format!("{facet}{t} {theme} item{}", t * 25 + f * 5 + k));
            }
        }
        // one theme gets a full-width property so sizes span 5..=20
        let offset = rng.random_range(0..FACETS.len());
        for (j, &len) in ARC_LENGTHS.iter().enumerate() {
            let len = if t == 0 && j == 2 { 4 } else { len };
            let property = format!("{theme} quality{}", t * 5 + j);
            let start = (offset + j) % FACETS.len();
            for step in 0..len {
                let facet = (start + step) % FACETS.len();
                for k in 0..5 {
                    let concept = &concepts[first_concept + facet * 5 + k];
                    positives.push(ConceptPropertyPair::positive(concept, &property).expect("nonempty"));
                }
            }
            properties.push(property);
        }
    }
    positives.shuffle(&mut rng);
    PlantedCorpus {
        concepts,
        properties,
        positives,
    }
}

/// Points drawn from isotropic Gaussians around the vertices of an
/// equilateral triangle with side `separation`, with their blob labels.
pub fn gaussian_blobs(per_blob: usize, sigma: f64, separation: f64, seed: u64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be positive and finite");
    let h = separation * 3f64.sqrt() / 2.0;
    let centers = [[0.0, 0.0], [separation, 0.0], [separation / 2.0, h]];
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push([c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            labels.push(b);
        }
    }
    (points, labels)
}

/// A multi-label dataset whose labels are grouped by planted shared
/// properties. See [`correlated_labels`].
#[derive(Debug, Clone)]
pub struct CorrelatedLabels {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    /// Shared property → labels (concepts) holding it.
    pub groups: Vec<(String, Vec<String>)>,
    pub label_space: Vec<String>,
}

/// Labels fall into groups that share a planted property. Every example
/// mentions one group through a few of that group's cue words and is
/// labeled with its focus label plus, often, a second label from the same
/// group. A label's own word appears only part of the time, and rare labels
/// get few training examples, so recognising the group is what carries them.
pub fn correlated_labels(seed: u64) -> CorrelatedLabels {
    const GROUPS: usize = 6;
    const LABELS_PER_GROUP: usize = 5;
    const CUES_PER_GROUP: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut groups = Vec::new();
    let mut label_space = Vec::new();
    for g in 0..GROUPS {
        let labels: Vec<String> = (0..LABELS_PER_GROUP).map(|l| format!("kind{g}x{l}")).collect();
        label_space.extend(labels.iter().cloned());
        groups.push((format!("shared trait {g}"), labels));
    }

    let noise: Vec<String> = (0..40).map(|i| format!("filler{i}")).collect();
    let make = |g: usize, focus: usize, id: String, rng: &mut ChaCha8Rng| {
        let labels_of_group = &groups[g].1;
        let mut words: Vec<String> = Vec::new();
        for _ in 0..3 {
            words.push(format!("cue{g}w{}", rng.random_range(0..CUES_PER_GROUP)));
        }
        if rng.random_bool(0.5) {
            words.push(format!("word{g}x{focus}"));
        }
        for _ in 0..3 {
            words.push(noise.choose(rng).expect("nonempty").clone());
        }
        words.shuffle(rng);
        let mut labels = vec![labels_of_group[focus].clone()];
        if rng.random_bool(0.6) {
            let other = (focus + rng.random_range(1..LABELS_PER_GROUP)) % LABELS_PER_GROUP;
            labels.push(labels_of_group[other].clone());
        }
        LabeledExample {
            id,
            text: words.join(" "),
            mention_span: None,
            labels,
        }
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in 0..GROUPS {
        for focus in 0..LABELS_PER_GROUP {
            // the last label of each group is rare in training
            let n_train = if focus == LABELS_PER_GROUP - 1 { 2 } else { 12 };
            for i in 0..n_train {
                let ex = make(g, focus, format!("train-{g}-{focus}-{i}"), &mut rng);
                train.push(ex);
            }
            for i in 0..6 {
                let ex = make(g, focus, format!("test-{g}-{focus}-{i}"), &mut rng);
                test.push(ex);
            }
        }
    }
    train.shuffle(&mut rng);
    CorrelatedLabels {
        train,
        test,
        groups,
        label_space,
    }
}

/// The filtering fixture: rows of a property with the concepts kept by
/// verification and the concepts the verifier discards.
pub struct FilteredRow {
    pub property: &'static str,
    pub kept: &'static [&'static str],
    pub discarded: &'static [&'static str],
}

pub const FILTERED_ROWS: &[FilteredRow] = &[
    FilteredRow {
        property: "used for staying connected",
        kept: &[
            "telephone number",
            "google",
            "area code",
            "user name",
            "facebook",
            "land line",
            "email",
        ],
        discarded: &["call center", "web server", "link farm", "name server"],
    },
    FilteredRow {
        property: "used for beach activities",
        kept: &["deck chair", "beach volleyball", "beach ball", "sun hat"],
        discarded: &["sun dog"],
    },
    FilteredRow {
        property: "a round shape",
        kept: &[
            "bubble",
            "small ball",
            "ball bearing",
            "sphere",
            "disc",
            "round top",
            "centre circle",
            "wheel",
            "tin can",
        ],
        discarded: &["cone", "cylinder", "oval", "tube"],
    },
    FilteredRow {
        property: "located in cities",
        kept: &[
            "parking lot",
            "high street",
            "suburbs",
            "supermarket",
            "mall",
            "food court",
            "piazza",
            "city hall",
            "cinema",
        ],
        discarded: &["general store"],
    },
    FilteredRow {
        property: "used for communication",
        kept: &[
            "address book",
            "twitter",
            "voice message",
            "instant message",
            "voice mail",
        ],
        discarded: &[
            "letter bomb",
            "listening post",
            "mail bomb",
            "ring tone",
            "street address",
            "wireless operator",
        ],
    },
    FilteredRow {
        property: "baby carriers",
        kept: &["basket", "baby seat", "basket case", "car seat", "carrier"],
        discarded: &["baby book", "baby bottle", "body bag"],
    },
];

/// Score given to kept pairs, discarded pairs and every other pair.
pub const FILTERED_SCORES: (f64, f64, f64) = (0.9, 0.3, 0.05);

/// Training pairs (every listed concept with its row's property) for the
/// filtering fixture.
pub fn filtered_pairs() -> Vec<ConceptPropertyPair> {
    FILTERED_ROWS
        .iter()
        .flat_map(|row| {
            row.kept
                .iter()
                .chain(row.discarded)
                .map(move |c| ConceptPropertyPair::positive(c, row.property).expect("nonempty"))
        })
        .collect()
}

/// External verifier scores covering every concept × property pair of the
/// fixture: kept pairs score high, discarded pairs fall below 0.75, and
/// unrelated pairs score near zero.
pub fn filtered_scores() -> Vec<(String, String, f64)> {
    let (kept, discarded, other) = FILTERED_SCORES;
    let concepts: BTreeSet<&str> = FILTERED_ROWS
        .iter()
        .flat_map(|r| r.kept.iter().chain(r.discarded))
        .copied()
        .collect();
    let mut out = Vec::new();
    for c in &concepts {
        for row in FILTERED_ROWS {
            let s = if row.kept.contains(c) {
                kept
            } else if row.discarded.contains(c) {
                discarded
            } else {
                other
            };
            out.push((c.to_string(), row.property.to_string(), s));
        }
    }
    out
}
