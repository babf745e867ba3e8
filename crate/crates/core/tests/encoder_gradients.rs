//! Analytic BCE gradients against central finite differences.

use commonality_core::corpus::Interner;
use commonality_core::encoder::{
    batch_loss, batch_loss_and_gradient, BiEncoderModel, EmbeddingTable, EncodedPair, EncoderConfig, Side,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn random_problem(rng: &mut ChaCha8Rng) -> (BiEncoderModel, Vec<EncodedPair>) {
    let dim = rng.random_range(2..9);
    let n_concept = rng.random_range(2..7);
    let n_property = rng.random_range(2..7);
    let table = |side, n: usize, rng: &mut ChaCha8Rng| {
        let tokens: Interner = (0..n).map(|i| format!("t{i}")).collect();
        let weights = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        EmbeddingTable::from_parts(side, tokens, dim, weights).unwrap()
    };
    let model = BiEncoderModel::new(
        table(Side::Concept, n_concept, rng),
        table(Side::Property, n_property, rng),
        EncoderConfig::default(),
    )
    .unwrap();
    let batch = (0..rng.random_range(1..6))
        .map(|_| {
            let pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<u32> {
                (0..rng.random_range(1..4))
                    .map(|_| rng.random_range(0..n as u32))
                    .collect()
            };
            EncodedPair {
                concept_rows: pick(n_concept, rng),
                property_rows: pick(n_property, rng),
                label: if rng.random_bool(0.5) { 1.0 } else { 0.0 },
            }
        })
        .collect();
    (model, batch)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        // both effectively zero; compare absolutely
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (model, batch) = random_problem(&mut rng);
        let (loss, grad) = batch_loss_and_gradient(&model, &batch);
        assert!((loss - batch_loss(&model, &batch)).abs() < 1e-12);
        for side in [Side::Concept, Side::Property] {
            let rows = model.table(side).rows() as u32;
            for row in 0..rows {
                for d in 0..model.dim() {
                    let mut plus = model.clone();
                    let mut minus = model.clone();
                    table_mut(&mut plus, side).row_mut(row)[d] += H;
                    table_mut(&mut minus, side).row_mut(row)[d] -= H;
                    let numeric = (batch_loss(&plus, &batch) - batch_loss(&minus, &batch)) / (2.0 * H);
                    let analytic = grad.side(side).get(&row).map_or(0.0, |g| g[d]);
                    let err = relative_error(analytic, numeric);
                    worst = worst.max(err);
                    assert!(
                        err < TOLERANCE,
                        "{side:?} row {row} dim {d}: analytic {analytic}, numeric {numeric}"
                    );
                }
            }
        }
    }
    println!("worst relative error {worst:e}");
}

fn table_mut(model: &mut BiEncoderModel, side: Side) -> &mut EmbeddingTable {
    match side {
        Side::Concept => &mut model.concept_table,
        Side::Property => &mut model.property_table,
    }
}
