//! On-disk formats: TSV and JSONL artifacts plus the binary model layout.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! artifact reads back to the exact value that was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use commonality_core::augment::{AugmentationMap, LabeledExample};
use commonality_core::clustering::ClusterSet;
use commonality_core::commonality::{PropertyAssignment, TableRow};
use commonality_core::corpus::{ConceptPropertyPair, Interner, Vocabulary};
use commonality_core::encoder::{BiEncoderModel, EmbeddingTable, EncoderConfig, EpochLog, Side};
use commonality_core::evalkit::Prf1;
use commonality_core::mips::{Candidates, ScoredCandidate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

pub fn read_text(stage: &'static str, path: &Path) -> Result<String> {
    fs::read_to_string(path).at(stage, path)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written artifact.
pub fn write_file(stage: &'static str, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).at(stage, parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).at(stage, tmp)?;
    fs::rename(tmp, path).at(stage, path)
}

fn bad(stage: &'static str, path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(stage, format!("{}:{line}: {msg}", path.display()))
}

fn join_floats(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 12);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x}").expect("writing to a String");
    }
    s
}

// ---- pairs and vocabulary ----

pub fn format_pairs(pairs: &[ConceptPropertyPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        match p.label {
            None => writeln!(out, "{}\t{}", p.concept, p.property),
            Some(l) => writeln!(out, "{}\t{}\t{}", p.concept, p.property, u8::from(l)),
        }
        .expect("writing to a String");
    }
    out
}

/// Concepts, one per line, then `property\tcount` lines, with a blank line
/// between the two sections.
pub fn format_vocabulary(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for c in vocab.concepts.names() {
        writeln!(out, "{c}").expect("writing to a String");
    }
    out.push('\n');
    for (p, count) in vocab.properties.names().iter().zip(vocab.property_counts()) {
        writeln!(out, "{p}\t{count}").expect("writing to a String");
    }
    out
}

pub fn parse_vocabulary(stage: &'static str, path: &Path, text: &str) -> Result<Vocabulary> {
    let (head, tail) = text
        .split_once("\n\n")
        .or_else(|| text.strip_prefix('\n').map(|t| ("", t)))
        .ok_or_else(|| bad(stage, path, 1, "missing blank line between concepts and properties"))?;
    let concepts: Interner = head.lines().filter(|l| !l.is_empty()).collect();
    let offset = head.lines().count() + 2;
    let mut properties = Vec::new();
    for (i, line) in tail.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (name, count) = line
            .split_once('\t')
            .ok_or_else(|| bad(stage, path, offset + i, "expected property\\tcount"))?;
        let count: u32 = count.parse().map_err(|_| bad(stage, path, offset + i, "bad count"))?;
        properties.push((name.to_string(), count));
    }
    Ok(Vocabulary::from_parts(concepts, properties))
}

// ---- model ----

pub const MODEL_FORMAT: &str = "commonality-biencoder";

#[derive(Debug, Serialize, Deserialize)]
pub struct SideManifest {
    pub tokens: usize,
    pub matrix: String,
    pub vocab: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub seed: u64,
    pub sides: BTreeMap<String, SideManifest>,
    pub config: EncoderConfig,
    pub training_log: Vec<EpochLog>,
}

/// `rows` and `dim` as little-endian u64, then row-major little-endian f32.
pub fn encode_matrix(rows: usize, dim: usize, data: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + data.len() * 4);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for &x in data {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    if bytes.len() < 16 {
        return Err("matrix header truncated".into());
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let dim = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if rows.checked_mul(dim).and_then(|n| n.checked_mul(4)) != Some(body.len()) {
        return Err(format!(
            "matrix body has {} bytes, header says {rows}x{dim}",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok((rows, dim, data))
}

pub fn save_model(stage: &'static str, dir: &Path, model: &BiEncoderModel) -> Result<()> {
    let mut sides = BTreeMap::new();
    for side in [Side::Concept, Side::Property] {
        let table = model.table(side);
        let name = side.as_str();
        let matrix = format!("{name}.bin");
        let vocab = format!("{name}.vocab");
        write_file(
            stage,
            &dir.join(&matrix),
            encode_matrix(table.rows(), table.dim(), table.weights()),
        )?;
        let mut text = String::new();
        for t in table.tokens().names() {
            text.push_str(t);
            text.push('\n');
        }
        write_file(stage, &dir.join(&vocab), text)?;
        sides.insert(
            name.to_string(),
            SideManifest {
                tokens: table.rows(),
                matrix,
                vocab,
            },
        );
    }
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        version: 1,
        dim: model.dim(),
        seed: model.config.seed,
        sides,
        config: model.config.clone(),
        training_log: model.training_log.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(stage, &dir.join("manifest.json"), json + "\n")
}

pub fn load_model(stage: &'static str, dir: &Path) -> Result<BiEncoderModel> {
    let manifest_path = dir.join("manifest.json");
    let manifest: ModelManifest = serde_json::from_str(&read_text(stage, &manifest_path)?)
        .map_err(|e| CliError::validation(stage, format!("{}: {e}", manifest_path.display())))?;
    if manifest.format != MODEL_FORMAT {
        return Err(bad(
            stage,
            &manifest_path,
            1,
            format!("unknown model format {:?}", manifest.format),
        ));
    }
    let mut tables = Vec::new();
    for side in [Side::Concept, Side::Property] {
        let entry = manifest
            .sides
            .get(side.as_str())
            .ok_or_else(|| bad(stage, &manifest_path, 1, format!("missing side {}", side.as_str())))?;
        let matrix_path = dir.join(&entry.matrix);
        let bytes = fs::read(&matrix_path).at(stage, &matrix_path)?;
        let (rows, dim, data) = decode_matrix(&bytes).map_err(|e| bad(stage, &matrix_path, 0, e))?;
        let vocab_path = dir.join(&entry.vocab);
        let tokens: Interner = read_text(stage, &vocab_path)?.lines().collect();
        if tokens.len() != rows || rows != entry.tokens || dim != manifest.dim {
            return Err(bad(
                stage,
                &matrix_path,
                0,
                format!(
                    "{rows}x{dim} matrix with {} tokens does not match the manifest",
                    tokens.len()
                ),
            ));
        }
        tables.push(EmbeddingTable::from_parts(side, tokens, dim, data).map_err(|e| bad(stage, &matrix_path, 0, e))?);
    }
    let property = tables.pop().expect("two tables");
    let concept = tables.pop().expect("two tables");
    let mut model =
        BiEncoderModel::new(concept, property, manifest.config).map_err(|e| bad(stage, &manifest_path, 0, e))?;
    model.training_log = manifest.training_log;
    Ok(model)
}

// ---- embeddings ----

pub fn format_embeddings<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> String {
    let mut out = String::new();
    for (name, v) in rows {
        writeln!(out, "{name}\t{}", join_floats(v)).expect("writing to a String");
    }
    out
}

pub type NamedRows = Vec<(String, Vec<f64>)>;

/// `phrase\tv1,...,vd` lines; every row must have the same dimension.
pub fn parse_embeddings(stage: &'static str, path: &Path, text: &str) -> Result<(usize, NamedRows)> {
    let mut rows = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, values) = line
            .split_once('\t')
            .ok_or_else(|| bad(stage, path, i + 1, "expected phrase\\tvalues"))?;
        let v = values
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(stage, path, i + 1, e))?;
        if *dim.get_or_insert(v.len()) != v.len() {
            return Err(bad(stage, path, i + 1, "row dimension differs from the first row"));
        }
        rows.push((name.to_string(), v));
    }
    let dim = dim.ok_or_else(|| bad(stage, path, 0, "no embeddings"))?;
    Ok((dim, rows))
}

// ---- candidates and scores ----

pub fn format_candidates(c: &Candidates) -> String {
    let mut out = String::new();
    for (concept, property, cand) in c.iter() {
        writeln!(out, "{concept}\t{property}\t{}\t{}", cand.dot_product, cand.probability)
            .expect("writing to a String");
    }
    out
}

/// Reads a candidate dump back against the vocabulary it was retrieved for.
pub fn parse_candidates(stage: &'static str, path: &Path, text: &str, vocab: &Vocabulary) -> Result<Candidates> {
    let mut lists = vec![Vec::new(); vocab.concepts.len()];
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(
                stage,
                path,
                i + 1,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let c = vocab
            .concepts
            .get(cols[0])
            .ok_or_else(|| bad(stage, path, i + 1, format!("unknown concept {:?}", cols[0])))?;
        let p = vocab
            .properties
            .get(cols[1])
            .ok_or_else(|| bad(stage, path, i + 1, format!("unknown property {:?}", cols[1])))?;
        let dot: f64 = cols[2]
            .parse()
            .map_err(|_| bad(stage, path, i + 1, "bad dot product"))?;
        let probability: f64 = cols[3]
            .parse()
            .map_err(|_| bad(stage, path, i + 1, "bad probability"))?;
        lists[c as usize].push(ScoredCandidate {
            property_id: p,
            dot_product: dot,
            probability,
        });
    }
    Ok(Candidates {
        concepts: vocab.concepts.clone(),
        properties: vocab.properties.clone(),
        lists,
    })
}

pub fn format_scores<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> String {
    let mut out = String::new();
    for (c, p, s) in rows {
        writeln!(out, "{c}\t{p}\t{s}").expect("writing to a String");
    }
    out
}

// ---- assignment ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProperty {
    pub p: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub concept: String,
    pub properties: Vec<ScoredProperty>,
}

/// One record per concept in concept-id order, properties by descending score.
pub fn format_assignment(a: &PropertyAssignment, concepts: &Interner, properties: &Interner) -> String {
    let mut out = String::new();
    for c in a.concepts() {
        let rec = AssignmentRecord {
            concept: concepts.name(c).to_string(),
            properties: a
                .properties(c)
                .into_iter()
                .map(|(p, score)| ScoredProperty {
                    p: properties.name(p).to_string(),
                    score,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl<T: for<'de> Deserialize<'de>>(stage: &'static str, path: &Path, text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(stage, path, i + 1, e)))
        .collect()
}

pub fn format_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Rebuilds an id-based assignment, interning names in file order.
pub fn assignment_from_records(
    stage: &'static str,
    path: &Path,
    records: &[AssignmentRecord],
) -> Result<(PropertyAssignment, Interner, Interner)> {
    let mut concepts = Interner::new();
    let mut properties = Interner::new();
    let mut a = PropertyAssignment::new();
    for (i, rec) in records.iter().enumerate() {
        let c = concepts.intern(&rec.concept);
        a.touch(c);
        for sp in &rec.properties {
            let p = properties.intern(&sp.p);
            a.insert(c, p, sp.score).map_err(|e| bad(stage, path, i + 1, e))?;
        }
    }
    Ok((a, concepts, properties))
}

// ---- commonality table ----

pub fn format_table_tsv(rows: &[TableRow]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{}\t{}", r.property, r.concepts.join(",")).expect("writing to a String");
    }
    out
}

pub fn parse_table_tsv(stage: &'static str, path: &Path, text: &str) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (property, concepts) = line
            .split_once('\t')
            .ok_or_else(|| bad(stage, path, i + 1, "expected property\\tconcepts"))?;
        rows.push(TableRow {
            property: property.to_string(),
            concepts: concepts
                .split(',')
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect(),
        });
    }
    Ok(rows)
}

// ---- clusters ----

/// `concept\tcluster::{fraction}::{exemplar}`, one block per granularity.
pub fn format_clusters(sets: &[ClusterSet], names: &[String]) -> String {
    let mut out = String::new();
    for set in sets {
        for (i, name) in names.iter().enumerate() {
            writeln!(out, "{name}\t{}", set.label(i, names)).expect("writing to a String");
        }
    }
    out
}

/// Inverse of [`format_clusters`]: point names in first-seen order and one
/// cluster set per granularity tag, in first-seen order.
pub fn parse_clusters(stage: &'static str, path: &Path, text: &str) -> Result<(Vec<String>, Vec<ClusterSet>)> {
    let mut names = Interner::new();
    let mut by_tag: Vec<(String, Vec<(u32, String)>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (concept, label) = line
            .split_once('\t')
            .ok_or_else(|| bad(stage, path, i + 1, "expected concept\\tlabel"))?;
        let rest = label
            .strip_prefix(commonality_core::augment::CLUSTER_PREFIX)
            .ok_or_else(|| bad(stage, path, i + 1, "label lacks the cluster:: prefix"))?;
        let (tag, exemplar) = rest
            .split_once("::")
            .ok_or_else(|| bad(stage, path, i + 1, "expected cluster::{fraction}::{exemplar}"))?;
        let id = names.intern(concept);
        match by_tag.iter_mut().find(|(t, _)| t == tag) {
            Some((_, members)) => members.push((id, exemplar.to_string())),
            None => by_tag.push((tag.to_string(), vec![(id, exemplar.to_string())])),
        }
    }
    let mut sets = Vec::new();
    for (tag, members) in by_tag {
        let mut assignment = vec![usize::MAX; names.len()];
        for (id, exemplar) in &members {
            let e = names.get(exemplar).ok_or_else(|| {
                bad(
                    stage,
                    path,
                    0,
                    format!("exemplar {exemplar:?} is not a clustered concept"),
                )
            })?;
            assignment[*id as usize] = e as usize;
        }
        if assignment.contains(&usize::MAX) {
            return Err(bad(
                stage,
                path,
                0,
                format!("granularity {tag} does not cover every concept"),
            ));
        }
        let mut exemplars: Vec<usize> = assignment.clone();
        exemplars.sort_unstable();
        exemplars.dedup();
        sets.push(ClusterSet {
            exemplars,
            assignment,
            granularity_tag: tag,
            converged: true,
            iterations: 0,
        });
    }
    Ok((names.names().to_vec(), sets))
}

// ---- datasets, augmentation map, metrics ----

#[derive(Debug, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub label: String,
    pub augmentations: Vec<String>,
}

pub fn format_augmentation_map(map: &AugmentationMap) -> String {
    let records: Vec<AugmentationRecord> = map
        .iter()
        .map(|(label, augs)| AugmentationRecord {
            label: label.to_string(),
            augmentations: augs.to_vec(),
        })
        .collect();
    format_jsonl(&records)
}

pub fn parse_dataset(stage: &'static str, path: &Path, text: &str) -> Result<Vec<LabeledExample>> {
    parse_jsonl(stage, path, text)
}

pub fn format_metric(m: &Prf1) -> String {
    serde_json::to_string_pretty(m).expect("metric serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let data = vec![0.5, -1.25, 3.0, 0.1f32 as f64, 2.0, 7.5];
        let bytes = encode_matrix(2, 3, &data);
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        assert_eq!(decode_matrix(&bytes).unwrap(), (2, 3, data));
        assert!(decode_matrix(&bytes[..20]).is_err());
    }

    #[test]
    fn vocabulary_roundtrip() {
        let pairs: Vec<_> = [("a", "x"), ("b", "x"), ("c", "y")]
            .iter()
            .map(|(c, p)| ConceptPropertyPair::positive(c, p).unwrap())
            .collect();
        let v = Vocabulary::build(&pairs, 2).unwrap();
        let text = format_vocabulary(&v);
        assert_eq!(parse_vocabulary("t", Path::new("v"), &text).unwrap(), v);
    }

    #[test]
    fn clusters_roundtrip() {
        let names: Vec<String> = ["cat", "dog", "car"].iter().map(|s| s.to_string()).collect();
        let set = ClusterSet {
            exemplars: vec![0, 2],
            assignment: vec![0, 0, 2],
            granularity_tag: "0.5".into(),
            converged: true,
            iterations: 0,
        };
        let text = format_clusters(std::slice::from_ref(&set), &names);
        assert_eq!(text.lines().next(), Some("cat\tcluster::0.5::cat"));
        let (n, sets) = parse_clusters("t", Path::new("c"), &text).unwrap();
        assert_eq!(n, names);
        assert_eq!(sets, vec![set]);
    }

    #[test]
    fn embeddings_reject_ragged_rows() {
        let err = parse_embeddings("t", Path::new("e"), "a\t1,2\nb\t1\n").unwrap_err();
        assert!(err.reason.contains("e:2"));
        let (dim, rows) = parse_embeddings("t", Path::new("e"), "a\t1,2\nb\t0.1,-3\n").unwrap();
        assert_eq!(dim, 2);
        assert_eq!(rows[1].1, vec![0.1, -3.0]);
    }
}
