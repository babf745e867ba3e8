//! Affinity propagation over concept embeddings.
//!
//! Responsibilities and availabilities are exchanged with damping until the
//! exemplar set has been stable for a window of iterations. The preference
//! (self-similarity on the diagonal) is set by interpolating between the
//! smallest and largest off-diagonal similarity, which makes a single
//! fraction in `[0, 1]` control granularity independent of embedding scale.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math::{cosine, squared_distance};

/// Preference fractions compared when choosing granularity.
pub const PREFERENCE_SWEEP: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("no points to cluster")]
    Empty,
    #[error("point {0} is a zero vector, cosine similarity is undefined")]
    ZeroVector(usize),
    #[error("points have inconsistent dimensions")]
    Ragged,
    #[error("invalid clustering config: {0}")]
    InvalidConfig(&'static str),
    #[error("similarity matrix must be square and symmetric")]
    NotSymmetric,
    #[error("no preference fractions given")]
    NoFractions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Similarity {
    #[default]
    NegativeSquaredEuclidean,
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ApConfig {
    pub preference_fraction: f64,
    pub damping: f64,
    pub max_iterations: usize,
    pub convergence_window: usize,
    pub similarity: Similarity,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig {
            preference_fraction: 0.5,
            damping: 0.9,
            max_iterations: 200,
            convergence_window: 15,
            similarity: Similarity::NegativeSquaredEuclidean,
        }
    }
}

impl ApConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(0.5..1.0).contains(&self.damping) {
            return Err(ClusterError::InvalidConfig("damping must lie in [0.5, 1)"));
        }
        if self.convergence_window == 0 || self.max_iterations < self.convergence_window {
            return Err(ClusterError::InvalidConfig(
                "need 1 <= convergence_window <= max_iterations",
            ));
        }
        if !(0.0..=1.0).contains(&self.preference_fraction) {
            return Err(ClusterError::InvalidConfig("preference_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Dense square similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self, ClusterError> {
        if n == 0 {
            return Err(ClusterError::Empty);
        }
        if data.len() != n * n {
            return Err(ClusterError::NotSymmetric);
        }
        let m = SimilarityMatrix { n, data };
        for i in 0..n {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(ClusterError::NotSymmetric);
                }
            }
        }
        Ok(m)
    }

    /// Pairwise similarities; the diagonal is left at zero for the
    /// preference.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P], kind: Similarity) -> Result<Self, ClusterError> {
        let n = points.len();
        if n == 0 {
            return Err(ClusterError::Empty);
        }
        let dim = points[0].as_ref().len();
        if points.iter().any(|p| p.as_ref().len() != dim) {
            return Err(ClusterError::Ragged);
        }
        if kind == Similarity::Cosine {
            if let Some(i) = points.iter().position(|p| p.as_ref().iter().all(|x| *x == 0.0)) {
                return Err(ClusterError::ZeroVector(i));
            }
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (points[i].as_ref(), points[j].as_ref());
                let s = match kind {
                    Similarity::NegativeSquaredEuclidean => -squared_distance(a, b),
                    Similarity::Cosine => cosine(a, b).unwrap_or(0.0),
                };
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Ok(SimilarityMatrix { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_preference(&mut self, preference: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] = preference;
        }
    }

    /// `min + f·(max − min)` over off-diagonal entries; 0 for a single point.
    pub fn preference_from_fraction(&self, fraction: f64) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let s = self.get(i, j);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        lo + fraction * (hi - lo)
    }
}

/// Message-passing state. Exposed so the update equations can be checked
/// step by step.
#[derive(Debug, Clone)]
pub struct ApState {
    s: SimilarityMatrix,
    r: Vec<f64>,
    a: Vec<f64>,
    damping: f64,
}

impl ApState {
    pub fn new(s: SimilarityMatrix, damping: f64) -> Result<Self, ClusterError> {
        if !(0.5..1.0).contains(&damping) {
            return Err(ClusterError::InvalidConfig("damping must lie in [0.5, 1)"));
        }
        Ok(Self::new_unchecked(s, damping))
    }

    /// Accepts any damping in `[0, 1)`; for comparing against undamped
    /// reference updates.
    #[doc(hidden)]
    pub fn new_unchecked(s: SimilarityMatrix, damping: f64) -> Self {
        let nn = s.n * s.n;
        ApState {
            s,
            r: vec![0.0; nn],
            a: vec![0.0; nn],
            damping,
        }
    }

    pub fn len(&self) -> usize {
        self.s.n
    }

    pub fn is_empty(&self) -> bool {
        self.s.n == 0
    }

    pub fn responsibility(&self, i: usize, k: usize) -> f64 {
        self.r[i * self.s.n + k]
    }

    pub fn availability(&self, i: usize, k: usize) -> f64 {
        self.a[i * self.s.n + k]
    }

    /// One damped responsibility update followed by one damped
    /// availability update (using the new responsibilities).
    pub fn step(&mut self) {
        let n = self.s.n;
        let d = self.damping;

        // r(i,k) ← s(i,k) − max_{k'≠k} [a(i,k') + s(i,k')]
        for i in 0..n {
            let (mut first, mut first_k, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = self.a[i * n + k] + self.s.get(i, k);
                if v > first {
                    second = first;
                    first = v;
                    first_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == first_k { second } else { first };
                let raw = if n == 1 {
                    self.s.get(i, k)
                } else {
                    self.s.get(i, k) - competitor
                };
                let idx = i * n + k;
                self.r[idx] = d * self.r[idx] + (1.0 - d) * raw;
            }
        }

        // a(i,k) ← min(0, r(k,k) + Σ_{i'∉{i,k}} max(0, r(i',k)))  for i ≠ k
        // a(k,k) ← Σ_{i'≠k} max(0, r(i',k))
        for k in 0..n {
            let positive_sum: f64 = (0..n).filter(|&i| i != k).map(|i| self.r[i * n + k].max(0.0)).sum();
            let rkk = self.r[k * n + k];
            for i in 0..n {
                let raw = if i == k {
                    positive_sum
                } else {
                    (rkk + positive_sum - self.r[i * n + k].max(0.0)).min(0.0)
                };
                let idx = i * n + k;
                self.a[idx] = d * self.a[idx] + (1.0 - d) * raw;
            }
        }
    }

    /// Points with `r(k,k) + a(k,k) > 0`, ascending.
    pub fn exemplars(&self) -> Vec<usize> {
        let n = self.s.n;
        (0..n)
            .filter(|&k| self.r[k * n + k] + self.a[k * n + k] > 0.0)
            .collect()
    }

    /// Assigns every point to its most similar exemplar (lowest index on
    /// ties); exemplars map to themselves. With no positive exemplar the
    /// point with the largest `r(k,k) + a(k,k)` is used.
    pub fn assignment(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.s.n;
        let mut exemplars = self.exemplars();
        if exemplars.is_empty() {
            let best = (0..n).fold(0, |best, k| {
                let score = |k: usize| self.r[k * n + k] + self.a[k * n + k];
                if score(k) > score(best) {
                    k
                } else {
                    best
                }
            });
            exemplars.push(best);
        }
        let assignment = (0..n)
            .map(|i| {
                if exemplars.binary_search(&i).is_ok() {
                    return i;
                }
                let mut best = exemplars[0];
                for &e in &exemplars[1..] {
                    if self.s.get(i, e) > self.s.get(i, best) {
                        best = e;
                    }
                }
                best
            })
            .collect();
        (exemplars, assignment)
    }
}

/// One clustering: exemplar indices and the exemplar of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub exemplars: Vec<usize>,
    pub assignment: Vec<usize>,
    pub granularity_tag: String,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterSet {
    pub fn cluster_count(&self) -> usize {
        self.exemplars.len()
    }

    /// Cluster label of `point` given the names of all points.
    pub fn label(&self, point: usize, names: &[String]) -> String {
        format!("cluster::{}::{}", self.granularity_tag, names[self.assignment[point]])
    }
}

/// Runs affinity propagation on `s`, whose diagonal must already hold the
/// preference. Non-convergence is reported through `converged`.
pub fn affinity_propagation(s: &SimilarityMatrix, config: &ApConfig) -> Result<ClusterSet, ClusterError> {
    config.validate()?;
    let mut state = ApState::new(s.clone(), config.damping)?;
    let mut last = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iterations {
        state.step();
        iterations = it;
        let ex = state.exemplars();
        if ex == last {
            stable += 1;
        } else {
            stable = 1;
            last = ex;
        }
        if stable >= config.convergence_window && !last.is_empty() {
            converged = true;
            break;
        }
    }
    let (exemplars, assignment) = state.assignment();
    Ok(ClusterSet {
        exemplars,
        assignment,
        granularity_tag: format!("{}", config.preference_fraction),
        converged,
        iterations,
    })
}

/// Clusters `points` once per preference fraction.
pub fn cluster_granularities<P: AsRef<[f64]>>(
    points: &[P],
    fractions: &[f64],
    config: &ApConfig,
) -> Result<Vec<ClusterSet>, ClusterError> {
    if fractions.is_empty() {
        return Err(ClusterError::NoFractions);
    }
    let base = SimilarityMatrix::from_points(points, config.similarity)?;
    fractions
        .iter()
        .map(|&f| {
            let cfg = ApConfig {
                preference_fraction: f,
                ..config.clone()
            };
            let mut s = base.clone();
            s.set_preference(s.preference_from_fraction(f));
            affinity_propagation(&s, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_examples() {
        let m = SimilarityMatrix::from_points(&[[0.0, 0.0], [3.0, 4.0]], Similarity::NegativeSquaredEuclidean).unwrap();
        assert_eq!(m.get(0, 1), -25.0);
        let m = SimilarityMatrix::from_points(&[[1.0, 1.0], [1.0, 1.0]], Similarity::NegativeSquaredEuclidean).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        let m = SimilarityMatrix::from_points(&[[1.0, 2.0], [2.0, 4.0]], Similarity::Cosine).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(
            SimilarityMatrix::from_points(&[[1.0, 2.0], [0.0, 0.0]], Similarity::Cosine),
            Err(ClusterError::ZeroVector(1))
        );
    }

    #[test]
    fn preference_interpolation() {
        // off-diagonal similarities {-25, -1}
        let pts = [[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]];
        let m = SimilarityMatrix::from_points(&pts, Similarity::NegativeSquaredEuclidean).unwrap();
        assert_eq!(m.preference_from_fraction(0.0), -34.0);
        assert_eq!(m.preference_from_fraction(1.0), -1.0);
        let two = SimilarityMatrix::from_rows(3, vec![0.0, -25.0, -1.0, -25.0, 0.0, -25.0, -1.0, -25.0, 0.0]).unwrap();
        assert_eq!(two.preference_from_fraction(0.5), -13.0);
        let one = SimilarityMatrix::from_points(&[[1.0]], Similarity::NegativeSquaredEuclidean).unwrap();
        assert_eq!(one.preference_from_fraction(0.7), 0.0);
    }

    #[test]
    fn single_point_is_its_own_exemplar() {
        let sets = cluster_granularities(&[[1.0, 2.0]], &[0.5], &ApConfig::default()).unwrap();
        assert_eq!(sets[0].exemplars, vec![0]);
        assert_eq!(sets[0].assignment, vec![0]);
    }

    #[test]
    fn identical_points_share_a_cluster() {
        let sets = cluster_granularities(&[[1.0, 2.0], [1.0, 2.0]], &[0.5], &ApConfig::default()).unwrap();
        assert_eq!(sets[0].cluster_count(), 1);
        assert_eq!(sets[0].assignment[0], sets[0].assignment[1]);
    }

    #[test]
    fn config_validation() {
        let bad = ApConfig {
            damping: 0.2,
            ..ApConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ApConfig {
            max_iterations: 3,
            ..ApConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(
            cluster_granularities(&[[1.0]], &[], &ApConfig::default()),
            Err(ClusterError::NoFractions)
        );
    }
}
