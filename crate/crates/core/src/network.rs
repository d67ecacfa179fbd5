//! Similarity graph over territorial units.
//!
//! Units sharing a territorial profile interact with unit weight regardless
//! of where they sit geographically. The resulting graph is the coupling
//! matrix of the spin system, stored sparsely.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::SpinConfiguration;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("unit {unit}: attribute {field} has out-of-domain code {value}")]
    InvalidAttribute { unit: usize, field: &'static str, value: i64 },
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dense spectrum requested for {n} nodes, cap is {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid edge ({i}, {j}, {weight})")]
    InvalidEdge { i: usize, j: usize, weight: f64 },
    #[error("configuration has {got} spins, graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("min_match must be in 1..=5, got {0}")]
    InvalidThreshold(usize),
}

/// Coded territorial attributes of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeProfile {
    /// 1 lowland, 2 hill, 3 mountain.
    pub altitude: u8,
    /// 1 small, 2 medium, 3 large resident population.
    pub population_class: u8,
    /// 1 small, 2 medium, 3 large surface area.
    pub surface_class: u8,
    /// 0 inland, 1 coastal.
    pub coastal: u8,
    /// 1 city, 2 town or suburb, 3 rural.
    pub urbanization: u8,
}

pub const ATTRIBUTE_COLUMNS: [&str; 5] = ["ALT", "POP", "SUP", "CLITO", "DEGURB"];

impl AttributeProfile {
    /// Validates raw codes in the column order ALT, POP, SUP, CLITO, DEGURB.
    pub fn from_codes(unit: usize, codes: [i64; 5]) -> Result<Self, NetworkError> {
        for (k, &v) in codes.iter().enumerate() {
            let ok = if k == 3 { (0..=1).contains(&v) } else { (1..=3).contains(&v) };
            if !ok {
                return Err(NetworkError::InvalidAttribute { unit, field: ATTRIBUTE_COLUMNS[k], value: v });
            }
        }
        Ok(Self {
            altitude: codes[0] as u8,
            population_class: codes[1] as u8,
            surface_class: codes[2] as u8,
            coastal: codes[3] as u8,
            urbanization: codes[4] as u8,
        })
    }

    pub fn codes(&self) -> [u8; 5] {
        [self.altitude, self.population_class, self.surface_class, self.coastal, self.urbanization]
    }

    fn validate(&self, unit: usize) -> Result<(), NetworkError> {
        let c = self.codes();
        Self::from_codes(unit, c.map(i64::from)).map(|_| ())
    }

    pub fn matches(&self, other: &Self) -> usize {
        self.codes().iter().zip(other.codes().iter()).filter(|(a, b)| a == b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Sparse symmetric couplings. Each unordered pair is stored once with
/// `i < j`; a CSR view serves neighbor queries.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    n: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl InteractionGraph {
    /// Builds a graph from an edge list. Pairs are normalized to `i < j`;
    /// self-loops, duplicates and negative or non-finite weights are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, NetworkError> {
        let mut list: Vec<Edge> = Vec::new();
        for e in edges {
            let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
            if i == j || j >= n || !e.weight.is_finite() || e.weight < 0.0 {
                return Err(NetworkError::InvalidEdge { i: e.i, j: e.j, weight: e.weight });
            }
            list.push(Edge { i, j, weight: e.weight });
        }
        list.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = list.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(NetworkError::InvalidEdge { i: w[1].i, j: w[1].j, weight: w[1].weight });
        }

        let mut degree = vec![0usize; n];
        for e in &list {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for e in &list {
            neighbors[cursor[e.i]] = e.j;
            weights[cursor[e.i]] = e.weight;
            cursor[e.i] += 1;
            neighbors[cursor[e.j]] = e.i;
            weights[cursor[e.j]] = e.weight;
            cursor[e.j] += 1;
        }
        Ok(Self { n, edges: list, offsets, neighbors, weights })
    }

    pub fn empty(n: usize) -> Self {
        Self::from_edges(n, std::iter::empty()).expect("empty graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Neighbors of `i` with their coupling weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[range.clone()].iter().copied().zip(self.weights[range].iter().copied())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).any(|(k, _)| k == j)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            m[(e.i, e.j)] = e.weight;
            m[(e.j, e.i)] = e.weight;
        }
        m
    }

    /// Number of connected components, isolated nodes included.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut count = self.n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    /// Map from degree to number of nodes with that degree.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for v in 0..self.n {
            *hist.entry(self.degree(v)).or_insert(0) += 1;
        }
        hist
    }
}

/// Connects units whose profiles agree on at least `min_match` of the five
/// attributes. With `min_match = 5` (the default rule) the result is a
/// disjoint union of cliques, one per distinct profile.
pub fn build_graph(profiles: &[AttributeProfile], min_match: usize) -> Result<InteractionGraph, NetworkError> {
    if !(1..=5).contains(&min_match) {
        return Err(NetworkError::InvalidThreshold(min_match));
    }
    for (u, p) in profiles.iter().enumerate() {
        p.validate(u)?;
    }
    let n = profiles.len();
    let mut edges = Vec::new();
    if min_match == 5 {
        let mut classes: HashMap<AttributeProfile, Vec<usize>> = HashMap::new();
        for (u, p) in profiles.iter().enumerate() {
            classes.entry(*p).or_default().push(u);
        }
        for members in classes.values() {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    edges.push(Edge { i, j, weight: 1.0 });
                }
            }
        }
    } else {
        for i in 0..n {
            for j in (i + 1)..n {
                if profiles[i].matches(&profiles[j]) >= min_match {
                    edges.push(Edge { i, j, weight: 1.0 });
                }
            }
        }
    }
    InteractionGraph::from_edges(n, edges)
}

/// `Σ_j J_ij s_j` over the sparse neighbor list.
pub fn neighbor_sum(graph: &InteractionGraph, config: &SpinConfiguration, i: usize) -> Result<f64, NetworkError> {
    if config.len() != graph.n() {
        return Err(NetworkError::DimensionMismatch { expected: graph.n(), got: config.len() });
    }
    if i >= graph.n() {
        return Err(NetworkError::IndexOutOfRange { index: i, n: graph.n() });
    }
    let spins = config.spins();
    Ok(graph.neighbors(i).map(|(j, w)| w * f64::from(spins[j])).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub indefinite: bool,
    /// Sign of the determinant (-1, 0 or +1), from the eigenvalue signs.
    pub determinant_sign: i8,
}

pub const DEFAULT_SPECTRUM_CAP: usize = 5000;
const SPECTRUM_TOL: f64 = 1e-9;

/// Extreme eigenvalues of the dense coupling matrix.
pub fn spectrum_summary(graph: &InteractionGraph, cap: usize) -> Result<SpectrumSummary, NetworkError> {
    if graph.n() > cap {
        return Err(NetworkError::TooLarge { n: graph.n(), cap });
    }
    if graph.n() == 0 {
        return Ok(SpectrumSummary { min_eigenvalue: 0.0, max_eigenvalue: 0.0, indefinite: false, determinant_sign: 0 });
    }
    let eig = SymmetricEigen::new(graph.to_dense()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let determinant_sign = if eig.iter().any(|v| v.abs() <= SPECTRUM_TOL) {
        0
    } else if eig.iter().filter(|v| **v < 0.0).count() % 2 == 1 {
        -1
    } else {
        1
    };
    Ok(SpectrumSummary {
        min_eigenvalue: min,
        max_eigenvalue: max,
        indefinite: min < -SPECTRUM_TOL && max > SPECTRUM_TOL,
        determinant_sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(codes: [i64; 5]) -> AttributeProfile {
        AttributeProfile::from_codes(0, codes).unwrap()
    }

    #[test]
    fn identical_profiles_connect() {
        let p = profile([1, 2, 3, 0, 1]);
        let g = build_graph(&[p, p], 5).unwrap();
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, weight: 1.0 }]);
    }

    #[test]
    fn one_attribute_apart_stays_disconnected() {
        let g = build_graph(&[profile([1, 2, 3, 0, 1]), profile([1, 2, 3, 1, 1])], 5).unwrap();
        assert_eq!(g.edge_count(), 0);
        // relaxed rule connects them
        assert_eq!(build_graph(&[profile([1, 2, 3, 0, 1]), profile([1, 2, 3, 1, 1])], 4).unwrap().edge_count(), 1);
    }

    #[test]
    fn clique_counts_match_pair_enumeration() {
        let p = profile([2, 1, 1, 0, 3]);
        let q = profile([1, 1, 1, 0, 3]);
        for k in 1..8 {
            let mut profiles = vec![p; k];
            profiles.push(q);
            let g = build_graph(&profiles, 5).unwrap();
            let mut pairs = 0;
            for i in 0..k {
                for j in (i + 1)..k {
                    assert!(g.has_edge(i, j));
                    pairs += 1;
                }
            }
            assert_eq!(g.edge_count(), pairs);
            assert!((0..k).all(|i| g.degree(i) == k - 1));
            assert_eq!(g.degree(k), 0);
        }
    }

    #[test]
    fn invalid_codes_are_rejected() {
        assert_eq!(
            AttributeProfile::from_codes(4, [1, 2, 3, 2, 1]),
            Err(NetworkError::InvalidAttribute { unit: 4, field: "CLITO", value: 2 })
        );
        assert_eq!(
            AttributeProfile::from_codes(0, [0, 2, 3, 0, 1]),
            Err(NetworkError::InvalidAttribute { unit: 0, field: "ALT", value: 0 })
        );
        let bad = AttributeProfile { altitude: 1, population_class: 1, surface_class: 1, coastal: 0, urbanization: 9 };
        assert!(matches!(build_graph(&[bad], 5), Err(NetworkError::InvalidAttribute { field: "DEGURB", .. })));
    }

    #[test]
    fn neighbor_sums() {
        let g = InteractionGraph::from_edges(
            4,
            [Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 0, j: 2, weight: 1.0 }],
        )
        .unwrap();
        let s = SpinConfiguration::new(vec![1, 1, -1, 1]).unwrap();
        assert_eq!(neighbor_sum(&g, &s, 3).unwrap(), 0.0);
        assert_eq!(neighbor_sum(&g, &s, 0).unwrap(), 0.0);
        assert_eq!(neighbor_sum(&g, &s, 9), Err(NetworkError::IndexOutOfRange { index: 9, n: 4 }));

        let tri = build_graph(&[profile([1, 1, 1, 0, 1]); 3], 5).unwrap();
        let up = SpinConfiguration::new(vec![1, 1, 1]).unwrap();
        let dense = tri.to_dense() * nalgebra::DVector::from_element(3, 1.0);
        for i in 0..3 {
            assert_eq!(neighbor_sum(&tri, &up, i).unwrap(), 2.0);
            assert_eq!(dense[i], 2.0);
        }
    }

    #[test]
    fn edge_validation() {
        assert!(InteractionGraph::from_edges(2, [Edge { i: 1, j: 1, weight: 1.0 }]).is_err());
        assert!(InteractionGraph::from_edges(2, [Edge { i: 0, j: 2, weight: 1.0 }]).is_err());
        assert!(InteractionGraph::from_edges(
            2,
            [Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 1, j: 0, weight: 1.0 }]
        )
        .is_err());
        let g = InteractionGraph::from_edges(3, [Edge { i: 2, j: 0, weight: 0.5 }]).unwrap();
        assert_eq!(g.edges()[0], Edge { i: 0, j: 2, weight: 0.5 });
    }

    #[test]
    fn spectrum_small_cases() {
        let empty = spectrum_summary(&InteractionGraph::empty(3), 10).unwrap();
        assert_eq!((empty.min_eigenvalue, empty.max_eigenvalue, empty.indefinite), (0.0, 0.0, false));

        let pair = InteractionGraph::from_edges(2, [Edge { i: 0, j: 1, weight: 1.0 }]).unwrap();
        let s = spectrum_summary(&pair, 10).unwrap();
        assert!((s.min_eigenvalue + 1.0).abs() < 1e-12 && (s.max_eigenvalue - 1.0).abs() < 1e-12);
        assert!(s.indefinite);
        assert_eq!(s.determinant_sign, -1);

        for k in 2..7 {
            let g = build_graph(&vec![profile([1, 1, 1, 0, 1]); k], 5).unwrap();
            let s = spectrum_summary(&g, 10).unwrap();
            assert!((s.max_eigenvalue - (k as f64 - 1.0)).abs() < 1e-9);
            assert!((s.min_eigenvalue + 1.0).abs() < 1e-9);
            assert!(s.indefinite);
        }
        assert_eq!(
            spectrum_summary(&InteractionGraph::empty(11), 10),
            Err(NetworkError::TooLarge { n: 11, cap: 10 })
        );
    }

    #[test]
    fn summary_counts() {
        let p = profile([1, 1, 1, 0, 1]);
        let q = profile([3, 3, 3, 1, 3]);
        let g = build_graph(&[p, q, p, p, q, profile([2, 2, 2, 0, 2])], 5).unwrap();
        assert_eq!(g.component_count(), 3);
        let hist = g.degree_histogram();
        assert_eq!(hist.get(&2), Some(&3));
        assert_eq!(hist.get(&1), Some(&2));
        assert_eq!(hist.get(&0), Some(&1));
    }
}
