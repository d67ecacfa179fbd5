#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use territorial_ising::network::{Edge, InteractionGraph};
use territorial_ising::sampler::{hamiltonian, SpinConfiguration};
use territorial_ising::seed;

/// Units shuffled and cut into disjoint unit-weight cliques of 1 to
/// `max_clique` members, with fields uniform in `[-field_bound, field_bound]`.
pub fn random_clique_instance(n: usize, max_clique: usize, field_bound: f64, seed_value: u64) -> (InteractionGraph, Vec<f64>) {
    let mut rng = seed::rng(seed_value);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + rng.random_range(1..=max_clique)).min(n);
        for a in start..end {
            for b in a + 1..end {
                edges.push(Edge { i: order[a], j: order[b], weight: 1.0 });
            }
        }
        start = end;
    }
    let field = (0..n).map(|_| rng.random_range(-field_bound..=field_bound)).collect();
    (InteractionGraph::from_edges(n, edges).unwrap(), field)
}

/// Energies of all 2^n configurations, indexed by bit mask.
pub fn all_energies(graph: &InteractionGraph, field: &[f64]) -> Vec<f64> {
    let n = graph.n();
    (0..1u64 << n).map(|m| hamiltonian(&SpinConfiguration::from_bits(n, m), graph, field).unwrap()).collect()
}

/// Exact Boltzmann probabilities at temperature `t`, indexed by bit mask.
pub fn boltzmann(energies: &[f64], t: f64) -> Vec<f64> {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / t).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

pub fn marginals_from(probs: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| probs.iter().enumerate().filter(|(m, _)| m >> i & 1 == 1).map(|(_, p)| p).sum()).collect()
}

pub fn random_configuration(n: usize, rng: &mut impl Rng) -> SpinConfiguration {
    SpinConfiguration::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()).unwrap()
}
