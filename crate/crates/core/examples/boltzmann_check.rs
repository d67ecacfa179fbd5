//! Compare fixed-temperature Metropolis marginals with exact Boltzmann
//! marginals obtained by enumerating all 2^n configurations.
//!
//! cargo run --release --example boltzmann_check

use territorial_ising::network::{Edge, InteractionGraph};
use territorial_ising::sampler::{hamiltonian, run_chain, AnnealingSchedule, ChainSpec, SpinConfiguration};

fn exact_marginals(graph: &InteractionGraph, field: &[f64], t: f64) -> Vec<f64> {
    let n = graph.n();
    let mut z = 0.0;
    let mut plus = vec![0.0; n];
    for mask in 0..1u64 << n {
        let c = SpinConfiguration::from_bits(n, mask);
        let w = (-hamiltonian(&c, graph, field).unwrap() / t).exp();
        z += w;
        for (i, p) in plus.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *p += w;
            }
        }
    }
    plus.iter().map(|p| p / z).collect()
}

fn main() {
    // two triangles joined by a weak bridge
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 0.2)];
    let graph = InteractionGraph::from_edges(6, edges.map(|(i, j, weight)| Edge { i, j, weight })).unwrap();
    let field = [0.4, -0.1, 0.2, -0.5, 0.3, -0.2];
    let t = 2.0;

    let exact = exact_marginals(&graph, &field, t);
    let spec = ChainSpec { n_iter: 1_000_000, burn_in_fraction: 0.1, seed: 3, trace_stride: 0, ..Default::default() };
    let out = run_chain(&SpinConfiguration::uniform(6, 1), &graph, &field, &AnnealingSchedule::fixed(t), &spec).unwrap();

    println!("unit  exact    sampled  diff");
    for (i, (e, s)) in exact.iter().zip(out.marginals()).enumerate() {
        println!("{i:<5} {e:.4}   {s:.4}   {:+.4}", s - e);
    }
}
