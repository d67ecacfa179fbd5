//! One annealed Metropolis chain on a synthetic system, printing the energy
//! trace as CSV. Pipe it into any plotting tool.
//!
//! cargo run --release --example annealing_energy_trace > trace.csv

use std::collections::BTreeMap;

use territorial_ising::indices::{composite_indices, external_field, pca, stack_indices};
use territorial_ising::network::build_graph;
use territorial_ising::sampler::{run_chain, AnnealingSchedule, ChainSpec};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 300, seed: 7, ..Default::default() });
    let roster = data.roster();
    let composites = composite_indices(&roster.table, &BTreeMap::new()).unwrap();
    let field = external_field(&pca(&stack_indices(&composites)).unwrap(), roster.unit_ids()).unwrap();
    let graph = build_graph(&roster.profiles, 5).unwrap();

    let spec = ChainSpec { n_iter: 200_000, trace_stride: 2_000, seed: 7, ..Default::default() };
    let out = run_chain(&roster.reference, &graph, &field.h, &AnnealingSchedule::hyperbolic(100.0), &spec).unwrap();

    println!("iteration,energy");
    for p in &out.energy_trace {
        println!("{},{}", p.iteration, p.energy);
    }
    eprintln!(
        "accepted {} of {} proposals; H {:.2} -> {:.2}",
        out.accepted,
        spec.n_iter,
        out.energy_trace[0].energy,
        out.final_energy
    );
}
