//! Pool a few full chains, then resample replicate marginals from the
//! pooled estimate. The replicate spread becomes each unit's difficulty.
//!
//! cargo run --release --example replicate_marginals

use std::collections::BTreeMap;

use territorial_ising::indices::{composite_indices, external_field, pca, stack_indices};
use territorial_ising::network::build_graph;
use territorial_ising::sampler::{binomial_replicates, run_replicates, AnnealingSchedule, ChainSpec};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 300, seed: 11, ..Default::default() });
    let roster = data.roster();
    let composites = composite_indices(&roster.table, &BTreeMap::new()).unwrap();
    let field = external_field(&pca(&stack_indices(&composites)).unwrap(), roster.unit_ids()).unwrap();
    let graph = build_graph(&roster.profiles, 5).unwrap();

    let spec = ChainSpec { n_iter: 100_000, seed: 11, workers: 4, trace_stride: 0, ..Default::default() };
    let pilot = run_replicates(&roster.reference, &graph, &field, &AnnealingSchedule::default(), &spec, 4).unwrap();
    let est = binomial_replicates(&pilot.p_hat, roster.unit_ids().to_vec(), 2_000, 300, 11, 4).unwrap();

    let certain = est.sigma.iter().filter(|&&s| s == 0.0).count();
    println!("units with identical replicates: {certain} of {}", est.len());
    println!("\nmost uncertain units:");
    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|&a, &b| est.sigma[b].total_cmp(&est.sigma[a]));
    for &i in order.iter().take(8) {
        println!("  {}  p_hat {:.3}  sigma {:.4}  observed {:+}", est.unit_ids[i], est.p_hat[i], est.sigma[i], roster.reference.spins()[i]);
    }
}
