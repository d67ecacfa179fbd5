//! Energy ratios, log-likelihood ratios, divergence and the mismatch matrix
//! for simulated marginals against the observed classification.
//!
//! cargo run --release --example diagnostics_report

use std::collections::BTreeMap;

use territorial_ising::diagnostics::{diagnose, DiagnosticsConfig};
use territorial_ising::indices::{composite_indices, external_field, pca, stack_indices};
use territorial_ising::network::build_graph;
use territorial_ising::sampler::{run_replicates, AnnealingSchedule, ChainSpec};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 300, seed: 5, ..Default::default() });
    let roster = data.roster();
    let composites = composite_indices(&roster.table, &BTreeMap::new()).unwrap();
    let field = external_field(&pca(&stack_indices(&composites)).unwrap(), roster.unit_ids()).unwrap();
    let graph = build_graph(&roster.profiles, 5).unwrap();
    let spec = ChainSpec { n_iter: 100_000, seed: 5, trace_stride: 0, ..Default::default() };
    let est = run_replicates(&roster.reference, &graph, &field, &AnnealingSchedule::default(), &spec, 2).unwrap();

    let cfg = DiagnosticsConfig { samples: 5_000, ..Default::default() };
    let report = diagnose(&roster.reference, &est.p_hat, &graph, &field.h, &cfg, 5, 1).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
