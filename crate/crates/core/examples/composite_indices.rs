//! Standardize a synthetic indicator table, aggregate it into one composite
//! index per group and fold the composites into an external field.
//!
//! cargo run --example composite_indices

use std::collections::BTreeMap;

use territorial_ising::indices::{composite_indices, external_field, pca, stack_indices, Direction};
use territorial_ising::stats::{mean, Summary};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 400, seed: 1, ..Default::default() });
    let roster = data.roster();
    let directions: BTreeMap<String, Direction> = BTreeMap::new();
    let composites = composite_indices(&roster.table, &directions).expect("composites");

    println!("{:<16} {:>8} {:>8} {:>8}", "group", "min", "mean", "max");
    for c in &composites {
        let s = Summary::of(&c.scores).unwrap();
        println!("{:<16} {:>8.2} {:>8.2} {:>8.2}", c.name, s.min, mean(&c.scores), s.max);
    }

    let dec = pca(&stack_indices(&composites)).expect("pca");
    println!("\ncomponent  sdev    lambda");
    for (k, (sd, l)) in dec.sdevs.iter().zip(&dec.lambdas).enumerate() {
        println!("PC{:<8} {sd:<7.4} {l:.4}", k + 1);
    }

    let field = external_field(&dec, roster.unit_ids()).expect("field");
    let (mut hubs, mut periphery) = (Vec::new(), Vec::new());
    for (h, &s) in field.h.iter().zip(roster.reference.spins()) {
        if s > 0 { hubs.push(*h) } else { periphery.push(*h) }
    }
    println!("\nmean field: hubs {:+.3}, periphery {:+.3}", mean(&hubs), mean(&periphery));
}
