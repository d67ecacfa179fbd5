//! Build the similarity graph from territorial attributes at several match
//! thresholds and report its size and coupling spectrum.
//!
//! cargo run --example similarity_graph

use territorial_ising::network::{build_graph, spectrum_summary, DEFAULT_SPECTRUM_CAP};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 500, seed: 4, ..Default::default() });
    println!("{:>9} {:>8} {:>10} {:>9} {:>10} {:>10}", "min_match", "edges", "components", "isolated", "lambda_min", "lambda_max");
    for min_match in (3..=5).rev() {
        let g = build_graph(&data.profiles, min_match).expect("graph");
        let isolated = (0..g.n()).filter(|&i| g.degree(i) == 0).count();
        let spec = spectrum_summary(&g, DEFAULT_SPECTRUM_CAP).expect("spectrum");
        println!(
            "{min_match:>9} {:>8} {:>10} {isolated:>9} {:>10.3} {:>10.3}",
            g.edge_count(),
            g.component_count(),
            spec.min_eigenvalue,
            spec.max_eigenvalue
        );
    }

    // exact matching partitions units into cliques of identical profiles
    let g = build_graph(&data.profiles, 5).unwrap();
    let s = spectrum_summary(&g, DEFAULT_SPECTRUM_CAP).unwrap();
    println!("\nexact-match couplings indefinite: {}, det sign {}", s.indefinite, s.determinant_sign);
}
