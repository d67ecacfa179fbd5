//! Values frozen from an independent numpy implementation.

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use territorial_ising::diagnostics::jensen_shannon;
use territorial_ising::indices::{external_field, mpi, pca, Direction};
use territorial_ising::network::{spectrum_summary, Edge, InteractionGraph};
use territorial_ising::sampler::{hamiltonian, SpinConfiguration};
use territorial_ising::stats::quantile_sorted;

fn composites() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        3,
        &[
            101.2, 98.4, 103.1, 95.0, 97.2, 99.9, 104.8, 106.1, 101.7, 99.3, 95.5, 96.4, 102.6, 104.0, 108.2, 97.1, 99.8,
            90.7,
        ],
    )
}

#[test]
fn pca_weights_and_field() {
    let dec = pca(&composites()).unwrap();
    let lambdas = [0.7355448544712668, 0.1877443766156406, 0.0767107689130924];
    let sdevs = [1.4854745246599823, 0.75048859408183, 0.4797210718107734];
    let loading0 = [0.6185687052120339, 0.5856021236500253, 0.5238729900547353];
    for k in 0..3 {
        assert_abs_diff_eq!(dec.lambdas[k], lambdas[k], epsilon = 1e-12);
        assert_abs_diff_eq!(dec.sdevs[k], sdevs[k], epsilon = 1e-12);
        assert_abs_diff_eq!(dec.loadings[(k, 0)], loading0[k], epsilon = 1e-12);
    }
    let ids: Vec<String> = (0..6).map(|i| i.to_string()).collect();
    let field = external_field(&dec, &ids).unwrap();
    let h = [0.3360309685589318, -0.9569338337945582, 1.3077643189663164, -0.8021960474302448, 1.4543184904077218, -1.33898389670817];
    for (a, b) in field.h.iter().zip(h) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
}

#[test]
fn mpi_both_directions() {
    let x = DMatrix::from_row_slice(3, 3, &[80.0, 90.0, 100.0, 100.0, 100.0, 100.0, 120.0, 95.0, 85.0]);
    let pos = mpi(&x, Direction::Positive).unwrap();
    let neg = mpi(&x, Direction::Negative).unwrap();
    for (a, b) in pos.iter().zip([89.25925925925925, 100.0, 97.83333333333333]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
    }
    for (a, b) in neg.iter().zip([90.74074074074075, 100.0, 102.16666666666667]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
    }
}

#[test]
fn bernoulli_jsd() {
    let jsd = jensen_shannon(&[1.0, 0.0, 1.0, 0.0], &[0.9, 0.2, 0.5, 0.0]).unwrap();
    assert_abs_diff_eq!(jsd, 0.11780220773151212, epsilon = 1e-12);
}

fn triangle_with_tail() -> InteractionGraph {
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 0.5)];
    InteractionGraph::from_edges(4, edges.map(|(i, j, weight)| Edge { i, j, weight })).unwrap()
}

#[test]
fn energy_of_small_system() {
    let c = SpinConfiguration::new(vec![1, -1, 1, 1]).unwrap();
    let h = hamiltonian(&c, &triangle_with_tail(), &[0.3, -0.2, 0.1, -0.7]).unwrap();
    assert_abs_diff_eq!(h, 0.6, epsilon = 1e-12);
}

#[test]
fn coupling_spectrum() {
    let s = spectrum_summary(&triangle_with_tail(), 100).unwrap();
    assert_abs_diff_eq!(s.min_eigenvalue, -1.148535272181637, epsilon = 1e-12);
    assert_abs_diff_eq!(s.max_eigenvalue, 2.041936179717803, epsilon = 1e-12);
    assert!(s.indefinite);
    assert_eq!(s.determinant_sign, 1);
}

#[test]
fn type7_quantiles() {
    let mut v = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
    v.sort_by(f64::total_cmp);
    for (p, q) in [(0.025, 1.0), (0.25, 1.75), (0.5, 3.5), (0.975, 8.475)] {
        assert_abs_diff_eq!(quantile_sorted(&v, p), q, epsilon = 1e-12);
    }
}
