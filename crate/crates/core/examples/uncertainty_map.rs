//! Join conformal interval widths onto grid geometry and write the annotated
//! and highlight GeoJSON layers to the system temp directory.
//!
//! cargo run --example uncertainty_map

use territorial_ising::conformal::{conformalize, ConformalConfig};
use territorial_ising::io::{write_json, IntervalRow};
use territorial_ising::map::{join_geometry, map_rows};
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() {
    let data = generate(&SyntheticSpec { n_units: 100, seed: 8, ..Default::default() });
    let roster = data.roster();
    let y = roster.reference.indicator();
    // a crude predictor: planted labels, unsure about every fifth unit
    let y_hat: Vec<f64> = data.planted.iter().map(|&s| if s > 0 { 0.95 } else { 0.05 }).collect();
    let sigma: Vec<f64> = (0..y.len()).map(|i| if i % 5 == 0 { 0.1 } else { 0.0 }).collect();
    let res = conformalize(&y, &y_hat, &sigma, &ConformalConfig::default()).unwrap();

    let rows: Vec<IntervalRow> = res
        .intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| IntervalRow {
            unit_id: roster.unit_ids()[i].clone(),
            y_true: y[i],
            covered: iv.covers(y[i]),
            interval: iv.clone(),
            split: String::new(),
        })
        .collect();
    let map = join_geometry(&data.geometry(), &map_rows(&rows), "unit_id").unwrap();

    let dir = std::env::temp_dir();
    write_json(&dir.join("uncertainty_map.geojson"), &map.annotated).unwrap();
    write_json(&dir.join("uncertainty_highlight.geojson"), &map.highlight).unwrap();
    let layer = map.highlight["features"].as_array().unwrap();
    let black = layer.iter().filter(|f| f["properties"]["shade"] == "black").count();
    println!("q_hat {}; highlight layer: {} units ({black} full, {} intermediate)", res.q_hat, layer.len(), layer.len() - black);
    println!("written to {}", dir.display());
}
