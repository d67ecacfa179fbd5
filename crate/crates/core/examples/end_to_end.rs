//! Generate a synthetic dataset, run every pipeline stage and print the
//! manifest. Takes an optional output directory.
//!
//! cargo run --release --example end_to_end -- /tmp/territorial

use std::path::PathBuf;

use territorial_ising::config::RunConfig;
use territorial_ising::pipeline::run_pipeline;
use territorial_ising::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), territorial_ising::Error> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("territorial"));
    let data = generate(&SyntheticSpec::default());
    let cfg_path = data.write_all(&dir)?;
    let cfg = RunConfig::load(&cfg_path)?;

    let manifest = run_pipeline(&cfg, None)?;
    println!("{}", serde_json::to_string_pretty(&manifest).unwrap());
    let conformal = std::fs::read_to_string(cfg.out_dir().join("conformal_summary.json")).unwrap();
    println!("{conformal}");
    Ok(())
}
