//! Stage-by-stage pipeline. Stages communicate only through files in the
//! output directory, so any stage can be rerun alone once its inputs exist.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::config::{ReplicateMode, RunConfig};
use crate::conformal::{conformalize, CoverageReport};
use crate::diagnostics::diagnose;
use crate::error::Error;
use crate::indices::{composite_indices, external_field_truncated, pca, ExternalField};
use crate::io::{self, IntervalRow, Roster};
use crate::map::{join_geometry, map_rows, write_map_csv};
use crate::network::{build_graph, spectrum_summary, InteractionGraph, SpectrumSummary};
use crate::sampler::{binomial_replicates, run_replicates_traced, MarginalEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Indices,
    Field,
    Graph,
    Simulate,
    Diagnose,
    Conformal,
    Map,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Indices, Stage::Field, Stage::Graph, Stage::Simulate, Stage::Diagnose, Stage::Conformal, Stage::Map];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Indices => "indices",
            Stage::Field => "field",
            Stage::Graph => "graph",
            Stage::Simulate => "simulate",
            Stage::Diagnose => "diagnose",
            Stage::Conformal => "conformal",
            Stage::Map => "map",
        }
    }

    /// Files the stage writes, relative to the output directory.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Indices => &[files::COMPOSITES, files::COMPOSITE_CORRELATION],
            Stage::Field => &[files::FIELD, files::PCA],
            Stage::Graph => &[files::EDGES, files::GRAPH_SUMMARY],
            Stage::Simulate => &[files::MARGINALS, files::TRACE, files::SIMULATION, files::REPLICATES],
            Stage::Diagnose => &[files::DIAGNOSTICS],
            Stage::Conformal => &[files::INTERVALS, files::CONFORMAL],
            Stage::Map => &[files::MAP_DATA, files::MAP_ANNOTATED, files::MAP_HIGHLIGHT],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

pub mod files {
    pub const COMPOSITES: &str = "composite_indices.csv";
    pub const COMPOSITE_CORRELATION: &str = "composite_correlation.csv";
    pub const FIELD: &str = "field.csv";
    pub const PCA: &str = "pca_summary.json";
    pub const EDGES: &str = "edges.csv";
    pub const GRAPH_SUMMARY: &str = "graph_summary.json";
    pub const MARGINALS: &str = "marginals.csv";
    pub const TRACE: &str = "energy_trace.csv";
    pub const SIMULATION: &str = "simulation_summary.json";
    pub const REPLICATES: &str = "replicates.csv";
    pub const DIAGNOSTICS: &str = "diagnostics.json";
    pub const INTERVALS: &str = "intervals.csv";
    pub const CONFORMAL: &str = "conformal_summary.json";
    pub const MAP_DATA: &str = "map_data.csv";
    pub const MAP_ANNOTATED: &str = "uncertainty_map.geojson";
    pub const MAP_HIGHLIGHT: &str = "uncertainty_highlight.geojson";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// `complete` or `incomplete`.
    pub status: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub stages: Vec<StageRecord>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub total_seconds: f64,
}

pub fn load_roster(cfg: &RunConfig) -> Result<Roster, Error> {
    io::ingest(&cfg.units_path(), &cfg.indicators, &cfg.input.class_column)
}

fn check_ids(path: &Path, expected: &[String], got: &[String]) -> Result<(), Error> {
    if expected != got {
        return Err(Error::format(path, "unit ids do not match the unit table order"));
    }
    Ok(())
}

fn read_field(out: &Path, roster: &Roster) -> Result<ExternalField, Error> {
    let path = out.join(files::FIELD);
    let (ids, h) = io::read_unit_values(&path)?;
    check_ids(&path, roster.unit_ids(), &ids)?;
    Ok(ExternalField { unit_ids: ids, h })
}

fn read_graph(out: &Path, roster: &Roster) -> Result<InteractionGraph, Error> {
    io::read_edges(&out.join(files::EDGES), roster.len())
}

fn read_marginals(out: &Path, roster: &Roster) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let path = out.join(files::MARGINALS);
    let (ids, p, s) = io::read_marginals(&path)?;
    check_ids(&path, roster.unit_ids(), &ids)?;
    Ok((p, s))
}

fn stage_indices(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let roster = load_roster(cfg)?;
    let directions: BTreeMap<String, _> = cfg.groups.iter().map(|g| (g.name.clone(), g.direction)).collect();
    let composites = composite_indices(&roster.table, &directions)?;
    io::write_composite_indices(&out.join(files::COMPOSITES), &composites)?;
    let names: Vec<String> = composites.iter().map(|c| c.name.clone()).collect();
    let corr = crate::indices::correlation_matrix(&crate::indices::stack_indices(&composites), &names)?;
    io::write_labeled_matrix(&out.join(files::COMPOSITE_CORRELATION), &names, &corr)
}

#[derive(Serialize)]
struct PcaSummary {
    indices: Vec<String>,
    sdevs: Vec<f64>,
    lambdas: Vec<f64>,
    cumulative: Vec<f64>,
    components_used: usize,
    /// Row per index, column per component.
    loadings: Vec<Vec<f64>>,
}

fn stage_field(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let (ids, names, data) = io::read_unit_matrix(&out.join(files::COMPOSITES))?;
    let dec = pca(&data)?;
    let keep = cfg.field.components.unwrap_or(dec.lambdas.len()).min(dec.lambdas.len());
    let field = external_field_truncated(&dec, &ids, keep)?;
    io::write_unit_values(&out.join(files::FIELD), &field.unit_ids, &field.h)?;
    let cumulative = dec
        .lambdas
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l;
            Some(*acc)
        })
        .collect();
    let loadings = (0..dec.loadings.nrows()).map(|r| dec.loadings.row(r).iter().copied().collect()).collect();
    io::write_json(
        &out.join(files::PCA),
        &PcaSummary { indices: names, sdevs: dec.sdevs, lambdas: dec.lambdas, cumulative, components_used: keep, loadings },
    )
}

#[derive(Serialize)]
struct GraphSummary {
    nodes: usize,
    edges: usize,
    min_match: usize,
    components: usize,
    isolated: usize,
    max_degree: usize,
    degree_histogram: BTreeMap<usize, usize>,
    spectrum: Option<SpectrumSummary>,
    spectrum_skipped: bool,
}

fn stage_graph(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let roster = load_roster(cfg)?;
    let graph = build_graph(&roster.profiles, cfg.graph.min_match)?;
    io::write_edges(&out.join(files::EDGES), &graph)?;
    let hist = graph.degree_histogram();
    let spectrum = (graph.n() <= cfg.graph.spectrum_cap)
        .then(|| spectrum_summary(&graph, cfg.graph.spectrum_cap))
        .transpose()?;
    io::write_json(
        &out.join(files::GRAPH_SUMMARY),
        &GraphSummary {
            nodes: graph.n(),
            edges: graph.edge_count(),
            min_match: cfg.graph.min_match,
            components: graph.component_count(),
            isolated: hist.get(&0).copied().unwrap_or(0),
            max_degree: hist.keys().next_back().copied().unwrap_or(0),
            degree_histogram: hist,
            spectrum_skipped: spectrum.is_none(),
            spectrum,
        },
    )
}

#[derive(Serialize)]
struct SimulationSummary {
    mode: ReplicateMode,
    chains: usize,
    n_iter: u64,
    burn_in: u64,
    samples_per_chain: u64,
    replicates: usize,
    configurations_per_replicate: Option<u64>,
    h_initial: f64,
    h_final_chain0: Option<f64>,
    mean_p_hat: f64,
    zero_sigma_units: usize,
}

fn stage_simulate(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let roster = load_roster(cfg)?;
    let field = read_field(out, &roster)?;
    let graph = read_graph(out, &roster)?;
    let spec = cfg.chain_spec();
    let rep = &cfg.replicates;
    let (chains, est, trace): (usize, MarginalEstimate, _) = match rep.mode {
        ReplicateMode::Chains => {
            let (est, trace) = run_replicates_traced(&roster.reference, &graph, &field, &cfg.schedule, &spec, rep.k)?;
            (rep.k, est, trace)
        }
        ReplicateMode::Resample => {
            let (pilot, trace) =
                run_replicates_traced(&roster.reference, &graph, &field, &cfg.schedule, &spec, rep.pilot_chains)?;
            let est = binomial_replicates(
                &pilot.p_hat,
                roster.unit_ids().to_vec(),
                rep.k,
                rep.configurations,
                cfg.seed,
                cfg.chain.workers,
            )?;
            (rep.pilot_chains, est, trace)
        }
    };
    io::write_marginals(&out.join(files::MARGINALS), &est)?;
    io::write_trace(&out.join(files::TRACE), &trace)?;
    if rep.write_matrix {
        io::write_replicates(&out.join(files::REPLICATES), &est)?;
    }
    io::write_json(
        &out.join(files::SIMULATION),
        &SimulationSummary {
            mode: rep.mode,
            chains,
            n_iter: spec.n_iter,
            burn_in: spec.burn_in(),
            samples_per_chain: spec.n_iter - spec.burn_in(),
            replicates: rep.k,
            configurations_per_replicate: (rep.mode == ReplicateMode::Resample).then_some(rep.configurations),
            h_initial: crate::sampler::hamiltonian(&roster.reference, &graph, &field.h)?,
            h_final_chain0: trace.last().map(|p| p.energy),
            mean_p_hat: crate::stats::mean(&est.p_hat),
            zero_sigma_units: est.sigma.iter().filter(|&&s| s == 0.0).count(),
        },
    )
}

fn stage_diagnose(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let roster = load_roster(cfg)?;
    let field = read_field(out, &roster)?;
    let graph = read_graph(out, &roster)?;
    let (p_hat, _) = read_marginals(out, &roster)?;
    let report = diagnose(&roster.reference, &p_hat, &graph, &field.h, &cfg.diagnostics, cfg.seed, cfg.chain.workers)?;
    io::write_json(&out.join(files::DIAGNOSTICS), &report)
}

#[derive(Serialize)]
struct ReportView {
    n: usize,
    coverage: f64,
    miw: f64,
    riw: f64,
    riw_degenerate: bool,
    class_counts: BTreeMap<&'static str, usize>,
    class_shares: crate::conformal::ClassShares,
    uncovered_units: Vec<String>,
}

impl ReportView {
    fn new(r: &CoverageReport, ids: &[String]) -> Self {
        Self {
            n: r.n,
            coverage: r.coverage,
            miw: r.miw,
            riw: r.riw,
            riw_degenerate: r.riw_degenerate,
            class_counts: [("zero_width", r.class_counts[0]), ("intermediate", r.class_counts[1]), ("full", r.class_counts[2])]
                .into_iter()
                .collect(),
            class_shares: r.class_shares,
            uncovered_units: r.uncovered.iter().map(|&i| ids[i].clone()).collect(),
        }
    }
}

#[derive(Serialize)]
struct ConformalSummary {
    alpha: f64,
    /// Absent when the calibrated quantile is infinite.
    q_hat: Option<f64>,
    q_hat_infinite: bool,
    n_calibration: usize,
    n_test: usize,
    /// Held-out units only.
    test: ReportView,
    all_units: ReportView,
}

fn stage_conformal(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let roster = load_roster(cfg)?;
    let (p_hat, sigma) = read_marginals(out, &roster)?;
    let y = roster.reference.indicator();
    let res = conformalize(&y, &p_hat, &sigma, &cfg.conformal_config())?;
    let mut split = vec!["test"; y.len()];
    for &i in &res.calibration {
        split[i] = "calibration";
    }
    let rows: Vec<IntervalRow> = res
        .intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| IntervalRow {
            unit_id: roster.unit_ids()[i].clone(),
            y_true: y[i],
            covered: iv.covers(y[i]),
            interval: iv.clone(),
            split: split[i].to_string(),
        })
        .collect();
    io::write_intervals(&out.join(files::INTERVALS), &rows)?;
    let ids = roster.unit_ids();
    io::write_json(
        &out.join(files::CONFORMAL),
        &ConformalSummary {
            alpha: res.alpha,
            q_hat: res.q_hat.is_finite().then_some(res.q_hat),
            q_hat_infinite: res.q_hat.is_infinite(),
            n_calibration: res.calibration.len(),
            n_test: res.test.len(),
            test: ReportView::new(&res.test_report, ids),
            all_units: ReportView::new(&res.all_report, ids),
        },
    )
}

fn stage_map(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let intervals = io::read_intervals(&out.join(files::INTERVALS))?;
    let rows = map_rows(&intervals);
    write_map_csv(&out.join(files::MAP_DATA), &rows)?;
    if let Some(geo_path) = cfg.geometry_path() {
        let geometry = io::read_json(&geo_path)?;
        let map = join_geometry(&geometry, &rows, &cfg.input.geometry_id_property)?;
        io::write_json(&out.join(files::MAP_ANNOTATED), &map.annotated)?;
        io::write_json(&out.join(files::MAP_HIGHLIGHT), &map.highlight)?;
    }
    Ok(())
}

/// Runs one stage against the files already in the output directory.
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<(), Error> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match stage {
        Stage::Indices => stage_indices(cfg, &out),
        Stage::Field => stage_field(cfg, &out),
        Stage::Graph => stage_graph(cfg, &out),
        Stage::Simulate => stage_simulate(cfg, &out),
        Stage::Diagnose => stage_diagnose(cfg, &out),
        Stage::Conformal => stage_conformal(cfg, &out),
        Stage::Map => stage_map(cfg, &out),
    }
}

fn existing_outputs(out: &Path, stage: Stage) -> Vec<String> {
    stage.outputs().iter().filter(|f| out.join(f).exists()).map(|f| f.to_string()).collect()
}

/// Runs `stages` in order and writes `manifest.json`. On failure the failing
/// stage's outputs are removed, the manifest is marked incomplete and the
/// error is returned tagged with the stage name.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<Manifest, Error> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let start = Instant::now();
    let mut manifest = Manifest {
        status: "complete".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        workers: cfg.chain.workers,
        stages: Vec::new(),
        failed_stage: None,
        error: None,
        total_seconds: 0.0,
    };
    let mut failure = None;
    for &stage in stages {
        // stale outputs from an earlier run would otherwise survive a skipped optional file
        for f in existing_outputs(&out, stage) {
            let _ = std::fs::remove_file(out.join(f));
        }
        let t = Instant::now();
        match run_stage(stage, cfg) {
            Ok(()) => manifest.stages.push(StageRecord {
                stage: stage.as_str().into(),
                seconds: t.elapsed().as_secs_f64(),
                outputs: existing_outputs(&out, stage),
            }),
            Err(e) => {
                for f in existing_outputs(&out, stage) {
                    let _ = std::fs::remove_file(out.join(f));
                }
                manifest.status = "incomplete".into();
                manifest.failed_stage = Some(stage.as_str().into());
                manifest.error = Some(e.to_string());
                failure = Some(Error::Stage { stage: stage.as_str(), source: Box::new(e) });
                break;
            }
        }
    }
    manifest.total_seconds = start.elapsed().as_secs_f64();
    io::write_json(&out.join(files::MANIFEST), &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// All stages, or those up to and including `stop_after`.
pub fn run_pipeline(cfg: &RunConfig, stop_after: Option<Stage>) -> Result<Manifest, Error> {
    let stages: Vec<Stage> = Stage::ALL.into_iter().filter(|s| stop_after.is_none_or(|last| *s <= last)).collect();
    run_stages(cfg, &stages)
}

pub fn output_path(cfg: &RunConfig, file: &str) -> PathBuf {
    cfg.out_dir().join(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    fn small_config(dir: &Path) -> RunConfig {
        let data = generate(&SyntheticSpec { n_units: 80, seed: 2, ..Default::default() });
        let path = data.write_all(dir).unwrap();
        let mut cfg = RunConfig::load(&path).unwrap();
        cfg.chain.n_iter = 4_000;
        cfg.chain.trace_stride = 100;
        cfg.chain.workers = 2;
        cfg.replicates.k = 200;
        cfg.replicates.pilot_chains = 2;
        cfg.diagnostics.samples = 500;
        cfg.diagnostics.bootstrap_replications = 20;
        cfg.diagnostics.bootstrap_size = 100;
        cfg
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("nope".parse::<Stage>().is_err());
    }

    #[test]
    fn full_run_writes_every_output() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let m = run_pipeline(&cfg, None).unwrap();
        assert_eq!(m.status, "complete");
        assert_eq!(m.stages.len(), 7);
        for f in [files::MARGINALS, files::INTERVALS, files::MAP_HIGHLIGHT, files::DIAGNOSTICS, files::MANIFEST] {
            assert!(cfg.out_dir().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn stop_after_limits_stages() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let m = run_pipeline(&cfg, Some(Stage::Graph)).unwrap();
        assert_eq!(m.stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(), ["indices", "field", "graph"]);
        assert!(!cfg.out_dir().join(files::MARGINALS).exists());
    }

    #[test]
    fn missing_upstream_marks_manifest_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let err = run_stages(&cfg, &[Stage::Simulate]).unwrap_err();
        assert!(err.to_string().starts_with("stage simulate:"), "{err}");
        let manifest = io::read_json(&cfg.out_dir().join(files::MANIFEST)).unwrap();
        assert_eq!(manifest["status"], "incomplete");
        assert_eq!(manifest["failed_stage"], "simulate");
    }
}
