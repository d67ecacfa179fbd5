//! Coherence between simulated and observed configurations.
//!
//! Configurations are compared through energy differences only; the
//! Boltzmann normalizer never appears, because `log P(s)/P(s_ref)` reduces
//! to `-(H - H_ref)/T`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::InteractionGraph;
use crate::sampler::{self, hamiltonian, SamplerError, SpinConfiguration};
use crate::seed;
use crate::stats::{self, Summary};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference configuration has zero energy, ratios are undefined")]
    ZeroReferenceEnergy,
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("probability {value} at position {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bootstrap needs a nonempty sample")]
    EmptyInput,
    #[error("invalid bootstrap parameters: {0}")]
    InvalidBootstrap(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigurationScore {
    pub energy: f64,
    /// `H / H_ref`
    pub energy_ratio: f64,
    /// `-(H - H_ref) / T`
    pub loglik_ratio: f64,
}

pub fn configuration_energies(
    configs: &[SpinConfiguration],
    graph: &InteractionGraph,
    field: &[f64],
) -> Result<Vec<f64>, DiagnosticsError> {
    Ok(configs.iter().map(|c| hamiltonian(c, graph, field)).collect::<Result<_, _>>()?)
}

pub fn score_configurations(
    configs: &[SpinConfiguration],
    reference: &SpinConfiguration,
    graph: &InteractionGraph,
    field: &[f64],
    temperature: f64,
) -> Result<Vec<ConfigurationScore>, DiagnosticsError> {
    if !(temperature > 0.0) {
        return Err(DiagnosticsError::NonPositiveTemperature(temperature));
    }
    let h_ref = hamiltonian(reference, graph, field)?;
    if h_ref == 0.0 {
        return Err(DiagnosticsError::ZeroReferenceEnergy);
    }
    Ok(configuration_energies(configs, graph, field)?
        .into_iter()
        .map(|energy| ConfigurationScore {
            energy,
            energy_ratio: energy / h_ref,
            loglik_ratio: -(energy - h_ref) / temperature,
        })
        .collect())
}

fn check_unit_interval(p: &[f64]) -> Result<(), DiagnosticsError> {
    match p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        Some((index, &value)) => Err(DiagnosticsError::OutOfRange { index, value }),
        None => Ok(()),
    }
}

fn xlog2(x: f64, m: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * (x / m).log2() }
}

/// Mean over units of the base-2 Jensen-Shannon divergence between
/// `Bernoulli(p_i)` and `Bernoulli(q_i)`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Result<f64, DiagnosticsError> {
    if p.len() != q.len() {
        return Err(DiagnosticsError::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    check_unit_interval(p)?;
    check_unit_interval(q)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m1 = 0.5 * (a + b);
            let m0 = 1.0 - m1;
            let kl_a = xlog2(a, m1) + xlog2(1.0 - a, m0);
            let kl_b = xlog2(b, m1) + xlog2(1.0 - b, m0);
            (0.5 * (kl_a + kl_b)).max(0.0)
        })
        .sum();
    Ok(total / p.len() as f64)
}

/// Cross-tabulation of reference against predicted spins; index 0 is `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchMatrix {
    /// `counts[reference][predicted]`
    pub counts: [[u64; 2]; 2],
    pub accuracy: f64,
}

impl MismatchMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        let total: u64 = counts.iter().flatten().sum();
        let agree = counts[0][0] + counts[1][1];
        let accuracy = if total == 0 { f64::NAN } else { agree as f64 / total as f64 };
        Self { counts, accuracy }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn mismatch(reference: &SpinConfiguration, predicted: &SpinConfiguration) -> Result<MismatchMatrix, DiagnosticsError> {
    if reference.len() != predicted.len() {
        return Err(DiagnosticsError::DimensionMismatch { expected: reference.len(), got: predicted.len() });
    }
    let mut counts = [[0u64; 2]; 2];
    for (&r, &p) in reference.spins().iter().zip(predicted.spins()) {
        counts[usize::from(r > 0)][usize::from(p > 0)] += 1;
    }
    Ok(MismatchMatrix::from_counts(counts))
}

/// Thresholds `p_hat` at one half; exact ties go to `+1` and are counted.
pub fn predicted_configuration(p_hat: &[f64]) -> (SpinConfiguration, usize) {
    let ties = p_hat.iter().filter(|&&p| p == 0.5).count();
    let spins = p_hat.iter().map(|&p| if p >= 0.5 { 1 } else { -1 }).collect();
    (SpinConfiguration::new(spins).expect("spins are ±1"), ties)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapInterval {
    /// Mean of the resample means.
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentile bootstrap of the mean: `r` resamples of size `m` drawn with
/// replacement, interval from the `alpha/2` and `1 - alpha/2` quantiles of
/// the resample means.
pub fn bootstrap_ci(values: &[f64], r: usize, m: usize, alpha: f64, seed: u64) -> Result<BootstrapInterval, DiagnosticsError> {
    bootstrap_ci_with_workers(values, r, m, alpha, seed, 1)
}

/// [`bootstrap_ci`] with resamples spread over `workers` threads. Each
/// resample has its own derived seed, so the result is worker-independent.
pub fn bootstrap_ci_with_workers(
    values: &[f64],
    r: usize,
    m: usize,
    alpha: f64,
    seed: u64,
    workers: usize,
) -> Result<BootstrapInterval, DiagnosticsError> {
    use rand::Rng as _;
    if values.is_empty() {
        return Err(DiagnosticsError::EmptyInput);
    }
    if r == 0 || m == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(DiagnosticsError::InvalidBootstrap(format!("r={r}, m={m}, alpha={alpha}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DiagnosticsError::InvalidBootstrap(e.to_string()))?;
    let base = seed::derive(seed, seed::stream::BOOTSTRAP);
    let mut means: Vec<f64> = pool.install(|| {
        (0..r)
            .into_par_iter()
            .map(|b| {
                let mut rng = seed::rng(seed::derive(base, b as u64));
                let sum: f64 = (0..m).map(|_| values[rng.random_range(0..values.len())]).sum();
                sum / m as f64
            })
            .collect()
    });
    let mean = stats::mean(&means);
    means.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        mean,
        lower: stats::quantile_sorted(&means, alpha / 2.0),
        upper: stats::quantile_sorted(&means, 1.0 - alpha / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Configurations drawn from the estimated marginals.
    pub samples: usize,
    /// Temperature dividing the energy difference in the log-likelihood ratio.
    pub temperature: f64,
    pub bootstrap_replications: usize,
    pub bootstrap_size: usize,
    /// Miscoverage of the bootstrap intervals.
    pub bootstrap_alpha: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { samples: 25_000, temperature: 1.0, bootstrap_replications: 200, bootstrap_size: 1000, bootstrap_alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapEntry {
    pub quantity: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// `ln(H_ref - H)` over the configurations with `H < H_ref`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEnergyDrop {
    pub summary: Option<Summary>,
    pub undefined_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchReport {
    /// Rows are the reference class (-1, +1), columns the predicted class.
    pub counts: [[u64; 2]; 2],
    pub accuracy: f64,
    pub ties_at_half: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub h_ref: f64,
    pub temperature: f64,
    pub configurations: usize,
    pub energy: Option<Summary>,
    /// Absent when the reference energy is zero.
    pub energy_ratio: Option<Summary>,
    pub loglik_ratio: Option<Summary>,
    /// Auxiliary statistic, not the log-likelihood ratio.
    pub log_energy_drop: LogEnergyDrop,
    pub jensen_shannon: f64,
    pub mismatch: MismatchReport,
    pub bootstrap: Vec<BootstrapEntry>,
}

/// Samples configurations from `p_hat`, scores them against the reference
/// and assembles every coherence statistic.
pub fn diagnose(
    reference: &SpinConfiguration,
    p_hat: &[f64],
    graph: &InteractionGraph,
    field: &[f64],
    config: &DiagnosticsConfig,
    seed_value: u64,
    workers: usize,
) -> Result<DiagnosticsReport, DiagnosticsError> {
    if !(config.temperature > 0.0) {
        return Err(DiagnosticsError::NonPositiveTemperature(config.temperature));
    }
    let configs = sampler::sample_configurations(
        p_hat,
        config.samples,
        seed::derive(seed_value, seed::stream::DIAGNOSTIC_SAMPLES),
    )?;
    let h_ref = hamiltonian(reference, graph, field)?;
    let energies = configuration_energies(&configs, graph, field)?;
    let loglik: Vec<f64> = energies.iter().map(|h| -(h - h_ref) / config.temperature).collect();
    let ratios: Option<Vec<f64>> = (h_ref != 0.0).then(|| energies.iter().map(|h| h / h_ref).collect());
    let drops: Vec<f64> = energies.iter().filter(|&&h| h < h_ref).map(|h| (h_ref - h).ln()).collect();

    let (predicted, ties) = predicted_configuration(p_hat);
    let mm = mismatch(reference, &predicted)?;
    let jsd = jensen_shannon(&reference.indicator(), p_hat)?;

    let mut bootstrap = Vec::new();
    if !energies.is_empty() {
        let mut quantities: Vec<(&str, &[f64])> = vec![("loglik_ratio", &loglik), ("energy", &energies)];
        if let Some(r) = &ratios {
            quantities.push(("energy_ratio", r));
        }
        for (q, (name, vals)) in quantities.into_iter().enumerate() {
            let ci = bootstrap_ci_with_workers(
                vals,
                config.bootstrap_replications,
                config.bootstrap_size,
                config.bootstrap_alpha,
                seed::derive(seed_value, q as u64),
                workers,
            )?;
            bootstrap.push(BootstrapEntry {
                quantity: name.to_string(),
                mean: ci.mean,
                lower: ci.lower,
                upper: ci.upper,
                level: 1.0 - config.bootstrap_alpha,
            });
        }
    }

    Ok(DiagnosticsReport {
        h_ref,
        temperature: config.temperature,
        configurations: configs.len(),
        energy: Summary::of(&energies),
        energy_ratio: ratios.as_deref().and_then(Summary::of),
        loglik_ratio: Summary::of(&loglik),
        log_energy_drop: LogEnergyDrop { summary: Summary::of(&drops), undefined_count: energies.len() - drops.len() },
        jensen_shannon: jsd,
        mismatch: MismatchReport { counts: mm.counts, accuracy: mm.accuracy, ties_at_half: ties },
        bootstrap,
    })
}
