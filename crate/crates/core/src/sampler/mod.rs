//! Ising energy, Metropolis acceptance and annealing schedules, plus the
//! chain runner and replicate machinery built on them.
//!
//! Spin `+1` is a central hub and `-1` a peripheral area throughout the
//! crate.

mod chain;
mod replicates;

pub use chain::{run_chain, ChainOutcome, ChainSpec, MetropolisChain, TracePoint};
pub use replicates::{
    binomial_replicates, run_replicates, run_replicates_traced, sample_configurations, MarginalEstimate,
    ReplicateMatrix,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{InteractionGraph, NetworkError};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("spin values must be -1 or +1, found {value} at unit {unit}")]
    InvalidSpin { unit: usize, value: i64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("schedules are defined from iteration 1, got {0}")]
    InvalidIteration(u64),
    #[error("invalid chain specification: {0}")]
    InvalidChainSpec(String),
    #[error("probability {value} at unit {unit} is outside [0, 1]")]
    InvalidProbability { unit: usize, value: f64 },
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("could not start worker pool: {0}")]
    WorkerPool(String),
}

impl From<NetworkError> for SamplerError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::IndexOutOfRange { index, n } => SamplerError::IndexOutOfRange { index, n },
            NetworkError::DimensionMismatch { expected, got } => SamplerError::DimensionMismatch { expected, got },
            other => SamplerError::InvalidChainSpec(other.to_string()),
        }
    }
}

/// State of the spin system: one `±1` entry per unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self, SamplerError> {
        if let Some((unit, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(SamplerError::InvalidSpin { unit, value: value.into() });
        }
        Ok(Self(spins))
    }

    pub fn uniform(n: usize, spin: i8) -> Self {
        assert!(spin == 1 || spin == -1);
        Self(vec![spin; n])
    }

    /// Spins from the bits of `mask`: bit `i` set means unit `i` is `+1`.
    pub fn from_bits(n: usize, mask: u64) -> Self {
        Self((0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    /// `{-1, +1}` mapped to `{0, 1}`.
    pub fn indicator(&self) -> Vec<f64> {
        self.0.iter().map(|&s| if s > 0 { 1.0 } else { 0.0 }).collect()
    }
}

fn check_dims(config: &SpinConfiguration, graph: &InteractionGraph, field: &[f64]) -> Result<(), SamplerError> {
    if config.len() != graph.n() {
        return Err(SamplerError::DimensionMismatch { expected: graph.n(), got: config.len() });
    }
    if field.len() != graph.n() {
        return Err(SamplerError::DimensionMismatch { expected: graph.n(), got: field.len() });
    }
    Ok(())
}

/// `H(s) = -½ Σ_ij J_ij s_i s_j - Σ_i h_i s_i`. The ordered double sum counts
/// each stored edge twice, so the pair term reduces to `-Σ_edges w s_i s_j`.
pub fn hamiltonian(config: &SpinConfiguration, graph: &InteractionGraph, field: &[f64]) -> Result<f64, SamplerError> {
    check_dims(config, graph, field)?;
    let s = config.spins();
    let pair: f64 = graph.edges().iter().map(|e| e.weight * f64::from(s[e.i] * s[e.j])).sum();
    let external: f64 = field.iter().zip(s).map(|(h, &si)| h * f64::from(si)).sum();
    Ok(-pair - external)
}

/// Exact energy change from flipping spin `i`: `2 s_i (Σ_j J_ij s_j + h_i)`.
pub fn delta_energy(
    config: &SpinConfiguration,
    i: usize,
    graph: &InteractionGraph,
    field: &[f64],
) -> Result<f64, SamplerError> {
    check_dims(config, graph, field)?;
    let local = crate::network::neighbor_sum(graph, config, i)?;
    Ok(2.0 * f64::from(config.spins()[i]) * (local + field[i]))
}

/// Metropolis rule `min{1, exp(-ΔH / T)}`.
pub fn acceptance_probability(delta_h: f64, temperature: f64) -> Result<f64, SamplerError> {
    if !(temperature > 0.0) {
        return Err(SamplerError::NonPositiveTemperature(temperature));
    }
    Ok(if delta_h <= 0.0 { 1.0 } else { (-delta_h / temperature).exp() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `T0 / t`
    #[default]
    Hyperbolic,
    /// `T0 / ln(t + 1)`
    Logarithmic,
    /// `T0` at every step.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub kind: ScheduleKind,
    pub t0: f64,
}

impl AnnealingSchedule {
    pub fn new(kind: ScheduleKind, t0: f64) -> Result<Self, SamplerError> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(SamplerError::NonPositiveTemperature(t0));
        }
        Ok(Self { kind, t0 })
    }

    pub fn hyperbolic(t0: f64) -> Self {
        Self::new(ScheduleKind::Hyperbolic, t0).expect("positive initial temperature")
    }

    pub fn fixed(t: f64) -> Self {
        Self::new(ScheduleKind::Fixed, t).expect("positive temperature")
    }
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self::hyperbolic(100.0)
    }
}

/// Temperature at iteration `t`; the clock starts at 1.
pub fn temperature_at(schedule: &AnnealingSchedule, t: u64) -> Result<f64, SamplerError> {
    if t == 0 {
        return Err(SamplerError::InvalidIteration(0));
    }
    Ok(match schedule.kind {
        ScheduleKind::Hyperbolic => schedule.t0 / t as f64,
        ScheduleKind::Logarithmic => schedule.t0 / ((t + 1) as f64).ln(),
        ScheduleKind::Fixed => schedule.t0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn pair() -> InteractionGraph {
        InteractionGraph::from_edges(2, [Edge { i: 0, j: 1, weight: 1.0 }]).unwrap()
    }

    fn cfg(s: &[i8]) -> SpinConfiguration {
        SpinConfiguration::new(s.to_vec()).unwrap()
    }

    #[test]
    fn spin_domain() {
        assert_eq!(SpinConfiguration::new(vec![1, 0]), Err(SamplerError::InvalidSpin { unit: 1, value: 0 }));
        assert_eq!(SpinConfiguration::from_bits(3, 0b101).spins(), &[1, -1, 1]);
    }

    #[test]
    fn hamiltonian_hand_values() {
        let empty = InteractionGraph::empty(3);
        assert_eq!(hamiltonian(&cfg(&[1, -1, 1]), &empty, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(hamiltonian(&cfg(&[1, 1]), &pair(), &[0.0; 2]).unwrap(), -1.0);
        assert_eq!(hamiltonian(&cfg(&[1, -1]), &pair(), &[0.0; 2]).unwrap(), 1.0);
        assert_eq!(hamiltonian(&cfg(&[1]), &InteractionGraph::empty(1), &[2.0]).unwrap(), -2.0);
        assert!(matches!(
            hamiltonian(&cfg(&[1]), &pair(), &[0.0; 2]),
            Err(SamplerError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn delta_energy_hand_values() {
        let iso = InteractionGraph::empty(1);
        assert_eq!(delta_energy(&cfg(&[1]), 0, &iso, &[0.0]).unwrap(), 0.0);
        let s = cfg(&[1, 1]);
        let d = delta_energy(&s, 0, &pair(), &[0.0; 2]).unwrap();
        let mut flipped = s.clone();
        flipped.flip(0);
        let oracle = hamiltonian(&flipped, &pair(), &[0.0; 2]).unwrap() - hamiltonian(&s, &pair(), &[0.0; 2]).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(d, oracle);
        assert_eq!(
            delta_energy(&s, 2, &pair(), &[0.0; 2]),
            Err(SamplerError::IndexOutOfRange { index: 2, n: 2 })
        );
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(-3.0, 1.0).unwrap(), 1.0);
        assert_eq!(acceptance_probability(0.0, 1.0).unwrap(), 1.0);
        assert!((acceptance_probability(2.5, 2.5).unwrap() - 0.36787944117144233).abs() < 1e-15);
        assert!(acceptance_probability(2.0, 1e-6).unwrap() < 1e-300);
        assert_eq!(acceptance_probability(2.0, 1e-300).unwrap(), 0.0);
        assert_eq!(acceptance_probability(1.0, 0.0), Err(SamplerError::NonPositiveTemperature(0.0)));
    }

    #[test]
    fn schedules() {
        let hyp = AnnealingSchedule::hyperbolic(100.0);
        assert_eq!(temperature_at(&hyp, 1).unwrap(), 100.0);
        assert_eq!(temperature_at(&hyp, 100).unwrap(), 1.0);
        assert_eq!(temperature_at(&hyp, 0), Err(SamplerError::InvalidIteration(0)));
        let fixed = AnnealingSchedule::fixed(1.0);
        assert_eq!(temperature_at(&fixed, 12345).unwrap(), 1.0);
        let log = AnnealingSchedule::new(ScheduleKind::Logarithmic, 2.0).unwrap();
        assert!((temperature_at(&log, 1).unwrap() - 2.0 / 2f64.ln()).abs() < 1e-15);
        assert!(AnnealingSchedule::new(ScheduleKind::Fixed, 0.0).is_err());
    }
}
