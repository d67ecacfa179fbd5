use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_dims, hamiltonian, temperature_at, AnnealingSchedule, SamplerError, SpinConfiguration};
use crate::network::InteractionGraph;
use crate::seed::{self, Rng};

/// Length and bookkeeping of one Metropolis chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_iter: u64,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub workers: usize,
    /// Energy is recorded every `trace_stride` iterations; 0 disables the trace.
    #[serde(default)]
    pub trace_stride: u64,
    /// Every replicate reuses `seed` unchanged instead of a derived stream.
    #[serde(default)]
    pub shared_seed: bool,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self { n_iter: 600_000, burn_in_fraction: 0.10, seed: 0, workers: 1, trace_stride: 600, shared_seed: false }
    }
}

impl ChainSpec {
    pub fn burn_in(&self) -> u64 {
        (self.burn_in_fraction * self.n_iter as f64).floor() as u64
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_iter == 0 {
            return Err(SamplerError::InvalidChainSpec("n_iter must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) || self.burn_in() >= self.n_iter {
            return Err(SamplerError::InvalidChainSpec(format!(
                "burn-in fraction {} leaves no samples",
                self.burn_in_fraction
            )));
        }
        if self.workers == 0 {
            return Err(SamplerError::InvalidChainSpec("workers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    /// Post-burn-in iterations at which each unit was `+1`.
    pub counts: Vec<u64>,
    pub samples_used: u64,
    pub energy_trace: Vec<TracePoint>,
    pub final_configuration: SpinConfiguration,
    /// Energy tracked incrementally from accepted moves.
    pub final_energy: f64,
    pub accepted: u64,
    /// Sum of the energy changes of all accepted moves.
    pub accepted_delta_sum: f64,
}

impl ChainOutcome {
    pub fn marginals(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.samples_used as f64).collect()
    }
}

/// Single-site Metropolis dynamics with a cached local field per unit, so a
/// rejected proposal costs O(1) and an accepted one O(degree).
pub struct MetropolisChain<'a> {
    graph: &'a InteractionGraph,
    field: &'a [f64],
    spins: Vec<i8>,
    local: Vec<f64>,
    energy: f64,
    rng: Rng,
}

impl<'a> MetropolisChain<'a> {
    pub fn new(
        initial: &SpinConfiguration,
        graph: &'a InteractionGraph,
        field: &'a [f64],
        seed: u64,
    ) -> Result<Self, SamplerError> {
        check_dims(initial, graph, field)?;
        let spins = initial.spins().to_vec();
        let local = (0..graph.n())
            .map(|i| graph.neighbors(i).map(|(j, w)| w * f64::from(spins[j])).sum())
            .collect();
        let energy = hamiltonian(initial, graph, field)?;
        Ok(Self { graph, field, spins, local, energy, rng: seed::rng(seed) })
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn configuration(&self) -> SpinConfiguration {
        SpinConfiguration(self.spins.clone())
    }

    /// Proposes flipping one uniformly chosen unit at `temperature`.
    /// Returns the unit and energy change when the flip is accepted.
    #[inline]
    pub fn step(&mut self, temperature: f64) -> Option<(usize, f64)> {
        let n = self.spins.len();
        if n == 0 {
            return None;
        }
        let i = self.rng.random_range(0..n);
        let s = f64::from(self.spins[i]);
        let delta = 2.0 * s * (self.local[i] + self.field[i]);
        let accept = delta <= 0.0 || self.rng.random::<f64>() < (-delta / temperature).exp();
        if !accept {
            return None;
        }
        self.spins[i] = -self.spins[i];
        let change = 2.0 * f64::from(self.spins[i]);
        for (j, w) in self.graph.neighbors(i) {
            self.local[j] += w * change;
        }
        self.energy += delta;
        Some((i, delta))
    }
}

/// Runs `spec.n_iter` annealed Metropolis steps from `initial` and tallies,
/// for every unit, how many post-burn-in configurations had it at `+1`.
///
/// Counting is lazy: a unit's tally is brought up to date only when it
/// flips, which is equivalent to adding the whole configuration after
/// every step.
pub fn run_chain(
    initial: &SpinConfiguration,
    graph: &InteractionGraph,
    field: &[f64],
    schedule: &AnnealingSchedule,
    spec: &ChainSpec,
) -> Result<ChainOutcome, SamplerError> {
    spec.validate()?;
    let mut chain = MetropolisChain::new(initial, graph, field, spec.seed)?;
    let n = graph.n();
    let burn_in = spec.burn_in();
    let mut counts = vec![0u64; n];
    // last iteration already accounted for in `counts`
    let mut marked = vec![burn_in; n];
    let mut trace = Vec::new();
    if spec.trace_stride > 0 {
        trace.push(TracePoint { iteration: 0, energy: chain.energy() });
    }
    let mut accepted = 0u64;
    let mut accepted_delta_sum = 0.0;

    for t in 1..=spec.n_iter {
        let temperature = temperature_at(schedule, t)?;
        if let Some((i, delta)) = chain.step(temperature) {
            accepted += 1;
            accepted_delta_sum += delta;
            if t > burn_in {
                // chain.spins()[i] is the new value, so the old one was +1 iff it is now -1
                if chain.spins()[i] < 0 {
                    counts[i] += (t - 1) - marked[i];
                }
                marked[i] = t - 1;
            }
        }
        if spec.trace_stride > 0 && (t % spec.trace_stride == 0 || t == spec.n_iter) {
            trace.push(TracePoint { iteration: t, energy: chain.energy() });
        }
    }
    for i in 0..n {
        if chain.spins()[i] > 0 {
            counts[i] += spec.n_iter - marked[i];
        }
    }

    Ok(ChainOutcome {
        counts,
        samples_used: spec.n_iter - burn_in,
        energy_trace: trace,
        final_energy: chain.energy(),
        final_configuration: chain.configuration(),
        accepted,
        accepted_delta_sum,
    })
}
