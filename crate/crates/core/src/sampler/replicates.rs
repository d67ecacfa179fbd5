use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{run_chain, AnnealingSchedule, ChainSpec, SamplerError, SpinConfiguration, TracePoint};
use crate::indices::ExternalField;
use crate::network::InteractionGraph;
use crate::seed;

/// Row-major `k x n` matrix of per-replicate marginal estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMatrix {
    pub k: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl ReplicateMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    fn from_rows(n: usize, rows: Vec<Vec<f64>>) -> Self {
        let k = rows.len();
        let mut data = Vec::with_capacity(k * n);
        for row in rows {
            debug_assert_eq!(row.len(), n);
            data.extend(row);
        }
        Self { k, n, data }
    }
}

/// Per-unit probability of the hub state, pooled over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub unit_ids: Vec<String>,
    pub p_hat: Vec<f64>,
    pub replicates: ReplicateMatrix,
    /// Population standard deviation across replicates.
    pub sigma: Vec<f64>,
}

impl MarginalEstimate {
    /// Reduces replicate rows, in replicate order, to pooled mean and spread.
    pub fn from_replicates(unit_ids: Vec<String>, replicates: ReplicateMatrix) -> Self {
        let (k, n) = (replicates.k, replicates.n);
        let mut p_hat = vec![0.0; n];
        let mut sigma = vec![0.0; n];
        for i in 0..n {
            let first = replicates.data[i];
            if (0..k).all(|r| replicates.data[r * n + i] == first) {
                p_hat[i] = first;
                continue;
            }
            let mut sum = 0.0;
            for r in 0..k {
                sum += replicates.data[r * n + i];
            }
            let mean = sum / k as f64;
            let mut ss = 0.0;
            for r in 0..k {
                let d = replicates.data[r * n + i] - mean;
                ss += d * d;
            }
            p_hat[i] = mean.clamp(0.0, 1.0);
            sigma[i] = (ss / k as f64).sqrt();
        }
        Self { unit_ids, p_hat, replicates, sigma }
    }

    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, SamplerError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SamplerError::WorkerPool(e.to_string()))
}

/// Seed of replicate `r` under `spec`.
pub(crate) fn replicate_seed(spec: &ChainSpec, r: usize) -> u64 {
    if spec.shared_seed {
        spec.seed
    } else {
        seed::derive(seed::derive(spec.seed, seed::stream::CHAINS), r as u64)
    }
}

/// Runs `k` independent chains on `spec.workers` threads and pools their
/// marginals. Results are ordered by replicate index, so the output does not
/// depend on the worker count.
pub fn run_replicates(
    initial: &SpinConfiguration,
    graph: &InteractionGraph,
    field: &ExternalField,
    schedule: &AnnealingSchedule,
    spec: &ChainSpec,
    k: usize,
) -> Result<MarginalEstimate, SamplerError> {
    run_replicates_traced(initial, graph, field, schedule, spec, k).map(|(m, _)| m)
}

/// [`run_replicates`] that also returns the energy trace of replicate 0.
pub fn run_replicates_traced(
    initial: &SpinConfiguration,
    graph: &InteractionGraph,
    field: &ExternalField,
    schedule: &AnnealingSchedule,
    spec: &ChainSpec,
    k: usize,
) -> Result<(MarginalEstimate, Vec<TracePoint>), SamplerError> {
    if k == 0 {
        return Err(SamplerError::NoReplicates);
    }
    spec.validate()?;
    let pool = worker_pool(spec.workers)?;
    let results: Vec<Result<(Vec<f64>, Vec<TracePoint>), SamplerError>> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|r| {
                let chain_spec = ChainSpec {
                    seed: replicate_seed(spec, r),
                    trace_stride: if r == 0 { spec.trace_stride } else { 0 },
                    ..spec.clone()
                };
                let out = run_chain(initial, graph, &field.h, schedule, &chain_spec)?;
                Ok((out.marginals(), out.energy_trace))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(k);
    let mut trace = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        let (row, t) = res?;
        if r == 0 {
            trace = t;
        }
        rows.push(row);
    }
    let matrix = ReplicateMatrix::from_rows(graph.n(), rows);
    Ok((MarginalEstimate::from_replicates(field.unit_ids.clone(), matrix), trace))
}

fn check_probabilities(p: &[f64]) -> Result<(), SamplerError> {
    match p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        Some((unit, &value)) => Err(SamplerError::InvalidProbability { unit, value }),
        None => Ok(()),
    }
}

/// Draws `n` configurations with independent `Bernoulli(p_i)` spins.
pub fn sample_configurations(p_hat: &[f64], n: usize, seed: u64) -> Result<Vec<SpinConfiguration>, SamplerError> {
    check_probabilities(p_hat)?;
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| SpinConfiguration(p_hat.iter().map(|&p| if rng.random::<f64>() < p { 1 } else { -1 }).collect()))
        .collect())
}

/// `k` replicate estimates, each the `+1` frequency over `configurations`
/// Bernoulli configurations drawn from `p_pooled`. The per-unit count of a
/// replicate is drawn directly as `Binomial(configurations, p)`, which has
/// the same law as counting explicit configurations.
pub fn binomial_replicates(
    p_pooled: &[f64],
    unit_ids: Vec<String>,
    k: usize,
    configurations: u64,
    seed: u64,
    workers: usize,
) -> Result<MarginalEstimate, SamplerError> {
    if k == 0 || configurations == 0 {
        return Err(SamplerError::NoReplicates);
    }
    check_probabilities(p_pooled)?;
    if unit_ids.len() != p_pooled.len() {
        return Err(SamplerError::DimensionMismatch { expected: p_pooled.len(), got: unit_ids.len() });
    }
    let dists: Vec<Binomial> = p_pooled
        .iter()
        .map(|&p| Binomial::new(configurations, p).expect("probability checked"))
        .collect();
    let pool = worker_pool(workers)?;
    let base = seed::derive(seed, seed::stream::RESAMPLE);
    let rows: Vec<Vec<f64>> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed::rng(seed::derive(base, r as u64));
                dists.iter().map(|d| d.sample(&mut rng) as f64 / configurations as f64).collect()
            })
            .collect()
    });
    let matrix = ReplicateMatrix::from_rows(p_pooled.len(), rows);
    Ok(MarginalEstimate::from_replicates(unit_ids, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_probabilities_give_fixed_spins() {
        let configs = sample_configurations(&[1.0, 0.0], 200, 4).unwrap();
        assert!(configs.iter().all(|c| c.spins() == [1, -1]));
    }

    #[test]
    fn half_probability_concentrates() {
        let configs = sample_configurations(&[0.5], 10_000, 11).unwrap();
        let freq = configs.iter().filter(|c| c.spins()[0] == 1).count() as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert_eq!(
            sample_configurations(&[0.2, 1.5], 1, 0),
            Err(SamplerError::InvalidProbability { unit: 1, value: 1.5 })
        );
    }

    #[test]
    fn agreeing_replicates_have_zero_spread() {
        let m = ReplicateMatrix { k: 3, n: 2, data: vec![0.1, 0.5, 0.1, 0.7, 0.1, 0.6] };
        let est = MarginalEstimate::from_replicates(vec!["a".into(), "b".into()], m);
        assert_eq!(est.p_hat[0], 0.1);
        assert_eq!(est.sigma[0], 0.0);
        assert!((est.p_hat[1] - 0.6).abs() < 1e-12);
        assert!((est.sigma[1] - (0.02f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn binomial_replicates_match_explicit_sampling_moments() {
        let p = [0.0, 0.3, 1.0];
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let est = binomial_replicates(&p, ids, 4000, 50, 5, 2).unwrap();
        assert_eq!((est.p_hat[0], est.sigma[0]), (0.0, 0.0));
        assert_eq!((est.p_hat[2], est.sigma[2]), (1.0, 0.0));
        // explicit configurations for the middle unit
        let mut freqs = Vec::new();
        for r in 0..4000u64 {
            let cs = sample_configurations(&[0.3], 50, 1000 + r).unwrap();
            freqs.push(cs.iter().filter(|c| c.spins()[0] == 1).count() as f64 / 50.0);
        }
        let m = crate::stats::mean(&freqs);
        let s = crate::stats::population_std(&freqs);
        assert!((est.p_hat[1] - m).abs() < 0.01);
        assert!((est.sigma[1] - s).abs() < 0.005);
        assert!((s - (0.3f64 * 0.7 / 50.0).sqrt()).abs() < 0.005);
    }

    #[test]
    fn worker_count_does_not_change_resampling() {
        let p = [0.2, 0.9, 0.5];
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let a = binomial_replicates(&p, ids.clone(), 50, 30, 77, 1).unwrap();
        let b = binomial_replicates(&p, ids, 50, 30, 77, 4).unwrap();
        assert_eq!(a, b);
    }
}
