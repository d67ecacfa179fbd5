//! Composite indices and the external field.
//!
//! Base indicators are standardized onto a base-100 scale, aggregated per
//! thematic group with the Mazziotta-Pareto penalty for unbalanced profiles,
//! and the resulting composite indices are folded into one scalar per unit by
//! a variance-weighted sum of principal component scores.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum IndicesError {
    #[error("indicator `{0}` is constant across units")]
    ConstantIndicator(String),
    #[error("unit {0} has a zero mean standardized profile")]
    ZeroMean(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("polarity must be -1 or +1, got {0}")]
    InvalidPolarity(i64),
    #[error("non-finite value at unit {unit}, column {column}")]
    NonFinite { unit: usize, column: usize },
}

/// Orientation of a base indicator with respect to the measured phenomenon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

impl TryFrom<i64> for Polarity {
    type Error = IndicesError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(IndicesError::InvalidPolarity(other)),
        }
    }
}

impl From<Polarity> for i64 {
    fn from(p: Polarity) -> i64 {
        match p {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }
}

/// Whether a composite index measures a positive phenomenon (well-being,
/// where imbalance is penalized downward) or a negative one (deprivation,
/// where imbalance pushes the score up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub name: String,
    pub polarity: Polarity,
    pub group: String,
}

/// Per-unit base indicators, rows in roster order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTable {
    unit_ids: Vec<String>,
    values: DMatrix<f64>,
    specs: Vec<IndicatorSpec>,
}

impl IndicatorTable {
    pub fn new(
        unit_ids: Vec<String>,
        values: DMatrix<f64>,
        specs: Vec<IndicatorSpec>,
    ) -> Result<Self, IndicesError> {
        if values.nrows() != unit_ids.len() || values.ncols() != specs.len() {
            return Err(IndicesError::Shape(format!(
                "{}x{} values for {} units and {} indicators",
                values.nrows(),
                values.ncols(),
                unit_ids.len(),
                specs.len()
            )));
        }
        if unit_ids.len() < 2 || specs.is_empty() {
            return Err(IndicesError::DegenerateInput(
                "need at least two units and one indicator".into(),
            ));
        }
        check_finite(&values)?;
        Ok(Self { unit_ids, values, specs })
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn specs(&self) -> &[IndicatorSpec] {
        &self.specs
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    /// Group labels in order of first appearance among the indicator specs.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.specs {
            if !out.contains(&s.group) {
                out.push(s.group.clone());
            }
        }
        out
    }

    pub fn correlation(&self) -> Result<DMatrix<f64>, IndicesError> {
        let names: Vec<String> = self.specs.iter().map(|s| s.name.clone()).collect();
        correlation_matrix(&self.values, &names)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), IndicesError> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(IndicesError::NonFinite { unit: r, column: c });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeIndexVector {
    pub name: String,
    pub unit_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    /// Unit scores, one column per component.
    pub components: DMatrix<f64>,
    /// Explained-variance shares, summing to one.
    pub lambdas: Vec<f64>,
    /// Standard deviations of the component scores, non-increasing.
    pub sdevs: Vec<f64>,
    /// Eigenvectors of the correlation matrix, one column per component.
    pub loadings: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalField {
    pub unit_ids: Vec<String>,
    pub h: Vec<f64>,
}

impl ExternalField {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// A field with generated ids, handy for synthetic systems.
    pub fn from_values(h: Vec<f64>) -> Self {
        let unit_ids = (0..h.len()).map(|i| i.to_string()).collect();
        Self { unit_ids, h }
    }
}

/// Maps every indicator onto the base-100 scale, `10 * pol * z + 100`, with
/// z the population z-score of its column.
pub fn standardize(table: &IndicatorTable) -> Result<DMatrix<f64>, IndicesError> {
    let values = table.values();
    let mut out = DMatrix::zeros(values.nrows(), values.ncols());
    for (j, spec) in table.specs().iter().enumerate() {
        let col: Vec<f64> = values.column(j).iter().copied().collect();
        let mu = stats::mean(&col);
        let sigma = stats::population_std(&col);
        if sigma == 0.0 || !sigma.is_finite() {
            return Err(IndicesError::ConstantIndicator(spec.name.clone()));
        }
        let sign = spec.polarity.sign();
        for (i, x) in col.iter().enumerate() {
            out[(i, j)] = 10.0 * sign * ((x - mu) / sigma) + 100.0;
        }
    }
    Ok(out)
}

/// Mazziotta-Pareto aggregation of each row: `M ∓ S * S / M` with M and S the
/// row mean and population standard deviation.
pub fn mpi(standardized: &DMatrix<f64>, direction: Direction) -> Result<Vec<f64>, IndicesError> {
    if standardized.ncols() == 0 {
        return Err(IndicesError::DegenerateInput("no indicator columns".into()));
    }
    let mut scores = Vec::with_capacity(standardized.nrows());
    for (i, row) in standardized.row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        let m = stats::mean(&row);
        let s = stats::population_std(&row);
        if m == 0.0 {
            return Err(IndicesError::ZeroMean(i));
        }
        let penalty = s * (s / m);
        scores.push(match direction {
            Direction::Positive => m - penalty,
            Direction::Negative => m + penalty,
        });
    }
    Ok(scores)
}

/// Standardizes the whole table and computes one composite index per group.
pub fn composite_indices(
    table: &IndicatorTable,
    directions: &BTreeMap<String, Direction>,
) -> Result<Vec<CompositeIndexVector>, IndicesError> {
    let standardized = standardize(table)?;
    let mut out = Vec::new();
    for group in table.groups() {
        let cols: Vec<usize> = table
            .specs()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.group == group)
            .map(|(j, _)| j)
            .collect();
        let sub = standardized.select_columns(cols.iter());
        let direction = directions.get(&group).copied().unwrap_or_default();
        out.push(CompositeIndexVector {
            name: group.clone(),
            unit_ids: table.unit_ids().to_vec(),
            scores: mpi(&sub, direction)?,
            direction,
        });
    }
    Ok(out)
}

/// Column-wise population z-scores. Errors on constant columns.
fn column_zscores(data: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>, IndicesError> {
    let mut z = data.clone();
    for j in 0..data.ncols() {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        let mu = stats::mean(&col);
        let sigma = stats::population_std(&col);
        if sigma == 0.0 || !sigma.is_finite() {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
            return Err(IndicesError::ConstantIndicator(name));
        }
        for i in 0..data.nrows() {
            z[(i, j)] = (data[(i, j)] - mu) / sigma;
        }
    }
    Ok(z)
}

/// Pearson correlation between the columns of `data`.
pub fn correlation_matrix(data: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>, IndicesError> {
    if data.nrows() < 2 {
        return Err(IndicesError::DegenerateInput("need at least two rows".into()));
    }
    let z = column_zscores(data, names)?;
    let n = data.nrows() as f64;
    let mut corr = (z.transpose() * &z) / n;
    let p = corr.nrows();
    for a in 0..p {
        corr[(a, a)] = 1.0;
        for b in (a + 1)..p {
            let v = corr[(a, b)].clamp(-1.0, 1.0);
            corr[(a, b)] = v;
            corr[(b, a)] = v;
        }
    }
    Ok(corr)
}

/// Eigenvalues below this fraction of the trace are treated as exact zeros.
const ZERO_EIGEN_REL: f64 = 1e-10;

/// Principal components of the column-standardized input.
pub fn pca(data: &DMatrix<f64>) -> Result<PcaDecomposition, IndicesError> {
    let (n, p) = data.shape();
    if p == 0 || n <= p {
        return Err(IndicesError::DegenerateInput(format!(
            "pca needs more rows than columns, got {n}x{p}"
        )));
    }
    check_finite(data)?;
    let names: Vec<String> = (0..p).map(|j| format!("column {j}")).collect();
    let z = column_zscores(data, &names).map_err(|e| match e {
        IndicesError::ConstantIndicator(c) => IndicesError::DegenerateInput(format!("{c} is constant")),
        other => other,
    })?;
    let corr = correlation_matrix(data, &names)?;
    let eig = SymmetricEigen::new(corr);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let floor = ZERO_EIGEN_REL * p as f64;
    let values: Vec<f64> = order
        .iter()
        .map(|&k| {
            let v = eig.eigenvalues[k];
            if v < floor { 0.0 } else { v }
        })
        .collect();
    let total: f64 = values.iter().sum();

    let mut loadings = DMatrix::zeros(p, p);
    for (c, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for r in 1..p {
            if v[r].abs() > v[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            loadings[(r, c)] = sign * v[r];
        }
    }

    let components = &z * &loadings;
    let lambdas = values.iter().map(|v| v / total).collect();
    let sdevs = values.iter().map(|v| v.sqrt()).collect();
    Ok(PcaDecomposition { components, lambdas, sdevs, loadings })
}

/// Variance-weighted sum of all component scores.
pub fn external_field(pca: &PcaDecomposition, unit_ids: &[String]) -> Result<ExternalField, IndicesError> {
    external_field_truncated(pca, unit_ids, pca.lambdas.len())
}

/// Like [`external_field`] but only the leading `keep` components enter the
/// sum. Weights are not renormalized.
pub fn external_field_truncated(
    pca: &PcaDecomposition,
    unit_ids: &[String],
    keep: usize,
) -> Result<ExternalField, IndicesError> {
    let (n, p) = pca.components.shape();
    if pca.lambdas.len() != p || unit_ids.len() != n {
        return Err(IndicesError::Shape(format!(
            "{n}x{p} component scores, {} weights, {} units",
            pca.lambdas.len(),
            unit_ids.len()
        )));
    }
    let mut h = vec![0.0; n];
    for (k, &lambda) in pca.lambdas.iter().enumerate().take(keep) {
        if lambda == 0.0 {
            continue;
        }
        for (i, hi) in h.iter_mut().enumerate() {
            *hi += lambda * pca.components[(i, k)];
        }
    }
    Ok(ExternalField { unit_ids: unit_ids.to_vec(), h })
}

/// Stacks composite index vectors as the columns of a matrix.
pub fn stack_indices(indices: &[CompositeIndexVector]) -> DMatrix<f64> {
    let n = indices.first().map_or(0, |c| c.scores.len());
    DMatrix::from_fn(n, indices.len(), |i, j| indices[j].scores[i])
}
