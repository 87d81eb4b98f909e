//! Finite reversible chains: the triple (K, π, g) and its validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on probability-vector and row sums.
pub const SUM_TOL: f64 = 1e-12;
/// Relative tolerance on detailed balance.
pub const BALANCE_TOL: f64 = 1e-12;
/// Per-coordinate tolerance on πK = π.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// Cumulative table for inverse-CDF sampling. The last state with positive
/// mass has its cumulative value pinned to exactly 1, so every u in [0, 1)
/// maps to a state with positive mass.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Cdf(Vec<f64>);

impl Cdf {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
            for c in &mut cdf[last..] {
                *c = 1.0;
            }
        }
        Cdf(cdf)
    }

    /// First index whose cumulative value exceeds `u`.
    #[inline]
    pub(crate) fn invert(&self, u: f64) -> usize {
        self.0.partition_point(|&c| c <= u)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
    cdf: Cdf,
}

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbabilityVector("empty".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidProbabilityVector(format!(
                "entry {i} = {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidProbabilityVector(format!(
                "entries sum to {total}, not 1"
            )));
        }
        let cdf = Cdf::new(&weights);
        Ok(Self { weights, cdf })
    }

    pub fn uniform(s: usize) -> Result<Self> {
        Self::new(vec![1.0 / s as f64; s])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Right endpoints of the inverse-CDF intervals; state `i` owns
    /// `[cumulative[i-1], cumulative[i])`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cdf.0
    }

    pub(crate) fn cdf(&self) -> &Cdf {
        &self.cdf
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionKernel {
    size: usize,
    entries: Vec<f64>,
    row_cdfs: Vec<Cdf>,
}

impl TransitionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::DimensionMismatch("kernel has no rows".into()));
        }
        let mut entries = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::DimensionMismatch(format!(
                    "kernel row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            if let Some(k) = row.iter().find(|k| !(0.0..=1.0).contains(*k)) {
                return Err(Error::RowSum {
                    row: i,
                    reason: format!("entry {k} outside [0, 1]"),
                });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::RowSum {
                    row: i,
                    reason: format!("sums to {total}"),
                });
            }
            entries.extend_from_slice(row);
        }
        let row_cdfs = rows.iter().map(|r| Cdf::new(r)).collect();
        Ok(Self {
            size,
            entries,
            row_cdfs,
        })
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::new(
            (0..size)
                .map(|i| (0..size).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    #[inline]
    pub(crate) fn row_cdf(&self, i: usize) -> &Cdf {
        &self.row_cdfs[i]
    }
}

/// Affine map `g = (raw - shift) * scale` that brought an observable into
/// [0, 1]. Recorded so the original observable can be recovered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableAffine {
    pub shift: f64,
    pub scale: f64,
}

/// A validated reversible chain with a [0, 1]-valued observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ReversibleChain {
    name: String,
    kernel: TransitionKernel,
    stationary: ProbabilityVector,
    observable: Vec<f64>,
    affine: Option<ObservableAffine>,
}

pub fn validate_chain(
    kernel: TransitionKernel,
    stationary: ProbabilityVector,
    observable: Vec<f64>,
) -> Result<ReversibleChain> {
    let s = kernel.size();
    if stationary.len() != s || observable.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "kernel is {s}x{s}, stationary has {} entries, observable has {}",
            stationary.len(),
            observable.len()
        )));
    }
    if let Some((state, &value)) = observable
        .iter()
        .enumerate()
        .find(|(_, g)| !(0.0..=1.0).contains(*g))
    {
        return Err(Error::ObservableRange { state, value });
    }
    if let Some(i) = stationary.weights().iter().position(|&p| p == 0.0) {
        return Err(Error::DegenerateStationary(i));
    }
    let pi = stationary.weights();
    for i in 0..s {
        for j in (i + 1)..s {
            let lhs = pi[i] * kernel.get(i, j);
            let rhs = pi[j] * kernel.get(j, i);
            if (lhs - rhs).abs() > BALANCE_TOL * lhs.max(rhs).max(1e-300) {
                return Err(Error::DetailedBalance { i, j, lhs, rhs });
            }
        }
    }
    check_stationarity(&kernel, pi)?;
    Ok(ReversibleChain {
        name: "unnamed".into(),
        kernel,
        stationary,
        observable,
        affine: None,
    })
}

fn check_stationarity(kernel: &TransitionKernel, pi: &[f64]) -> Result<()> {
    let s = kernel.size();
    for j in 0..s {
        let flow: f64 = (0..s).map(|i| pi[i] * kernel.get(i, j)).sum();
        let deviation = flow - pi[j];
        if deviation.abs() > STATIONARITY_TOL {
            return Err(Error::Stationarity { coord: j, deviation });
        }
    }
    Ok(())
}

impl ReversibleChain {
    /// Builds and validates a chain from raw arrays.
    pub fn from_parts(
        kernel: Vec<Vec<f64>>,
        stationary: Vec<f64>,
        observable: Vec<f64>,
    ) -> Result<Self> {
        validate_chain(
            TransitionKernel::new(kernel)?,
            ProbabilityVector::new(stationary)?,
            observable,
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_affine(mut self, affine: ObservableAffine) -> Self {
        self.affine = Some(affine);
        self
    }

    /// Same kernel and π with a different observable.
    pub fn with_observable(&self, observable: Vec<f64>) -> Result<Self> {
        let chain = validate_chain(self.kernel.clone(), self.stationary.clone(), observable)?;
        Ok(chain.with_name(self.name.clone()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn stationary(&self) -> &ProbabilityVector {
        &self.stationary
    }

    pub fn observable(&self) -> &[f64] {
        &self.observable
    }

    pub fn affine(&self) -> Option<ObservableAffine> {
        self.affine
    }

    pub fn num_states(&self) -> usize {
        self.kernel.size()
    }

    /// True stationary mean ḡ = Σ π_i g(i).
    pub fn gbar(&self) -> f64 {
        self.stationary
            .weights()
            .iter()
            .zip(&self.observable)
            .map(|(p, g)| p * g)
            .sum()
    }

    pub fn variance_pi(&self) -> f64 {
        let mean = self.gbar();
        self.stationary
            .weights()
            .iter()
            .zip(&self.observable)
            .map(|(p, g)| p * (g - mean).powi(2))
            .sum()
    }

    pub fn to_definition(&self) -> ChainDefinition {
        ChainDefinition {
            name: self.name.clone(),
            kernel: self.kernel.rows(),
            stationary: self.stationary.weights().to_vec(),
            observable: self.observable.clone(),
            observable_affine: self.affine,
        }
    }
}

/// On-disk JSON form of a chain, shared by the CLI and the gallery exporter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDefinition {
    pub name: String,
    pub kernel: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub observable: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_affine: Option<ObservableAffine>,
}

impl ChainDefinition {
    pub fn into_chain(self) -> Result<ReversibleChain> {
        let chain = ReversibleChain::from_parts(self.kernel, self.stationary, self.observable)?
            .with_name(self.name);
        Ok(match self.observable_affine {
            Some(a) => chain.with_affine(a),
            None => chain,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ChainFile(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ChainFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
