//! Brute-force ground truth for tiny chains.
//!
//! The distribution of the trajectory average A₁ started from π is obtained
//! by enumerating all sᵐ paths. Its variance is also available from the
//! spectral decomposition; the two routes are independent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{lezaud_two_sided, BoundValue};
use crate::chain::ReversibleChain;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::SeededStream;
use crate::sampling::{exact_sample_with, ChainWalker};
use crate::spectral::spectral_decomposition;

pub const ENUMERATION_LIMIT: u64 = 10_000_000;
/// Width of the bins that merge floating-point-equal averages.
pub const SUPPORT_BIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub value: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactA1Distribution {
    /// Strictly increasing in value.
    pub support: Vec<SupportPoint>,
    pub m: u64,
    pub chain_name: String,
}

impl ExactA1Distribution {
    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|p| p.probability).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|p| p.value * p.probability).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.support
            .iter()
            .map(|p| p.probability * (p.value - mu).powi(2))
            .sum()
    }

    /// Index of the support point nearest to `value`.
    pub fn locate(&self, value: f64) -> usize {
        let i = self.support.partition_point(|p| p.value < value);
        if i == 0 {
            return 0;
        }
        if i == self.support.len() {
            return i - 1;
        }
        if (self.support[i].value - value).abs() < (value - self.support[i - 1].value).abs() {
            i
        } else {
            i - 1
        }
    }
}

type Bins = BTreeMap<i64, (f64, f64)>;

#[inline]
fn bin_key(value: f64) -> i64 {
    (value / SUPPORT_BIN).round() as i64
}

fn add_mass(bins: &mut Bins, value: f64, probability: f64) {
    let entry = bins.entry(bin_key(value)).or_insert((value, 0.0));
    entry.1 += probability;
}

struct Enumerator<'a> {
    chain: &'a ReversibleChain,
    m: usize,
    bins: Bins,
}

impl Enumerator<'_> {
    fn descend(&mut self, state: usize, depth: usize, sum: f64, prob: f64) {
        if depth == self.m {
            add_mass(&mut self.bins, sum / self.m as f64, prob);
            return;
        }
        let g = self.chain.observable();
        let row = self.chain.kernel().row(state);
        for (next, &k) in row.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            self.descend(next, depth + 1, sum + g[next], prob * k);
        }
    }
}

pub fn exact_a1_distribution(chain: &ReversibleChain, m: u64) -> Result<ExactA1Distribution> {
    exact_a1_distribution_with(chain, m, Execution::default())
}

pub fn exact_a1_distribution_with(
    chain: &ReversibleChain,
    m: u64,
    exec: Execution,
) -> Result<ExactA1Distribution> {
    let s = chain.num_states();
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let paths = (s as f64).powf(m as f64);
    if paths > ENUMERATION_LIMIT as f64 {
        return Err(Error::EnumerationTooLarge {
            states: s,
            m: m as usize,
            limit: ENUMERATION_LIMIT,
        });
    }
    let pi = chain.stationary().weights();
    let g = chain.observable();
    let per_start = map_indexed(exec, s, |x0| {
        let mut e = Enumerator {
            chain,
            m: m as usize,
            bins: Bins::new(),
        };
        e.descend(x0, 1, g[x0], pi[x0]);
        e.bins
    });
    let mut bins = Bins::new();
    for branch in per_start {
        for (key, (value, prob)) in branch {
            let entry = bins.entry(key).or_insert((value, 0.0));
            entry.1 += prob;
        }
    }
    // Adjacent keys can straddle a rounding boundary; fold them together.
    let mut support: Vec<SupportPoint> = Vec::with_capacity(bins.len());
    let mut last_key: Option<i64> = None;
    for (key, (value, probability)) in bins {
        match (last_key, support.last_mut()) {
            (Some(k), Some(prev)) if key - k <= 1 => prev.probability += probability,
            _ => support.push(SupportPoint { value, probability }),
        }
        last_key = Some(key);
    }
    Ok(ExactA1Distribution {
        support,
        m,
        chain_name: chain.name().to_string(),
    })
}

/// P(|A₁ − ḡ| > λ), strict inequality.
pub fn exact_tail(dist: &ExactA1Distribution, gbar: f64, lambda: f64) -> f64 {
    dist.support
        .iter()
        .filter(|p| (p.value - gbar).abs() > lambda)
        .map(|p| p.probability)
        .sum()
}

/// Σ_{i,j=0}^{m-1} λ^{|i-j|} = m + 2 Σ_{t=1}^{m-1} (m - t) λ^t.
fn lag_weight(lambda: f64, m: u64) -> f64 {
    let mut total = m as f64;
    let mut power = 1.0;
    for t in 1..m {
        power *= lambda;
        total += 2.0 * (m - t) as f64 * power;
    }
    total
}

/// Exact stationary Var(A₁) from the spectral decomposition of K.
pub fn exact_variance_a1(chain: &ReversibleChain, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let decomposition = spectral_decomposition(chain)?;
    let pi = chain.stationary().weights();
    let gbar = chain.gbar();
    let centered: Vec<f64> = chain.observable().iter().map(|g| g - gbar).collect();
    let total: f64 = decomposition
        .eigenvalues
        .iter()
        .zip(&decomposition.eigenfunctions)
        .map(|(&lambda, f)| {
            let c: f64 = (0..pi.len()).map(|i| pi[i] * centered[i] * f[i]).sum();
            c * c * lag_weight(lambda, m)
        })
        .sum();
    Ok(total / (m as f64 * m as f64))
}

/// One A₁ draw: exact start from π, then a length-m trajectory, all on one
/// stream.
pub fn sample_a1(chain: &ReversibleChain, m: u64, stream: &SeededStream) -> f64 {
    let mut rng = stream.rng();
    let start = exact_sample_with(chain.stationary(), &mut rng);
    let mut walker = ChainWalker::new(chain, start, &stream.child(0));
    walker.extend_to(chain, m as usize);
    walker.average()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub lambda: f64,
    pub exact_tail: f64,
    /// Absent when τ₂ is infinite.
    pub lezaud_bound: Option<BoundValue>,
}

/// The default λ grid {0.05, 0.10, …, 0.95}.
pub fn lambda_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

pub fn tail_table(
    chain: &ReversibleChain,
    dist: &ExactA1Distribution,
    tau2: Option<f64>,
    lambdas: &[f64],
) -> Result<Vec<TailRow>> {
    let gbar = chain.gbar();
    lambdas
        .iter()
        .map(|&lambda| {
            Ok(TailRow {
                lambda,
                exact_tail: exact_tail(dist, gbar, lambda),
                lezaud_bound: tau2
                    .map(|t| lezaud_two_sided(lambda, dist.m, t))
                    .transpose()?,
            })
        })
        .collect()
}
