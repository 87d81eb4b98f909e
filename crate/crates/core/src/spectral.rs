//! Spectrum of a reversible kernel via the symmetrization D^{1/2} K D^{-1/2}.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::chain::ReversibleChain;
use crate::error::{Error, Result};

pub const SPECTRAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelaxationTime {
    Finite(f64),
    Infinite,
}

impl RelaxationTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            RelaxationTime::Finite(t) => Some(t),
            RelaxationTime::Infinite => None,
        }
    }

    pub fn require_finite(self) -> Result<f64> {
        self.finite().ok_or(Error::InfiniteRelaxation)
    }
}

impl Serialize for RelaxationTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RelaxationTime::Finite(t) => s.serialize_f64(*t),
            RelaxationTime::Infinite => s.serialize_str("INFINITE"),
        }
    }
}

impl<'de> Deserialize<'de> for RelaxationTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(t) => Ok(RelaxationTime::Finite(t)),
            Repr::Tag(s) if s == "INFINITE" => Ok(RelaxationTime::Infinite),
            Repr::Tag(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"INFINITE\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub relaxation_time: RelaxationTime,
}

impl SpectralSummary {
    pub fn tau2(&self) -> Option<f64> {
        self.relaxation_time.finite()
    }
}

/// Eigenvalues of K with eigenfunctions orthonormal in L²(π).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// `eigenfunctions[k][i]` is f_k(i); Σ_i π_i f_k(i) f_l(i) = δ_kl.
    pub eigenfunctions: Vec<Vec<f64>>,
}

pub(crate) fn symmetrized(chain: &ReversibleChain) -> Result<DMatrix<f64>> {
    let pi = chain.stationary().weights();
    if let Some(i) = pi.iter().position(|&p| p <= 0.0) {
        return Err(Error::DegenerateStationary(i));
    }
    let s = chain.num_states();
    let k = chain.kernel();
    let root: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    Ok(DMatrix::from_fn(s, s, |i, j| root[i] * k.get(i, j) / root[j]))
}

pub fn spectral_decomposition(chain: &ReversibleChain) -> Result<SpectralDecomposition> {
    let sym = symmetrized(chain)?;
    // Average with the transpose; detailed balance makes the two agree to
    // rounding, and the eigen solver wants exact symmetry.
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pi = chain.stationary().weights();
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenfunctions = order
        .iter()
        .map(|&k| {
            eig.eigenvectors
                .column(k)
                .iter()
                .zip(pi)
                .map(|(u, p)| u / p.sqrt())
                .collect()
        })
        .collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenfunctions,
    })
}

pub fn summarize_eigenvalues(eigenvalues: Vec<f64>) -> SpectralSummary {
    let lambda2 = eigenvalues.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    let relaxation_time = if eigenvalues.len() < 2 || lambda2 >= 1.0 - SPECTRAL_TOL {
        RelaxationTime::Infinite
    } else {
        RelaxationTime::Finite(1.0 / (1.0 - lambda2))
    };
    SpectralSummary {
        eigenvalues,
        lambda2,
        relaxation_time,
    }
}

pub fn spectral_summary(chain: &ReversibleChain) -> Result<SpectralSummary> {
    Ok(summarize_eigenvalues(
        spectral_decomposition(chain)?.eigenvalues,
    ))
}
