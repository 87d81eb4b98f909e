//! Exact draws from π and seeded trajectory simulation.

use crate::chain::{ProbabilityVector, ReversibleChain};
use crate::rng::{SeededStream, StreamRng};

/// Inverse-CDF draw from π using the first uniform of `stream`.
pub fn exact_sample(stationary: &ProbabilityVector, stream: &SeededStream) -> usize {
    exact_sample_with(stationary, &mut stream.rng())
}

#[inline]
pub fn exact_sample_with(stationary: &ProbabilityVector, rng: &mut StreamRng) -> usize {
    stationary.cdf().invert(rng.uniform())
}

/// States X_0 = start, X_1, ..., X_{m-1}; m - 1 transitions.
pub fn simulate_trajectory(
    chain: &ReversibleChain,
    start: usize,
    steps: usize,
    stream: &SeededStream,
) -> Vec<usize> {
    assert!(start < chain.num_states(), "start state out of range");
    assert!(steps >= 1, "a trajectory has at least one state");
    let mut rng = stream.rng();
    let mut traj = Vec::with_capacity(steps);
    let mut x = start;
    traj.push(x);
    for _ in 1..steps {
        x = chain.kernel().row_cdf(x).invert(rng.uniform());
        traj.push(x);
    }
    traj
}

pub fn trajectory_average(chain: &ReversibleChain, trajectory: &[usize]) -> f64 {
    assert!(!trajectory.is_empty(), "empty trajectory");
    let g = chain.observable();
    let sum: f64 = trajectory.iter().map(|&x| g[x]).sum();
    sum / trajectory.len() as f64
}

/// Running trajectory that can be extended in place. Produces exactly the
/// states of [`simulate_trajectory`] on the same stream, and its running sum
/// accumulates in the same order as [`trajectory_average`].
#[derive(Clone, Debug)]
pub struct ChainWalker {
    state: usize,
    len: usize,
    sum: f64,
    rng: StreamRng,
}

impl ChainWalker {
    pub fn new(chain: &ReversibleChain, start: usize, stream: &SeededStream) -> Self {
        Self {
            state: start,
            len: 1,
            sum: chain.observable()[start],
            rng: stream.rng(),
        }
    }

    pub fn extend_to(&mut self, chain: &ReversibleChain, len: usize) {
        let g = chain.observable();
        let k = chain.kernel();
        while self.len < len {
            self.state = k.row_cdf(self.state).invert(self.rng.uniform());
            self.sum += g[self.state];
            self.len += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn average(&self) -> f64 {
        self.sum / self.len as f64
    }
}
