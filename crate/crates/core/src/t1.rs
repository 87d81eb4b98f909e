//! Fixed-budget interval: two phases of n exact-start trajectories of
//! length m, truncation around the phase-1 mean, and a half-width that adds
//! a Chebyshev term to the data-dependent penalty h.

use serde::{Deserialize, Serialize};

use crate::chain::ReversibleChain;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::{path, SeededStream};
use crate::sampling::{exact_sample, ChainWalker};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T1Config {
    pub n: u64,
    pub m: u64,
    pub alpha: f64,
    pub tau_hat: f64,
    pub root_seed: u64,
}

impl T1Config {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!("n must be at least 3, got {}", self.n)));
        }
        if self.m < 1 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        check_alpha(self.alpha)?;
        check_tau_hat(self.tau_hat)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_tau_hat(tau_hat: f64) -> Result<()> {
    if tau_hat >= 1.0 && tau_hat.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("tau_hat must be finite and >= 1, got {tau_hat}")))
    }
}

/// r(n, m) = min(n, m/τ̂).
pub fn r_effective(n: u64, m: u64, tau_hat: f64) -> f64 {
    (n as f64).min(m as f64 / tau_hat)
}

/// err = 1/√(n·r).
pub fn err_term(n: u64, r: f64) -> f64 {
    1.0 / (n as f64 * r).sqrt()
}

pub fn c_alpha(alpha: f64) -> f64 {
    1.0 / (2.0 * alpha).sqrt()
}

pub fn d_alpha(alpha: f64) -> f64 {
    (2.0 / alpha).ln()
}

/// Penalty h(z, n; α): z/n + c_α/√n when z > 0, d_α/n when z = 0.
pub fn h_penalty(z: u64, n: u64, alpha: f64) -> f64 {
    let nf = n as f64;
    if z == 0 {
        d_alpha(alpha) / nf
    } else {
        z as f64 / nf + c_alpha(alpha) / nf.sqrt()
    }
}

/// k_α = 2(√(2/α) + ln(4/α)).
pub fn k_alpha(alpha: f64) -> f64 {
    2.0 * ((2.0 / alpha).sqrt() + (4.0 / alpha).ln())
}

/// k_α · err(n, r(n, m)) · ln n.
pub fn target_length(n: u64, m: u64, alpha: f64, tau_hat: f64) -> f64 {
    k_alpha(alpha) * err_term(n, r_effective(n, m, tau_hat)) * (n as f64).ln()
}

/// Truncation threshold ln n / √r.
pub fn truncation_threshold(n: u64, r: f64) -> f64 {
    (n as f64).ln() / r.sqrt()
}

/// Half-width b·err·ln n + h(N, n; α/2) for an arbitrary Chebyshev factor b.
pub fn half_width_with_b(n: u64, r: f64, alpha: f64, truncations: u64, b: f64) -> f64 {
    b * err_term(n, r) * (n as f64).ln() + h_penalty(truncations, n, alpha / 2.0)
}

/// Half-width with b = √(2/α).
pub fn half_width(n: u64, r: f64, alpha: f64, truncations: u64) -> f64 {
    half_width_with_b(n, r, alpha, truncations, (2.0 / alpha).sqrt())
}

/// Closed-form length on the good event: 2(√(2/α)·err·ln n + d_{α/2}/n).
pub fn good_event_length(n: u64, r: f64, alpha: f64) -> f64 {
    2.0 * ((2.0 / alpha).sqrt() * err_term(n, r) * (n as f64).ln() + d_alpha(alpha / 2.0) / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseData {
    pub exact_starts: Vec<usize>,
    pub averages: Vec<f64>,
    pub phase_mean: f64,
}

impl PhaseData {
    pub fn from_parts(exact_starts: Vec<usize>, averages: Vec<f64>) -> Self {
        let phase_mean = mean(&averages);
        Self {
            exact_starts,
            averages,
            phase_mean,
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub truncated_averages: Vec<f64>,
    pub truncation_count: u64,
    pub good_event: bool,
    pub threshold: f64,
}

/// Replaces every A_i with |A_i − ḡ*| > threshold by ḡ*. Ties are kept.
pub fn truncate(averages: &[f64], gbar_star: f64, threshold: f64) -> TruncationResult {
    let mut count = 0u64;
    let truncated_averages = averages
        .iter()
        .map(|&a| {
            if (a - gbar_star).abs() <= threshold {
                a
            } else {
                count += 1;
                gbar_star
            }
        })
        .collect();
    TruncationResult {
        truncated_averages,
        truncation_count: count,
        good_event: count == 0,
        threshold,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Short,
    Long,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T1Report {
    pub config: T1Config,
    pub gbar_star: f64,
    pub a_double_bar: f64,
    pub a_tilde_bar: f64,
    pub truncation: TruncationResult,
    pub half_width: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub interval_clipped_lo: f64,
    pub interval_clipped_hi: f64,
    pub classification: Classification,
    pub exact_samples_used: u64,
    pub paper_steps_used: u64,
    pub transitions_used: u64,
    pub r_value: f64,
    pub err_value: f64,
    pub phase_star: PhaseData,
    pub phase_main: PhaseData,
}

impl T1Report {
    pub fn length(&self) -> f64 {
        self.interval_hi - self.interval_lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.interval_lo <= value && value <= self.interval_hi
    }
}

/// Draws n exact starts and runs one length-`len` trajectory from each.
pub(crate) fn start_walkers(
    chain: &ReversibleChain,
    n: usize,
    root_seed: u64,
    phase: u64,
    exec: Execution,
) -> Vec<ChainWalker> {
    map_indexed(exec, n, |i| {
        let i = i as u64;
        let z = exact_sample(
            chain.stationary(),
            &SeededStream::new(root_seed, vec![phase, path::ROLE_EXACT, i]),
        );
        ChainWalker::new(
            chain,
            z,
            &SeededStream::new(root_seed, vec![phase, path::ROLE_CHAIN, i]),
        )
    })
}

fn run_phase(
    chain: &ReversibleChain,
    config: &T1Config,
    phase: u64,
    exec: Execution,
) -> PhaseData {
    let n = config.n as usize;
    let m = config.m as usize;
    let starts = start_walkers(chain, n, config.root_seed, phase, exec);
    let exact_starts = starts.iter().map(|w| w.state()).collect();
    let averages = map_indexed(exec, n, |i| {
        let mut w = starts[i].clone();
        w.extend_to(chain, m);
        w.average()
    });
    PhaseData::from_parts(exact_starts, averages)
}

pub fn run_t1(chain: &ReversibleChain, config: &T1Config) -> Result<T1Report> {
    run_t1_with(chain, config, Execution::default())
}

pub fn run_t1_with(
    chain: &ReversibleChain,
    config: &T1Config,
    exec: Execution,
) -> Result<T1Report> {
    config.validate()?;
    let phase_star = run_phase(chain, config, path::PHASE_STAR, exec);
    let phase_main = run_phase(chain, config, path::PHASE_MAIN, exec);
    Ok(assemble_t1(config.clone(), phase_star, phase_main))
}

/// Builds the report from the two phases; pure arithmetic.
pub fn assemble_t1(config: T1Config, phase_star: PhaseData, phase_main: PhaseData) -> T1Report {
    let n = config.n;
    let r = r_effective(n, config.m, config.tau_hat);
    let err = err_term(n, r);
    let gbar_star = phase_star.phase_mean;
    let truncation = truncate(
        &phase_main.averages,
        gbar_star,
        truncation_threshold(n, r),
    );
    let a_tilde_bar = mean(&truncation.truncated_averages);
    let half = half_width(n, r, config.alpha, truncation.truncation_count);
    let (lo, hi) = (a_tilde_bar - half, a_tilde_bar + half);
    let classification = if truncation.good_event {
        Classification::Short
    } else {
        Classification::Long
    };
    T1Report {
        gbar_star,
        a_double_bar: phase_main.phase_mean,
        a_tilde_bar,
        half_width: half,
        interval_lo: lo,
        interval_hi: hi,
        interval_clipped_lo: lo.clamp(0.0, 1.0),
        interval_clipped_hi: hi.clamp(0.0, 1.0),
        classification,
        exact_samples_used: 2 * n,
        paper_steps_used: 2 * n * config.m,
        transitions_used: 2 * n * (config.m - 1),
        r_value: r,
        err_value: err,
        truncation,
        phase_star,
        phase_main,
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fair() -> ReversibleChain {
        ReversibleChain::from_parts(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
        .unwrap()
    }

    fn cfg(n: u64, m: u64, alpha: f64, tau_hat: f64, seed: u64) -> T1Config {
        T1Config {
            n,
            m,
            alpha,
            tau_hat,
            root_seed: seed,
        }
    }

    #[test]
    fn r_values() {
        assert_eq!(r_effective(100, 500, 10.0), 50.0);
        assert_eq!(r_effective(100, 1_000_000, 10.0), 100.0);
        assert_eq!(r_effective(3, 1, 1.0), 1.0);
        assert_eq!(r_effective(3, 1, 4.0), 0.25);
    }

    #[test]
    fn err_values() {
        assert_relative_eq!(err_term(100, 100.0), 0.01, max_relative = 1e-15);
        assert_relative_eq!(err_term(100, 50.0), 0.01414213562373095, max_relative = 1e-12);
        assert_relative_eq!(err_term(3, 1.0), 0.5773502691896258, max_relative = 1e-12);
    }

    #[test]
    fn h_values() {
        assert_relative_eq!(h_penalty(0, 16, 0.5), 0.08664339756999316, max_relative = 1e-12);
        assert_relative_eq!(h_penalty(2, 16, 0.5), 0.375, max_relative = 1e-15);
        let (n, alpha) = (100u64, 0.1);
        let dn = d_alpha(alpha) / n as f64;
        assert!((1.0 - dn).powi(n as i32) <= alpha / 2.0);
        // the defining identities of the constants
        assert_relative_eq!((-d_alpha(alpha)).exp(), alpha / 2.0, max_relative = 1e-14);
        assert_relative_eq!(1.0 / (4.0 * c_alpha(alpha).powi(2)), alpha / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn k_alpha_values() {
        assert_relative_eq!(k_alpha(0.1), 16.32203081822703, max_relative = 1e-12);
        assert_relative_eq!(k_alpha(0.5), 8.158883083359672, max_relative = 1e-12);
        assert_relative_eq!(target_length(100, 100 * 7, 0.1, 7.0), 0.7516572969887795, max_relative = 1e-12);
    }

    #[test]
    fn h_monotone_on_grid() {
        for n in [3u64, 5, 10, 30, 50, 100, 1000] {
            for alpha in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
                for z in 1..n {
                    assert!(h_penalty(z + 1, n, alpha) >= h_penalty(z, n, alpha));
                }
                if d_alpha(alpha) < 1.0 + c_alpha(alpha) * (n as f64).sqrt() {
                    assert!(h_penalty(0, n, alpha) < h_penalty(1, n, alpha));
                }
            }
        }
    }

    #[test]
    fn truncation_rule() {
        let t = truncate(&[0.5, 0.9, 0.1, 0.8], 0.5, 0.3);
        // |0.8 - 0.5| = 0.30000000000000004 > 0.3 in floating point
        assert_eq!(t.truncated_averages, vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(t.truncation_count, 3);
        let t = truncate(&[0.25, 0.75], 0.5, 0.25);
        assert_eq!(t.truncation_count, 0);
        assert!(t.good_event);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, 10, 0.1, 1.0, 0).validate().is_err());
        assert!(cfg(3, 0, 0.1, 1.0, 0).validate().is_err());
        assert!(cfg(3, 1, 1.0, 1.0, 0).validate().is_err());
        assert!(cfg(3, 1, 0.1, 0.5, 0).validate().is_err());
        assert!(cfg(3, 1, 0.1, 1.0, 0).validate().is_ok());
    }

    #[test]
    fn constant_observable() {
        let chain = fair().with_observable(vec![0.7, 0.7]).unwrap();
        let rep = run_t1(&chain, &cfg(10, 20, 0.1, 1.0, 3)).unwrap();
        assert!(rep.phase_main.averages.iter().all(|&a| (a - 0.7).abs() < 1e-15));
        assert!((rep.gbar_star - 0.7).abs() < 1e-15);
        assert_eq!(rep.truncation.truncation_count, 0);
        assert!((rep.a_tilde_bar - 0.7).abs() < 1e-15);
        assert_eq!(rep.classification, Classification::Short);
    }

    #[test]
    fn identity_kernel_hand_replay() {
        let chain = ReversibleChain::from_parts(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
        .unwrap();
        let config = cfg(10, 5, 0.1, 1.0, 2024);
        let rep = run_t1(&chain, &config).unwrap();
        // Replay from the documented stream layout.
        let draw = |phase: u64, i: u64| {
            exact_sample(
                chain.stationary(),
                &SeededStream::new(2024, vec![phase, path::ROLE_EXACT, i]),
            )
        };
        let star: Vec<f64> = (0..10).map(|i| draw(1, i) as f64).collect();
        let main: Vec<f64> = (0..10).map(|i| draw(2, i) as f64).collect();
        let gbar_star = star.iter().sum::<f64>() / 10.0;
        let threshold = 10f64.ln() / 5f64.sqrt();
        let expected = main.iter().filter(|&&a| (a - gbar_star).abs() > threshold).count() as u64;
        assert_eq!(rep.phase_main.averages, main);
        assert_eq!(rep.gbar_star, gbar_star);
        assert_eq!(rep.truncation.threshold, threshold);
        assert_eq!(rep.truncation.truncation_count, expected);
    }

    #[test]
    fn fair_chain_half_width_identity() {
        let config = cfg(50, 200, 0.1, 1.0, 9);
        let rep = run_t1(&fair(), &config).unwrap();
        let expect = 20f64.sqrt() * rep.err_value * 50f64.ln()
            + h_penalty(rep.truncation.truncation_count, 50, 0.05);
        assert_relative_eq!(rep.half_width, expect, max_relative = 1e-12);
        assert_relative_eq!(rep.interval_hi - rep.a_tilde_bar, expect, max_relative = 1e-12);
        assert_eq!(rep.exact_samples_used, 100);
        assert_eq!(rep.paper_steps_used, 20_000);
        assert_eq!(rep.transitions_used, 2 * 50 * 199);
        if rep.truncation.good_event {
            let len = rep.length();
            assert_relative_eq!(len, good_event_length(50, rep.r_value, 0.1), max_relative = 1e-12);
            assert!(len <= target_length(50, 200, 0.1, 1.0));
        }
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let config = cfg(12, 30, 0.2, 2.0, 77);
        let a = run_t1_with(&fair(), &config, Execution::Sequential).unwrap();
        let b = run_t1_with(&fair(), &config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn phases_are_independent_streams() {
        let rep = run_t1(&fair(), &cfg(40, 50, 0.1, 1.0, 5)).unwrap();
        assert_ne!(rep.phase_star.exact_starts, rep.phase_main.exact_starts);
    }

    #[test]
    fn report_json_has_fields() {
        let rep = run_t1(&fair(), &cfg(5, 5, 0.1, 1.0, 1)).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        for key in [
            "gbar_star",
            "a_tilde_bar",
            "truncation",
            "interval_lo",
            "interval_hi",
            "interval_clipped_lo",
            "interval_clipped_hi",
            "classification",
            "exact_samples_used",
            "paper_steps_used",
            "r_value",
            "err_value",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
