//! Adaptive doubling: stage budgets m_k = 2^k·m_0 with m_0 = ⌈nτ̂⌉, stopping
//! at the first stage without truncations. Exact starts are drawn once and
//! trajectories are extended in place, so stage k+1 reuses the stage-k
//! prefix.

use serde::{Deserialize, Serialize};

use crate::chain::ReversibleChain;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::rng::path;
use crate::sampling::ChainWalker;
use crate::t1::{check_alpha, check_tau_hat, half_width, mean, r_effective, start_walkers, truncate, truncation_threshold};

pub const DEFAULT_BUDGET_CAP: u64 = 1_000_000_000;

fn default_cap() -> u64 {
    DEFAULT_BUDGET_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Config {
    pub n: u64,
    pub alpha: f64,
    pub tau_hat: f64,
    pub a: u32,
    pub root_seed: u64,
    #[serde(default = "default_cap")]
    pub budget_cap: u64,
}

impl T2Config {
    pub fn new(n: u64, alpha: f64, tau_hat: f64, a: u32, root_seed: u64) -> Self {
        Self {
            n,
            alpha,
            tau_hat,
            a,
            root_seed,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 5 {
            return Err(Error::InvalidConfig(format!("n must be at least 5, got {}", self.n)));
        }
        if self.a > 40 {
            return Err(Error::InvalidConfig(format!("a = {} is unreasonably large", self.a)));
        }
        check_alpha(self.alpha)?;
        check_tau_hat(self.tau_hat)
    }

    pub fn tau_hat_max(&self) -> f64 {
        (1u64 << self.a) as f64 * self.tau_hat
    }

    /// Stage-0 trajectory length ⌈nτ̂⌉.
    pub fn base_length(&self) -> u64 {
        (self.n as f64 * self.tau_hat).ceil() as u64
    }

    pub fn stage_length(&self, k: u32) -> u64 {
        self.base_length() << k
    }

    /// Per-stage confidence level α/(a+1).
    pub fn stage_alpha(&self) -> f64 {
        self.alpha / (self.a as f64 + 1.0)
    }
}

/// k_α^a = 2(√(2(a+1)/α) + ln(4(a+1)/α)).
pub fn k_alpha_a(alpha: f64, a: u32) -> f64 {
    let a1 = a as f64 + 1.0;
    2.0 * ((2.0 * a1 / alpha).sqrt() + (4.0 * a1 / alpha).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: u32,
    pub m_k: u64,
    pub gbar_star: f64,
    pub a_tilde_bar: f64,
    pub threshold: f64,
    pub truncation_count: u64,
    pub stage_interval_lo: f64,
    pub stage_interval_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Report {
    pub config: T2Config,
    pub stages: Vec<StageRecord>,
    #[serde(rename = "T")]
    pub t: u32,
    #[serde(rename = "M")]
    pub m_multiplier: f64,
    pub stage_alpha: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub interval_clipped_lo: f64,
    pub interval_clipped_hi: f64,
    pub length_bound_applicable: bool,
    pub length_bound: f64,
    pub exact_samples_used: u64,
    pub paper_steps_used: u64,
    pub transitions_used: u64,
}

impl T2Report {
    pub fn length(&self) -> f64 {
        self.interval_hi - self.interval_lo
    }

    pub fn contains(&self, value: f64) -> bool {
        self.interval_lo <= value && value <= self.interval_hi
    }
}

fn extend_all(
    chain: &ReversibleChain,
    walkers: &[ChainWalker],
    len: usize,
    exec: Execution,
) -> Vec<ChainWalker> {
    map_indexed(exec, walkers.len(), |i| {
        let mut w = walkers[i].clone();
        w.extend_to(chain, len);
        w
    })
}

pub fn run_t2(chain: &ReversibleChain, config: &T2Config) -> Result<T2Report> {
    run_t2_with(chain, config, Execution::default())
}

pub fn run_t2_with(
    chain: &ReversibleChain,
    config: &T2Config,
    exec: Execution,
) -> Result<T2Report> {
    config.validate()?;
    let n = config.n;
    let required = 2.0 * n as f64 * config.stage_length(config.a) as f64;
    if required > config.budget_cap as f64 {
        return Err(Error::BudgetOverflow {
            required,
            cap: config.budget_cap,
        });
    }
    let alpha_stage = config.stage_alpha();
    let mut star = start_walkers(chain, n as usize, config.root_seed, path::PHASE_STAR, exec);
    let mut main = start_walkers(chain, n as usize, config.root_seed, path::PHASE_MAIN, exec);
    let mut stages = Vec::new();
    let mut k = 0u32;
    loop {
        let m_k = config.stage_length(k);
        star = extend_all(chain, &star, m_k as usize, exec);
        main = extend_all(chain, &main, m_k as usize, exec);
        let star_avg: Vec<f64> = star.iter().map(ChainWalker::average).collect();
        let main_avg: Vec<f64> = main.iter().map(ChainWalker::average).collect();
        let gbar_star = mean(&star_avg);
        let r = r_effective(n, m_k, config.tau_hat);
        let trunc = truncate(&main_avg, gbar_star, truncation_threshold(n, r));
        let center = mean(&trunc.truncated_averages);
        let half = half_width(n, r, alpha_stage, trunc.truncation_count);
        stages.push(StageRecord {
            k,
            m_k,
            gbar_star,
            a_tilde_bar: center,
            threshold: trunc.threshold,
            truncation_count: trunc.truncation_count,
            stage_interval_lo: center - half,
            stage_interval_hi: center + half,
        });
        if trunc.good_event || k == config.a {
            break;
        }
        k += 1;
    }
    let last = stages.last().expect("at least one stage");
    let t = last.k;
    let (lo, hi) = (last.stage_interval_lo, last.stage_interval_hi);
    let m_t = last.m_k;
    Ok(T2Report {
        t,
        m_multiplier: (1u64 << t) as f64 * config.tau_hat,
        stage_alpha: alpha_stage,
        interval_lo: lo,
        interval_hi: hi,
        interval_clipped_lo: lo.clamp(0.0, 1.0),
        interval_clipped_hi: hi.clamp(0.0, 1.0),
        length_bound_applicable: t < config.a,
        length_bound: k_alpha_a(config.alpha, config.a) * (n as f64).ln() / n as f64,
        exact_samples_used: 2 * n,
        paper_steps_used: 2 * n * m_t,
        transitions_used: 2 * n * (m_t - 1),
        stages,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededStream;
    use crate::sampling::{exact_sample, simulate_trajectory, trajectory_average};
    use approx::assert_relative_eq;

    fn fair() -> ReversibleChain {
        ReversibleChain::from_parts(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
        .unwrap()
    }

    fn frozen() -> ReversibleChain {
        ReversibleChain::from_parts(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn k_alpha_a_values() {
        assert_relative_eq!(k_alpha_a(0.1, 0), crate::t1::k_alpha(0.1), max_relative = 1e-14);
        assert_relative_eq!(k_alpha_a(0.1, 3), 28.03889145046597, max_relative = 1e-12);
        assert_relative_eq!(k_alpha_a(0.5, 1), 11.202031693971943, max_relative = 1e-12);
    }

    #[test]
    fn constant_observable_stops_immediately() {
        let chain = fair().with_observable(vec![0.3, 0.3]).unwrap();
        let config = T2Config::new(8, 0.1, 2.0, 3, 1);
        let rep = run_t2(&chain, &config).unwrap();
        assert_eq!(rep.t, 0);
        assert_eq!(rep.m_multiplier, 2.0);
        assert_eq!(rep.paper_steps_used, 2 * 64 * 2);
        assert!(rep.length_bound_applicable);
        assert!(rep.contains(0.3));
    }

    #[test]
    fn stage_lengths_double() {
        let config = T2Config::new(7, 0.1, 1.5, 4, 0);
        assert_eq!(config.base_length(), 11);
        for k in 0..4 {
            assert_eq!(config.stage_length(k + 1), 2 * config.stage_length(k));
            let r = r_effective(7, config.stage_length(k), 1.5);
            assert_eq!(r, 7.0);
        }
        assert_eq!(config.tau_hat_max(), 24.0);
    }

    #[test]
    fn identity_kernel_hand_replay() {
        let chain = frozen();
        let config = T2Config::new(5, 0.1, 1.0, 2, 31);
        let rep = run_t2(&chain, &config).unwrap();
        let draw = |phase: u64, i: u64| {
            exact_sample(
                chain.stationary(),
                &SeededStream::new(31, vec![phase, path::ROLE_EXACT, i]),
            ) as f64
        };
        let star: Vec<f64> = (0..5).map(|i| draw(1, i)).collect();
        let main: Vec<f64> = (0..5).map(|i| draw(2, i)).collect();
        let gbar_star = star.iter().sum::<f64>() / 5.0;
        let threshold = 5f64.ln() / 5f64.sqrt();
        let violations = main.iter().filter(|&&a| (a - gbar_star).abs() > threshold).count() as u64;
        let expected_t = if violations == 0 { 0 } else { 2 };
        assert_eq!(rep.t, expected_t);
        for s in &rep.stages {
            assert_eq!(s.truncation_count, violations);
            assert_eq!(s.gbar_star, gbar_star);
        }
    }

    #[test]
    fn forced_long_run_reaches_a() {
        // Threshold ln 5/√5 ≈ 0.72; with a frozen chain any phase-2 start
        // opposite a pure phase-1 mean violates it at every stage.
        let chain = frozen();
        let mut seen_full = false;
        for seed in 0..200 {
            let rep = run_t2(&chain, &T2Config::new(5, 0.1, 1.0, 2, seed)).unwrap();
            assert_eq!(rep.stages.len() as u32, rep.t + 1);
            if rep.stages[0].truncation_count > 0 {
                assert_eq!(rep.t, 2);
                assert!(!rep.length_bound_applicable);
                seen_full = true;
            }
        }
        assert!(seen_full);
    }

    #[test]
    fn prefix_property() {
        let chain = ReversibleChain::from_parts(
            vec![vec![0.95, 0.05], vec![0.05, 0.95]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
        .unwrap();
        for seed in 0..50 {
            let config = T2Config::new(6, 0.1, 1.0, 3, seed);
            let rep = run_t2(&chain, &config).unwrap();
            // Stage records must equal a from-scratch simulation of the full
            // length-m_k trajectory on the same per-index stream.
            for stage in &rep.stages {
                let m = stage.m_k as usize;
                let star: Vec<f64> = (0..6u64)
                    .map(|i| {
                        let z = exact_sample(
                            chain.stationary(),
                            &SeededStream::new(seed, vec![path::PHASE_STAR, path::ROLE_EXACT, i]),
                        );
                        let traj = simulate_trajectory(
                            &chain,
                            z,
                            m,
                            &SeededStream::new(seed, vec![path::PHASE_STAR, path::ROLE_CHAIN, i]),
                        );
                        trajectory_average(&chain, &traj)
                    })
                    .collect();
                assert_eq!(stage.gbar_star, mean(&star));
            }
            let full = simulate_trajectory(&chain, 0, 96, &SeededStream::new(seed, vec![9]));
            let part = simulate_trajectory(&chain, 0, 48, &SeededStream::new(seed, vec![9]));
            assert_eq!(&full[..48], &part[..]);
        }
    }

    #[test]
    fn budget_cap_enforced() {
        let mut config = T2Config::new(30, 0.1, 1.0, 7, 0);
        config.budget_cap = 1000;
        assert!(matches!(
            run_t2(&fair(), &config),
            Err(Error::BudgetOverflow { .. })
        ));
    }

    #[test]
    fn length_bound_when_short() {
        for seed in 0..20 {
            let config = T2Config::new(30, 0.1, 1.0, 7, seed);
            let rep = run_t2(&fair(), &config).unwrap();
            assert_eq!(rep.paper_steps_used as f64, 2.0 * 900.0 * rep.m_multiplier);
            if rep.t < config.a {
                assert!(rep.length() <= k_alpha_a(0.1, 7) * 30f64.ln() / 30.0);
            }
        }
    }

    #[test]
    fn modes_agree() {
        let config = T2Config::new(9, 0.2, 1.0, 3, 4);
        assert_eq!(
            run_t2_with(&frozen(), &config, Execution::Sequential).unwrap(),
            run_t2_with(&frozen(), &config, Execution::Parallel).unwrap()
        );
    }
}
