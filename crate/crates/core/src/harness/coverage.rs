use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{con3_bound, prop2_bound};
use crate::chain::{ChainDefinition, ReversibleChain};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::harness::gallery::resolve_chain;
use crate::rng::hash64;
use crate::spectral::{spectral_summary, RelaxationTime};
use crate::t1::{good_event_length, run_t1_with, target_length, T1Config};
use crate::t2::{run_t2_with, T2Config};

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

const SEED_SCHEDULE: &str = "root_seed(j) = hash64(experiment_seed, j)";

/// Estimator and its parameters; `root_seed` is replaced per replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "lowercase")]
pub enum EstimatorConfig {
    T1(T1Config),
    T2(T2Config),
}

impl EstimatorConfig {
    fn kind(&self) -> &'static str {
        match self {
            EstimatorConfig::T1(_) => "t1",
            EstimatorConfig::T2(_) => "t2",
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            EstimatorConfig::T1(c) => c.alpha,
            EstimatorConfig::T2(c) => c.alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainSpec {
    Named(String),
    Inline(ChainDefinition),
}

/// On-disk experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    #[serde(flatten)]
    pub estimator: EstimatorConfig,
    pub replications: u64,
    pub experiment_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn chain(&self) -> Result<ReversibleChain> {
        match &self.chain {
            ChainSpec::Named(name) => resolve_chain(name),
            ChainSpec::Inline(def) => def.clone().into_chain(),
        }
    }

    pub fn run(&self, exec: Execution) -> Result<CoverageOutcome> {
        coverage_experiment(
            &self.chain()?,
            &self.estimator,
            self.replications,
            self.experiment_seed,
            exec,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: u64,
    pub root_seed: u64,
    pub missed: bool,
    pub truncation_count: u64,
    pub length: f64,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    pub paper_steps_used: u64,
    /// T1: the closed-form good-event length identity and the target-length
    /// bound hold (vacuously true when N_n > 0). T2: the length bound holds
    /// when T < a.
    pub length_check_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_exceeded: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub name: String,
    pub empirical: f64,
    pub bound: f64,
    /// Allowed Monte Carlo slack above `bound`.
    pub tolerance: f64,
    pub satisfied: bool,
}

impl BoundComparison {
    fn new(name: &str, empirical: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            empirical,
            bound,
            tolerance,
            satisfied: empirical <= bound + tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub estimator: String,
    pub chain_name: String,
    pub config: EstimatorConfig,
    pub true_gbar: f64,
    pub tau2: RelaxationTime,
    pub replications: u64,
    pub experiment_seed: u64,
    pub seed_schedule: String,
    pub miss_count: u64,
    pub empirical_miss_rate: f64,
    pub trunc_positive_count: u64,
    pub length_check_violations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_exceed_count: Option<u64>,
    pub mean_length: f64,
    pub length_quantiles: BTreeMap<String, f64>,
    pub bound_comparisons: Vec<BoundComparison>,
}

impl CoverageSummary {
    pub fn all_satisfied(&self) -> bool {
        self.bound_comparisons.iter().all(|b| b.satisfied)
    }

    pub fn comparison(&self, name: &str) -> Option<&BoundComparison> {
        self.bound_comparisons.iter().find(|b| b.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageOutcome {
    pub summary: CoverageSummary,
    pub records: Vec<ReplicationRecord>,
}

impl CoverageOutcome {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "root_seed", "missed", "N_n", "length", "T", "M"])?;
        for r in &self.records {
            w.write_record([
                r.index.to_string(),
                r.root_seed.to_string(),
                u8::from(r.missed).to_string(),
                r.truncation_count.to_string(),
                r.length.to_string(),
                r.t.map(|t| t.to_string()).unwrap_or_default(),
                r.m.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn binomial_band(p: f64, r: u64) -> f64 {
    3.0 * (p * (1.0 - p) / r as f64).sqrt()
}

fn run_one(
    chain: &ReversibleChain,
    base: &EstimatorConfig,
    index: u64,
    root_seed: u64,
    gbar: f64,
    tau2: Option<f64>,
) -> Result<ReplicationRecord> {
    match base {
        EstimatorConfig::T1(c) => {
            let config = T1Config {
                root_seed,
                ..c.clone()
            };
            let rep = run_t1_with(chain, &config, Execution::Sequential)?;
            let length = rep.length();
            let length_check_ok = !rep.truncation.good_event || {
                let closed = good_event_length(config.n, rep.r_value, config.alpha);
                ((length - closed) / closed).abs() <= 1e-12
                    && length <= target_length(config.n, config.m, config.alpha, config.tau_hat)
            };
            Ok(ReplicationRecord {
                index,
                root_seed,
                missed: !rep.contains(gbar),
                truncation_count: rep.truncation.truncation_count,
                length,
                t: None,
                m: None,
                paper_steps_used: rep.paper_steps_used,
                length_check_ok,
                budget_exceeded: None,
            })
        }
        EstimatorConfig::T2(c) => {
            let config = T2Config {
                root_seed,
                ..c.clone()
            };
            let rep = run_t2_with(chain, &config, Execution::Sequential)?;
            let length = rep.length();
            let threshold = 96.0 * tau2.unwrap_or(f64::INFINITY).max(config.tau_hat);
            Ok(ReplicationRecord {
                index,
                root_seed,
                missed: !rep.contains(gbar),
                truncation_count: rep.stages.last().map_or(0, |s| s.truncation_count),
                length,
                t: Some(rep.t),
                m: Some(rep.m_multiplier),
                paper_steps_used: rep.paper_steps_used,
                length_check_ok: !rep.length_bound_applicable || length <= rep.length_bound,
                budget_exceeded: Some(rep.m_multiplier > threshold),
            })
        }
    }
}

/// Runs `replications` independent copies of the estimator with root seeds
/// hash64(experiment_seed, j) and compares the empirical frequencies with
/// the proven bounds.
pub fn coverage_experiment(
    chain: &ReversibleChain,
    base: &EstimatorConfig,
    replications: u64,
    experiment_seed: u64,
    exec: Execution,
) -> Result<CoverageOutcome> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    let gbar = chain.gbar();
    let spectrum = spectral_summary(chain)?;
    let tau2 = spectrum.tau2();
    let records: Vec<ReplicationRecord> = map_indexed(exec, replications as usize, |j| {
        let j = j as u64;
        run_one(chain, base, j, hash64(experiment_seed, j), gbar, tau2)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let r = replications;
    let rf = r as f64;
    let miss_count = records.iter().filter(|x| x.missed).count() as u64;
    let trunc_positive_count = records.iter().filter(|x| x.truncation_count > 0).count() as u64;
    let length_check_violations = records.iter().filter(|x| !x.length_check_ok).count() as u64;
    let mut lengths: Vec<f64> = records.iter().map(|x| x.length).collect();
    let mean_length = lengths.iter().sum::<f64>() / rf;
    lengths.sort_by(f64::total_cmp);
    let length_quantiles = QUANTILE_LEVELS
        .iter()
        .map(|&q| (format!("{q}"), nearest_rank(&lengths, q)))
        .collect();

    let alpha = base.alpha();
    let miss_rate = miss_count as f64 / rf;
    let mut bound_comparisons = vec![BoundComparison::new(
        "validity",
        miss_rate,
        alpha,
        binomial_band(alpha, r),
    )];
    let mut budget_exceed_count = None;
    match base {
        EstimatorConfig::T1(c) => {
            if let Some(t) = tau2 {
                let p_hat = trunc_positive_count as f64 / rf;
                bound_comparisons.push(BoundComparison::new(
                    "truncation_probability",
                    p_hat,
                    prop2_bound(c.n, c.m, t)?.value,
                    binomial_band(p_hat, r),
                ));
            }
            bound_comparisons.push(BoundComparison::new(
                "good_event_length_identity",
                length_check_violations as f64,
                0.0,
                0.0,
            ));
        }
        EstimatorConfig::T2(c) => {
            let exceed = records
                .iter()
                .filter(|x| x.budget_exceeded == Some(true))
                .count() as u64;
            budget_exceed_count = Some(exceed);
            let p_hat = exceed as f64 / rf;
            bound_comparisons.push(BoundComparison::new(
                "budget_exceedance",
                p_hat,
                con3_bound(c.n)?.value,
                binomial_band(p_hat, r),
            ));
            bound_comparisons.push(BoundComparison::new(
                "length_bound_when_short",
                length_check_violations as f64,
                0.0,
                0.0,
            ));
            let nf = c.n as f64;
            if (nf * c.tau_hat).fract() == 0.0 {
                let budget_violations = records
                    .iter()
                    .filter(|x| x.paper_steps_used as f64 != 2.0 * nf * nf * x.m.unwrap_or(f64::NAN))
                    .count();
                bound_comparisons.push(BoundComparison::new(
                    "budget_identity",
                    budget_violations as f64,
                    0.0,
                    0.0,
                ));
            }
        }
    }

    let summary = CoverageSummary {
        estimator: base.kind().into(),
        chain_name: chain.name().into(),
        config: base.clone(),
        true_gbar: gbar,
        tau2: spectrum.relaxation_time,
        replications: r,
        experiment_seed,
        seed_schedule: SEED_SCHEDULE.into(),
        miss_count,
        empirical_miss_rate: miss_rate,
        trunc_positive_count,
        length_check_violations,
        budget_exceed_count,
        mean_length,
        length_quantiles,
        bound_comparisons,
    };
    Ok(CoverageOutcome { summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gallery::resolve_gallery;

    fn t1(n: u64, m: u64, alpha: f64) -> EstimatorConfig {
        EstimatorConfig::T1(T1Config {
            n,
            m,
            alpha,
            tau_hat: 1.0,
            root_seed: 0,
        })
    }

    #[test]
    fn constant_observable_never_misses() {
        let chain = resolve_gallery("lazy_cycle_8")
            .unwrap()
            .chain
            .with_observable(vec![0.25; 8])
            .unwrap();
        let out = coverage_experiment(&chain, &t1(5, 10, 0.1), 50, 1, Execution::Parallel).unwrap();
        assert_eq!(out.summary.miss_count, 0);
        let out = coverage_experiment(
            &chain,
            &EstimatorConfig::T2(T2Config::new(5, 0.1, 1.0, 2, 0)),
            50,
            1,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(out.summary.miss_count, 0);
        assert_eq!(out.summary.budget_exceed_count, Some(0));
    }

    #[test]
    fn summary_bookkeeping() {
        let chain = resolve_gallery("two_state_0.2_0.3").unwrap().chain;
        let out = coverage_experiment(&chain, &t1(6, 12, 0.3), 40, 8, Execution::Sequential).unwrap();
        let s = &out.summary;
        assert_eq!(s.empirical_miss_rate, s.miss_count as f64 / 40.0);
        assert_eq!(out.records.len(), 40);
        for (j, rec) in out.records.iter().enumerate() {
            assert_eq!(rec.root_seed, hash64(8, j as u64));
        }
        assert_eq!(s.length_quantiles.len(), QUANTILE_LEVELS.len());
        assert!(s.comparison("validity").is_some());
        assert!(s.comparison("truncation_probability").is_some());
    }

    #[test]
    fn replay_is_bit_identical() {
        let chain = resolve_gallery("two_state_0.5_0.5").unwrap().chain;
        let a = coverage_experiment(&chain, &t1(5, 20, 0.1), 30, 3, Execution::Sequential).unwrap();
        let b = coverage_experiment(&chain, &t1(5, 20, 0.1), 30, 3, Execution::Parallel).unwrap();
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn nearest_rank_quantiles() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 0.5), 5.0);
        assert_eq!(nearest_rank(&xs, 0.05), 1.0);
        assert_eq!(nearest_rank(&xs, 0.95), 10.0);
    }

    #[test]
    fn experiment_config_json() {
        let text = r#"{
            "chain": "gallery:two_state_0.5_0.5",
            "estimator": "t1",
            "n": 5, "m": 10, "alpha": 0.1, "tau_hat": 1.0, "root_seed": 0,
            "replications": 4, "experiment_seed": 2
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(matches!(cfg.estimator, EstimatorConfig::T1(_)));
        let out = cfg.run(Execution::Parallel).unwrap();
        assert_eq!(out.summary.replications, 4);
        let mut csv = Vec::new();
        out.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    }
}
