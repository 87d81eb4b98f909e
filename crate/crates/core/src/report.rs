//! JSON envelopes and CSV exports for reports.

use serde::Serialize;

use crate::error::Result;
use crate::t2::T2Report;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A report with the artifact version and chain name prepended.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub artifact_version: &'static str,
    pub chain_name: &'a str,
    #[serde(flatten)]
    pub report: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(chain_name: &'a str, report: &'a T) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION,
            chain_name,
            report,
        }
    }
}

pub fn to_json<T: Serialize>(chain_name: &str, report: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope::new(chain_name, report))?)
}

/// One row per stage.
pub fn write_stage_csv<W: std::io::Write>(report: &T2Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k",
        "m_k",
        "gbar_star",
        "a_tilde_bar",
        "threshold",
        "N_n",
        "stage_interval_lo",
        "stage_interval_hi",
    ])?;
    for s in &report.stages {
        w.write_record([
            s.k.to_string(),
            s.m_k.to_string(),
            s.gbar_star.to_string(),
            s.a_tilde_bar.to_string(),
            s.threshold.to_string(),
            s.truncation_count.to_string(),
            s.stage_interval_lo.to_string(),
            s.stage_interval_hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
