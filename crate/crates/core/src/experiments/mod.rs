//! Replicated Monte Carlo studies with oracle overlays.
//!
//! Replicates run in parallel on the ambient rayon pool; results are
//! collected by replicate index and reduced sequentially, so every CSV is a
//! pure function of the study configuration.

pub mod degree;
pub mod invariants;
pub mod local;
pub mod stats;
pub mod tail;
pub mod time_constant;

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::marks::derive_seed;
use crate::params::ModelParams;

pub use stats::{aggregate, fingerprint, Estimate, Verdict};

/// In-memory CSV: a header and rows of already formatted fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Formats a float so that it round-trips exactly.
pub(crate) fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

/// Seed of the pattern for replicate `r`.
pub(crate) fn pattern_seed(seed: u64, r: u64) -> u64 {
    derive_seed(seed, 2 * r)
}

/// Seed of the marks for replicate `r` (and mark draw `m` within it).
pub(crate) fn mark_seed(seed: u64, r: u64, m: u64) -> u64 {
    derive_seed(derive_seed(seed, 2 * r + 1), m)
}

/// `poisson`, `grid` or `poisson+grid`.
pub fn model_tag(params: &ModelParams) -> &'static str {
    match (params.lambda_m > 0.0, params.grid_step.is_some()) {
        (true, true) => "poisson+grid",
        (false, true) => "grid",
        _ => "poisson",
    }
}

/// Canonical text of the model constants, for fingerprints.
pub fn describe_model(params: &ModelParams) -> String {
    format!(
        "lambda_m={:?};grid_step={:?};p={:?};fading_mean={:?};fading_mu={:?};T={:?};A={:?};beta={:?};noise={:?};window={:?};seed={}",
        params.lambda_m,
        params.grid_step,
        params.aloha_p,
        params.fading.mean(),
        params.fading.exponential_rate(),
        params.threshold,
        params.pathloss.a,
        params.pathloss.beta,
        params.noise,
        params.window,
        params.seed
    )
}
