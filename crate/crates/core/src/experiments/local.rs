//! Point-to-point local delay between two Palm points at distance `r`.
//!
//! Three checks share one set of replicates:
//! the unconditional mean against the Poisson quadrature oracle, a pooled
//! randomized probability-integral-transform KS test of the conditional
//! geometric law (each sample is mapped through the geometric CDF with its
//! own pattern's `pi_{X,Y}(Phi)`), and the mean chain
//! `exit <= end-to-end <= local` on a subset of replicates.

use rayon::prelude::*;

use super::stats::{ks_critical, ks_statistic, mean_se, Estimate, Verdict};
use super::{describe_model, fingerprint, fmt_f, mark_seed, pattern_seed, Table};
use crate::delay::{end_to_end_nodes, exit_delay, local_delay};
use crate::error::{param, Result};
use crate::marks::{derive_seed, mix64, MarkStream};
use crate::oracle::{mean_local_delay_poisson, success_prob_given_pattern, ABS_TOL};
use crate::params::ModelParams;
use crate::pointproc::{palm_add, sample_model, Position};
use crate::sinr::Network;

#[derive(Debug, Clone)]
pub struct LocalDelayConfig {
    pub model: ModelParams,
    pub r: f64,
    pub patterns: usize,
    pub marks_per_pattern: usize,
    pub horizon: u64,
    /// Leading patterns on which exit and end-to-end delays are also measured.
    pub chain_patterns: usize,
}

#[derive(Debug, Clone)]
pub struct LocalDelayReport {
    /// Monte Carlo mean of `L_{X,Y}(0)` over patterns and marks.
    pub local: Estimate,
    /// Mean of `1 / pi_{X,Y}(Phi)` over patterns.
    pub conditional_mean: Estimate,
    pub oracle: f64,
    /// KS statistic and 1% critical value of the pooled PIT sample.
    pub ks: (f64, f64),
    pub chain: Option<ChainMeans>,
    pub chain_violations: u64,
    pub table: Table,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainMeans {
    pub exit: f64,
    pub end_to_end: f64,
    pub local: f64,
    pub samples: u64,
}

impl LocalDelayReport {
    pub fn verdicts(&self, rel: f64) -> Vec<Verdict> {
        let mut v = vec![
            Verdict::within_rel("mean_local_delay", self.local.value, self.oracle, self.local.se, rel),
            Verdict::at_most("geometric_ks", self.ks.0, self.ks.1),
        ];
        if let Some(c) = self.chain {
            v.push(Verdict::at_most("chain_exit_le_end_to_end", c.exit, c.end_to_end));
            v.push(Verdict::at_most("chain_end_to_end_le_local", c.end_to_end, c.local));
        }
        v.push(Verdict::at_most("chain_samplewise_violations", self.chain_violations as f64, 0.0));
        v
    }
}

pub const LOCAL_HEADER: &[&str] = &[
    "statistic",
    "estimate",
    "se",
    "samples",
    "censored",
    "oracle_value",
    "oracle_method",
    "tolerance",
    "fingerprint",
];

struct PatternResult {
    delays: Vec<u64>,
    censored: u64,
    inv_pi: f64,
    pit: Vec<f64>,
    chain: Option<(u64, u64, u64)>,
    chain_violation: bool,
}

/// Uniform in `[0,1)` keyed by `(seed, m)`.
fn unit(seed: u64, m: u64) -> f64 {
    (mix64(seed ^ mix64(m.wrapping_add(0x5851_f42d_4c95_7f2d))) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn run_local_delay_validation(cfg: &LocalDelayConfig) -> Result<LocalDelayReport> {
    cfg.model.validate()?;
    if !(cfg.r > 0.0) {
        return param("distance r must be positive");
    }
    if cfg.patterns == 0 || cfg.marks_per_pattern == 0 || cfg.horizon == 0 {
        return param("local delay validation needs patterns, mark draws and a horizon");
    }
    let oracle = mean_local_delay_poisson(cfg.r, &cfg.model)?;
    let w = cfg.model.window;
    let center = Position::new(w.origin.x + w.width / 2.0, w.origin.y + w.height / 2.0);
    let x = Position::new(center.x - cfg.r / 2.0, center.y);
    let y = Position::new(center.x + cfg.r / 2.0, center.y);
    let radius = w.radius_about(x).min(w.radius_about(y));
    if radius < 5.0 * cfg.r {
        return param(format!(
            "window radius {radius} about the Palm pair is below 5 r = {}; interference would be truncated",
            5.0 * cfg.r
        ));
    }
    let seed = cfg.model.seed;
    let results: Vec<Result<PatternResult>> = (0..cfg.patterns)
        .into_par_iter()
        .map(|r| {
            let r64 = r as u64;
            let base = sample_model(&cfg.model, pattern_seed(seed, r64))?;
            let pattern = palm_add(&base, &[x, y])?;
            let net = Network::new(&pattern, &cfg.model);
            let pi = success_prob_given_pattern(&pattern, &cfg.model, 0, 1)?;
            let pit_seed = derive_seed(seed ^ 0x7069_7400, r64);
            let mut delays = Vec::with_capacity(cfg.marks_per_pattern);
            let mut censored = 0;
            let mut pit = Vec::with_capacity(cfg.marks_per_pattern);
            for m in 0..cfg.marks_per_pattern as u64 {
                let stream = MarkStream::new(&cfg.model, mark_seed(seed, r64, m));
                match local_delay(&net, &stream, 0, 1, 0, cfg.horizon)?.value() {
                    Some(v) => {
                        delays.push(v);
                        // P{L <= v-1} and P{L <= v} under Geometric(pi) on {1,2,...}
                        let lo = -(((v - 1) as f64) * (-pi).ln_1p()).exp_m1();
                        let hi = -((v as f64) * (-pi).ln_1p()).exp_m1();
                        pit.push(lo + unit(pit_seed, m) * (hi - lo));
                    }
                    None => censored += 1,
                }
            }
            let (chain, chain_violation) = if r < cfg.chain_patterns {
                let stream = MarkStream::new(&cfg.model, mark_seed(seed, r64, 0));
                let e = exit_delay(&net, &stream, 0, 0, cfg.horizon)?;
                let p = end_to_end_nodes(&net, &stream, 0, 1, 0, cfg.horizon);
                let l = local_delay(&net, &stream, 0, 1, 0, cfg.horizon)?;
                match (e.value(), p.value(), l.value()) {
                    (Some(a), Some(b), Some(c)) => (Some((a, b, c)), !(a <= b && b <= c)),
                    _ => (None, false),
                }
            } else {
                (None, false)
            };
            Ok(PatternResult {
                delays,
                censored,
                inv_pi: 1.0 / pi,
                pit,
                chain,
                chain_violation,
            })
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let fp = fingerprint(&format!(
        "local_delay;{};r={:?};patterns={};marks={};horizon={};chain={}",
        describe_model(&cfg.model),
        cfg.r,
        cfg.patterns,
        cfg.marks_per_pattern,
        cfg.horizon,
        cfg.chain_patterns
    ));
    let all: Vec<f64> = results.iter().flat_map(|p| p.delays.iter().map(|&v| v as f64)).collect();
    let censored: u64 = results.iter().map(|p| p.censored).sum();
    // pattern-clustered standard error: replicate units are patterns
    let per_pattern: Vec<f64> = results
        .iter()
        .filter(|p| !p.delays.is_empty())
        .map(|p| p.delays.iter().sum::<u64>() as f64 / p.delays.len() as f64)
        .collect();
    let (_, clustered_se) = mean_se(&per_pattern);
    let mut local = Estimate::from_censored("local_delay_mean", &all, censored, fp);
    local.se = clustered_se;
    let inv: Vec<f64> = results.iter().map(|p| p.inv_pi).collect();
    let conditional_mean = Estimate::from_samples("conditional_mean_inverse_pi", &inv, fp);
    let pit: Vec<f64> = results.iter().flat_map(|p| p.pit.iter().copied()).collect();
    let ks = (ks_statistic(&pit, |u| u.clamp(0.0, 1.0)), ks_critical(pit.len(), 0.01));
    let chains: Vec<(u64, u64, u64)> = results.iter().filter_map(|p| p.chain).collect();
    let chain_violations = results.iter().filter(|p| p.chain_violation).count() as u64;
    let chain = (!chains.is_empty()).then(|| {
        let n = chains.len() as f64;
        ChainMeans {
            exit: chains.iter().map(|c| c.0 as f64).sum::<f64>() / n,
            end_to_end: chains.iter().map(|c| c.1 as f64).sum::<f64>() / n,
            local: chains.iter().map(|c| c.2 as f64).sum::<f64>() / n,
            samples: chains.len() as u64,
        }
    });

    let mut table = Table::new(LOCAL_HEADER);
    let fps = format!("{fp:016x}");
    let method = "closed_form_laplace_functional+quadrature".to_string();
    table.push(vec![
        "local_delay_mean".into(),
        fmt_f(local.value),
        fmt_f(local.se),
        local.samples.to_string(),
        local.censored.to_string(),
        fmt_f(oracle),
        method.clone(),
        fmt_f(ABS_TOL),
        fps.clone(),
    ]);
    table.push(vec![
        "conditional_mean_inverse_pi".into(),
        fmt_f(conditional_mean.value),
        fmt_f(conditional_mean.se),
        conditional_mean.samples.to_string(),
        "0".into(),
        fmt_f(oracle),
        method,
        fmt_f(ABS_TOL),
        fps.clone(),
    ]);
    table.push(vec![
        "geometric_pit_ks".into(),
        fmt_f(ks.0),
        String::new(),
        pit.len().to_string(),
        censored.to_string(),
        fmt_f(ks.1),
        "ks_critical_1pct".into(),
        String::new(),
        fps.clone(),
    ]);
    if let Some(c) = chain {
        for (name, v) in [("chain_exit_mean", c.exit), ("chain_end_to_end_mean", c.end_to_end), ("chain_local_mean", c.local)] {
            table.push(vec![
                name.into(),
                fmt_f(v),
                String::new(),
                c.samples.to_string(),
                "0".into(),
                String::new(),
                String::new(),
                String::new(),
                fps.clone(),
            ]);
        }
    }
    Ok(LocalDelayReport {
        local,
        conditional_mean,
        oracle,
        ks,
        chain,
        chain_violations,
        table,
        fingerprint: fp,
    })
}
