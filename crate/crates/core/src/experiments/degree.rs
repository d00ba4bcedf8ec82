//! Path counts `H^{out,k}` and `H^{in,k}` on a torus.
//!
//! For each pattern replicate and each sampled start slot `n`, the edge sets
//! of slots `n-K .. n+K-1` are computed once and every node's counts follow
//! from `k` sparse vector updates:
//!
//! `H^{out,k}(v,n) = H^{out,k-1}(v,n+1) + sum_{v->j at n} H^{out,k-1}(j,n+1)`
//! `H^{in,k}(v,n)  = H^{in,k-1}(v,n-1)  + sum_{i->v at n-1} H^{in,k-1}(i,n-1)`

use rayon::prelude::*;

use super::stats::{mean_se, Estimate, Verdict};
use super::{describe_model, fingerprint, fmt_f, mark_seed, pattern_seed, Table};
use crate::error::{param, Result};
use crate::marks::MarkStream;
use crate::params::ModelParams;
use crate::pointproc::sample_model;
use crate::sinr::{Network, Variant};

#[derive(Debug, Clone)]
pub struct DegreeConfig {
    pub model: ModelParams,
    pub k_list: Vec<u32>,
    pub patterns: usize,
    /// Start slots per pattern; their slot ranges never overlap.
    pub slots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeRow {
    pub k: u32,
    pub out_mean: f64,
    pub in_mean: f64,
    /// Mean of per-sample differences of node-averaged counts and its SE.
    pub diff: f64,
    pub diff_se: f64,
    pub out_se: f64,
    pub in_se: f64,
    /// `xi^k` with `xi = 1/T + 2`.
    pub bound: f64,
    pub max_in: u64,
    pub max_out: u64,
    pub in_violations: u64,
    pub samples: u64,
}

#[derive(Debug, Clone)]
pub struct DegreeReport {
    pub rows: Vec<DegreeRow>,
    pub table: Table,
    pub fingerprint: u64,
}

impl DegreeReport {
    pub fn estimates(&self) -> Vec<Estimate> {
        self.rows
            .iter()
            .flat_map(|r| {
                let mk = |name: String, value, se| Estimate {
                    name,
                    value,
                    se,
                    samples: r.samples,
                    censored: 0,
                    lower_bound: false,
                    fingerprint: self.fingerprint,
                };
                [
                    mk(format!("h_out_{}", r.k), r.out_mean, r.out_se),
                    mk(format!("h_in_{}", r.k), r.in_mean, r.in_se),
                ]
            })
            .collect()
    }

    /// Mass transport (difference within `z` joint SE) and the hard bounds.
    pub fn verdicts(&self, z: f64) -> Vec<Verdict> {
        let mut out = Vec::new();
        for r in &self.rows {
            out.push(Verdict::within_se(
                &format!("mass_transport_k{}", r.k),
                r.diff,
                0.0,
                r.diff_se.max(f64::MIN_POSITIVE),
                z,
            ));
            out.push(Verdict::at_most(&format!("h_in_samplewise_k{}", r.k), r.max_in as f64, r.bound));
            out.push(Verdict::at_most(&format!("h_out_mean_k{}", r.k), r.out_mean, r.bound));
            out.push(Verdict::at_most(&format!("h_in_mean_k{}", r.k), r.in_mean, r.bound));
        }
        out
    }
}

pub const DEGREE_HEADER: &[&str] = &[
    "k",
    "h_out_mean",
    "h_out_se",
    "h_in_mean",
    "h_in_se",
    "diff",
    "diff_se",
    "xi_pow_k",
    "max_in",
    "max_out",
    "in_violations",
    "samples",
    "fingerprint",
];

/// Per-sample counts for one `(pattern, start slot)`.
struct Sample {
    /// Per k: (sum over nodes of H^out, sum of H^in, max in, max out, violations).
    per_k: Vec<(f64, f64, u64, u64, u64)>,
    nodes: usize,
}

pub fn run_degree_study(cfg: &DegreeConfig) -> Result<DegreeReport> {
    cfg.model.validate()?;
    if !cfg.model.window.is_torus() {
        return param("degree study needs a torus window; boundary effects would fake a mass-transport violation");
    }
    if cfg.k_list.is_empty() || cfg.patterns == 0 || cfg.slots == 0 {
        return param("degree study needs k values, patterns and slots");
    }
    let kmax = *cfg.k_list.iter().max().unwrap() as i64;
    let xi = 1.0 / cfg.model.threshold + 2.0;
    let seed = cfg.model.seed;

    let per_pattern: Vec<Result<Vec<Sample>>> = (0..cfg.patterns)
        .into_par_iter()
        .map(|r| {
            let pattern = sample_model(&cfg.model, pattern_seed(seed, r as u64))?;
            let net = Network::new(&pattern, &cfg.model);
            let stream = MarkStream::new(&cfg.model, mark_seed(seed, r as u64, 0));
            let n = pattern.len();
            let mut samples = Vec::with_capacity(cfg.slots);
            for s in 0..cfg.slots {
                let start = s as i64 * (2 * kmax + 1) + kmax;
                // edges[m] holds slot start - kmax + m
                let edges: Vec<Vec<(usize, usize)>> = (0..2 * kmax)
                    .map(|m| net.view(&stream, start - kmax + m).edges(Variant::Sinr))
                    .collect();
                let mut per_k = Vec::with_capacity(cfg.k_list.len());
                for &k in &cfg.k_list {
                    let k = k as i64;
                    let mut out = vec![1u64; n];
                    for m in (0..k).rev() {
                        let mut next = out.clone();
                        for &(i, j) in &edges[(kmax + m) as usize] {
                            next[i] += out[j];
                        }
                        out = next;
                    }
                    let mut inn = vec![1u64; n];
                    for m in (kmax - k)..kmax {
                        let mut next = inn.clone();
                        for &(i, j) in &edges[m as usize] {
                            next[j] += inn[i];
                        }
                        inn = next;
                    }
                    let bound = xi.powi(k as i32);
                    per_k.push((
                        out.iter().map(|&x| x as f64).sum(),
                        inn.iter().map(|&x| x as f64).sum(),
                        inn.iter().copied().max().unwrap_or(0),
                        out.iter().copied().max().unwrap_or(0),
                        inn.iter().filter(|&&x| x as f64 > bound).count() as u64,
                    ));
                }
                samples.push(Sample { per_k, nodes: n });
            }
            Ok(samples)
        })
        .collect();
    let mut samples = Vec::new();
    for s in per_pattern {
        samples.extend(s?);
    }
    let samples: Vec<Sample> = samples.into_iter().filter(|s| s.nodes > 0).collect();
    if samples.is_empty() {
        return param("every sampled pattern was empty");
    }

    let fp = fingerprint(&format!("degree;{};k={:?};patterns={};slots={}", describe_model(&cfg.model), cfg.k_list, cfg.patterns, cfg.slots));
    let mut table = Table::new(DEGREE_HEADER);
    let mut rows = Vec::new();
    for (idx, &k) in cfg.k_list.iter().enumerate() {
        let outs: Vec<f64> = samples.iter().map(|s| s.per_k[idx].0 / s.nodes as f64).collect();
        let ins: Vec<f64> = samples.iter().map(|s| s.per_k[idx].1 / s.nodes as f64).collect();
        let diffs: Vec<f64> = outs.iter().zip(&ins).map(|(a, b)| a - b).collect();
        // node-weighted means over all vertices
        let total_nodes: f64 = samples.iter().map(|s| s.nodes as f64).sum();
        let out_mean = samples.iter().map(|s| s.per_k[idx].0).sum::<f64>() / total_nodes;
        let in_mean = samples.iter().map(|s| s.per_k[idx].1).sum::<f64>() / total_nodes;
        let (_, out_se) = mean_se(&outs);
        let (_, in_se) = mean_se(&ins);
        let (diff, diff_se) = mean_se(&diffs);
        let row = DegreeRow {
            k,
            out_mean,
            in_mean,
            diff,
            diff_se,
            out_se,
            in_se,
            bound: xi.powi(k as i32),
            max_in: samples.iter().map(|s| s.per_k[idx].2).max().unwrap(),
            max_out: samples.iter().map(|s| s.per_k[idx].3).max().unwrap(),
            in_violations: samples.iter().map(|s| s.per_k[idx].4).sum(),
            samples: samples.len() as u64,
        };
        table.push(vec![
            k.to_string(),
            fmt_f(row.out_mean),
            fmt_f(row.out_se),
            fmt_f(row.in_mean),
            fmt_f(row.in_se),
            fmt_f(row.diff),
            fmt_f(row.diff_se),
            fmt_f(row.bound),
            row.max_in.to_string(),
            row.max_out.to_string(),
            row.in_violations.to_string(),
            row.samples.to_string(),
            format!("{fp:016x}"),
        ]);
        rows.push(row);
    }
    Ok(DegreeReport {
        rows,
        table,
        fingerprint: fp,
    })
}
