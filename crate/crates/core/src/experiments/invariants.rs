//! Hard invariants that must hold on every realization: the in-degree
//! bound, SINR-in-SNR inclusion, the delay chain and subadditivity of the
//! end-to-end delay.

use rayon::prelude::*;

use super::{describe_model, fingerprint, mark_seed, pattern_seed, Table};
use crate::delay::{end_to_end_nodes, exit_delay, local_delay, subadditivity_check};
use crate::error::{param, Result};
use crate::marks::{derive_seed, MarkStream};
use crate::params::ModelParams;
use crate::pointproc::sample_model;
use crate::sinr::{Network, Variant};

#[derive(Debug, Clone)]
pub struct InvariantConfig {
    pub model: ModelParams,
    pub patterns: usize,
    /// Slots per pattern scanned for the degree bound and inclusion.
    pub slots: usize,
    /// Delay-chain pairs and subadditivity triples per pattern.
    pub pairs: usize,
    pub horizon: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckCount {
    pub samples: u64,
    pub violations: u64,
    pub inconclusive: u64,
}

impl CheckCount {
    fn add(&mut self, o: CheckCount) {
        self.samples += o.samples;
        self.violations += o.violations;
        self.inconclusive += o.inconclusive;
    }

    fn record(&mut self, ok: Option<bool>) {
        self.samples += 1;
        match ok {
            Some(true) => {}
            Some(false) => self.violations += 1,
            None => self.inconclusive += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub in_degree: CheckCount,
    pub max_in_degree: u64,
    pub inclusion: CheckCount,
    pub chain: CheckCount,
    pub subadditivity: CheckCount,
    pub table: Table,
    pub fingerprint: u64,
}

impl InvariantReport {
    pub fn checks(&self) -> [(&'static str, CheckCount); 4] {
        [
            ("in_degree_bound", self.in_degree),
            ("sinr_in_snr", self.inclusion),
            ("delay_chain", self.chain),
            ("subadditivity", self.subadditivity),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.violations == 0)
    }
}

pub const INVARIANT_HEADER: &[&str] = &["check", "samples", "violations", "inconclusive", "passed", "fingerprint"];

#[derive(Default)]
struct Partial {
    in_degree: CheckCount,
    max_in: u64,
    inclusion: CheckCount,
    chain: CheckCount,
    sub: CheckCount,
}

pub fn run_invariant_suite(cfg: &InvariantConfig) -> Result<InvariantReport> {
    cfg.model.validate()?;
    if cfg.patterns == 0 || cfg.horizon == 0 {
        return param("invariant suite needs patterns and a horizon");
    }
    let seed = cfg.model.seed;
    let xi = 1.0 / cfg.model.threshold + 2.0;
    let parts: Vec<Result<Partial>> = (0..cfg.patterns)
        .into_par_iter()
        .map(|r| {
            let r64 = r as u64;
            let pattern = sample_model(&cfg.model, pattern_seed(seed, r64))?;
            let mut part = Partial::default();
            let n = pattern.len();
            if n < 2 {
                return Ok(part);
            }
            let net = Network::new(&pattern, &cfg.model);
            let stream = MarkStream::new(&cfg.model, mark_seed(seed, r64, 0));
            for slot in 0..cfg.slots as i64 {
                let view = net.view(&stream, slot);
                let edges = view.edges(Variant::Sinr);
                let mut indeg = vec![0u64; n];
                for &(i, j) in &edges {
                    indeg[j] += 1;
                    part.inclusion.record(Some(view.edge(i, j, Variant::Snr)));
                }
                for &d in &indeg {
                    part.in_degree.record(Some(d as f64 <= xi));
                    part.max_in = part.max_in.max(d);
                }
            }
            let pick = |s: u64, tag: u64| (derive_seed(derive_seed(seed ^ 0x696e_7661, r64), 3 * s + tag) % n as u64) as usize;
            for s in 0..cfg.pairs as u64 {
                let i = pick(s, 0);
                let j = (0..n)
                    .filter(|&k| k != i)
                    .min_by(|&a, &b| pattern.dist_sq(i, a).total_cmp(&pattern.dist_sq(i, b)))
                    .expect("at least two nodes");
                let start = (s * 64) as i64;
                let e = exit_delay(&net, &stream, i, start, cfg.horizon)?;
                let p = end_to_end_nodes(&net, &stream, i, j, start, cfg.horizon);
                let l = local_delay(&net, &stream, i, j, start, cfg.horizon)?;
                let ok = match (e.value(), p.value(), l.value(), e.snr_trials, e.trials) {
                    (Some(ev), Some(pv), Some(lv), Some(ts), Some(t)) => Some(ts <= t && t <= ev && ev <= pv && pv <= lv),
                    _ => None,
                };
                part.chain.record(ok);

                let (x, y, z) = (pattern.position(i), pattern.position(pick(s, 1)), pattern.position(pick(s, 2)));
                let rec = subadditivity_check(&net, &stream, x, y, z, start, cfg.horizon)?;
                part.sub.record(rec.satisfied);
            }
            Ok(part)
        })
        .collect();
    let mut total = Partial::default();
    for p in parts {
        let p = p?;
        total.in_degree.add(p.in_degree);
        total.max_in = total.max_in.max(p.max_in);
        total.inclusion.add(p.inclusion);
        total.chain.add(p.chain);
        total.sub.add(p.sub);
    }
    let fp = fingerprint(&format!(
        "invariants;{};patterns={};slots={};pairs={};horizon={}",
        describe_model(&cfg.model),
        cfg.patterns,
        cfg.slots,
        cfg.pairs,
        cfg.horizon
    ));
    let mut report = InvariantReport {
        in_degree: total.in_degree,
        max_in_degree: total.max_in,
        inclusion: total.inclusion,
        chain: total.chain,
        subadditivity: total.sub,
        table: Table::new(INVARIANT_HEADER),
        fingerprint: fp,
    };
    for (name, c) in report.checks() {
        report.table.push(vec![
            name.into(),
            c.samples.to_string(),
            c.violations.to_string(),
            c.inconclusive.to_string(),
            (c.violations == 0).to_string(),
            format!("{fp:016x}"),
        ]);
    }
    Ok(report)
}
