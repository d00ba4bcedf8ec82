//! Survival curves of the exit delay, the trial count and the SNR trial
//! count at a Palm point placed at the origin.

use rayon::prelude::*;

use super::stats::{ols_slope, Estimate, Verdict};
use super::{describe_model, fingerprint, fmt_f, mark_seed, pattern_seed, Table};
use crate::delay::{exit_delay, DelayOutcome};
use crate::error::{param, Result};
use crate::marks::MarkStream;
use crate::oracle::{self, TailModel, ABS_TOL};
use crate::params::{ModelParams, NoiseLaw};
use crate::pointproc::{palm_add, sample_model, Position};
use crate::sinr::Network;

#[derive(Debug, Clone)]
pub struct ExitTailConfig {
    pub model: ModelParams,
    pub qs: Vec<u64>,
    pub replicates: usize,
    pub horizon: u64,
    /// Range of `q` for the log-log slope of the exit survival.
    pub slope_range: (u64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailStatistic {
    Exit,
    Trials,
    SnrTrials,
}

impl TailStatistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            TailStatistic::Exit => "exit",
            TailStatistic::Trials => "trials",
            TailStatistic::SnrTrials => "snr_trials",
        }
    }
}

/// `P^0{X > q}` for one statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalPoint {
    pub statistic: TailStatistic,
    pub q: u64,
    /// Samples known to exceed `q`, over all samples.
    pub estimate: f64,
    pub se: f64,
    pub samples: u64,
    /// Samples whose relation to `q` is unknown because of the horizon.
    pub censored: u64,
    pub oracle_exact: Option<f64>,
    pub oracle_lower_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExitTailReport {
    pub points: Vec<SurvivalPoint>,
    /// Fraction of exit delays censored at the horizon.
    pub censored_fraction: f64,
    /// Least-squares slope of `ln P{exit > q}` against `ln q` over the slope range.
    pub exit_slope: Option<f64>,
    /// `min q P{exit > q}` over the slope range.
    pub min_q_survival: Option<f64>,
    /// `ln Q` past which the oracle's lower bound exceeds `1/q`.
    pub log_crossover: Option<f64>,
    /// Censoring exceeded 50% at the smallest `q`.
    pub warning: bool,
    pub table: Table,
    pub fingerprint: u64,
    pub outcomes: Vec<DelayOutcome>,
}

pub const TAIL_HEADER: &[&str] = &[
    "statistic",
    "q",
    "survival",
    "se",
    "samples",
    "censored",
    "oracle_value",
    "oracle_method",
    "tolerance",
    "oracle_lower_bound",
    "inverse_q",
    "fingerprint",
];

impl ExitTailReport {
    pub fn point(&self, statistic: TailStatistic, q: u64) -> Option<&SurvivalPoint> {
        self.points.iter().find(|p| p.statistic == statistic && p.q == q)
    }

    /// SNR-trial survival against the exact oracle, using the null SE
    /// `sqrt(p0 (1 - p0) / n)`.
    pub fn snr_verdicts(&self, z: f64) -> Vec<Verdict> {
        self.points
            .iter()
            .filter(|p| p.statistic == TailStatistic::SnrTrials)
            .filter_map(|p| {
                let p0 = p.oracle_exact?;
                let se = (p0 * (1.0 - p0) / p.samples as f64).sqrt();
                Some(Verdict::within_se(&format!("snr_survival_q{}", p.q), p.estimate, p0, se, z))
            })
            .collect()
    }

    pub fn estimates(&self) -> Vec<Estimate> {
        self.points
            .iter()
            .map(|p| Estimate {
                name: format!("survival_{}_q{}", p.statistic.as_str(), p.q),
                value: p.estimate,
                se: p.se,
                samples: p.samples,
                censored: p.censored,
                lower_bound: p.censored > 0,
                fingerprint: self.fingerprint,
            })
            .collect()
    }
}

fn exceeds(o: &DelayOutcome, stat: TailStatistic, q: u64) -> Option<bool> {
    match stat {
        TailStatistic::Exit => o.exceeds(q),
        TailStatistic::Trials => {
            let t = o.trials?;
            if t > q {
                Some(true)
            } else if o.is_censored() {
                None
            } else {
                Some(false)
            }
        }
        TailStatistic::SnrTrials => {
            let t = o.snr_trials?;
            if t > q {
                Some(true)
            } else if o.snr_resolved {
                Some(false)
            } else {
                None
            }
        }
    }
}

pub fn run_exit_tail_study(cfg: &ExitTailConfig) -> Result<ExitTailReport> {
    cfg.model.validate()?;
    if cfg.model.grid_step.is_some() {
        return param("exit tail study needs a pure Poisson model");
    }
    if !matches!(cfg.model.noise, NoiseLaw::Constant(_)) {
        return param("exit tail study needs constant noise");
    }
    if cfg.replicates == 0 || cfg.horizon == 0 || cfg.qs.is_empty() {
        return param("exit tail study needs replicates, a horizon and q values");
    }
    let origin = Position::ORIGIN;
    if !cfg.model.window.contains(origin) {
        return param("the window must contain the origin");
    }
    let seed = cfg.model.seed;
    let outcomes: Vec<Result<DelayOutcome>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let base = sample_model(&cfg.model, pattern_seed(seed, r as u64))?;
            let pattern = palm_add(&base, &[origin])?;
            let net = Network::new(&pattern, &cfg.model);
            let stream = MarkStream::new(&cfg.model, mark_seed(seed, r as u64, 0));
            exit_delay(&net, &stream, 0, 0, cfg.horizon)
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let tm = TailModel::new(&cfg.model)?;
    let n = outcomes.len() as u64;
    let mut points = Vec::new();
    for stat in [TailStatistic::Exit, TailStatistic::Trials, TailStatistic::SnrTrials] {
        for &q in &cfg.qs {
            let mut hits = 0u64;
            let mut unknown = 0u64;
            for o in &outcomes {
                match exceeds(o, stat, q) {
                    Some(true) => hits += 1,
                    Some(false) => {}
                    None => unknown += 1,
                }
            }
            let est = Estimate::proportion("", hits, n, 0);
            let (exact, lb) = if stat == TailStatistic::SnrTrials {
                let p = tm.point(q as f64)?;
                (Some(p.exact), Some(p.lower_bound))
            } else {
                (None, None)
            };
            points.push(SurvivalPoint {
                statistic: stat,
                q,
                estimate: est.value,
                se: est.se,
                samples: n,
                censored: unknown,
                oracle_exact: exact,
                oracle_lower_bound: lb,
            });
        }
    }

    let exit_censored = outcomes.iter().filter(|o| o.is_censored()).count();
    let (lo, hi) = cfg.slope_range;
    let range: Vec<u64> = {
        let mut v = Vec::new();
        let mut q = lo.max(1) as f64;
        while q <= hi as f64 {
            v.push(q.round() as u64);
            q *= 1.25;
        }
        v.dedup();
        v
    };
    let surv: Vec<(f64, f64)> = range
        .iter()
        .map(|&q| {
            let s = outcomes.iter().filter(|o| o.exceeds(q) == Some(true)).count() as f64 / n as f64;
            (q as f64, s)
        })
        .collect();
    let positive: Vec<&(f64, f64)> = surv.iter().filter(|(_, s)| *s > 0.0).collect();
    let exit_slope = (positive.len() >= 2).then(|| {
        let x: Vec<f64> = positive.iter().map(|(q, _)| q.ln()).collect();
        let y: Vec<f64> = positive.iter().map(|(_, s)| s.ln()).collect();
        ols_slope(&x, &y)
    });
    let min_q_survival = surv.iter().map(|(q, s)| q * s).reduce(f64::min);
    let log_crossover = tm.log_crossover().ok();
    let qmin = *cfg.qs.iter().min().unwrap();
    let warning = points
        .iter()
        .filter(|p| p.q == qmin)
        .any(|p| p.censored as f64 > 0.5 * n as f64);

    let fp = fingerprint(&format!(
        "exit_tail;{};qs={:?};replicates={};horizon={}",
        describe_model(&cfg.model),
        cfg.qs,
        cfg.replicates,
        cfg.horizon
    ));
    let mut table = Table::new(TAIL_HEADER);
    for p in &points {
        let (ov, om, tol) = match p.oracle_exact {
            Some(v) => (fmt_f(v), "quadrature".to_string(), fmt_f(ABS_TOL)),
            None => (String::new(), String::new(), String::new()),
        };
        table.push(vec![
            p.statistic.as_str().to_string(),
            p.q.to_string(),
            fmt_f(p.estimate),
            fmt_f(p.se),
            p.samples.to_string(),
            p.censored.to_string(),
            ov,
            om,
            tol,
            p.oracle_lower_bound.map(fmt_f).unwrap_or_default(),
            fmt_f(1.0 / p.q as f64),
            format!("{fp:016x}"),
        ]);
    }
    Ok(ExitTailReport {
        points,
        censored_fraction: exit_censored as f64 / n as f64,
        exit_slope,
        min_q_survival,
        log_crossover,
        warning,
        table,
        fingerprint: fp,
        outcomes,
    })
}

/// Convenience wrapper returning just the oracle curve for the study's q values.
pub fn oracle_curve(cfg: &ExitTailConfig) -> Result<oracle::TailCurve> {
    oracle::snr_trial_survival(&cfg.qs, &cfg.model)
}
