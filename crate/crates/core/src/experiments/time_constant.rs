//! `p^(0, t d) / t` along a doubling distance ladder.
//!
//! One flood from `X(0)` per (pattern, marks) replicate yields the
//! first-passage time to every rung at once.

use rayon::prelude::*;

use super::stats::mean_se;
use super::{describe_model, fingerprint, fmt_f, mark_seed, model_tag, pattern_seed, Table};
use crate::delay::flood;
use crate::error::{param, Result};
use crate::marks::MarkStream;
use crate::params::ModelParams;
use crate::pointproc::{sample_model, Position};
use crate::sinr::Network;

/// Relative change between the top two rungs below which the ratio is
/// called stabilized. An engineering choice; no convergence rate is known.
pub const STABILIZATION_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone)]
pub struct TimeConstantConfig {
    pub model: ModelParams,
    pub ladder: Vec<f64>,
    pub direction: (f64, f64),
    pub patterns: usize,
    pub marks_per_pattern: usize,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    pub t: f64,
    /// Mean first-passage time (a lower bound when `censored > 0`).
    pub mean: f64,
    pub se: f64,
    pub samples: u64,
    pub censored: u64,
    pub ratio: f64,
    pub ratio_se: f64,
}

impl Rung {
    pub fn lower_bound_only(&self) -> bool {
        self.censored > 0
    }
}

#[derive(Debug, Clone)]
pub struct TimeConstantTable {
    pub model_tag: &'static str,
    pub direction: (f64, f64),
    pub rungs: Vec<Rung>,
    /// `|r_m - r_{m-1}| / r_{m-1}` for the top two rungs.
    pub top_change: f64,
    pub stabilized: bool,
    pub strictly_increasing: bool,
    pub censored_fraction: f64,
    pub table: Table,
    pub fingerprint: u64,
}

pub const TIME_CONSTANT_HEADER: &[&str] = &[
    "model",
    "dx",
    "dy",
    "t",
    "mean_delay",
    "se",
    "samples",
    "censored",
    "ratio",
    "ratio_se",
    "status",
    "fingerprint",
];

pub fn run_time_constant_study(cfg: &TimeConstantConfig) -> Result<TimeConstantTable> {
    cfg.model.validate()?;
    let w = cfg.model.window;
    if w.is_torus() {
        return param("time-constant study needs a plane window; the torus creates spurious short paths");
    }
    if cfg.ladder.is_empty() || !cfg.ladder.windows(2).all(|p| p[0] < p[1]) || !(cfg.ladder[0] > 0.0) {
        return param("distance ladder must be positive and strictly increasing");
    }
    if cfg.patterns == 0 || cfg.marks_per_pattern == 0 {
        return param("time-constant study needs patterns and mark replications");
    }
    let (dx, dy) = cfg.direction;
    let norm = (dx * dx + dy * dy).sqrt();
    if !(norm > 0.0) {
        return param("direction must be nonzero");
    }
    let d = (dx / norm, dy / norm);
    let points: Vec<Position> = std::iter::once(0.0)
        .chain(cfg.ladder.iter().copied())
        .map(|t| Position::new(t * d.0, t * d.1))
        .collect();
    for p in &points {
        if !w.interior_contains(*p) {
            return param(format!("ladder point {p:?} falls outside the window interior"));
        }
    }
    let seed = cfg.model.seed;
    let reps = cfg.patterns * cfg.marks_per_pattern;
    let per_pattern: Vec<Result<Vec<Vec<Option<u64>>>>> = (0..cfg.patterns)
        .into_par_iter()
        .map(|r| {
            let pattern = sample_model(&cfg.model, pattern_seed(seed, r as u64))?;
            if pattern.is_empty() {
                return param("sampled pattern is empty");
            }
            let net = Network::new(&pattern, &cfg.model);
            let src = pattern.nearest(points[0]).unwrap();
            let targets: Vec<usize> = points[1..].iter().map(|&p| pattern.nearest(p).unwrap()).collect();
            Ok((0..cfg.marks_per_pattern as u64)
                .map(|m| {
                    let stream = MarkStream::new(&cfg.model, mark_seed(seed, r as u64, m));
                    flood(&net, &stream, src, &targets, 0, cfg.horizon)
                })
                .collect())
        })
        .collect();
    let mut samples: Vec<Vec<Option<u64>>> = Vec::with_capacity(reps);
    for p in per_pattern {
        samples.extend(p?);
    }

    let mut rungs = Vec::new();
    let mut total_censored = 0u64;
    for (k, &t) in cfg.ladder.iter().enumerate() {
        let vals: Vec<f64> = samples
            .iter()
            .map(|s| s[k].map_or(cfg.horizon as f64, |v| v as f64))
            .collect();
        let censored = samples.iter().filter(|s| s[k].is_none()).count() as u64;
        total_censored += censored;
        let (mean, se) = mean_se(&vals);
        rungs.push(Rung {
            t,
            mean,
            se,
            samples: vals.len() as u64,
            censored,
            ratio: mean / t,
            ratio_se: se / t,
        });
    }
    let m = rungs.len();
    let top_change = if m >= 2 {
        ((rungs[m - 1].ratio - rungs[m - 2].ratio) / rungs[m - 2].ratio).abs()
    } else {
        f64::NAN
    };
    let strictly_increasing = rungs.windows(2).all(|p| p[1].ratio > p[0].ratio);
    let tag = model_tag(&cfg.model);
    let fp = fingerprint(&format!(
        "time_constant;{};ladder={:?};d={:?};patterns={};marks={};horizon={}",
        describe_model(&cfg.model),
        cfg.ladder,
        cfg.direction,
        cfg.patterns,
        cfg.marks_per_pattern,
        cfg.horizon
    ));
    let mut table = Table::new(TIME_CONSTANT_HEADER);
    for r in &rungs {
        table.push(vec![
            tag.to_string(),
            fmt_f(d.0),
            fmt_f(d.1),
            fmt_f(r.t),
            fmt_f(r.mean),
            fmt_f(r.se),
            r.samples.to_string(),
            r.censored.to_string(),
            fmt_f(r.ratio),
            fmt_f(r.ratio_se),
            if r.censored == r.samples {
                "lower_bound_only".into()
            } else if r.censored > 0 {
                "lower_bound".into()
            } else {
                "ok".into()
            },
            format!("{fp:016x}"),
        ]);
    }
    Ok(TimeConstantTable {
        model_tag: tag,
        direction: d,
        rungs,
        top_change,
        stabilized: top_change < STABILIZATION_THRESHOLD,
        strictly_increasing,
        censored_fraction: total_censored as f64 / (reps * m) as f64,
        table,
        fingerprint: fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::NoiseLaw;
    use crate::pointproc::Window;

    fn cfg() -> TimeConstantConfig {
        let w = Window::plane(40.0, 16.0, 2.0).with_origin(Position::new(-8.0, -8.0));
        TimeConstantConfig {
            model: ModelParams::poisson(1.0, 0.5, 1.0, 1.0, 1.0, 4.0, NoiseLaw::Constant(0.1), w)
                .with_grid(2.0)
                .with_seed(8),
            ladder: vec![5.0, 10.0, 20.0],
            direction: (1.0, 0.0),
            patterns: 2,
            marks_per_pattern: 3,
            horizon: 5000,
        }
    }

    #[test]
    fn means_grow_along_the_ladder() {
        let t = run_time_constant_study(&cfg()).unwrap();
        assert_eq!(t.rungs.len(), 3);
        assert_eq!(t.model_tag, "poisson+grid");
        assert!(t.rungs.windows(2).all(|p| p[1].mean >= p[0].mean));
        assert_eq!(t.censored_fraction, 0.0);
        let again = run_time_constant_study(&cfg()).unwrap();
        assert_eq!(t.table.to_csv(), again.table.to_csv());
    }

    #[test]
    fn ladder_outside_window_is_refused() {
        let mut c = cfg();
        c.ladder = vec![5.0, 40.0];
        assert!(run_time_constant_study(&c).is_err());
        let mut c = cfg();
        c.ladder = vec![10.0, 5.0];
        assert!(run_time_constant_study(&c).is_err());
        let mut c = cfg();
        c.model.window = Window::torus(40.0, 16.0);
        assert!(run_time_constant_study(&c).is_err());
    }
}
