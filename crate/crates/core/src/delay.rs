//! Local, exit and end-to-end delays on the space-time graph.
//!
//! Delays count edges of space-time paths. A local delay of `1` means the
//! direct link succeeds in the very first slot; in general the value is the
//! number of waiting slots plus one (the stay-then-jump path length), so that
//! given the pattern it is geometric on `{1, 2, ...}` with mean `1/pi_{i,j}`.
//!
//! End-to-end delays are first-passage times of flooding: every node that
//! holds the packet keeps it (self edges) and forwards it on every edge.

use std::io::Write;

use crate::error::{param, Error, Result};
use crate::marks::MarkStream;
use crate::pointproc::Position;
use crate::sinr::{Network, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    Local,
    Exit,
    EndToEnd,
}

impl DelayKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DelayKind::Local => "local",
            DelayKind::Exit => "exit",
            DelayKind::EndToEnd => "end_to_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayValue {
    Observed(u64),
    /// Nothing happened within `horizon` slots; the delay exceeds `horizon`.
    /// `isolated` marks exit delays of a node with no other node to reach.
    Censored { horizon: u64, isolated: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayOutcome {
    pub kind: DelayKind,
    pub value: DelayValue,
    /// Slots up to and including the exit with `e_i = 1`.
    pub trials: Option<u64>,
    /// Same count for the first exit on the SNR graph.
    pub snr_trials: Option<u64>,
    /// Whether the SNR exit happened within the horizon (so `snr_trials` is exact).
    pub snr_resolved: bool,
}

impl DelayOutcome {
    fn plain(kind: DelayKind, value: DelayValue) -> Self {
        DelayOutcome {
            kind,
            value,
            trials: None,
            snr_trials: None,
            snr_resolved: false,
        }
    }

    pub fn value(&self) -> Option<u64> {
        match self.value {
            DelayValue::Observed(v) => Some(v),
            DelayValue::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self.value, DelayValue::Censored { .. })
    }

    /// Known to exceed `q`: observed above `q`, or censored at a horizon `>= q`.
    pub fn exceeds(&self, q: u64) -> Option<bool> {
        match self.value {
            DelayValue::Observed(v) => Some(v > q),
            DelayValue::Censored { horizon, .. } if horizon >= q => Some(true),
            DelayValue::Censored { .. } => None,
        }
    }

    /// `value` for observed delays, `horizon` (a lower bound) otherwise.
    pub fn value_or_horizon(&self) -> u64 {
        match self.value {
            DelayValue::Observed(v) => v,
            DelayValue::Censored { horizon, .. } => horizon,
        }
    }
}

/// `L_{i,j}(start)` as stay-then-jump path length, censored after `horizon` slots.
pub fn local_delay(
    net: &Network<'_>,
    stream: &MarkStream,
    i: usize,
    j: usize,
    start: i64,
    horizon: u64,
) -> Result<DelayOutcome> {
    if i == j {
        return Err(Error::Domain(format!("local delay from node {i} to itself")));
    }
    check_ids(net, &[i, j])?;
    if horizon == 0 {
        return param("local delay horizon must be at least 1");
    }
    for k in 0..horizon {
        let slot = start + k as i64;
        if stream.transmits(i, slot) && !stream.transmits(j, slot) {
            let view = net.view(stream, slot);
            if view.link_given_access(i, j, Variant::Sinr) {
                return Ok(DelayOutcome::plain(DelayKind::Local, DelayValue::Observed(k + 1)));
            }
        }
    }
    Ok(DelayOutcome::plain(
        DelayKind::Local,
        DelayValue::Censored {
            horizon,
            isolated: false,
        },
    ))
}

/// `L_i(start) = min_j L_{i,j}(start)` with SINR and SNR trial counts.
pub fn exit_delay(net: &Network<'_>, stream: &MarkStream, i: usize, start: i64, horizon: u64) -> Result<DelayOutcome> {
    check_ids(net, &[i])?;
    if horizon == 0 {
        return param("exit delay horizon must be at least 1");
    }
    if net.len() < 2 {
        return Ok(DelayOutcome {
            kind: DelayKind::Exit,
            value: DelayValue::Censored { horizon, isolated: true },
            trials: Some(0),
            snr_trials: Some(0),
            snr_resolved: false,
        });
    }
    let mut trials = 0;
    let mut snr_trials = 0;
    let mut snr_resolved = false;
    for k in 0..horizon {
        let slot = start + k as i64;
        if !stream.transmits(i, slot) {
            continue;
        }
        trials += 1;
        if !snr_resolved {
            snr_trials += 1;
        }
        let view = net.view(stream, slot);
        let mut exit = false;
        net.for_each_link_candidate(i, |j| {
            if exit || view.transmits(j) {
                return;
            }
            if !snr_resolved && view.link_given_access(i, j, Variant::Snr) {
                snr_resolved = true;
            }
            if snr_resolved && view.link_given_access(i, j, Variant::Sinr) {
                exit = true;
            }
        });
        if exit {
            return Ok(DelayOutcome {
                kind: DelayKind::Exit,
                value: DelayValue::Observed(k + 1),
                trials: Some(trials),
                snr_trials: Some(snr_trials),
                snr_resolved,
            });
        }
    }
    Ok(DelayOutcome {
        kind: DelayKind::Exit,
        value: DelayValue::Censored {
            horizon,
            isolated: false,
        },
        trials: Some(trials),
        snr_trials: Some(snr_trials),
        snr_resolved,
    })
}

/// `P(x, y, start)`: flooding first-passage time from `X(x)` to `X(y)`.
pub fn end_to_end(
    net: &Network<'_>,
    stream: &MarkStream,
    x: Position,
    y: Position,
    start: i64,
    horizon: u64,
) -> Result<DelayOutcome> {
    let pattern = net.pattern();
    let src = pattern
        .nearest(x)
        .ok_or_else(|| Error::Domain("end-to-end delay on an empty pattern".into()))?;
    let dst = pattern.nearest(y).expect("pattern is nonempty");
    Ok(end_to_end_nodes(net, stream, src, dst, start, horizon))
}

/// `P_{src,dst}(start)` between two nodes.
pub fn end_to_end_nodes(
    net: &Network<'_>,
    stream: &MarkStream,
    src: usize,
    dst: usize,
    start: i64,
    horizon: u64,
) -> DelayOutcome {
    let value = match flood(net, stream, src, &[dst], start, horizon)[0] {
        Some(v) => DelayValue::Observed(v),
        None => DelayValue::Censored {
            horizon,
            isolated: false,
        },
    };
    DelayOutcome::plain(DelayKind::EndToEnd, value)
}

/// First-passage times of a flood started at `(src, start)` to each target,
/// `None` for targets not reached within `horizon` slots.
pub fn flood(
    net: &Network<'_>,
    stream: &MarkStream,
    src: usize,
    targets: &[usize],
    start: i64,
    horizon: u64,
) -> Vec<Option<u64>> {
    let n = net.len();
    let mut result: Vec<Option<u64>> = targets.iter().map(|&t| (t == src).then_some(0)).collect();
    let mut unresolved = result.iter().filter(|r| r.is_none()).count();
    let mut is_target = vec![false; n];
    for &t in targets {
        is_target[t] = true;
    }
    let mut reached = vec![false; n];
    reached[src] = true;
    let mut fresh: Vec<usize> = Vec::new();
    let mut marked = vec![false; n];

    if net.cutoff().is_none() {
        let mut active = vec![src];
        let mut m = 0;
        while unresolved > 0 && m < horizon {
            let view = net.view(stream, start + m as i64);
            for &i in &active {
                if !view.transmits(i) {
                    continue;
                }
                for j in 0..n {
                    if j == i || reached[j] || marked[j] || view.transmits(j) {
                        continue;
                    }
                    if view.link_given_access(i, j, Variant::Sinr) {
                        marked[j] = true;
                        fresh.push(j);
                    }
                }
            }
            m += 1;
            settle(&mut fresh, &mut marked, &mut reached, &is_target, targets, &mut result, &mut unresolved, m);
            active.append(&mut fresh);
            if active.len() == n {
                // everyone has the packet; nothing left to reach
                break;
            }
        }
        return result;
    }

    // Reached nodes with the positions (into their candidate lists) of
    // candidates not known to be reached; a node leaves once that list empties.
    let mut active: Vec<(usize, Vec<u32>)> = vec![(src, pending(net, src, &reached))];
    let mut m = 0;
    while unresolved > 0 && m < horizon {
        let view = net.view(stream, start + m as i64);
        for (i, open) in active.iter_mut() {
            let i = *i;
            if !view.transmits(i) {
                continue;
            }
            let (cands, gains) = net.link_candidates(i).expect("cutoff exists");
            open.retain(|&k| {
                let j = cands[k as usize];
                if reached[j] {
                    return false;
                }
                if !marked[j] && !view.transmits(j) && view.link_given_gain(i, j, gains[k as usize], Variant::Sinr) {
                    marked[j] = true;
                    fresh.push(j);
                }
                true
            });
        }
        m += 1;
        settle(&mut fresh, &mut marked, &mut reached, &is_target, targets, &mut result, &mut unresolved, m);
        active.retain(|(_, open)| !open.is_empty());
        for j in fresh.drain(..) {
            let open = pending(net, j, &reached);
            if !open.is_empty() {
                active.push((j, open));
            }
        }
    }
    result
}

fn pending(net: &Network<'_>, i: usize, reached: &[bool]) -> Vec<u32> {
    let (cands, _) = net.link_candidates(i).expect("cutoff exists");
    (0..cands.len() as u32).filter(|&k| !reached[cands[k as usize]]).collect()
}

/// Marks the nodes in `fresh` (sorted on return) as reached at time `m`.
#[allow(clippy::too_many_arguments)]
fn settle(
    fresh: &mut [usize],
    marked: &mut [bool],
    reached: &mut [bool],
    is_target: &[bool],
    targets: &[usize],
    result: &mut [Option<u64>],
    unresolved: &mut usize,
    m: u64,
) {
    fresh.sort_unstable();
    for &j in fresh.iter() {
        marked[j] = false;
        reached[j] = true;
        if is_target[j] {
            for (r, &t) in result.iter_mut().zip(targets) {
                if t == j && r.is_none() {
                    *r = Some(m);
                    *unresolved -= 1;
                }
            }
        }
    }
}

fn check_ids(net: &Network<'_>, ids: &[usize]) -> Result<()> {
    for &id in ids {
        if id >= net.len() {
            return Err(Error::Domain(format!("node {id} not in pattern of {} points", net.len())));
        }
    }
    Ok(())
}

/// Both sides of `P(x,z,n) <= P(x,y,n) + P(y,z,n+P(x,y,n))` on one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubadditivityRecord {
    pub lhs: Option<u64>,
    pub rhs: Option<u64>,
    /// `None` when a delay was censored and the check is inconclusive.
    pub satisfied: Option<bool>,
}

pub fn subadditivity_check(
    net: &Network<'_>,
    stream: &MarkStream,
    x: Position,
    y: Position,
    z: Position,
    start: i64,
    horizon: u64,
) -> Result<SubadditivityRecord> {
    let lhs = end_to_end(net, stream, x, z, start, horizon)?.value();
    let first = end_to_end(net, stream, x, y, start, horizon)?.value();
    let rhs = match first {
        Some(a) => end_to_end(net, stream, y, z, start + a as i64, horizon)?
            .value()
            .map(|b| a + b),
        None => None,
    };
    let satisfied = match (lhs, rhs) {
        (Some(l), Some(r)) => Some(l <= r),
        _ => None,
    };
    Ok(SubadditivityRecord { lhs, rhs, satisfied })
}

/// One serialized delay measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRecord {
    pub outcome: DelayOutcome,
    pub i: usize,
    pub j: Option<usize>,
    pub start: i64,
    pub seed: u64,
}

pub const DELAY_CSV_HEADER: &str = "kind,i,j,start,value,censored,trials,snr_trials,seed";

pub fn write_delay_csv<W: Write>(records: &[DelayRecord], mut out: W) -> Result<()> {
    writeln!(out, "{DELAY_CSV_HEADER}")?;
    for r in records {
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.outcome.kind.as_str(),
            r.i,
            r.j.map(|j| j.to_string()).unwrap_or_default(),
            r.start,
            r.outcome.value_or_horizon(),
            u8::from(r.outcome.is_censored()),
            opt(r.outcome.trials),
            opt(r.outcome.snr_trials),
            r.seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marks::derive_seed;
    use crate::params::{ModelParams, NoiseLaw};
    use crate::pointproc::{palm_add, sample_poisson, Origin, PointPattern, Window};

    fn model(noise: NoiseLaw) -> ModelParams {
        ModelParams::poisson(1.0, 0.5, 1.0, 1.0, 1.0, 4.0, noise, Window::torus(20.0, 20.0))
    }

    fn pair(d: f64) -> PointPattern {
        PointPattern::new(
            Window::plane(20.0, 20.0, 0.0),
            [(Position::new(5.0, 5.0), Origin::Palm), (Position::new(5.0 + d, 5.0), Origin::Palm)],
        )
        .unwrap()
    }

    #[test]
    fn immediate_success_is_one() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = pair(1.0);
        let net = Network::new(&pat, &m);
        let st = MarkStream::new(&m, 1);
        let slot = (0..1000).find(|&s| net.view(&st, s).edge(0, 1, Variant::Sinr)).unwrap();
        let out = local_delay(&net, &st, 0, 1, slot, 10).unwrap();
        assert_eq!(out.value(), Some(1));
        assert!(matches!(local_delay(&net, &st, 0, 0, 0, 10), Err(Error::Domain(_))));
        assert!(local_delay(&net, &st, 0, 1, 0, 0).is_err());
    }

    #[test]
    fn isolated_pair_matches_geometric_mean() {
        // pi = p(1-p) exp(-mu T w l(1)) = 0.25 e^{-0.1}
        let m = model(NoiseLaw::Constant(0.1));
        let pat = pair(1.0);
        let net = Network::new(&pat, &m);
        let n = 100_000;
        let mut sum = 0u64;
        for r in 0..n {
            let st = MarkStream::new(&m, derive_seed(77, r));
            sum += local_delay(&net, &st, 0, 1, 0, 100_000).unwrap().value().unwrap();
        }
        let mean = sum as f64 / n as f64;
        let expected = 1.0 / (0.25 * (-0.1f64).exp());
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn two_node_exit_equals_local_equals_end_to_end() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = pair(1.3);
        let net = Network::new(&pat, &m);
        for r in 0..200 {
            let st = MarkStream::new(&m, r);
            let l = local_delay(&net, &st, 0, 1, 0, 10_000).unwrap();
            let e = exit_delay(&net, &st, 0, 0, 10_000).unwrap();
            let p = end_to_end(&net, &st, pat.position(0), pat.position(1), 0, 10_000).unwrap();
            assert_eq!(l.value(), e.value());
            assert_eq!(l.value(), p.value());
        }
    }

    #[test]
    fn single_point_exit_is_flagged() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = palm_add(&PointPattern::empty(m.window), &[Position::ORIGIN]).unwrap();
        let net = Network::new(&pat, &m);
        let out = exit_delay(&net, &MarkStream::new(&m, 0), 0, 0, 50).unwrap();
        assert_eq!(out.value, DelayValue::Censored { horizon: 50, isolated: true });
    }

    #[test]
    fn same_nearest_point_is_zero() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = sample_poisson(1.0, m.window, 3).unwrap();
        let net = Network::new(&pat, &m);
        let st = MarkStream::new(&m, 3);
        let x = pat.position(5);
        let out = end_to_end(&net, &st, x, Position::new(x.x + 1e-6, x.y), 0, 0).unwrap();
        assert_eq!(out.value(), Some(0));
        let empty = PointPattern::empty(m.window);
        let net = Network::new(&empty, &m);
        assert!(matches!(end_to_end(&net, &st, x, x, 0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn chain_inequalities_hold() {
        for noise in [NoiseLaw::Constant(0.1), NoiseLaw::Off] {
            let m = model(noise);
            for r in 0..6u64 {
                let pat = sample_poisson(1.0, m.window, r).unwrap();
                let net = Network::new(&pat, &m);
                let st = MarkStream::new(&m, r + 100);
                for i in (0..pat.len()).step_by(53) {
                    let j = (0..pat.len())
                        .filter(|&j| j != i)
                        .min_by(|&a, &b| pat.dist_sq(i, a).total_cmp(&pat.dist_sq(i, b)))
                        .unwrap();
                    let e = exit_delay(&net, &st, i, 0, 5000).unwrap();
                    let p = end_to_end_nodes(&net, &st, i, j, 0, 5000);
                    let l = local_delay(&net, &st, i, j, 0, 5000).unwrap();
                    let (t, ts) = (e.trials.unwrap(), e.snr_trials.unwrap());
                    let (ev, pv, lv) = (e.value().unwrap(), p.value().unwrap(), l.value().unwrap());
                    assert!(ts <= t && t <= ev && ev <= pv && pv <= lv, "{ts} {t} {ev} {pv} {lv}");
                }
            }
        }
    }

    #[test]
    fn horizon_monotonicity() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = sample_poisson(1.0, m.window, 9).unwrap();
        let net = Network::new(&pat, &m);
        let st = MarkStream::new(&m, 9);
        let a = end_to_end_nodes(&net, &st, 0, 1, 0, 400);
        let b = end_to_end_nodes(&net, &st, 0, 1, 0, 4000);
        if let Some(v) = a.value() {
            assert_eq!(b.value(), Some(v));
        }
        let e1 = exit_delay(&net, &st, 2, 0, 3).unwrap();
        let e2 = exit_delay(&net, &st, 2, 0, 3000).unwrap();
        if let Some(v) = e1.value() {
            assert_eq!(e2.value(), Some(v));
        }
    }

    #[test]
    fn subadditivity_degenerate_cases() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = sample_poisson(1.0, m.window, 11).unwrap();
        let net = Network::new(&pat, &m);
        let st = MarkStream::new(&m, 11);
        let x = pat.position(0);
        let z = pat.position(1);
        let rec = subadditivity_check(&net, &st, x, x, z, 0, 10_000).unwrap();
        assert_eq!(rec.lhs, rec.rhs);
        assert_eq!(rec.satisfied, Some(true));
        let rec = subadditivity_check(&net, &st, x, z, x, 0, 10_000).unwrap();
        assert_eq!(rec.lhs, Some(0));
        assert_eq!(rec.satisfied, Some(true));
    }

    #[test]
    fn csv_rows() {
        let m = model(NoiseLaw::Constant(0.1));
        let pat = pair(1.0);
        let net = Network::new(&pat, &m);
        let st = MarkStream::new(&m, 5);
        let e = exit_delay(&net, &st, 0, 0, 1000).unwrap();
        let recs = [DelayRecord {
            outcome: e,
            i: 0,
            j: None,
            start: 0,
            seed: 5,
        }];
        let mut buf = Vec::new();
        write_delay_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(DELAY_CSV_HEADER));
        let row = lines.next().unwrap();
        assert!(row.starts_with("exit,0,,0,"));
        assert!(row.ends_with(",5"));
    }
}
