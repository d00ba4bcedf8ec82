//! Shot-noise interference, SINR/SNR values and the edge indicator of the
//! space-time graph.
//!
//! A directed edge `(X_i, n) -> (X_j, n+1)` exists when `i == j`, or when
//! `i` transmits, `j` listens and `SINR_{i,j}(n) >= T`. The SNR variant drops
//! the interference term, so its edge set contains the SINR edge set.
//!
//! Edge decisions go through a fixed sequence of exact filters before the
//! full interference sum is evaluated:
//!
//! 1. medium access gating,
//! 2. the SNR test (necessary for SINR),
//! 3. a lower bound on interference from transmitters near the receiver.
//!
//! Only candidates surviving all three pay for `I_j`, whose value is always
//! the same ascending-id sum, so every code path reaches bit-identical
//! decisions.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};

use crate::error::{param, Error, Result};
use crate::marks::MarkStream;
use crate::params::ModelParams;
use crate::pointproc::PointPattern;
use crate::spatial::CellGrid;

/// Relative slack applied to the near-field rejection test so that floating
/// point reordering can never reject a true edge.
const PREFILTER_SLACK: f64 = 1e-9;
/// Expected number of pattern points inside the near-field radius.
const NEAR_FIELD_POINTS: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Sinr,
    Snr,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Sinr => "sinr",
            Variant::Snr => "snr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// A pattern together with the model constants and a spatial index.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    pattern: &'a PointPattern,
    params: ModelParams,
    grid: CellGrid,
    cutoff: Option<f64>,
    near_radius: f64,
    links: OnceLock<Links>,
}

/// Link candidates of every node within the cutoff, ascending, with gains.
#[derive(Debug, Clone, Default)]
struct Links {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    gains: Vec<f64>,
}

impl<'a> Network<'a> {
    pub fn new(pattern: &'a PointPattern, params: &ModelParams) -> Self {
        let density = pattern.len().max(1) as f64 / pattern.window().area();
        Network {
            pattern,
            params: params.clone(),
            grid: CellGrid::build(pattern, 2.0),
            cutoff: params.link_cutoff(),
            near_radius: (NEAR_FIELD_POINTS / (std::f64::consts::PI * density)).sqrt(),
            links: OnceLock::new(),
        }
    }

    fn links(&self, r: f64) -> &Links {
        self.links.get_or_init(|| {
            let r2 = r * r;
            let mut l = Links::default();
            l.offsets.push(0);
            let mut row = Vec::new();
            for i in 0..self.len() {
                row.clear();
                self.grid.for_each_candidate(self.pattern.position(i), r, |j| {
                    if j != i && self.pattern.dist_sq(i, j) <= r2 {
                        row.push(j);
                    }
                });
                row.sort_unstable();
                l.targets.extend_from_slice(&row);
                l.gains.extend(row.iter().map(|&j| self.gain(i, j)));
                l.offsets.push(l.targets.len());
            }
            l
        })
    }

    /// Candidates of `i` and their gains when a cutoff exists.
    pub(crate) fn link_candidates(&self, i: usize) -> Option<(&[usize], &[f64])> {
        let r = self.cutoff?;
        let l = self.links(r);
        let (a, b) = (l.offsets[i], l.offsets[i + 1]);
        Some((&l.targets[a..b], &l.gains[a..b]))
    }

    pub fn pattern(&self) -> &'a PointPattern {
        self.pattern
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    /// Radius beyond which no edge can exist, when the noise has a floor.
    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn threshold(&self) -> f64 {
        self.params.threshold
    }

    #[inline]
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.params.pathloss.gain_sq(self.pattern.dist_sq(i, j))
    }

    pub fn view(&self, stream: &MarkStream, slot: i64) -> SlotView<'_, 'a> {
        SlotView {
            net: self,
            stream: *stream,
            slot,
            transmitters: OnceLock::new(),
            totals: Mutex::new(HashMap::new()),
            near: Mutex::new(HashMap::new()),
        }
    }

    /// Calls `f(j)` for every `j != i` that could possibly receive from `i`.
    pub fn for_each_link_candidate(&self, i: usize, f: impl FnMut(usize)) {
        match self.link_candidates(i) {
            Some((targets, _)) => targets.iter().copied().for_each(f),
            None => (0..self.len()).filter(|&j| j != i).for_each(f),
        }
    }

    /// Out-degree of `(v, slot)` or in-degree of `(v, slot)`; the self edge counts.
    pub fn degree(&self, stream: &MarkStream, v: usize, slot: i64, direction: Direction) -> usize {
        match direction {
            Direction::Out => 1 + self.view(stream, slot).out_neighbors(v, Variant::Sinr).len(),
            Direction::In => 1 + self.view(stream, slot - 1).in_neighbors(v, Variant::Sinr).len(),
        }
    }

    /// Number of `k`-edge paths starting at (`Out`) or ending at (`In`) the
    /// vertex `(v, start)`.
    pub fn count_paths(&self, stream: &MarkStream, v: usize, start: i64, k: i64, direction: Direction) -> Result<u128> {
        if k < 0 {
            return param(format!("path length must be nonnegative, got {k}"));
        }
        if v >= self.len() {
            return Err(Error::Domain(format!("node {v} not in pattern")));
        }
        let mut counts: HashMap<usize, u128> = HashMap::from([(v, 1)]);
        for step in 0..k {
            let mut next: HashMap<usize, u128> = HashMap::new();
            let mut frontier: Vec<(usize, u128)> = counts.into_iter().collect();
            frontier.sort_unstable();
            match direction {
                Direction::Out => {
                    let view = self.view(stream, start + step);
                    for (i, c) in frontier {
                        *next.entry(i).or_default() += c;
                        for j in view.out_neighbors(i, Variant::Sinr) {
                            *next.entry(j).or_default() += c;
                        }
                    }
                }
                Direction::In => {
                    let view = self.view(stream, start - step - 1);
                    for (j, c) in frontier {
                        *next.entry(j).or_default() += c;
                        for i in view.in_neighbors(j, Variant::Sinr) {
                            *next.entry(i).or_default() += c;
                        }
                    }
                }
            }
            counts = next;
        }
        Ok(counts.values().sum())
    }
}

/// The graph's edges out of slot `n`, with lazily cached interference sums.
#[derive(Debug)]
pub struct SlotView<'n, 'a> {
    net: &'n Network<'a>,
    stream: MarkStream,
    slot: i64,
    transmitters: OnceLock<Vec<usize>>,
    totals: Mutex<HashMap<usize, f64>>,
    near: Mutex<HashMap<usize, f64>>,
}

impl<'n, 'a> SlotView<'n, 'a> {
    pub fn slot(&self) -> i64 {
        self.slot
    }

    pub fn network(&self) -> &'n Network<'a> {
        self.net
    }

    #[inline]
    pub fn transmits(&self, i: usize) -> bool {
        self.stream.transmits(i, self.slot)
    }

    #[inline]
    pub fn noise(&self, j: usize) -> f64 {
        self.stream.noise(j, self.slot)
    }

    /// `Phi^1(n)`, ascending.
    pub fn transmitters(&self) -> &[usize] {
        self.transmitters
            .get_or_init(|| (0..self.net.len()).filter(|&i| self.transmits(i)).collect())
    }

    /// Received power `F_{i,j}(n) / l(|X_i - X_j|)`, regardless of medium access.
    #[inline]
    pub fn signal(&self, i: usize, j: usize) -> f64 {
        self.stream.fading(i, j, self.slot) * self.net.gain(i, j)
    }

    /// `sum_{k in Phi^1, k != j} F_{k,j} / l(d_kj)`, summed in ascending id order.
    pub fn total_power(&self, j: usize) -> f64 {
        if let Some(&v) = self.totals.lock().unwrap().get(&j) {
            return v;
        }
        let v = self.fresh_total_power(j);
        self.totals.lock().unwrap().insert(j, v);
        v
    }

    /// Uncached recomputation of [`Self::total_power`].
    pub fn fresh_total_power(&self, j: usize) -> f64 {
        self.transmitters()
            .iter()
            .filter(|&&k| k != j)
            .map(|&k| self.signal(k, j))
            .sum()
    }

    /// Lower bound on `total_power(j)` from transmitters near `j`.
    fn near_power(&self, j: usize) -> f64 {
        if let Some(&v) = self.near.lock().unwrap().get(&j) {
            return v;
        }
        let r = self.net.near_radius;
        let r2 = r * r;
        let pattern = self.net.pattern;
        let mut sum = 0.0;
        self.net.grid.for_each_candidate(pattern.position(j), r, |k| {
            if k != j && pattern.dist_sq(k, j) <= r2 && self.transmits(k) {
                sum += self.signal(k, j);
            }
        });
        self.near.lock().unwrap().insert(j, sum);
        sum
    }

    /// `I_{i,j}(n)` (with `exclude = Some(i)`) or `I_j(n)` (with `None`).
    pub fn interference(&self, j: usize, exclude: Option<usize>) -> f64 {
        let total = self.total_power(j);
        match exclude {
            Some(i) if i != j && self.transmits(i) => (total - self.signal(i, j)).max(0.0),
            _ => total,
        }
    }

    /// `SINR_{i,j}(n)`; `+inf` when the denominator vanishes.
    pub fn sinr(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::Domain("SINR of a node to itself is undefined".into()));
        }
        Ok(ratio(self.signal(i, j), self.noise(j) + self.interference(j, Some(i))))
    }

    /// `SNR_{i,j}(n)`; `+inf` when the noise is zero.
    pub fn snr(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(Error::Domain("SNR of a node to itself is undefined".into()));
        }
        Ok(ratio(self.signal(i, j), self.noise(j)))
    }

    /// The edge indicator `delta_{i,j}(n)`.
    pub fn edge(&self, i: usize, j: usize, variant: Variant) -> bool {
        if i == j {
            return true;
        }
        if !self.transmits(i) || self.transmits(j) {
            return false;
        }
        self.link_given_access(i, j, variant)
    }

    /// Edge decision assuming `i` transmits and `j` listens.
    pub(crate) fn link_given_access(&self, i: usize, j: usize, variant: Variant) -> bool {
        self.link_given_gain(i, j, self.net.gain(i, j), variant)
    }

    /// [`Self::link_given_access`] with the path gain `g` of `(i, j)` supplied.
    pub(crate) fn link_given_gain(&self, i: usize, j: usize, g: f64, variant: Variant) -> bool {
        let t = self.net.threshold();
        let s = self.stream.fading(i, j, self.slot) * g;
        let w = self.noise(j);
        if !(ratio(s, w) >= t) {
            return false;
        }
        if variant == Variant::Snr {
            return true;
        }
        if s * (1.0 + t) < t * (w + self.near_power(j)) * (1.0 - PREFILTER_SLACK) {
            return false;
        }
        let interference = (self.total_power(j) - s).max(0.0);
        ratio(s, w + interference) >= t
    }

    /// Receivers `j != i` with an edge from `i` in this slot, ascending.
    pub fn out_neighbors(&self, i: usize, variant: Variant) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.transmits(i) {
            return out;
        }
        self.net.for_each_link_candidate(i, |j| {
            if !self.transmits(j) && self.link_given_access(i, j, variant) {
                out.push(j);
            }
        });
        out.sort_unstable();
        out
    }

    /// Transmitters `i != j` with an edge into `j` in this slot, ascending.
    pub fn in_neighbors(&self, j: usize, variant: Variant) -> Vec<usize> {
        let mut out = Vec::new();
        if self.transmits(j) {
            return out;
        }
        self.net.for_each_link_candidate(j, |i| {
            if self.transmits(i) && self.link_given_access(i, j, variant) {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// All non-self edges of this slot, sorted by `(i, j)`.
    pub fn edges(&self, variant: Variant) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &i in self.transmitters() {
            for j in self.out_neighbors(i, variant) {
                out.push((i, j));
            }
        }
        out
    }

    /// Appends this slot's non-self edges as `slot,i,j,variant` rows.
    pub fn write_edges_csv<W: Write>(&self, variant: Variant, mut out: W) -> Result<()> {
        for (i, j) in self.edges(variant) {
            writeln!(out, "{},{},{},{}", self.slot, i, j, variant.as_str())?;
        }
        Ok(())
    }
}

#[inline]
fn ratio(signal: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        f64::INFINITY
    } else {
        signal / denom
    }
}

/// Free-function form of [`SlotView::interference`].
pub fn interference(view: &SlotView<'_, '_>, receiver: usize, exclude: Option<usize>) -> f64 {
    view.interference(receiver, exclude)
}

/// Free-function form of [`SlotView::sinr`].
pub fn sinr(view: &SlotView<'_, '_>, i: usize, j: usize) -> Result<f64> {
    view.sinr(i, j)
}

/// Free-function form of [`SlotView::edge`].
pub fn edge(view: &SlotView<'_, '_>, i: usize, j: usize, variant: Variant) -> bool {
    view.edge(i, j, variant)
}
