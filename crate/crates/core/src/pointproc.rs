//! Point patterns on a finite rectangular window: Poisson, shifted grid,
//! superposition and Palm augmentation.
//!
//! The window stands in for the plane. In torus mode distances wrap around,
//! which keeps stationary statistics free of boundary bias; in plane mode the
//! window is an ordinary rectangle and a guard band of width `margin` marks
//! the region where endpoints of delay measurements must not be placed.

use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{param, Error, Result};
use crate::marks::mix64;
use crate::params::ModelParams;

const TAG_POISSON: u64 = 0x5053_4f49_5353_4f4e;
const TAG_GRID: u64 = 0x4752_4944_5348_4946;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Torus,
    PlaneWithGuard { margin: f64 },
}

/// Axis-aligned rectangle `[x0, x0+width) x [y0, y0+height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub origin: Position,
    pub width: f64,
    pub height: f64,
    pub boundary: Boundary,
}

impl Window {
    pub fn torus(width: f64, height: f64) -> Self {
        Window {
            origin: Position::ORIGIN,
            width,
            height,
            boundary: Boundary::Torus,
        }
    }

    pub fn plane(width: f64, height: f64, margin: f64) -> Self {
        Window {
            origin: Position::ORIGIN,
            width,
            height,
            boundary: Boundary::PlaneWithGuard { margin },
        }
    }

    /// Plane window whose center is the coordinate origin.
    pub fn centered_plane(width: f64, height: f64, margin: f64) -> Self {
        Window::plane(width, height, margin).with_origin(Position::new(-width / 2.0, -height / 2.0))
    }

    pub fn with_origin(mut self, origin: Position) -> Self {
        self.origin = origin;
        self
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.boundary, Boundary::Torus)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return param(format!("window must have positive size, got {}x{}", self.width, self.height));
        }
        if let Boundary::PlaneWithGuard { margin } = self.boundary {
            if !(margin >= 0.0 && margin < self.width.min(self.height) / 2.0) {
                return param(format!("guard margin {margin} must lie in [0, min(width,height)/2)"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.origin.x
            && p.x < self.origin.x + self.width
            && p.y >= self.origin.y
            && p.y < self.origin.y + self.height
    }

    /// Inside the window and outside the guard band.
    pub fn interior_contains(&self, p: Position) -> bool {
        match self.boundary {
            Boundary::Torus => self.contains(p),
            Boundary::PlaneWithGuard { margin } => {
                p.x >= self.origin.x + margin
                    && p.x <= self.origin.x + self.width - margin
                    && p.y >= self.origin.y + margin
                    && p.y <= self.origin.y + self.height - margin
            }
        }
    }

    /// Radius of the largest disk centered at `p` that the window resolves
    /// without wrapping or truncation.
    pub fn radius_about(&self, p: Position) -> f64 {
        match self.boundary {
            Boundary::Torus => self.width.min(self.height) / 2.0,
            Boundary::PlaneWithGuard { .. } => {
                let dx = (p.x - self.origin.x).min(self.origin.x + self.width - p.x);
                let dy = (p.y - self.origin.y).min(self.origin.y + self.height - p.y);
                dx.min(dy).max(0.0)
            }
        }
    }

    /// Squared distance under the window's boundary geometry.
    #[inline]
    pub fn dist_sq(&self, a: Position, b: Position) -> f64 {
        let mut dx = (a.x - b.x).abs();
        let mut dy = (a.y - b.y).abs();
        if let Boundary::Torus = self.boundary {
            dx = dx.min(self.width - dx);
            dy = dy.min(self.height - dy);
        }
        dx * dx + dy * dy
    }
}

/// `||x - y||` under the window's boundary geometry.
pub fn distance(x: Position, y: Position, window: &Window) -> f64 {
    window.dist_sq(x, y).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Poisson,
    Grid,
    Palm,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::Poisson => "poisson",
            Origin::Grid => "grid",
            Origin::Palm => "palm",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Origin::Poisson),
            "grid" => Ok(Origin::Grid),
            "palm" => Ok(Origin::Palm),
            other => param(format!("unknown origin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Position,
    pub origin: Origin,
}

/// A finite simple point pattern with dense ids `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    nodes: Vec<Node>,
    window: Window,
}

impl PointPattern {
    /// Builds a pattern, assigning ids in input order.
    pub fn new(window: Window, points: impl IntoIterator<Item = (Position, Origin)>) -> Result<Self> {
        window.validate()?;
        let nodes: Vec<Node> = points
            .into_iter()
            .enumerate()
            .map(|(id, (position, origin))| Node { id, position, origin })
            .collect();
        for n in &nodes {
            if !window.contains(n.position) {
                return param(format!("point {:?} lies outside the window", n.position));
            }
        }
        let pattern = PointPattern { nodes, window };
        pattern.check_simple()?;
        Ok(pattern)
    }

    pub fn empty(window: Window) -> Self {
        PointPattern {
            nodes: Vec::new(),
            window,
        }
    }

    fn check_simple(&self) -> Result<()> {
        let mut keys: Vec<(u64, u64)> = self
            .nodes
            .iter()
            .map(|n| (n.position.x.to_bits(), n.position.y.to_bits()))
            .collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return param("pattern is not simple: duplicate positions");
        }
        Ok(())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn position(&self, id: usize) -> Position {
        self.nodes[id].position
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        self.nodes.iter().map(|n| n.position)
    }

    #[inline]
    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.window.dist_sq(self.nodes[i].position, self.nodes[j].position)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist_sq(i, j).sqrt()
    }

    /// `X(x)`: the pattern point closest to `x`, ties going to the lowest id.
    pub fn nearest(&self, x: Position) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for n in &self.nodes {
            let d = self.window.dist_sq(n.position, x);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Points of the given origin.
    pub fn count_origin(&self, origin: Origin) -> usize {
        self.nodes.iter().filter(|n| n.origin == origin).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id,x,y,origin")?;
        for n in &self.nodes {
            writeln!(out, "{},{},{},{}", n.id, n.position.x, n.position.y, n.origin)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, window: Window) -> Result<Self> {
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "id,x,y,origin" => {}
            _ => return param("pattern CSV must start with header `id,x,y,origin`"),
        }
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 4 {
                return param(format!("pattern CSV row {row}: expected 4 fields"));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parameter(format!("pattern CSV row {row}: bad id")))?;
            if id != points.len() {
                return param(format!("pattern CSV row {row}: ids must be contiguous from 0"));
            }
            let x: f64 = fields[1]
                .parse()
                .map_err(|_| Error::Parameter(format!("pattern CSV row {row}: bad x")))?;
            let y: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Parameter(format!("pattern CSV row {row}: bad y")))?;
            points.push((Position::new(x, y), fields[3].parse()?));
        }
        PointPattern::new(window, points)
    }
}

/// Homogeneous Poisson pattern of the given intensity on `window`.
pub fn sample_poisson(intensity: f64, window: Window, seed: u64) -> Result<PointPattern> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return param(format!("Poisson intensity must be positive, got {intensity}"));
    }
    window.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ TAG_POISSON));
    let mean = intensity * window.area();
    let count = Poisson::new(mean)
        .map_err(|e| Error::Parameter(format!("Poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;
    let mut nodes = Vec::with_capacity(count);
    for id in 0..count {
        let x = window.origin.x + rng.gen::<f64>() * window.width;
        let y = window.origin.y + rng.gen::<f64>() * window.height;
        nodes.push(Node {
            id,
            position: Position::new(x, y),
            origin: Origin::Poisson,
        });
    }
    Ok(PointPattern { nodes, window })
}

/// The lattice `s Z^2 + U_G` restricted to the window, with `U_G` uniform on `[0,s)^2`.
pub fn sample_shifted_grid(step: f64, window: Window, seed: u64) -> Result<PointPattern> {
    if !(step > 0.0 && step.is_finite()) {
        return param(format!("grid step must be positive, got {step}"));
    }
    window.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ TAG_GRID));
    let ux = rng.gen::<f64>() * step;
    let uy = rng.gen::<f64>() * step;
    let axis = |start: f64, len: f64, shift: f64| -> Result<Vec<f64>> {
        let first = start + (shift - start).rem_euclid(step);
        if window.is_torus() {
            let cells = len / step;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return param(format!("torus side {len} is not a multiple of grid step {step}"));
            }
            let cells = cells.round() as usize;
            Ok((0..cells).map(|k| first + k as f64 * step).map(|v| wrap(v, start, len)).collect())
        } else {
            let mut out = Vec::new();
            let mut k = 0;
            loop {
                let v = first + k as f64 * step;
                if v >= start + len {
                    break;
                }
                out.push(v);
                k += 1;
            }
            Ok(out)
        }
    };
    let xs = axis(window.origin.x, window.width, ux)?;
    let ys = axis(window.origin.y, window.height, uy)?;
    let mut nodes = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            nodes.push(Node {
                id: nodes.len(),
                position: Position::new(x, y),
                origin: Origin::Grid,
            });
        }
    }
    Ok(PointPattern { nodes, window })
}

fn wrap(v: f64, start: f64, len: f64) -> f64 {
    let r = start + (v - start).rem_euclid(len);
    if r >= start + len {
        start
    } else {
        r
    }
}

/// Disjoint union with ids re-assigned (`a` first, then `b`).
pub fn superpose(a: &PointPattern, b: &PointPattern) -> Result<PointPattern> {
    if a.window != b.window {
        return param("cannot superpose patterns on different windows");
    }
    let points = a
        .nodes
        .iter()
        .chain(b.nodes.iter())
        .map(|n| (n.position, n.origin));
    PointPattern::new(a.window, points)
}

/// Adds Palm points with the lowest ids `0..extra.len()`; existing points keep
/// their positions and are shifted up by `extra.len()`.
pub fn palm_add(pattern: &PointPattern, extra: &[Position]) -> Result<PointPattern> {
    for p in extra {
        if !pattern.window.contains(*p) {
            return param(format!("Palm point {p:?} lies outside the window"));
        }
    }
    let points = extra
        .iter()
        .map(|&p| (p, Origin::Palm))
        .chain(pattern.nodes.iter().map(|n| (n.position, n.origin)));
    PointPattern::new(pattern.window, points)
}

/// Samples `Phi` for the model in `params`: Poisson, grid, or their superposition.
pub fn sample_model(params: &ModelParams, seed: u64) -> Result<PointPattern> {
    let window = params.window;
    let poisson = if params.lambda_m > 0.0 {
        Some(sample_poisson(params.lambda_m, window, seed)?)
    } else {
        None
    };
    let grid = match params.grid_step {
        Some(s) => Some(sample_shifted_grid(s, window, seed)?),
        None => None,
    };
    match (poisson, grid) {
        (Some(p), Some(g)) => superpose(&p, &g),
        (Some(p), None) => Ok(p),
        (None, Some(g)) => Ok(g),
        (None, None) => param("model has no point process component"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_distance_wraps() {
        let w = Window::torus(20.0, 20.0);
        assert!((distance(Position::new(1.0, 1.0), Position::new(19.0, 1.0), &w) - 2.0).abs() < 1e-12);
        let p = Window::plane(20.0, 20.0, 0.0);
        assert_eq!(distance(Position::new(0.0, 0.0), Position::new(3.0, 4.0), &p), 5.0);
    }

    #[test]
    fn poisson_is_deterministic() {
        let w = Window::torus(20.0, 20.0);
        let a = sample_poisson(1.0, w, 7).unwrap();
        let b = sample_poisson(1.0, w, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_poisson(1.0, w, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_rejects_nonpositive_intensity() {
        let w = Window::torus(1.0, 1.0);
        assert!(matches!(sample_poisson(0.0, w, 1), Err(Error::Parameter(_))));
        assert!(sample_poisson(-1.0, w, 1).is_err());
    }

    #[test]
    fn tiny_intensity_is_usually_empty() {
        let w = Window::torus(1.0, 1.0);
        let total: usize = (0..2000).map(|s| sample_poisson(1e-4, w, s).unwrap().len()).sum();
        // mean 1e-4 per draw: 2000 draws give 0.2 expected points
        assert!(total <= 3);
    }

    #[test]
    fn grid_count_exact_on_torus() {
        let w = Window::torus(20.0, 20.0);
        for seed in 0..50 {
            let g = sample_shifted_grid(2.0, w, seed).unwrap();
            assert_eq!(g.len(), 100);
        }
    }

    #[test]
    fn grid_rejects_nondivisible_torus() {
        let w = Window::torus(21.0, 20.0);
        assert!(matches!(sample_shifted_grid(2.0, w, 0), Err(Error::Parameter(_))));
        // plane windows accept any step
        assert!(sample_shifted_grid(2.0, Window::plane(21.0, 20.0, 1.0), 0).is_ok());
    }

    #[test]
    fn grid_nearest_neighbor_is_step() {
        let w = Window::torus(20.0, 20.0);
        let g = sample_shifted_grid(2.0, w, 3).unwrap();
        for i in 0..g.len() {
            let nn = (0..g.len())
                .filter(|&j| j != i)
                .map(|j| g.distance(i, j))
                .fold(f64::INFINITY, f64::min);
            assert!((nn - 2.0).abs() < 1e-9, "node {i}: {nn}");
        }
    }

    #[test]
    fn superpose_identity_and_sizes() {
        let w = Window::torus(20.0, 20.0);
        let p = sample_poisson(1.0, w, 1).unwrap();
        let e = PointPattern::empty(w);
        let s = superpose(&p, &e).unwrap();
        assert_eq!(s, p);
        let g = sample_shifted_grid(2.0, w, 1).unwrap();
        let s = superpose(&p, &g).unwrap();
        assert_eq!(s.len(), p.len() + g.len());
        assert_eq!(s.count_origin(Origin::Grid), 100);
        assert!(s.nodes().iter().enumerate().all(|(k, n)| n.id == k));
    }

    #[test]
    fn superpose_rejects_mismatched_windows() {
        let a = PointPattern::empty(Window::torus(20.0, 20.0));
        let b = PointPattern::empty(Window::torus(10.0, 20.0));
        assert!(superpose(&a, &b).is_err());
    }

    #[test]
    fn palm_add_reserves_low_ids() {
        let w = Window::torus(20.0, 20.0);
        let p = sample_poisson(1.0, w, 4).unwrap();
        let q = palm_add(&p, &[Position::ORIGIN]).unwrap();
        assert_eq!(q.len(), p.len() + 1);
        assert_eq!(q.position(0), Position::ORIGIN);
        assert_eq!(q.nodes()[0].origin, Origin::Palm);
        for k in 0..p.len() {
            assert_eq!(q.position(k + 1), p.position(k));
        }
        let x = Position::new(5.0, 5.0);
        let y = Position::new(6.0, 5.0);
        let q2 = palm_add(&p, &[x, y]).unwrap();
        assert_eq!(q2.position(0), x);
        assert_eq!(q2.position(1), y);
        assert!((q2.distance(0, 1) - 1.0).abs() < 1e-12);

        let single = palm_add(&PointPattern::empty(w), &[Position::ORIGIN]).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn palm_add_rejects_duplicates() {
        let w = Window::torus(20.0, 20.0);
        let p = sample_poisson(1.0, w, 4).unwrap();
        let existing = p.position(3);
        assert!(matches!(palm_add(&p, &[existing]), Err(Error::Parameter(_))));
    }

    #[test]
    fn nearest_breaks_ties_by_id() {
        let w = Window::plane(10.0, 10.0, 0.0);
        let p = PointPattern::new(
            w,
            vec![
                (Position::new(2.0, 5.0), Origin::Poisson),
                (Position::new(4.0, 5.0), Origin::Poisson),
            ],
        )
        .unwrap();
        assert_eq!(p.nearest(Position::new(3.0, 5.0)), Some(0));
        assert_eq!(p.nearest(Position::new(3.5, 5.0)), Some(1));
        assert_eq!(PointPattern::empty(w).nearest(Position::ORIGIN), None);
    }

    #[test]
    fn csv_roundtrip() {
        let w = Window::torus(20.0, 20.0);
        let p = superpose(&sample_poisson(0.3, w, 2).unwrap(), &sample_shifted_grid(4.0, w, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = PointPattern::read_csv(std::io::Cursor::new(buf), w).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn window_guard_invariants() {
        assert!(Window::plane(10.0, 10.0, 5.0).validate().is_err());
        assert!(Window::plane(10.0, 10.0, 4.9).validate().is_ok());
        assert!(Window::plane(10.0, 0.0, 1.0).validate().is_err());
        let w = Window::centered_plane(60.0, 60.0, 5.0);
        assert!(w.interior_contains(Position::ORIGIN));
        assert!(!w.interior_contains(Position::new(27.0, 0.0)));
        assert_eq!(w.radius_about(Position::ORIGIN), 30.0);
    }
}
