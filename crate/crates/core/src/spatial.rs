//! Uniform cell grid over a pattern's window, for range queries.

use crate::pointproc::{PointPattern, Position, Window};

#[derive(Debug, Clone)]
pub struct CellGrid {
    window: Window,
    nx: usize,
    ny: usize,
    cw: f64,
    ch: f64,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl CellGrid {
    /// Cells sized for roughly `occupancy` points each.
    pub fn build(pattern: &PointPattern, occupancy: f64) -> Self {
        let window = *pattern.window();
        let n = pattern.len().max(1) as f64;
        let side = (occupancy * window.area() / n).sqrt().max(1e-9);
        let nx = ((window.width / side).floor() as usize).clamp(1, 4096);
        let ny = ((window.height / side).floor() as usize).clamp(1, 4096);
        let cw = window.width / nx as f64;
        let ch = window.height / ny as f64;
        let mut grid = CellGrid {
            window,
            nx,
            ny,
            cw,
            ch,
            starts: vec![0; nx * ny + 1],
            items: vec![0; pattern.len()],
        };
        let cells: Vec<usize> = pattern.positions().map(|p| grid.cell_of(p)).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (id, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = id as u32;
            fill[c] += 1;
        }
        grid
    }

    fn cell_coords(&self, p: Position) -> (usize, usize) {
        let cx = ((p.x - self.window.origin.x) / self.cw).floor();
        let cy = ((p.y - self.window.origin.y) / self.ch).floor();
        (
            (cx.max(0.0) as usize).min(self.nx - 1),
            (cy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    fn cell_of(&self, p: Position) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cy * self.nx + cx
    }

    /// Calls `f` for every point whose cell may intersect the disk of
    /// `radius` around `center`. Points farther away may be reported too;
    /// each point is reported at most once, in a deterministic order.
    pub fn for_each_candidate(&self, center: Position, radius: f64, mut f: impl FnMut(usize)) {
        let (cx, cy) = self.cell_coords(center);
        let rx = (radius / self.cw).ceil() as isize;
        let ry = (radius / self.ch).ceil() as isize;
        let torus = self.window.is_torus();
        let xs = axis_cells(cx as isize, rx, self.nx, torus);
        let ys = axis_cells(cy as isize, ry, self.ny, torus);
        for &y in &ys {
            for &x in &xs {
                let c = y * self.nx + x;
                for &id in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                    f(id as usize);
                }
            }
        }
    }
}

fn axis_cells(center: isize, reach: isize, n: usize, torus: bool) -> Vec<usize> {
    let n_i = n as isize;
    if torus {
        if 2 * reach + 1 >= n_i {
            return (0..n).collect();
        }
        (center - reach..=center + reach)
            .map(|c| c.rem_euclid(n_i) as usize)
            .collect()
    } else {
        let lo = (center - reach).max(0);
        let hi = (center + reach).min(n_i - 1);
        (lo..=hi).map(|c| c as usize).collect()
    }
}
