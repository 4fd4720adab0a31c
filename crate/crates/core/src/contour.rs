//! Level lines of 2-D fields by marching squares.
//!
//! Segments are keyed by the grid edge they cross, so stitching is exact:
//! two segments share an endpoint iff they cross the same edge. Saddle cells
//! are resolved with the mean of the four corners.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    /// First and last points coincide.
    pub closed: bool,
}

impl Polyline {
    /// Widths of the bounding box along each axis.
    pub fn extent(&self) -> [f64; 2] {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        [hi[0] - lo[0], hi[1] - lo[1]]
    }

    /// Even-odd test; meaningful for closed polylines.
    pub fn encloses(&self, q: [f64; 2]) -> bool {
        let mut inside = false;
        let n = self.points.len();
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            if (a[1] > q[1]) != (b[1] > q[1]) {
                let x = a[0] + (q[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if q[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub contours: Vec<Contour>,
    pub warnings: Vec<String>,
}

// Edge ids: horizontal edges (i, j)-(i+1, j) first, then vertical (i, j)-(i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Axis0(usize, usize),
    Axis1(usize, usize),
}

/// Contours of `f` at each level. Levels outside `(min f, max f)` give an
/// empty contour and a warning.
pub fn export_levels(f: &Field, levels: &[f64]) -> Result<LevelSet> {
    if f.grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(f.grid.dim()));
    }
    let (lo, hi) = (f.min(), f.max());
    let mut out = LevelSet { contours: Vec::new(), warnings: Vec::new() };
    for &level in levels {
        if !level.is_finite() {
            return Err(Error::InvalidParameter(format!("level {level} is not finite")));
        }
        if !(level > lo && level < hi) {
            out.warnings.push(format!("level {level} outside field range [{lo}, {hi}]"));
            out.contours.push(Contour { level, polylines: Vec::new() });
            continue;
        }
        out.contours.push(Contour { level, polylines: march(f, level) });
    }
    Ok(out)
}

fn march(f: &Field, level: f64) -> Vec<Polyline> {
    let g = &f.grid;
    let (n0, n1) = (g.points()[0], g.points()[1]);
    let val = |i: usize, j: usize| f.values[i * n1 + j];
    let x0 = g.axis_coords(0);
    let x1 = g.axis_coords(1);
    let point = |e: Edge| -> [f64; 2] {
        match e {
            Edge::Axis0(i, j) => {
                let (a, b) = (val(i, j), val(i + 1, j));
                let s = (level - a) / (b - a);
                [x0[i] + s * (x0[i + 1] - x0[i]), x1[j]]
            }
            Edge::Axis1(i, j) => {
                let (a, b) = (val(i, j), val(i, j + 1));
                let s = (level - a) / (b - a);
                [x0[i], x1[j] + s * (x1[j + 1] - x1[j])]
            }
        }
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..n0 - 1 {
        for j in 0..n1 - 1 {
            // corners counter-clockwise from (i, j)
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let mut case = 0;
            for (b, v) in c.iter().enumerate() {
                if *v > level {
                    case |= 1 << b;
                }
            }
            // edges: bottom (c0-c1), right (c1-c2), top (c3-c2), left (c0-c3)
            let bottom = Edge::Axis0(i, j);
            let right = Edge::Axis1(i + 1, j);
            let top = Edge::Axis0(i, j + 1);
            let left = Edge::Axis1(i, j);
            let centre_above = c.iter().sum::<f64>() / 4.0 > level;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if centre_above {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if centre_above {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut adj: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(s);
        adj.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // open chains start at edges touched once (the field boundary)
    let starts: Vec<Edge> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(e, _)| *e).collect();
    for start in starts {
        if adj[&start].iter().all(|s| used[*s]) {
            continue;
        }
        lines.push(walk(start, &segments, &adj, &mut used, &point));
    }
    for s in 0..segments.len() {
        if !used[s] {
            lines.push(walk(segments[s].0, &segments, &adj, &mut used, &point));
        }
    }
    lines
}

fn walk(
    start: Edge,
    segments: &[(Edge, Edge)],
    adj: &BTreeMap<Edge, Vec<usize>>,
    used: &mut [bool],
    point: &dyn Fn(Edge) -> [f64; 2],
) -> Polyline {
    let mut edges = vec![start];
    let mut at = start;
    while let Some(&s) = adj[&at].iter().find(|s| !used[**s]) {
        used[s] = true;
        let (a, b) = segments[s];
        at = if a == at { b } else { a };
        edges.push(at);
    }
    let closed = edges.len() > 2 && edges[0] == edges[edges.len() - 1];
    Polyline { points: edges.into_iter().map(point).collect(), closed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn circle_is_closed_and_round() {
        let g = Grid::cube(2, 2.0, 81).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let ls = export_levels(&f, &[0.5]).unwrap();
        let c = &ls.contours[0];
        assert_eq!(c.polylines.len(), 1);
        let p = &c.polylines[0];
        assert!(p.closed);
        let [w0, w1] = p.extent();
        assert!((w0 / w1 - 1.0).abs() < 0.02);
        let r = 2f64.ln().sqrt();
        for q in &p.points {
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - r).abs() < 2e-3);
        }
    }

    #[test]
    fn single_peak_is_enclosed() {
        let g = Grid::cube(2, 1.0, 5).unwrap();
        let mut f = Field::zeros(g);
        f.values[12] = 1.0;
        let ls = export_levels(&f, &[0.5]).unwrap();
        let p = &ls.contours[0].polylines[0];
        assert!(p.closed);
        assert!(p.encloses([0.0, 0.0]));
        assert!(!p.encloses([0.6, 0.0]));
    }

    #[test]
    fn open_line_and_out_of_range() {
        let g = Grid::cube(2, 1.0, 11).unwrap();
        let f = Field::from_fn(g, |x| x[0]);
        let ls = export_levels(&f, &[0.25, 3.0]).unwrap();
        let p = &ls.contours[0].polylines;
        assert_eq!(p.len(), 1);
        assert!(!p[0].closed);
        assert_eq!(p[0].points.len(), 11);
        assert!(ls.contours[1].polylines.is_empty());
        assert_eq!(ls.warnings.len(), 1);
    }
}
