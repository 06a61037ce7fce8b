//! Integer-multiplicity polyline currents.
//!
//! Orientation conventions used throughout:
//!
//! * `∂[a → b] = δ_b − δ_a`.
//! * Level sets `u⁻¹(y)` are oriented by `−∇⊥u / |∇⊥u|` (so `u` increases to the right of the
//!   tangent). With this choice `∂I = (1/2π) div ∇⊥u` in the interior: the level sets of `Arg`
//!   run from the boundary into the origin.
//! * A slice by a circle counts `+multiplicity` for crossings entering the disk and
//!   `−multiplicity` for crossings leaving it, so a slice total equals the flux quantum of the
//!   companion field through the circle.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Circle, Point};
use crate::grid::{CircleValuedField, GridFunction, GridSpec};
use crate::scalar::{wrap_angle, wrap_diff, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Piece<T> {
    pub vertices: Vec<Point<T>>,
    pub multiplicity: i64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PolylineCurrent<T> {
    pub pieces: Vec<Piece<T>>,
}

/// A signed point mass `multiplicity·δ_point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PointMass<T> {
    pub point: Point<T>,
    pub multiplicity: i64,
}

impl<T: Real> Piece<T> {
    pub fn open(vertices: Vec<Point<T>>, multiplicity: i64) -> Self {
        Piece { vertices, multiplicity, closed: false }
    }

    pub fn closed(vertices: Vec<Point<T>>, multiplicity: i64) -> Self {
        Piece { vertices, multiplicity, closed: true }
    }

    /// Consecutive vertex pairs, including the closing segment of a loop.
    pub fn segments(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let n = self.vertices.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub fn length(&self) -> T {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }
}

impl<T: Real> PolylineCurrent<T> {
    pub fn new(pieces: Vec<Piece<T>>) -> Result<Self> {
        let c = PolylineCurrent { pieces };
        c.validate()?;
        Ok(c)
    }

    pub fn empty() -> Self {
        PolylineCurrent { pieces: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, p) in self.pieces.iter().enumerate() {
            if p.multiplicity == 0 {
                return Err(Error::Data(format!("piece {k} has zero multiplicity")));
            }
            let min = if p.closed { 3 } else { 2 };
            if p.vertices.len() < min {
                return Err(Error::Data(format!("piece {k} needs at least {min} vertices")));
            }
            if p.vertices.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("piece {k} has non-finite vertices")));
            }
            if p.segments().any(|(a, b)| a == b) {
                return Err(Error::Data(format!("piece {k} repeats a vertex")));
            }
        }
        Ok(())
    }

    /// Total mass `Σ |multiplicity|·length`.
    pub fn mass(&self) -> T {
        self.pieces.iter().map(|p| T::lit(p.multiplicity.unsigned_abs() as f64) * p.length()).sum()
    }

    pub fn segment_count(&self) -> usize {
        self.pieces.iter().map(|p| p.segments().count()).sum()
    }
}

/// Merges point masses whose coordinates agree to 1e-9, dropping zero totals.
pub fn merge_point_masses<T: Real>(masses: impl IntoIterator<Item = PointMass<T>>) -> Vec<PointMass<T>> {
    let mut order: Vec<(i64, i64)> = Vec::new();
    let mut acc: HashMap<(i64, i64), PointMass<T>> = HashMap::new();
    for m in masses {
        let key = ((m.point.x.as_f64() * 1e9).round() as i64, (m.point.y.as_f64() * 1e9).round() as i64);
        acc.entry(key)
            .and_modify(|e| e.multiplicity += m.multiplicity)
            .or_insert_with(|| {
                order.push(key);
                m
            });
    }
    order.into_iter().filter_map(|k| acc.remove(&k)).filter(|m| m.multiplicity != 0).collect()
}

/// `∂I`: `+m` at the end and `−m` at the start of every open piece.
pub fn boundary<T: Real>(current: &PolylineCurrent<T>) -> Vec<PointMass<T>> {
    let raw = current.pieces.iter().filter(|p| !p.closed && p.vertices.len() >= 2).flat_map(|p| {
        let first = p.vertices[0];
        let last = *p.vertices.last().expect("nonempty");
        [
            PointMass { point: last, multiplicity: p.multiplicity },
            PointMass { point: first, multiplicity: -p.multiplicity },
        ]
    });
    merge_point_masses(raw)
}

/// Boundary masses lying at least `margin` inside the grid's domain.
pub fn interior_boundary<T: Real>(current: &PolylineCurrent<T>, grid: &GridSpec<T>, margin: T) -> Vec<PointMass<T>> {
    boundary(current).into_iter().filter(|m| grid.is_interior(m.point, margin)).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SliceResult<T> {
    pub points: Vec<PointMass<T>>,
}

impl<T: Real> SliceResult<T> {
    /// Evaluation of the slice on the constant function 1.
    pub fn total(&self) -> i64 {
        self.points.iter().map(|p| p.multiplicity).sum()
    }
}

/// Slice of `I` by the circle of radius `c.radius + t` about `c.center`.
///
/// Crossings entering the disk count `+multiplicity`, leaving ones `−multiplicity`.
/// Vertices on the circle and tangential segments are rejected so the caller can perturb `t`.
pub fn slice_by_circle<T: Real>(current: &PolylineCurrent<T>, c: &Circle<T>, t: T) -> Result<SliceResult<T>> {
    let radius = c.radius + t;
    if !(radius > T::zero()) {
        return Err(Error::Geometry(format!("slice radius {radius} is not positive")));
    }
    let r2 = radius * radius;
    let rel = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    let mut points = Vec::new();
    for piece in &current.pieces {
        for (a, b) in piece.segments() {
            let f = a - c.center;
            let d = b - a;
            let qa = d.norm2();
            let fa = f.norm2() - r2;
            let fb = (b - c.center).norm2() - r2;
            if fa.abs() <= rel * r2 || fb.abs() <= rel * r2 {
                return Err(Error::DegenerateSlice("a vertex lies on the slicing circle".into()));
            }
            let qb = (f.dot(d)) * T::lit(2.0);
            let disc = qb * qb - T::lit(4.0) * qa * fa;
            if disc < T::zero() {
                continue;
            }
            let sq = disc.sqrt();
            let two_a = qa + qa;
            let s1 = (-qb - sq) / two_a;
            let s2 = (-qb + sq) / two_a;
            let inside = |s: T| s > T::zero() && s < T::one();
            if (inside(s1) || inside(s2)) && sq <= rel.sqrt() * (qb.abs() + qa) {
                return Err(Error::DegenerateSlice("segment tangent to the slicing circle".into()));
            }
            if inside(s1) {
                points.push(PointMass { point: a + d * s1, multiplicity: piece.multiplicity });
            }
            if inside(s2) {
                points.push(PointMass { point: a + d * s2, multiplicity: -piece.multiplicity });
            }
        }
    }
    Ok(SliceResult { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Edge(usize),
    Center(usize),
}

#[derive(Debug, Clone, Copy)]
struct Crossing<T> {
    key: Key,
    point: Point<T>,
    entry: bool,
}

/// Crossing of level `y` on the edge `p → q` as `(fraction from p, increasing along p→q)`.
fn edge_crossing<T: Real>(up: T, uq: T, y: T) -> Option<(T, bool)> {
    let d = wrap_diff(uq - up);
    let t = wrap_angle(y - up);
    if d > T::zero() && t > T::zero() && t < d {
        Some((t / d, true))
    } else if d < T::zero() && t > T::two_pi() + d {
        Some(((T::two_pi() - t) / (-d), false))
    } else {
        None
    }
}

/// Checks that `y` is not attained at any masked node.
pub fn check_regular_level<T: Real>(u: &CircleValuedField<T>, y: T) -> Result<()> {
    let y = wrap_angle(y);
    let hit = (0..u.grid.node_count()).any(|k| u.grid.is_masked(k) && u.theta[k] == y);
    if hit {
        Err(Error::IrregularLevel(y.as_f64()))
    } else {
        Ok(())
    }
}

/// Marching-squares extraction of `u⁻¹(y)` with wrapped differences, multiplicity 1.
///
/// In a cell with nonzero winding the unmatched crossings are joined to the cell center, which
/// is where the current has boundary. Saddle cells are resolved by the cell-mean value.
pub fn level_set_current<T: Real>(u: &CircleValuedField<T>, y: T) -> Result<PolylineCurrent<T>> {
    check_regular_level(u, y)?;
    let y = wrap_angle(y);
    let g = &u.grid;
    let segments: Vec<(Key, Point<T>, Key, Point<T>)> = (0..g.ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut out = Vec::new();
            for i in 0..g.nx {
                if g.cell_active(i, j) {
                    cell_segments(u, y, i, j, &mut out);
                }
            }
            out
        })
        .collect();
    Ok(chain_segments(segments))
}

fn cell_segments<T: Real>(
    u: &CircleValuedField<T>,
    y: T,
    i: usize,
    j: usize,
    out: &mut Vec<(Key, Point<T>, Key, Point<T>)>,
) {
    let g = &u.grid;
    let c = g.cell_corners(i, j);
    // ccw edges as (edge id, canonical start, canonical end, traversed reversed)
    let edges = [
        (2 * c[0], c[0], c[1], false),
        (2 * c[1] + 1, c[1], c[2], false),
        (2 * c[3], c[3], c[2], true),
        (2 * c[0] + 1, c[0], c[3], true),
    ];
    let mut crossings: Vec<Crossing<T>> = Vec::with_capacity(4);
    for &(id, p, q, reversed) in &edges {
        if let Some((s, increasing)) = edge_crossing(u.theta[p], u.theta[q], y) {
            let (a, b) = (g.node_point(p), g.node_point(q));
            crossings.push(Crossing { key: Key::Edge(id), point: a + (b - a) * s, entry: increasing != reversed });
        }
    }
    if crossings.is_empty() {
        return;
    }
    let n = crossings.len();
    let entries = crossings.iter().filter(|c| c.entry).count();
    let winding = entries as i64 - (n - entries) as i64;
    let center_key = Key::Center(g.index(i, j));
    let center = g.cell_center(i, j);
    let mut used = vec![false; n];

    if winding == 0 && n == 4 {
        // saddle: compare the cell mean with the level
        let mut unwrapped = [u.theta[c[0]]; 4];
        for k in 1..4 {
            unwrapped[k] = unwrapped[k - 1] + wrap_diff(u.theta[c[k]] - u.theta[c[k - 1]]);
        }
        let lo = unwrapped.iter().cloned().fold(T::infinity(), T::min);
        let mean = unwrapped.iter().cloned().sum::<T>() * T::lit(0.25);
        let level = lo + wrap_angle(y - lo);
        let high = mean > level;
        for k in 0..n {
            if crossings[k].entry {
                let partner = if high { (k + n - 1) % n } else { (k + 1) % n };
                let (a, b) = (crossings[k], crossings[partner]);
                out.push((a.key, a.point, b.key, b.point));
            }
        }
        return;
    }

    // pair each exit with the most recent unmatched entry, scanning the boundary twice
    let mut stack: Vec<usize> = Vec::new();
    for step in 0..2 * n {
        let k = step % n;
        if used[k] {
            continue;
        }
        if crossings[k].entry {
            if !stack.contains(&k) {
                stack.push(k);
            }
        } else if let Some(e) = stack.pop() {
            used[e] = true;
            used[k] = true;
            let (a, b) = (crossings[e], crossings[k]);
            out.push((a.key, a.point, b.key, b.point));
        }
    }
    for k in 0..n {
        if used[k] {
            continue;
        }
        let cr = crossings[k];
        if cr.entry {
            out.push((cr.key, cr.point, center_key, center));
        } else {
            out.push((center_key, center, cr.key, cr.point));
        }
    }
}

fn chain_segments<T: Real>(segments: Vec<(Key, Point<T>, Key, Point<T>)>) -> PolylineCurrent<T> {
    let mut by_start: HashMap<Key, usize> = HashMap::with_capacity(segments.len());
    let mut ends: HashMap<Key, usize> = HashMap::with_capacity(segments.len());
    for (k, s) in segments.iter().enumerate() {
        if let Key::Edge(_) = s.0 {
            by_start.insert(s.0, k);
        }
        *ends.entry(s.2).or_insert(0) += 1;
    }
    let mut visited = vec![false; segments.len()];
    let mut pieces = Vec::new();
    let follow = |first: usize, visited: &mut Vec<bool>| -> (Vec<Point<T>>, bool) {
        let mut verts = vec![segments[first].1];
        let mut cur = first;
        loop {
            visited[cur] = true;
            let (_, _, end_key, end_pt) = segments[cur];
            match (end_key, by_start.get(&end_key)) {
                (Key::Edge(_), Some(&next)) if !visited[next] => {
                    verts.push(end_pt);
                    cur = next;
                }
                (Key::Edge(_), Some(&next)) if next == first => return (verts, true),
                _ => {
                    verts.push(end_pt);
                    return (verts, false);
                }
            }
        }
    };
    // open chains start where no segment ends
    for k in 0..segments.len() {
        let start = segments[k].0;
        let is_head = matches!(start, Key::Center(_)) || !ends.contains_key(&start);
        if is_head && !visited[k] {
            let (verts, closed) = follow(k, &mut visited);
            pieces.push(Piece { vertices: verts, multiplicity: 1, closed });
        }
    }
    for k in 0..segments.len() {
        if !visited[k] {
            let (verts, closed) = follow(k, &mut visited);
            pieces.push(Piece { vertices: verts, multiplicity: 1, closed });
        }
    }
    PolylineCurrent { pieces }
}

/// Both sides of the coarea identity and their relative discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CoareaReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub relative_error: T,
    pub nlevels: usize,
}

/// `Σ_cells g|∇u|h²` against `(2π/nlevels) Σ_k ∫_{u⁻¹(y_k)} g dH¹`.
pub fn coarea_check<T: Real>(u: &CircleValuedField<T>, g: &GridFunction<T>, nlevels: usize) -> Result<CoareaReport<T>> {
    if nlevels < 8 {
        return Err(Error::Precondition(format!("nlevels must be ≥ 8, got {nlevels}")));
    }
    if g.grid != u.grid {
        return Err(Error::Precondition("weight and map live on different grids".into()));
    }
    let grid = &u.grid;
    let h2 = grid.h * grid.h;
    let mut lhs = T::zero();
    for (i, j) in grid.active_cells() {
        let grad = u.cell_gradient(i, j);
        if !grad.is_finite() {
            return Err(Error::Data("non-finite wrapped gradient".into()));
        }
        lhs = lhs + g.cell_mid(i, j) * grad.norm() * h2;
    }
    let step = T::two_pi() / T::lit(nlevels as f64);
    let lengths: Vec<Result<T>> = (0..nlevels)
        .into_par_iter()
        .map(|k| {
            let base = step * (T::lit(k as f64) + T::lit(0.5));
            let mut y = base;
            let mut attempt = 0;
            while check_regular_level(u, y).is_err() {
                attempt += 1;
                if attempt > 16 {
                    return Err(Error::IrregularLevel(y.as_f64()));
                }
                y = base + step * T::lit(1e-6 * attempt as f64);
            }
            let cur = level_set_current(u, y)?;
            Ok(cur
                .pieces
                .iter()
                .flat_map(|p| p.segments())
                .map(|(a, b)| a.dist(b) * g.sample((a + b) * T::lit(0.5)).unwrap_or(T::zero()))
                .sum())
        })
        .collect();
    let mut rhs = T::zero();
    for l in lengths {
        rhs = rhs + l?;
    }
    rhs = rhs * step;
    let relative_error = if lhs == T::zero() {
        if rhs != T::zero() {
            return Err(Error::Inconsistent(format!("area side vanishes but level side is {rhs}")));
        }
        T::zero()
    } else {
        (lhs - rhs).abs() / lhs.abs()
    };
    Ok(CoareaReport { lhs, rhs, relative_error, nlevels })
}
