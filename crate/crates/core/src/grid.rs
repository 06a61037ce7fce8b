//! Uniform grids with a domain mask and the fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::scalar::{wrap_angle, wrap_diff, Real};

/// Shape of the masked region inside the grid's bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskShape {
    /// Largest disk centered in the box.
    Disk,
    /// The whole box.
    Rect,
}

/// Node grid with `(nx + 1) × (ny + 1)` nodes, row-major in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub x0: T,
    pub y0: T,
    pub h: T,
    pub nx: usize,
    pub ny: usize,
    pub shape: MaskShape,
    mask: Vec<bool>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(x0: T, y0: T, h: T, nx: usize, ny: usize, shape: MaskShape) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() || !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Data(format!("invalid grid spacing/origin h={h}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Data(format!("grid needs at least 2x2 cells, got {nx}x{ny}")));
        }
        let mut g = GridSpec { x0, y0, h, nx, ny, shape, mask: Vec::new() };
        let domain = g.domain();
        let slack = h * T::lit(1e-9);
        g.mask = (0..g.node_count())
            .map(|k| domain.signed_distance(g.node_point(k)) <= slack)
            .collect();
        Ok(g)
    }

    /// Square grid of `n × n` cells on the unit disk `[-1, 1]²`.
    pub fn unit_disk(n: usize) -> Result<Self> {
        let h = T::lit(2.0 / n as f64);
        Self::new(-T::one(), -T::one(), h, n, n, MaskShape::Disk)
    }

    /// Square grid of `n × n` cells on `[-half, half]²` with a rectangular mask.
    pub fn centered_square(half: T, n: usize) -> Result<Self> {
        let h = (half + half) / T::lit(n as f64);
        Self::new(-half, -half, h, n, n, MaskShape::Rect)
    }

    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_x() + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nodes_x(), k / self.nodes_x())
    }

    pub fn node(&self, i: usize, j: usize) -> Point<T> {
        Point::new(
            self.x0 + self.h * T::lit(i as f64),
            self.y0 + self.h * T::lit(j as f64),
        )
    }

    pub fn node_point(&self, k: usize) -> Point<T> {
        let (i, j) = self.coords(k);
        self.node(i, j)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_masked(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn domain(&self) -> Domain<T> {
        let wx = self.h * T::lit(self.nx as f64);
        let wy = self.h * T::lit(self.ny as f64);
        let min = Point::new(self.x0, self.y0);
        let max = Point::new(self.x0 + wx, self.y0 + wy);
        match self.shape {
            MaskShape::Rect => Domain::Rect { min, max },
            MaskShape::Disk => Domain::Disk {
                center: (min + max) * T::lit(0.5),
                radius: wx.min(wy) * T::lit(0.5),
            },
        }
    }

    /// Node indices of cell `(i, j)` counterclockwise from the lower-left corner.
    #[inline]
    pub fn cell_corners(&self, i: usize, j: usize) -> [usize; 4] {
        let a = self.index(i, j);
        let nxn = self.nodes_x();
        [a, a + 1, a + 1 + nxn, a + nxn]
    }

    pub fn cell_active(&self, i: usize, j: usize) -> bool {
        self.cell_corners(i, j).iter().all(|&k| self.mask[k])
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point<T> {
        let half = self.h * T::lit(0.5);
        self.node(i, j) + Point::new(half, half)
    }

    /// All cells whose four corners are masked.
    pub fn active_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j))).filter(|&(i, j)| self.cell_active(i, j))
    }

    /// Cell containing `p` and local coordinates in `[0, 1]²`.
    pub fn locate(&self, p: Point<T>) -> Option<(usize, usize, T, T)> {
        let fx = (p.x - self.x0) / self.h;
        let fy = (p.y - self.y0) / self.h;
        if !(fx >= T::zero() && fy >= T::zero()) {
            return None;
        }
        let nxf = T::lit(self.nx as f64);
        let nyf = T::lit(self.ny as f64);
        if fx > nxf || fy > nyf {
            return None;
        }
        let i = fx.floor().min(nxf - T::one());
        let j = fy.floor().min(nyf - T::one());
        let (iu, ju) = (i.as_f64() as usize, j.as_f64() as usize);
        Some((iu, ju, fx - i, fy - j))
    }

    /// Whether `p` lies at least `margin` inside the domain boundary.
    pub fn is_interior(&self, p: Point<T>, margin: T) -> bool {
        self.domain().signed_distance(p) <= -margin
    }

    pub fn nearest_node(&self, p: Point<T>) -> Option<usize> {
        let i = ((p.x - self.x0) / self.h).round();
        let j = ((p.y - self.y0) / self.h).round();
        if i < T::zero() || j < T::zero() {
            return None;
        }
        let (i, j) = (i.as_f64() as usize, j.as_f64() as usize);
        (i <= self.nx && j <= self.ny).then(|| self.index(i, j))
    }

    /// 4-neighbours of node `k` inside the grid (not necessarily masked).
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(k);
        let mut out = [usize::MAX; 4];
        if i < self.nx {
            out[0] = self.index(i + 1, j);
        }
        if j < self.ny {
            out[1] = self.index(i, j + 1);
        }
        if i > 0 {
            out[2] = self.index(i - 1, j);
        }
        if j > 0 {
            out[3] = self.index(i, j - 1);
        }
        out.into_iter().filter(|&n| n != usize::MAX)
    }

    /// Checks that the mask is nonempty and 4-connected.
    pub fn validate_mask(&self) -> Result<()> {
        let start = self
            .mask
            .iter()
            .position(|m| *m)
            .ok_or_else(|| Error::Data("empty mask".into()))?;
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(k) = stack.pop() {
            for n in self.neighbors(k) {
                if self.mask[n] && !seen[n] {
                    seen[n] = true;
                    count += 1;
                    stack.push(n);
                }
            }
        }
        if count != self.masked_count() {
            return Err(Error::Data("mask is not 4-connected".into()));
        }
        Ok(())
    }
}

/// Outcome of a bilinear lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample<V> {
    Value(V),
    /// Some corner lies outside the mask or the point is off the grid.
    Outside,
    /// Some corner is a flagged singular node.
    Singular,
}

/// Sampled planar vector field. Singular nodes carry no value.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2D<T> {
    pub grid: GridSpec<T>,
    pub vx: Vec<T>,
    pub vy: Vec<T>,
    pub singular: Vec<bool>,
}

impl<T: Real> VectorField2D<T> {
    pub fn zeros(grid: &GridSpec<T>) -> Self {
        let n = grid.node_count();
        VectorField2D { grid: grid.clone(), vx: vec![T::zero(); n], vy: vec![T::zero(); n], singular: vec![false; n] }
    }

    /// Samples `f` on masked nodes; `None` flags the node singular.
    pub fn from_fn(grid: &GridSpec<T>, f: impl Fn(Point<T>) -> Option<Point<T>>) -> Self {
        let mut v = Self::zeros(grid);
        for k in 0..grid.node_count() {
            if !grid.is_masked(k) {
                continue;
            }
            match f(grid.node_point(k)) {
                Some(p) => v.set(k, p),
                None => v.singular[k] = true,
            }
        }
        v
    }

    #[inline]
    pub fn at(&self, k: usize) -> Point<T> {
        Point::new(self.vx[k], self.vy[k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, p: Point<T>) {
        self.vx[k] = p.x;
        self.vy[k] = p.y;
        self.singular[k] = false;
    }

    pub fn set_singular(&mut self, k: usize) {
        self.vx[k] = T::zero();
        self.vy[k] = T::zero();
        self.singular[k] = true;
    }

    /// Masked, non-singular node.
    #[inline]
    pub fn is_regular(&self, k: usize) -> bool {
        self.grid.is_masked(k) && !self.singular[k]
    }

    pub fn singular_points(&self) -> Vec<Point<T>> {
        (0..self.grid.node_count())
            .filter(|&k| self.singular[k] && self.grid.is_masked(k))
            .map(|k| self.grid.node_point(k))
            .collect()
    }

    /// Checks that every regular node carries finite components.
    pub fn check_finite(&self) -> Result<()> {
        for k in 0..self.grid.node_count() {
            if self.is_regular(k) && !self.at(k).is_finite() {
                let p = self.grid.node_point(k);
                return Err(Error::Data(format!("non-finite sample at ({}, {})", p.x, p.y)));
            }
        }
        Ok(())
    }

    /// Value at a masked node; errors outside the mask.
    pub fn eval_node(&self, k: usize) -> Result<Point<T>> {
        if !self.grid.is_masked(k) {
            return Err(Error::Geometry(format!("node {k} outside the mask")));
        }
        if self.singular[k] {
            return Err(Error::Geometry(format!("node {k} is singular")));
        }
        Ok(self.at(k))
    }

    /// Bilinear interpolation.
    pub fn try_sample(&self, p: Point<T>) -> Sample<Point<T>> {
        let Some((i, j, s, t)) = self.grid.locate(p) else {
            return Sample::Outside;
        };
        let c = self.grid.cell_corners(i, j);
        if c.iter().any(|&k| !self.grid.is_masked(k)) {
            return Sample::Outside;
        }
        if c.iter().any(|&k| self.singular[k]) {
            return Sample::Singular;
        }
        let one = T::one();
        let w = [(one - s) * (one - t), s * (one - t), s * t, (one - s) * t];
        let mut out = Point::zero();
        for (wk, &k) in w.iter().zip(c.iter()) {
            out = out + self.at(k) * *wk;
        }
        Sample::Value(out)
    }

    pub fn sample(&self, p: Point<T>) -> Result<Point<T>> {
        match self.try_sample(p) {
            Sample::Value(v) => Ok(v),
            Sample::Outside => Err(Error::Geometry(format!("({}, {}) outside the mask", p.x, p.y))),
            Sample::Singular => Err(Error::Geometry(format!("({}, {}) touches a singular node", p.x, p.y))),
        }
    }

    /// Bilinear sample with the field extended by zero outside the mask.
    pub fn sample_or_zero(&self, p: Point<T>) -> Option<Point<T>> {
        match self.try_sample(p) {
            Sample::Value(v) => Some(v),
            Sample::Outside => Some(Point::zero()),
            Sample::Singular => None,
        }
    }

    /// Cell-midpoint value (mean of the corners); `None` for inactive or singular cells.
    pub fn cell_mid(&self, i: usize, j: usize) -> Option<Point<T>> {
        let c = self.grid.cell_corners(i, j);
        if c.iter().any(|&k| !self.is_regular(k)) {
            return None;
        }
        let sum = c.iter().fold(Point::zero(), |acc, &k| acc + self.at(k));
        Some(sum * T::lit(0.25))
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.vx.iter_mut().for_each(|v| *v = *v * s);
        out.vy.iter_mut().for_each(|v| *v = *v * s);
        out
    }

    /// Pointwise sum; singular where either input is.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for k in 0..out.vx.len() {
            if self.singular[k] || other.singular[k] {
                out.set_singular(k);
            } else {
                out.vx[k] = self.vx[k] + other.vx[k];
                out.vy[k] = self.vy[k] + other.vy[k];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-T::one()))
    }

    /// Largest `|V|` over regular nodes.
    pub fn sup_norm(&self) -> T {
        (0..self.vx.len())
            .filter(|&k| self.is_regular(k))
            .map(|k| self.at(k).norm())
            .fold(T::zero(), T::max)
    }
}

/// Circle-valued map with values in `[0, 2π)` on masked nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleValuedField<T> {
    pub grid: GridSpec<T>,
    pub theta: Vec<T>,
}

impl<T: Real> CircleValuedField<T> {
    pub fn from_fn(grid: &GridSpec<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let theta = (0..grid.node_count())
            .map(|k| if grid.is_masked(k) { wrap_angle(f(grid.node_point(k))) } else { T::zero() })
            .collect();
        CircleValuedField { grid: grid.clone(), theta }
    }

    /// Builds from raw values, wrapping each into `[0, 2π)`.
    pub fn from_values(grid: &GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Data("value count does not match grid".into()));
        }
        let theta = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| if grid.is_masked(k) { wrap_angle(v) } else { T::zero() })
            .collect();
        Ok(CircleValuedField { grid: grid.clone(), theta })
    }

    /// Wrapped bilinear interpolation: corners are unwrapped relative to the first.
    pub fn try_sample(&self, p: Point<T>) -> Sample<T> {
        let Some((i, j, s, t)) = self.grid.locate(p) else {
            return Sample::Outside;
        };
        let c = self.grid.cell_corners(i, j);
        if c.iter().any(|&k| !self.grid.is_masked(k)) {
            return Sample::Outside;
        }
        let base = self.theta[c[0]];
        let one = T::one();
        let w = [(one - s) * (one - t), s * (one - t), s * t, (one - s) * t];
        let mut acc = T::zero();
        for (wk, &k) in w.iter().zip(c.iter()) {
            acc = acc + *wk * wrap_diff(self.theta[k] - base);
        }
        Sample::Value(wrap_angle(base + acc))
    }

    pub fn sample(&self, p: Point<T>) -> Result<T> {
        match self.try_sample(p) {
            Sample::Value(v) => Ok(v),
            _ => Err(Error::Geometry(format!("({}, {}) outside the mask", p.x, p.y))),
        }
    }

    /// Wrapped gradient `(∂₁u, ∂₂u)` of an active cell from edge-averaged differences.
    pub fn cell_gradient(&self, i: usize, j: usize) -> Point<T> {
        let [a, b, c, d] = self.grid.cell_corners(i, j);
        let u = &self.theta;
        let two_h = self.grid.h + self.grid.h;
        let gx = (wrap_diff(u[b] - u[a]) + wrap_diff(u[c] - u[d])) / two_h;
        let gy = (wrap_diff(u[d] - u[a]) + wrap_diff(u[c] - u[b])) / two_h;
        Point::new(gx, gy)
    }

    /// Net winding of the cell boundary, counterclockwise.
    pub fn cell_winding(&self, i: usize, j: usize) -> i64 {
        let c = self.grid.cell_corners(i, j);
        let mut total = T::zero();
        for k in 0..4 {
            total = total + wrap_diff(self.theta[c[(k + 1) % 4]] - self.theta[c[k]]);
        }
        (total / T::two_pi()).round().as_f64() as i64
    }
}

/// Real scalar grid function (weights, test functions).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn from_fn(grid: &GridSpec<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let values = (0..grid.node_count()).map(|k| f(grid.node_point(k))).collect();
        GridFunction { grid: grid.clone(), values }
    }

    pub fn constant(grid: &GridSpec<T>, c: T) -> Self {
        GridFunction { grid: grid.clone(), values: vec![c; grid.node_count()] }
    }

    pub fn sample(&self, p: Point<T>) -> Option<T> {
        let (i, j, s, t) = self.grid.locate(p)?;
        let c = self.grid.cell_corners(i, j);
        let one = T::one();
        let w = [(one - s) * (one - t), s * (one - t), s * t, (one - s) * t];
        Some(w.iter().zip(c.iter()).fold(T::zero(), |acc, (wk, &k)| acc + *wk * self.values[k]))
    }

    pub fn cell_mid(&self, i: usize, j: usize) -> T {
        let c = self.grid.cell_corners(i, j);
        c.iter().fold(T::zero(), |acc, &k| acc + self.values[k]) * T::lit(0.25)
    }
}
