//! Quadrature grids on the disc and on the unit cube, and sampled functions.
//!
//! Disc grids are stored ring by ring. A ring spans depths `s_outer < s_inner`
//! (recall `s = 1 - |z|`) and carries `n_theta` equal angular cells with nodes
//! at the cell midpoints; the weight of each cell is its exact normalized
//! area, so weights over the whole grid sum to `r_max²`.

use crate::error::{invalid, Error, Result};
use crate::geometry::{annulus_level, DiscPoint};
use std::f64::consts::PI;

/// A finite set of quadrature nodes with positive weights.
pub trait Grid: Sync {
    fn len(&self) -> usize;

    fn weights(&self) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn total_measure(&self) -> f64 {
        self.weights().iter().sum()
    }
}

/// Grids whose nodes sit in the disc and whose radial position is known.
pub trait RadialNodes: Grid {
    /// `1 - |z|` at node `i`.
    fn depth(&self, i: usize) -> f64;
}

/// Grids with fully specified disc nodes.
pub trait DiscGrid: RadialNodes {
    fn point(&self, i: usize) -> DiscPoint;

    /// Diameter of the quadrature cell around node `i`.
    fn cell_diameter(&self, i: usize) -> f64;

    /// All nodes in index order.
    fn points(&self) -> Vec<DiscPoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    /// Depth of the outer edge (closest to the boundary).
    pub s_outer: f64,
    /// Depth of the inner edge.
    pub s_inner: f64,
    pub n_theta: usize,
    /// Index of the first node of this ring.
    pub offset: usize,
}

impl Ring {
    pub fn s_mid(&self) -> f64 {
        0.5 * (self.s_outer + self.s_inner)
    }

    /// Normalized area of the whole ring.
    pub fn measure(&self) -> f64 {
        (self.s_inner - self.s_outer) * (2.0 - self.s_inner - self.s_outer)
    }

    pub fn cell_weight(&self) -> f64 {
        self.measure() / self.n_theta as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.n_theta as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadialLayout {
    /// Equal steps in `r`.
    #[default]
    Uniform,
    /// Depths `s_i = s_min^(i / n_r)`, refining toward `r_max`.
    Geometric,
}

impl std::str::FromStr for RadialLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(RadialLayout::Uniform),
            "geometric" => Ok(RadialLayout::Geometric),
            other => Err(invalid("layout", format!("unknown radial layout `{other}`"))),
        }
    }
}

/// Polar quadrature grid on the disc of radius `r_max < 1`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    rings: Vec<Ring>,
    weights: Vec<f64>,
    r_max: f64,
    tensor: bool,
}

/// Tensor-product grid with uniform radial steps.
pub fn make_polar_grid(n_r: usize, n_theta: usize, r_max: f64) -> Result<PolarGrid> {
    PolarGrid::tensor(n_r, n_theta, r_max, RadialLayout::Uniform)
}

impl PolarGrid {
    pub fn tensor(n_r: usize, n_theta: usize, r_max: f64, layout: RadialLayout) -> Result<Self> {
        if n_r == 0 || n_theta == 0 {
            return Err(invalid("n_r/n_theta", "grid sizes must be at least 1"));
        }
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(invalid(
                "r_max",
                format!("{r_max} must lie in (0, 1); operators are singular at |z| = 1"),
            ));
        }
        let s_min = 1.0 - r_max;
        let edge = |i: usize| -> f64 {
            match layout {
                RadialLayout::Uniform => 1.0 - r_max * i as f64 / n_r as f64,
                RadialLayout::Geometric => s_min.powf(i as f64 / n_r as f64),
            }
        };
        let mut edges: Vec<f64> = (0..=n_r).map(edge).collect();
        edges[0] = 1.0;
        edges[n_r] = s_min;
        let spans = edges.windows(2).map(|w| (w[1], w[0], n_theta));
        Ok(Self::from_spans(spans, r_max, true))
    }

    /// Whitney-type grid adapted to dyadic boxes.
    ///
    /// The annulus `2^-(k+1) < s ≤ 2^-k` is split into `radial_per_level`
    /// rings carrying `max(angular_per_arc · 2^k, min_angular)` cells each, so
    /// cells stay roughly square and every box down to level `levels` holds
    /// at least `angular_per_arc · radial_per_level` nodes.
    /// The outermost annulus is `k = levels`, giving `r_max = 1 - 2^-(levels+1)`.
    pub fn dyadic(
        levels: u32,
        radial_per_level: usize,
        angular_per_arc: usize,
        min_angular: usize,
    ) -> Result<Self> {
        if radial_per_level == 0 || angular_per_arc == 0 {
            return Err(invalid("dyadic grid", "cells per level must be at least 1"));
        }
        if levels > 40 {
            return Err(invalid("levels", format!("{levels} exceeds 40")));
        }
        let mut spans = Vec::new();
        for k in 0..=levels {
            let hi = (-(k as f64)).exp2();
            let lo = 0.5 * hi;
            let n_theta = (angular_per_arc << k).max(min_angular);
            for i in 0..radial_per_level {
                let a = hi - (hi - lo) * i as f64 / radial_per_level as f64;
                let b = hi - (hi - lo) * (i + 1) as f64 / radial_per_level as f64;
                spans.push((b, a, n_theta));
            }
        }
        let r_max = 1.0 - (-(levels as f64) - 1.0).exp2();
        Ok(Self::from_spans(spans.into_iter(), r_max, false))
    }

    fn from_spans(
        spans: impl Iterator<Item = (f64, f64, usize)>,
        r_max: f64,
        tensor: bool,
    ) -> Self {
        let mut rings = Vec::new();
        let mut weights = Vec::new();
        for (s_outer, s_inner, n_theta) in spans {
            let ring = Ring {
                s_outer,
                s_inner,
                n_theta,
                offset: weights.len(),
            };
            let w = ring.cell_weight();
            weights.extend(std::iter::repeat(w).take(n_theta));
            rings.push(ring);
        }
        PolarGrid {
            rings,
            weights,
            r_max,
            tensor,
        }
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Every ring has the same angular count.
    pub fn is_tensor(&self) -> bool {
        self.tensor
    }

    pub fn ring_of(&self, i: usize) -> (usize, usize) {
        let r = self.rings.partition_point(|ring| ring.offset <= i) - 1;
        (r, i - self.rings[r].offset)
    }

    /// Deepest annulus level containing a ring midpoint.
    pub fn deepest_annulus(&self) -> u32 {
        self.rings
            .iter()
            .map(|r| annulus_level(r.s_mid()))
            .max()
            .unwrap_or(0)
    }

    /// Samples `f(s, x)` at every node, with `s = 1 - |z|` and `x = arg z / 2π`.
    pub fn sample<T, F: Fn(f64, f64) -> T>(&self, f: F) -> GridFunction<'_, PolarGrid, T> {
        let mut values = Vec::with_capacity(self.len());
        for ring in &self.rings {
            let s = ring.s_mid();
            for j in 0..ring.n_theta {
                values.push(f(s, ring.angle(j)));
            }
        }
        GridFunction {
            grid: self,
            values,
        }
    }
}

impl Grid for PolarGrid {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl RadialNodes for PolarGrid {
    fn depth(&self, i: usize) -> f64 {
        self.rings[self.ring_of(i).0].s_mid()
    }
}

impl DiscGrid for PolarGrid {
    fn point(&self, i: usize) -> DiscPoint {
        let (r, j) = self.ring_of(i);
        let ring = &self.rings[r];
        DiscPoint {
            depth: ring.s_mid(),
            angle: ring.angle(j),
        }
    }

    fn points(&self) -> Vec<DiscPoint> {
        let mut out = Vec::with_capacity(self.len());
        for ring in &self.rings {
            let depth = ring.s_mid();
            out.extend((0..ring.n_theta).map(|j| DiscPoint {
                depth,
                angle: ring.angle(j),
            }));
        }
        out
    }

    fn cell_diameter(&self, i: usize) -> f64 {
        let ring = &self.rings[self.ring_of(i).0];
        let radial = ring.s_inner - ring.s_outer;
        let angular = 2.0 * PI * (1.0 - ring.s_outer) / ring.n_theta as f64;
        radial.hypot(angular)
    }
}

/// Rotation-invariant grid: one node per ring, for radial functions only.
///
/// Depths can go far below what a polar grid can resolve (down to `2^-1000`),
/// and dyadic annuli are represented exactly.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    edges: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Annuli `2^-(k+1) < s ≤ 2^-k` for `k = 0..=levels`, each split into
    /// `rings_per_level` rings of equal depth.
    pub fn dyadic(levels: u32, rings_per_level: usize) -> Result<Self> {
        if rings_per_level == 0 {
            return Err(invalid("rings_per_level", "must be at least 1"));
        }
        if levels > 1000 {
            return Err(invalid("levels", format!("{levels} exceeds 1000")));
        }
        let mut edges = Vec::new();
        for k in 0..=levels {
            let hi = (-(k as f64)).exp2();
            let lo = 0.5 * hi;
            for i in 0..rings_per_level {
                let a = hi - (hi - lo) * i as f64 / rings_per_level as f64;
                let b = hi - (hi - lo) * (i + 1) as f64 / rings_per_level as f64;
                edges.push((b, a));
            }
        }
        let weights = edges.iter().map(|&(o, i)| (i - o) * (2.0 - i - o)).collect();
        Ok(RadialGrid { edges, weights })
    }

    pub fn levels(&self) -> u32 {
        annulus_level(self.edges.last().map(|e| self.mid(e)).unwrap_or(1.0))
    }

    fn mid(&self, e: &(f64, f64)) -> f64 {
        0.5 * (e.0 + e.1)
    }

    /// Ring edges `(s_outer, s_inner)`.
    pub fn edges(&self) -> &[(f64, f64)] {
        &self.edges
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction<'_, RadialGrid> {
        GridFunction {
            grid: self,
            values: self.edges.iter().map(|e| f(self.mid(e))).collect(),
        }
    }
}

impl Grid for RadialGrid {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl RadialNodes for RadialGrid {
    fn depth(&self, i: usize) -> f64 {
        self.mid(&self.edges[i])
    }
}

/// Uniform grid of level-`level` dyadic cells in `[0,1)^n`, in Morton order.
///
/// In Morton order every dyadic cube of level `k ≤ level` occupies a
/// contiguous block of `2^(n(level-k))` cells.
#[derive(Debug, Clone)]
pub struct CubeGrid {
    dim: usize,
    level: u32,
    weights: Vec<f64>,
}

impl CubeGrid {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        let bits = dim as u32 * level;
        if bits > 26 {
            return Err(invalid(
                "level",
                format!("2^{bits} cells exceeds the 2^26 cell limit"),
            ));
        }
        let count = 1usize << bits;
        let w = (-(bits as f64)).exp2();
        Ok(CubeGrid {
            dim,
            level,
            weights: vec![w; count],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Interleaves the bits of a cube index vector at level `k`.
    pub fn morton(index: &[u64], level: u32) -> u64 {
        let n = index.len();
        let mut code = 0u64;
        for bit in (0..level).rev() {
            for coord in index {
                code = (code << 1) | ((coord >> bit) & 1);
            }
        }
        debug_assert!(n as u32 * level <= 64);
        code
    }

    /// Cell range covered by the cube `(k, index)`.
    pub fn cube_range(&self, level: u32, index: &[u64]) -> std::ops::Range<usize> {
        let span = 1usize << (self.dim as u32 * (self.level - level));
        let start = Self::morton(index, level) as usize * span;
        start..start + span
    }

    /// Center of cell `i`.
    pub fn center(&self, i: usize) -> Vec<f64> {
        let mut coords = vec![0u64; self.dim];
        let mut code = i as u64;
        for bit in 0..self.level {
            for c in (0..self.dim).rev() {
                coords[c] |= (code & 1) << bit;
                code >>= 1;
            }
        }
        let side = (-(self.level as f64)).exp2();
        coords.iter().map(|&c| (c as f64 + 0.5) * side).collect()
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridFunction<'_, CubeGrid> {
        GridFunction {
            grid: self,
            values: (0..self.len()).map(|i| f(&self.center(i))).collect(),
        }
    }
}

impl Grid for CubeGrid {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// One sample per grid node.
#[derive(Debug, Clone)]
pub struct GridFunction<'g, G: ?Sized, T = f64> {
    pub grid: &'g G,
    pub values: Vec<T>,
}

impl<'g, G: Grid + ?Sized, T: Clone> GridFunction<'g, G, T> {
    pub fn new(grid: &'g G, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                values: values.len(),
                nodes: grid.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: &'g G, value: T) -> Self {
        GridFunction {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> GridFunction<'g, G, U> {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl<'g, G: Grid + ?Sized> GridFunction<'g, G> {
    pub fn zeros(grid: &'g G) -> Self {
        Self::constant(grid, 0.0)
    }

    /// `∫ f dA` by the grid quadrature.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Indicator of a node mask.
    pub fn indicator(grid: &'g G, mask: &[bool]) -> Result<Self> {
        Self::new(
            grid,
            mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
    }
}
