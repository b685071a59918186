//! The dyadic hypersingular maximal operator, hypersingular sparse operators
//! and the maximal level-set decomposition.
//!
//! Box integrals `∫_Q |f| dA` are sums of quadrature weights over the nodes
//! inside `Q`; a cell belongs to a box when its node does. On a disc grid
//! every node is assigned to the deepest box of the tree that contains it,
//! box integrals are accumulated bottom-up, and chain maxima or chain sums
//! are pushed top-down, so one application costs `O(nodes + boxes)`.

use crate::error::{check_disc_index, invalid, Error, Result};
use crate::geometry::{annulus_level, carleson_box, CarlesonBox, DyadicArc, DyadicSystem, MeasureConvention};
use crate::grid::{CubeGrid, DiscGrid, Grid, GridFunction, PolarGrid, RadialGrid};
use crate::sparse::{FamilyGeometry, GradedSparseFamily};

/// Fewest nodes a box must contain to count as resolved.
pub const MIN_NODES_PER_BOX: usize = 4;

/// Deepest level considered when the tree depth is chosen automatically.
pub const MAX_TREE_DEPTH: u32 = 20;

/// Heap position of an arc: `2^k - 1 + m`.
fn heap_to_arc(h: usize, system: DyadicSystem) -> DyadicArc {
    let level = usize::BITS - 1 - (h + 1).leading_zeros();
    DyadicArc {
        level,
        index: (h + 1 - (1 << level)) as u64,
        system,
    }
}

/// All boxes of one dyadic system down to a fixed level, with every node of a
/// disc grid assigned to the deepest box containing it.
#[derive(Debug, Clone)]
pub struct BoxTree {
    system: DyadicSystem,
    depth: u32,
    bucket: Vec<u32>,
    parent: Vec<u32>,
    counts: Vec<usize>,
}

impl BoxTree {
    /// Builds the tree to `depth`, or to the deepest level at which every box
    /// holds at least [`MIN_NODES_PER_BOX`] nodes when `depth` is `None`.
    pub fn new<G: DiscGrid + ?Sized>(grid: &G, system: DyadicSystem, depth: Option<u32>) -> Result<Self> {
        let points = grid.points();
        let deepest = points
            .iter()
            .map(|p| annulus_level(p.depth))
            .max()
            .unwrap_or(0);
        let probe = match depth {
            Some(d) => d,
            None => deepest.min(MAX_TREE_DEPTH),
        };
        if probe > 26 {
            return Err(invalid("depth", format!("box tree depth {probe} exceeds 26")));
        }
        let tree = Self::assemble(&points, system, probe);
        let resolved = tree.resolved_depth();
        match depth {
            Some(d) if resolved < d as i64 => {
                let level = (resolved + 1) as u32;
                let nodes = (0..1usize << level)
                    .map(|m| tree.counts[(1 << level) - 1 + m])
                    .min()
                    .unwrap_or(0);
                Err(Error::UnresolvedGrid {
                    level,
                    nodes,
                    required: MIN_NODES_PER_BOX,
                })
            }
            Some(_) => Ok(tree),
            None if resolved < 0 => Err(Error::UnresolvedGrid {
                level: 0,
                nodes: grid.len(),
                required: MIN_NODES_PER_BOX,
            }),
            None => Ok(if resolved as u32 == probe {
                tree
            } else {
                Self::assemble(&points, system, resolved as u32)
            }),
        }
    }

    fn assemble(points: &[crate::geometry::DiscPoint], system: DyadicSystem, depth: u32) -> Self {
        let size = (1usize << (depth + 1)) - 1;
        let parent: Vec<u32> = (0..size)
            .map(|h| {
                heap_to_arc(h, system)
                    .parent()
                    .map_or(0, |p| p.heap_id() as u32)
            })
            .collect();
        let bucket: Vec<u32> = points
            .iter()
            .map(|p| {
                let level = annulus_level(p.depth).min(depth);
                let index = system.index_at(p.angle, level) as usize;
                ((1usize << level) - 1 + index) as u32
            })
            .collect();
        let mut counts = vec![0usize; size];
        for &b in &bucket {
            counts[b as usize] += 1;
        }
        for h in (1..size).rev() {
            counts[parent[h] as usize] += counts[h];
        }
        BoxTree {
            system,
            depth,
            bucket,
            parent,
            counts,
        }
    }

    /// Deepest level whose boxes (and all shallower ones) hold enough nodes;
    /// `-1` if even the root does not.
    fn resolved_depth(&self) -> i64 {
        let mut level = -1i64;
        for k in 0..=self.depth {
            let start = (1usize << k) - 1;
            let ok = self.counts[start..start + (1 << k)]
                .iter()
                .all(|&c| c >= MIN_NODES_PER_BOX);
            if !ok {
                break;
            }
            level = k as i64;
        }
        level
    }

    pub fn system(&self) -> DyadicSystem {
        self.system
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn num_boxes(&self) -> usize {
        self.parent.len()
    }

    pub fn arc(&self, h: usize) -> DyadicArc {
        heap_to_arc(h, self.system)
    }

    /// Nodes inside box `h`.
    pub fn count(&self, h: usize) -> usize {
        self.counts[h]
    }

    /// Deepest box containing node `i`.
    pub fn bucket(&self, i: usize) -> usize {
        self.bucket[i] as usize
    }

    /// `∫_Q g dA` for every box.
    pub fn integrals(&self, values: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_boxes()];
        for ((&b, v), w) in self.bucket.iter().zip(values).zip(weights) {
            sums[b as usize] += v * w;
        }
        for h in (1..sums.len()).rev() {
            sums[self.parent[h] as usize] += sums[h];
        }
        sums
    }

    /// `|Q|^(-t) ∫_Q |f| dA` for every box.
    pub fn averages(&self, f: &[f64], weights: &[f64], t: f64, convention: MeasureConvention) -> Vec<f64> {
        let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        let mut out = self.integrals(&abs, weights);
        for (h, v) in out.iter_mut().enumerate() {
            let len = self.arc(h).length();
            *v *= convention.box_measure(len).powf(-t);
        }
        out
    }

    /// Maximum of `values` along the chain of boxes above each node.
    pub fn chain_max(&self, values: &[f64]) -> Vec<f64> {
        let mut acc = values.to_vec();
        for h in 1..acc.len() {
            acc[h] = acc[h].max(acc[self.parent[h] as usize]);
        }
        self.bucket.iter().map(|&b| acc[b as usize]).collect()
    }

    /// Sum of `values` along the chain of boxes above each node.
    pub fn chain_sum(&self, values: &[f64]) -> Vec<f64> {
        let mut acc = values.to_vec();
        for h in 1..acc.len() {
            acc[h] += acc[self.parent[h] as usize];
        }
        self.bucket.iter().map(|&b| acc[b as usize]).collect()
    }
}

/// Output of [`apply_maximal`]: values and the depth at which the
/// supremum was truncated.
#[derive(Debug, Clone)]
pub struct MaximalOutput<'g, G: ?Sized> {
    pub values: GridFunction<'g, G>,
    pub depth: u32,
}

/// `M_t^D f(z) = sup_{Q ∋ z} |Q|^(-t) ∫_Q |f| dA` over boxes of one system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalOperator {
    pub system: DyadicSystem,
    pub t: f64,
    pub depth: Option<u32>,
    pub convention: MeasureConvention,
}

impl MaximalOperator {
    pub fn new(system: DyadicSystem, t: f64) -> Result<Self> {
        check_disc_index(t)?;
        Ok(MaximalOperator {
            system,
            t,
            depth: None,
            convention: MeasureConvention::Exact,
        })
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.depth = Some(depth);
        self
    }
}

pub fn apply_maximal<'g, G: DiscGrid + ?Sized>(
    op: &MaximalOperator,
    f: &GridFunction<'g, G>,
) -> Result<MaximalOutput<'g, G>> {
    let tree = BoxTree::new(f.grid, op.system, op.depth)?;
    Ok(maximal_on_tree(&tree, op, f))
}

/// Maximal operator on a prebuilt tree.
pub fn maximal_on_tree<'g, G: DiscGrid + ?Sized>(
    tree: &BoxTree,
    op: &MaximalOperator,
    f: &GridFunction<'g, G>,
) -> MaximalOutput<'g, G> {
    let avg = tree.averages(&f.values, f.grid.weights(), op.t, op.convention);
    MaximalOutput {
        values: GridFunction {
            grid: f.grid,
            values: tree.chain_max(&avg),
        },
        depth: tree.depth(),
    }
}

/// Maximal operator for a radial function on a rotation-invariant grid.
///
/// For radial `f`, `∫_{Q_I} f = |I| ∫_{1-|z| ≤ |I|} f dA`, independent of the
/// arc, so the supremum runs over levels only and is exact up to the ring
/// discretization.
pub fn apply_maximal_radial<'g>(
    op: &MaximalOperator,
    f: &GridFunction<'g, RadialGrid>,
) -> Result<MaximalOutput<'g, RadialGrid>> {
    let grid = f.grid;
    let levels = grid.levels();
    let depth = op.depth.unwrap_or(levels);
    if depth > levels {
        return Err(Error::UnresolvedGrid {
            level: depth,
            nodes: 0,
            required: 1,
        });
    }
    // rings run from the centre outwards, so depths decrease along the grid
    let mut tail = vec![0.0; grid.len() + 1];
    for i in (0..grid.len()).rev() {
        tail[i] = tail[i + 1] + f.values[i].abs() * grid.weights()[i];
    }
    let mids: Vec<f64> = (0..grid.len()).map(|i| crate::grid::RadialNodes::depth(grid, i)).collect();
    let level_value: Vec<f64> = (0..=depth)
        .map(|k| {
            let len = (-(k as f64)).exp2();
            let first = mids.partition_point(|&s| s > len);
            op.convention.box_measure(len).powf(-op.t) * len * tail[first]
        })
        .collect();
    let mut running = Vec::with_capacity(level_value.len());
    let mut best = f64::NEG_INFINITY;
    for v in &level_value {
        best = best.max(*v);
        running.push(best);
    }
    let values = mids
        .iter()
        .map(|&s| running[annulus_level(s).min(depth) as usize])
        .collect();
    Ok(MaximalOutput {
        values: GridFunction { grid, values },
        depth,
    })
}

/// `A_S^t f = Σ_{Q ∈ S} 1_Q |Q|^(-t) ∫_Q |f|`, optionally restricted to one layer.
#[derive(Debug, Clone, Copy)]
pub struct SparseOperator<'a> {
    pub family: &'a GradedSparseFamily,
    pub t: f64,
    pub layer: Option<usize>,
}

impl<'a> SparseOperator<'a> {
    /// The operator is defined for every `t > 1` on a finite family; whether
    /// it is bounded is a separate question (see [`check_sparse_index`]).
    pub fn new(family: &'a GradedSparseFamily, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 1.0) {
            return Err(invalid("t", format!("{t} must exceed 1")));
        }
        Ok(SparseOperator {
            family,
            t,
            layer: None,
        })
    }

    pub fn layer(mut self, j: usize) -> Self {
        self.layer = Some(j);
        self
    }

    fn includes(&self, i: usize) -> bool {
        self.layer.is_none_or(|j| self.family.layer_of(i) == j)
    }

    /// Per-member coefficients `|Q|^(-t)`, zero outside the selected layer.
    fn coefficients(&self) -> Vec<f64> {
        (0..self.family.len())
            .map(|i| {
                if self.includes(i) {
                    self.family.measure(i).powf(-self.t)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Rejects `t` outside `1 < t < 1 - log2(1-η)/(nK)`, the range in which the
/// graded sparse operator has its off-critical bounds.
pub fn check_sparse_index(t: f64, n: usize, eta: f64, degree: f64) -> Result<()> {
    let upper = crate::sparse::sparse_index_bound(n, eta, degree);
    if t.is_finite() && t > 1.0 && t < upper {
        Ok(())
    } else {
        Err(Error::InadmissibleIndex { t, lower: 1.0, upper })
    }
}

/// Sparse operator on a cube grid (cube families) .
pub fn apply_sparse_cube<'g>(
    op: &SparseOperator<'_>,
    f: &GridFunction<'g, CubeGrid>,
) -> Result<GridFunction<'g, CubeGrid>> {
    let grid = f.grid;
    let family = op.family;
    match family.geometry() {
        FamilyGeometry::Cube { dim } if dim == grid.dim() => {}
        _ => {
            return Err(Error::Unsupported {
                kind: "sparse".into(),
                reason: "cube grids need a cube family of the same dimension".into(),
            })
        }
    }
    if let Some(q) = family.cubes().iter().find(|q| q.level > grid.level()) {
        return Err(Error::UnresolvedGrid {
            level: q.level,
            nodes: 0,
            required: 1,
        });
    }
    let mut prefix = Vec::with_capacity(grid.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for (v, w) in f.values.iter().zip(grid.weights()) {
        acc += v.abs() * w;
        prefix.push(acc);
    }
    let coef = op.coefficients();
    // members are sorted by level, so deeper cubes overwrite their ancestors
    let mut bucket = vec![0u32; grid.len()];
    let mut chain = vec![0.0; family.len()];
    for (i, q) in family.cubes().iter().enumerate() {
        let range = grid.cube_range(q.level, &q.index);
        let own = coef[i] * (prefix[range.end] - prefix[range.start]);
        chain[i] = family.parent(i).map_or(0.0, |p| chain[p]) + own;
        bucket[range].fill(i as u32);
    }
    Ok(GridFunction {
        grid,
        values: bucket.iter().map(|&b| chain[b as usize]).collect(),
    })
}

/// Sparse operator of a Carleson-box family on a disc grid.
pub fn apply_sparse_disc<'g, G: DiscGrid + ?Sized>(
    op: &SparseOperator<'_>,
    f: &GridFunction<'g, G>,
) -> Result<GridFunction<'g, G>> {
    let FamilyGeometry::Carleson { system, .. } = op.family.geometry() else {
        return Err(Error::Unsupported {
            kind: "sparse".into(),
            reason: "disc grids need a Carleson-box family".into(),
        });
    };
    let deepest = op.family.cubes().iter().map(|q| q.level).max().unwrap_or(0);
    let tree = BoxTree::new(f.grid, system, Some(deepest))?;
    Ok(sparse_on_tree(&tree, op, f))
}

/// Sparse operator of a Carleson family on a prebuilt tree of the same system.
pub fn sparse_on_tree<'g, G: DiscGrid + ?Sized>(
    tree: &BoxTree,
    op: &SparseOperator<'_>,
    f: &GridFunction<'g, G>,
) -> GridFunction<'g, G> {
    let abs: Vec<f64> = f.values.iter().map(|v| v.abs()).collect();
    let integrals = tree.integrals(&abs, f.grid.weights());
    let coef = op.coefficients();
    let mut per_box = vec![0.0; tree.num_boxes()];
    for (i, q) in op.family.cubes().iter().enumerate() {
        let h = (1usize << q.level) - 1 + q.index[0] as usize;
        per_box[h] = coef[i] * integrals[h];
    }
    GridFunction {
        grid: f.grid,
        values: tree.chain_sum(&per_box),
    }
}

/// `Σ_Q 1_Q |Q|^(-t) ∫_Q |f|` over every box of a tree, i.e. the sparse
/// operator of the full Carleson family of the tree's system and depth.
pub fn full_sparse_on_tree<'g, G: DiscGrid + ?Sized>(
    tree: &BoxTree,
    t: f64,
    convention: MeasureConvention,
    f: &GridFunction<'g, G>,
) -> GridFunction<'g, G> {
    let avg = tree.averages(&f.values, f.grid.weights(), t, convention);
    GridFunction {
        grid: f.grid,
        values: tree.chain_sum(&avg),
    }
}

/// Maximal boxes with `|Q|^(-t) ∫_Q f dA > α`.
#[derive(Debug, Clone)]
pub struct LevelSet {
    pub boxes: Vec<CarlesonBox>,
    pub depth: u32,
}

impl LevelSet {
    /// Nodes covered by the returned boxes.
    pub fn node_mask<G: DiscGrid + ?Sized>(&self, grid: &G) -> Vec<bool> {
        grid.points()
            .iter()
            .map(|p| self.boxes.iter().any(|b| crate::geometry::box_membership(p, b)))
            .collect()
    }
}

pub fn level_set_decomposition<G: DiscGrid + ?Sized>(
    op: &MaximalOperator,
    f: &GridFunction<'_, G>,
    alpha: f64,
) -> Result<LevelSet> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("{alpha} must be positive")));
    }
    if !f.is_nonnegative() {
        return Err(invalid("f", "level sets are taken of nonnegative functions"));
    }
    let tree = BoxTree::new(f.grid, op.system, op.depth)?;
    let avg = tree.averages(&f.values, f.grid.weights(), op.t, op.convention);
    let mut covered = vec![false; tree.num_boxes()];
    let mut boxes = Vec::new();
    for h in 0..tree.num_boxes() {
        let above = h > 0 && covered[tree.parent[h] as usize];
        if above {
            covered[h] = true;
        } else if avg[h] > alpha {
            covered[h] = true;
            boxes.push(carleson_box(tree.arc(h)));
        }
    }
    Ok(LevelSet {
        boxes,
        depth: tree.depth(),
    })
}

/// Operators with nonnegative kernels, for which `|Tf| ≤ ‖f‖_∞ T1`.
pub trait PositiveOperator<G: Grid + ?Sized> {
    fn apply<'g>(&self, f: &GridFunction<'g, G>) -> Result<GridFunction<'g, G>>;

    fn label(&self) -> String;
}

impl PositiveOperator<PolarGrid> for MaximalOperator {
    fn apply<'g>(&self, f: &GridFunction<'g, PolarGrid>) -> Result<GridFunction<'g, PolarGrid>> {
        Ok(apply_maximal(self, f)?.values)
    }

    fn label(&self) -> String {
        format!("maximal[{}, t={}]", self.system, self.t)
    }
}

impl PositiveOperator<RadialGrid> for MaximalOperator {
    fn apply<'g>(&self, f: &GridFunction<'g, RadialGrid>) -> Result<GridFunction<'g, RadialGrid>> {
        Ok(apply_maximal_radial(self, f)?.values)
    }

    fn label(&self) -> String {
        format!("maximal[{}, t={}]", self.system, self.t)
    }
}

impl PositiveOperator<PolarGrid> for SparseOperator<'_> {
    fn apply<'g>(&self, f: &GridFunction<'g, PolarGrid>) -> Result<GridFunction<'g, PolarGrid>> {
        apply_sparse_disc(self, f)
    }

    fn label(&self) -> String {
        sparse_label(self)
    }
}

impl PositiveOperator<CubeGrid> for SparseOperator<'_> {
    fn apply<'g>(&self, f: &GridFunction<'g, CubeGrid>) -> Result<GridFunction<'g, CubeGrid>> {
        apply_sparse_cube(self, f)
    }

    fn label(&self) -> String {
        sparse_label(self)
    }
}

fn sparse_label(op: &SparseOperator<'_>) -> String {
    match op.layer {
        Some(j) => format!("sparse_layer({j})[{}, t={}]", op.family.name(), op.t),
        None => format!("sparse[{}, t={}]", op.family.name(), op.t),
    }
}

/// Operator kinds selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Maximal,
    Sparse,
    SparseLayer(usize),
    Bergman,
    BergmanPositive,
}

impl OperatorKind {
    pub fn is_positive(self) -> bool {
        self != OperatorKind::Bergman
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(j) = s.strip_prefix("sparse_layer:") {
            return j
                .parse()
                .map(OperatorKind::SparseLayer)
                .map_err(|_| invalid("kind", format!("bad layer in `{s}`")));
        }
        match s {
            "maximal" => Ok(OperatorKind::Maximal),
            "sparse" => Ok(OperatorKind::Sparse),
            "bergman" => Ok(OperatorKind::Bergman),
            "bergman_positive" => Ok(OperatorKind::BergmanPositive),
            other => Err(invalid("kind", format!("unknown operator kind `{other}`"))),
        }
    }
}
