//! Dyadic cubes, graded sparse families and sparseness witnesses.
//!
//! A family is a finite set of dyadic cubes inside the root cube. It is
//! layered by containment depth: layer 0 is the root, and layer `j + 1`
//! consists of the maximal cubes left after removing layers `0..=j`. The
//! scale of a layer is its smallest side length, and the degree is the
//! largest `log2` drop between consecutive scales.
//!
//! The same machinery handles families of Carleson boxes over the disc. There
//! the "cube" is the arc of a box, containment follows the arc's dyadic
//! system, and the measure of a box follows a [`MeasureConvention`].

use crate::error::{invalid, Error, Result};
use crate::geometry::{DyadicArc, DyadicSystem, MeasureConvention};
use std::collections::HashMap;
use std::fmt;

/// A dyadic cube of level `k` in `[0,1)^n`: `Π [m_i 2^-k, (m_i+1) 2^-k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<u64>,
}

impl DyadicCube {
    pub fn new(level: u32, index: Vec<u64>) -> Result<Self> {
        let cube = DyadicCube { level, index };
        if cube.index.is_empty() {
            return Err(invalid("cube", "dimension must be at least 1"));
        }
        if level > 62 || cube.index.iter().any(|&m| m >> level != 0) {
            return Err(Error::OutsideRoot {
                cube: cube.to_string(),
            });
        }
        Ok(cube)
    }

    pub fn root(dim: usize) -> Self {
        DyadicCube {
            level: 0,
            index: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// `|Q| = 2^(-nk)`.
    pub fn measure(&self) -> f64 {
        (-((self.level as usize * self.dim()) as f64)).exp2()
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube {
            level: self.level - 1,
            index: self.index.iter().map(|m| m >> 1).collect(),
        })
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1u64 << n)
            .map(|bits| DyadicCube {
                level: self.level + 1,
                index: self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(c, m)| 2 * m + ((bits >> (n - 1 - c)) & 1))
                    .collect(),
            })
            .collect()
    }

    /// `self ⊆ other`, decided by index arithmetic.
    pub fn is_within(&self, other: &DyadicCube) -> bool {
        self.dim() == other.dim()
            && self.level >= other.level
            && self
                .index
                .iter()
                .zip(&other.index)
                .all(|(a, b)| a >> (self.level - other.level) == *b)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let side = self.side();
        x.len() == self.dim()
            && x.iter().zip(&self.index).all(|(&xi, &m)| {
                let lo = m as f64 * side;
                xi >= lo && xi < lo + side
            })
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.level)?;
        for m in &self.index {
            write!(f, " {m}")?;
        }
        f.write_str(")")
    }
}

/// What the cubes of a family live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyGeometry {
    /// Dyadic cubes of `[0,1)^dim` with Lebesgue measure.
    Cube { dim: usize },
    /// Carleson boxes over the arcs of one dyadic system; the root is the disc.
    Carleson {
        system: DyadicSystem,
        convention: MeasureConvention,
    },
}

impl FamilyGeometry {
    pub fn index_dim(&self) -> usize {
        match self {
            FamilyGeometry::Cube { dim } => *dim,
            FamilyGeometry::Carleson { .. } => 1,
        }
    }

    /// Dimension `n` in the scaling `|Q| ≃ ℓ(Q)^n`.
    pub fn real_dim(&self) -> usize {
        match self {
            FamilyGeometry::Cube { dim } => *dim,
            FamilyGeometry::Carleson { .. } => 2,
        }
    }

    pub fn measure(&self, q: &DyadicCube) -> f64 {
        match self {
            FamilyGeometry::Cube { .. } => q.measure(),
            FamilyGeometry::Carleson { convention, .. } => convention.box_measure(q.side()),
        }
    }

    pub fn parent(&self, q: &DyadicCube) -> Option<DyadicCube> {
        match self {
            FamilyGeometry::Cube { .. } => q.parent(),
            FamilyGeometry::Carleson { system, .. } => {
                let arc = DyadicArc {
                    level: q.level,
                    index: q.index[0],
                    system: *system,
                };
                arc.parent().map(|p| DyadicCube {
                    level: p.level,
                    index: vec![p.index],
                })
            }
        }
    }

    pub fn arc(&self, q: &DyadicCube) -> Option<DyadicArc> {
        match self {
            FamilyGeometry::Carleson { system, .. } => Some(DyadicArc {
                level: q.level,
                index: q.index[0],
                system: *system,
            }),
            FamilyGeometry::Cube { .. } => None,
        }
    }

    fn header(&self) -> String {
        match self {
            FamilyGeometry::Cube { .. } => "cube".into(),
            FamilyGeometry::Carleson { system, convention } => {
                format!("carleson {} {}", system, convention.name())
            }
        }
    }
}

/// A finite graded family with its layer decomposition.
#[derive(Debug, Clone)]
pub struct GradedSparseFamily {
    geometry: FamilyGeometry,
    name: String,
    dilation: f64,
    cubes: Vec<DyadicCube>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    layer_of: Vec<usize>,
    layers: Vec<Vec<usize>>,
    root_adjoined: bool,
}

impl GradedSparseFamily {
    /// Builds a family, adjoining the root if it is missing.
    pub fn new(
        geometry: FamilyGeometry,
        cubes: impl IntoIterator<Item = DyadicCube>,
    ) -> Result<Self> {
        let dim = geometry.index_dim();
        if dim == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        let mut list: Vec<DyadicCube> = Vec::new();
        for q in cubes {
            if q.dim() != dim || q.level > 62 || q.index.iter().any(|&m| m >> q.level != 0) {
                return Err(Error::OutsideRoot { cube: q.to_string() });
            }
            list.push(q);
        }
        let root = DyadicCube::root(dim);
        let root_adjoined = !list.contains(&root);
        if root_adjoined {
            list.push(root);
        }
        list.sort();
        list.dedup();

        let position: HashMap<&DyadicCube, usize> =
            list.iter().enumerate().map(|(i, q)| (q, i)).collect();
        let mut parent = vec![None; list.len()];
        let mut children = vec![Vec::new(); list.len()];
        let mut layer_of = vec![0; list.len()];
        for i in 1..list.len() {
            let mut cur = geometry.parent(&list[i]);
            while let Some(c) = cur {
                if let Some(&p) = position.get(&c) {
                    parent[i] = Some(p);
                    break;
                }
                cur = geometry.parent(&c);
            }
            let p = parent[i].expect("root is an ancestor of every cube");
            children[p].push(i);
            // sorted by level, so the parent's layer is already known
            layer_of[i] = layer_of[p] + 1;
        }
        let depth = layer_of.iter().copied().max().unwrap_or(0);
        let mut layers = vec![Vec::new(); depth + 1];
        for (i, &j) in layer_of.iter().enumerate() {
            layers[j].push(i);
        }
        Ok(GradedSparseFamily {
            geometry,
            name: String::new(),
            dilation: 1.0,
            cubes: list,
            parent,
            children,
            layer_of,
            layers,
            root_adjoined,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Records that the family is the image of an original family under
    /// `x ↦ x / dilation`.
    pub fn with_dilation(mut self, dilation: f64) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn geometry(&self) -> FamilyGeometry {
        self.geometry
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    /// Factor by which measures grow when undoing the recorded rescaling.
    pub fn measure_scale(&self) -> f64 {
        self.dilation.powi(self.geometry.real_dim() as i32)
    }

    /// Converts a value of the rescaled operator `A^t f` back to the original
    /// normalization; every `|Q|^(-t) ∫_Q` picks up `λ^(1-t)`.
    pub fn to_original_normalization(&self, value: f64, t: f64) -> f64 {
        value * self.measure_scale().powf(1.0 - t)
    }

    pub fn root_was_adjoined(&self) -> bool {
        self.root_adjoined
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn cube(&self, i: usize) -> &DyadicCube {
        &self.cubes[i]
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.geometry.measure(&self.cubes[i])
    }

    /// Nearest strict ancestor inside the family.
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    /// Maximal family cubes strictly inside cube `i`.
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn layer_of(&self, i: usize) -> usize {
        self.layer_of[i]
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Deepest level in each layer; the scale of layer `j` is `2^-levels[j]`.
    pub fn scale_levels(&self) -> Vec<u32> {
        self.layers
            .iter()
            .map(|layer| layer.iter().map(|&i| self.cubes[i].level).max().unwrap_or(0))
            .collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.scale_levels()
            .into_iter()
            .map(|k| (-(k as f64)).exp2())
            .collect()
    }

    /// `K_S = max_j log2(𝔊_j / 𝔊_(j+1))`.
    pub fn degree(&self) -> Result<f64> {
        self.tail_degree(0).ok_or(Error::SingleLayer)
    }

    /// Largest scale drop among layers `j ≥ from`; a diagnostic for the
    /// tail behaviour, which does not bound the operator on its own.
    pub fn tail_degree(&self, from: usize) -> Option<f64> {
        let levels = self.scale_levels();
        levels
            .windows(2)
            .skip(from)
            .map(|w| w[1] as f64 - w[0] as f64)
            .reduce(f64::max)
    }

    /// `|Q|` minus the measure of the family children of `Q`.
    pub fn residual_measure(&self, i: usize) -> f64 {
        let inner: f64 = self.children[i].iter().map(|&c| self.measure(c)).sum();
        (self.measure(i) - inner).max(0.0)
    }

    /// All family cubes inside cube `i`, including `i`, in depth-first order.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(q) = stack.pop() {
            out.push(q);
            stack.extend(self.children[q].iter().rev());
        }
        out
    }

    /// Family members containing member `i`, from `i` up to the root.
    pub fn chain(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut cur = i;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// `Σ_{J ⊆ Q} |J|` for every member `Q`.
    pub fn packing_sums(&self) -> Vec<f64> {
        let mut sums: Vec<f64> = (0..self.len()).map(|i| self.measure(i)).collect();
        for i in (1..self.len()).rev() {
            if let Some(p) = self.parent[i] {
                sums[p] += sums[i];
            }
        }
        sums
    }

    /// Largest `η` for which the family is `η`-sparse,
    /// `min_Q |Q| / Σ_{J ⊆ Q} |J|`.
    pub fn optimal_sparseness(&self) -> f64 {
        self.packing_sums()
            .iter()
            .enumerate()
            .map(|(i, s)| self.measure(i) / s)
            .fold(1.0, f64::min)
    }

    /// The family with layer `j` removed; cubes of deeper layers move up.
    pub fn without_layer(&self, j: usize) -> Result<Self> {
        let cubes = self
            .cubes
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.layer_of[i] != j || j == 0)
            .map(|(_, q)| q.clone());
        Ok(GradedSparseFamily::new(self.geometry, cubes)?
            .with_name(self.name.clone())
            .with_dilation(self.dilation))
    }

    /// Line-based text form: header lines, then `k i1 .. in` per cube.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# hypersingular sparse family v1\n");
        out.push_str(&format!("dimension {}\n", self.geometry.index_dim()));
        out.push_str(&format!("geometry {}\n", self.geometry.header()));
        out.push_str(&format!("name {}\n", self.name));
        out.push_str(&format!("dilation {:?}\n", self.dilation));
        out.push_str(&format!("root_adjoined {}\n", self.root_adjoined));
        out.push_str(&format!("root 0{}\n", " 0".repeat(self.geometry.index_dim())));
        out.push_str(&format!("cubes {}\n", self.len()));
        for q in &self.cubes {
            out.push_str(&q.level.to_string());
            for m in &q.index {
                out.push(' ');
                out.push_str(&m.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, reason: &str| Error::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut dim = None;
        let mut geometry = None;
        let mut name = String::new();
        let mut dilation = 1.0;
        let mut root_adjoined = false;
        let mut expected = None;
        let mut cubes = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "dimension" => {
                    dim = Some(
                        rest.parse::<usize>()
                            .map_err(|_| parse_err(line_no, "bad dimension"))?,
                    )
                }
                "geometry" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    geometry = Some(match parts.as_slice() {
                        ["cube"] => FamilyGeometry::Cube {
                            dim: dim.ok_or_else(|| parse_err(line_no, "geometry before dimension"))?,
                        },
                        ["carleson", system, convention] => FamilyGeometry::Carleson {
                            system: system.parse().map_err(|_| parse_err(line_no, "bad system"))?,
                            convention: convention
                                .parse()
                                .map_err(|_| parse_err(line_no, "bad convention"))?,
                        },
                        _ => return Err(parse_err(line_no, "bad geometry")),
                    })
                }
                "name" => name = rest.to_string(),
                "dilation" => {
                    dilation = rest
                        .parse()
                        .map_err(|_| parse_err(line_no, "bad dilation"))?
                }
                "root_adjoined" => {
                    root_adjoined = rest
                        .parse()
                        .map_err(|_| parse_err(line_no, "bad root_adjoined flag"))?
                }
                "root" => {
                    let nums: Vec<&str> = rest.split_whitespace().collect();
                    if nums.iter().any(|x| *x != "0") {
                        return Err(parse_err(line_no, "root must be the level-0 cube"));
                    }
                }
                "cubes" => {
                    expected = Some(
                        rest.parse::<usize>()
                            .map_err(|_| parse_err(line_no, "bad cube count"))?,
                    )
                }
                _ => {
                    let nums: std::result::Result<Vec<u64>, _> =
                        line.split_whitespace().map(str::parse::<u64>).collect();
                    let nums = nums.map_err(|_| parse_err(line_no, "expected `k i1 .. in`"))?;
                    let d = dim.ok_or_else(|| parse_err(line_no, "cube before dimension"))?;
                    if nums.len() != d + 1 {
                        return Err(parse_err(line_no, "wrong number of indices"));
                    }
                    let level = u32::try_from(nums[0])
                        .map_err(|_| parse_err(line_no, "level out of range"))?;
                    cubes.push(DyadicCube::new(level, nums[1..].to_vec())?);
                }
            }
        }
        let geometry = geometry.ok_or_else(|| parse_err(0, "missing geometry line"))?;
        if let Some(n) = expected {
            if n != cubes.len() {
                return Err(parse_err(0, "cube count does not match header"));
            }
        }
        let mut family = GradedSparseFamily::new(geometry, cubes)?
            .with_name(name)
            .with_dilation(dilation);
        family.root_adjoined = root_adjoined;
        Ok(family)
    }
}

/// Upper end `1 - log2(1 - η) / (nK)` of the admissible range of `t`.
pub fn sparse_index_bound(n: usize, eta: f64, degree: f64) -> f64 {
    1.0 - (1.0 - eta).log2() / (n as f64 * degree)
}

/// Full dyadic tree of `[0,1)^dim` down to level `depth`.
pub fn full_tree(dim: usize, depth: u32) -> Result<GradedSparseFamily> {
    generations(dim, (0..=depth).collect(), "full tree")
}

/// Dyadic tree keeping only the even generations `0, 2, 4, ..` up to `depth`.
pub fn even_generations(dim: usize, depth: u32) -> Result<GradedSparseFamily> {
    generations(dim, (0..=depth).step_by(2).collect(), "even generations")
}

fn generations(dim: usize, levels: Vec<u32>, name: &str) -> Result<GradedSparseFamily> {
    let total: u64 = levels.iter().map(|&k| 1u64 << (dim as u32 * k)).sum();
    if total > 1 << 22 {
        return Err(invalid("depth", format!("{total} cubes exceeds 2^22")));
    }
    let mut cubes = Vec::new();
    for &k in &levels {
        let n = 1u64 << k;
        let mut idx = vec![0u64; dim];
        loop {
            cubes.push(DyadicCube {
                level: k,
                index: idx.clone(),
            });
            let mut c = 0;
            while c < dim {
                idx[c] += 1;
                if idx[c] < n {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
            if c == dim {
                break;
            }
        }
    }
    Ok(GradedSparseFamily::new(FamilyGeometry::Cube { dim }, cubes)?.with_name(name))
}

/// The blow-up family `S_m`, rescaled from `[0,2)` to `[0,1)`.
///
/// Originally the root is `[0,2)` and the small cubes are the `2^m` intervals
/// of length `2^-m` in `[0,1)`; after dividing by 2 they are the level
/// `m + 1` intervals of `[0, 1/2)`. The dilation 2 is recorded.
pub fn family_counterexample(m: u32) -> Result<GradedSparseFamily> {
    if m == 0 || m > 40 {
        return Err(invalid("m", format!("{m} must lie in 1..=40")));
    }
    let cubes = (0..1u64 << m).map(|k| DyadicCube {
        level: m + 1,
        index: vec![k],
    });
    Ok(
        GradedSparseFamily::new(FamilyGeometry::Cube { dim: 1 }, cubes.chain([DyadicCube::root(1)]))?
            .with_name(format!("S_{m}"))
            .with_dilation(2.0),
    )
}

/// All Carleson boxes of one system down to generation `depth`.
pub fn family_carleson(
    depth: u32,
    system: DyadicSystem,
    convention: MeasureConvention,
) -> Result<GradedSparseFamily> {
    if depth > 22 {
        return Err(invalid("depth", format!("{depth} exceeds 22")));
    }
    let cubes = (0..=depth).flat_map(|k| {
        (0..1u64 << k).map(move |m| DyadicCube {
            level: k,
            index: vec![m],
        })
    });
    Ok(GradedSparseFamily::new(
        FamilyGeometry::Carleson { system, convention },
        cubes,
    )?
    .with_name(format!("carleson {system}")))
}

/// A sub-interval `[start, end)` of the residual region of member `region`,
/// measured along a fixed parametrization of that region by measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessPiece {
    pub region: usize,
    pub start: f64,
    pub end: f64,
}

impl WitnessPiece {
    pub fn measure(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// `E(Q) = Q` minus the next-layer cubes inside `Q`.
    Residual,
    /// Bottom-up allocation reaching the optimal sparseness.
    Balanced,
    /// `E(Q)` = upper tent of a Carleson box.
    Tent,
}

#[derive(Debug, Clone)]
pub struct Witnesses {
    pub kind: WitnessKind,
    pub eta: f64,
    pub sets: Vec<Vec<WitnessPiece>>,
    /// Members whose witness has measure zero.
    pub degenerate: Vec<usize>,
}

impl Witnesses {
    pub fn measure(&self, i: usize) -> f64 {
        self.sets[i].iter().map(WitnessPiece::measure).sum()
    }

    pub fn is_sparse(&self) -> bool {
        self.degenerate.is_empty() && self.eta > 0.0
    }
}

/// Builds witness sets of the requested kind and the sparseness they certify.
pub fn sparseness_witness(family: &GradedSparseFamily, kind: WitnessKind) -> Result<Witnesses> {
    let n = family.len();
    let mut sets = vec![Vec::new(); n];
    match kind {
        WitnessKind::Residual => {
            for (i, set) in sets.iter_mut().enumerate() {
                let r = family.residual_measure(i);
                if r > 0.0 {
                    set.push(WitnessPiece {
                        region: i,
                        start: 0.0,
                        end: r,
                    });
                }
            }
        }
        WitnessKind::Tent => {
            let FamilyGeometry::Carleson { convention, .. } = family.geometry() else {
                return Err(Error::Unsupported {
                    kind: "tent witness".into(),
                    reason: "only Carleson-box families have upper tents".into(),
                });
            };
            for (i, set) in sets.iter_mut().enumerate() {
                set.push(WitnessPiece {
                    region: i,
                    start: 0.0,
                    end: convention.tent_measure(family.cube(i).side()),
                });
            }
        }
        WitnessKind::Balanced => {
            let eta = family.optimal_sparseness();
            let mut used = vec![0.0; n];
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(family.layer_of(i)));
            for q in order {
                let mut need = eta * family.measure(q);
                for j in family.subtree(q) {
                    if need <= 0.0 {
                        break;
                    }
                    let cap = family.residual_measure(j) - used[j];
                    if cap <= 0.0 {
                        continue;
                    }
                    let take = need.min(cap);
                    let end = if take == cap { family.residual_measure(j) } else { used[j] + take };
                    sets[q].push(WitnessPiece {
                        region: j,
                        start: used[j],
                        end,
                    });
                    used[j] = end;
                    need -= take;
                }
            }
        }
    }
    let mut eta = f64::INFINITY;
    let mut degenerate = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let m: f64 = set.iter().map(WitnessPiece::measure).sum();
        if m <= 0.0 {
            degenerate.push(i);
        }
        eta = eta.min(m / family.measure(i));
    }
    if !degenerate.is_empty() {
        eta = 0.0;
    }
    Ok(Witnesses {
        kind,
        eta,
        sets,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotContained { cube: usize, region: usize },
    TooSmall { cube: usize, measure: f64, required: f64 },
    OutOfRange { cube: usize, region: usize },
    Overlap { region: usize, first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

const MEASURE_SLACK: f64 = 1e-12;

/// Checks `E(Q) ⊆ Q`, `|E(Q)| ≥ η|Q|` and pairwise disjointness.
pub fn validate(family: &GradedSparseFamily, witnesses: &Witnesses, eta: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let mut by_region: HashMap<usize, Vec<(f64, f64, usize)>> = HashMap::new();
    for (q, set) in witnesses.sets.iter().enumerate() {
        for piece in set {
            let inside = piece.region < family.len() && family.chain(piece.region).contains(&q);
            if !inside {
                violations.push(Violation::NotContained {
                    cube: q,
                    region: piece.region,
                });
                continue;
            }
            let cap = family.residual_measure(piece.region);
            if piece.start < 0.0 || piece.end < piece.start || piece.end > cap * (1.0 + MEASURE_SLACK) {
                violations.push(Violation::OutOfRange {
                    cube: q,
                    region: piece.region,
                });
            }
            by_region
                .entry(piece.region)
                .or_default()
                .push((piece.start, piece.end, q));
        }
        let m = witnesses.measure(q);
        let required = eta * family.measure(q);
        if m < required * (1.0 - MEASURE_SLACK) {
            violations.push(Violation::TooSmall {
                cube: q,
                measure: m,
                required,
            });
        }
    }
    let mut regions: Vec<_> = by_region.into_iter().collect();
    regions.sort_by_key(|(r, _)| *r);
    for (region, mut pieces) in regions {
        pieces.retain(|p| p.1 > p.0);
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pieces.windows(2) {
            if w[1].0 < w[0].1 {
                violations.push(Violation::Overlap {
                    region,
                    first: w[0].2,
                    second: w[1].2,
                });
            }
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(level: u32, index: &[u64]) -> DyadicCube {
        DyadicCube::new(level, index.to_vec()).unwrap()
    }

    #[test]
    fn root_only_family() {
        let f = GradedSparseFamily::new(FamilyGeometry::Cube { dim: 2 }, []).unwrap();
        assert!(f.root_was_adjoined());
        assert_eq!(f.num_layers(), 1);
        assert_eq!(f.scales(), vec![1.0]);
        assert_eq!(f.degree(), Err(Error::SingleLayer));
    }

    #[test]
    fn rejects_cubes_outside_root() {
        let bad = DyadicCube {
            level: 2,
            index: vec![4],
        };
        let err = GradedSparseFamily::new(FamilyGeometry::Cube { dim: 1 }, [bad]).unwrap_err();
        assert!(matches!(err, Error::OutsideRoot { .. }));
        assert!(DyadicCube::new(1, vec![2]).is_err());
    }

    #[test]
    fn full_tree_layers_are_generations() {
        for dim in 1..=2 {
            let f = full_tree(dim, 4).unwrap();
            assert_eq!(f.num_layers(), 5);
            for (j, layer) in f.layers().iter().enumerate() {
                assert_eq!(layer.len(), 1 << (dim * j));
                assert!(layer.iter().all(|&i| f.cube(i).level == j as u32));
            }
            assert_eq!(f.scales(), vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
            assert_eq!(f.degree().unwrap(), 1.0);
        }
    }

    #[test]
    fn even_generations_have_degree_two() {
        let f = even_generations(1, 8).unwrap();
        assert_eq!(f.scale_levels(), vec![0, 2, 4, 6, 8]);
        assert_eq!(f.degree().unwrap(), 2.0);
    }

    #[test]
    fn counterexample_layers() {
        for m in 1..6 {
            let f = family_counterexample(m).unwrap();
            assert_eq!(f.len(), (1 << m) + 1);
            assert_eq!(f.num_layers(), 2);
            let s = f.scales();
            assert_eq!(s[0] / s[1], (2.0f64).powi(m as i32 + 1));
            assert_eq!(f.degree().unwrap(), (m + 1) as f64);
        }
        let f = family_counterexample(1).unwrap();
        assert_eq!(f.cubes()[1..], [cube(2, &[0]), cube(2, &[1])]);
    }

    #[test]
    fn carleson_family_counts() {
        let f = family_carleson(0, DyadicSystem::Standard, MeasureConvention::Exact).unwrap();
        assert_eq!(f.len(), 1);
        for system in DyadicSystem::BOTH {
            let f = family_carleson(6, system, MeasureConvention::Exact).unwrap();
            assert_eq!(f.len(), (1 << 7) - 1);
            assert_eq!(f.num_layers(), 7);
            assert_eq!(f.degree().unwrap(), 1.0);
            for (j, layer) in f.layers().iter().enumerate() {
                assert_eq!(layer.len(), 1 << j);
            }
        }
    }

    #[test]
    fn carleson_witnesses() {
        for system in DyadicSystem::BOTH {
            let f = family_carleson(7, system, MeasureConvention::Dyadic).unwrap();
            let w = sparseness_witness(&f, WitnessKind::Tent).unwrap();
            assert_eq!(w.eta, 0.5);
            assert!(validate(&f, &w, 0.5).valid);
            let r = sparseness_witness(&f, WitnessKind::Residual).unwrap();
            assert_eq!(r.eta, 0.5);
            let exact = family_carleson(7, system, MeasureConvention::Exact).unwrap();
            let w = sparseness_witness(&exact, WitnessKind::Tent).unwrap();
            assert_eq!(w.eta, 0.25);
        }
    }

    #[test]
    fn residual_witness_degenerates_on_full_tree() {
        let f = full_tree(1, 3).unwrap();
        let w = sparseness_witness(&f, WitnessKind::Residual).unwrap();
        assert_eq!(w.eta, 0.0);
        assert_eq!(w.degenerate.len(), 7);
    }

    #[test]
    fn balanced_witness_on_full_tree() {
        for depth in 1..=5 {
            let f = full_tree(1, depth).unwrap();
            let w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
            let best = 1.0 / (depth as f64 + 1.0);
            assert!((w.eta - best).abs() < 1e-12, "depth {depth}: {}", w.eta);
            assert!(validate(&f, &w, w.eta).valid);
            assert!(!validate(&f, &w, w.eta + 0.01).valid);
        }
    }

    #[test]
    fn blowup_sparseness_is_two_thirds() {
        for m in 1..8 {
            let f = family_counterexample(m).unwrap();
            assert!((f.optimal_sparseness() - 2.0 / 3.0).abs() < 1e-15);
            let w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
            assert!(validate(&f, &w, 2.0 / 3.0).valid);
            assert!(!validate(&f, &w, 0.7).valid);
            let r = sparseness_witness(&f, WitnessKind::Residual).unwrap();
            assert_eq!(r.eta, 0.5);
            assert!(validate(&f, &r, 0.5).valid);
        }
    }

    #[test]
    fn raised_threshold_names_the_cube() {
        let f = family_counterexample(2).unwrap();
        let w = sparseness_witness(&f, WitnessKind::Residual).unwrap();
        let report = validate(&f, &w, 0.51);
        assert!(!report.valid);
        assert_eq!(
            report.violations,
            vec![Violation::TooSmall {
                cube: 0,
                measure: 0.5,
                required: 0.51
            }]
        );
    }

    #[test]
    fn mutated_witness_fails() {
        let f = full_tree(1, 3).unwrap();
        let mut w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
        let victim = w.sets[0][0];
        w.sets[0].push(victim);
        let report = validate(&f, &w, w.eta);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Overlap { .. })));

        let mut w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
        // a piece of the right half handed to the left child
        let right = f.cubes().iter().position(|q| *q == cube(1, &[1])).unwrap();
        let left = f.cubes().iter().position(|q| *q == cube(1, &[0])).unwrap();
        let stolen = w.sets[right][0];
        w.sets[left][0] = stolen;
        let report = validate(&f, &w, w.eta);
        assert!(!report.valid);
        assert!(report.violations.contains(&Violation::NotContained { cube: left, region: stolen.region }));
    }

    fn pairwise_overlap(w: &Witnesses) -> bool {
        let pieces: Vec<(usize, WitnessPiece)> = w
            .sets
            .iter()
            .enumerate()
            .flat_map(|(q, s)| s.iter().map(move |p| (q, *p)))
            .collect();
        for (a, (qa, pa)) in pieces.iter().enumerate() {
            for (qb, pb) in &pieces[a + 1..] {
                let _ = (qa, qb);
                if pa.region == pb.region && pa.start.max(pb.start) < pa.end.min(pb.end) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn random_subfamilies_agree_with_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let tree = full_tree(1, 6).unwrap();
        for _ in 0..60 {
            let cubes: Vec<DyadicCube> = tree
                .cubes()
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .cloned()
                .collect();
            let f = GradedSparseFamily::new(FamilyGeometry::Cube { dim: 1 }, cubes).unwrap();
            let mut w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
            if rng.gen_bool(0.5) && f.len() > 1 {
                // perturb one piece so that it may collide with a neighbour
                let q = rng.gen_range(0..f.len());
                if let Some(p) = w.sets[q].first_mut() {
                    p.start = (p.start - 0.01).max(0.0);
                }
            }
            let report = validate(&f, &w, 0.0);
            let overlap = report.violations.iter().any(|v| matches!(v, Violation::Overlap { .. }));
            assert_eq!(overlap, pairwise_overlap(&w));
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let families = [
            family_counterexample(5).unwrap(),
            even_generations(2, 4).unwrap(),
            family_carleson(4, DyadicSystem::Shifted, MeasureConvention::Dyadic).unwrap(),
            GradedSparseFamily::new(FamilyGeometry::Cube { dim: 3 }, [cube(2, &[1, 3, 0])])
                .unwrap()
                .with_dilation(0.1 + 0.2),
        ];
        for f in families {
            let text = f.to_text();
            let back = GradedSparseFamily::from_text(&text).unwrap();
            assert_eq!(back.to_text(), text);
            assert_eq!(back.cubes(), f.cubes());
            assert_eq!(back.dilation().to_bits(), f.dilation().to_bits());
            assert_eq!(back.geometry(), f.geometry());
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "dimension 1\ngeometry cube\n0 0\n1 x\n";
        assert_eq!(
            GradedSparseFamily::from_text(text).unwrap_err(),
            Error::Parse {
                line: 4,
                reason: "expected `k i1 .. in`".into()
            }
        );
    }

    #[test]
    fn removing_a_layer_does_not_lower_degree() {
        let f = full_tree(1, 6).unwrap();
        for j in 1..6 {
            let g = f.without_layer(j).unwrap();
            assert!(g.degree().unwrap() >= f.degree().unwrap());
        }
    }

    fn arb_family() -> impl Strategy<Value = GradedSparseFamily> {
        (1usize..3, proptest::collection::vec((0u32..6, any::<u64>(), any::<u64>()), 0..40)).prop_map(
            |(dim, raw)| {
                let cubes = raw.into_iter().map(|(k, a, b)| {
                    let mask = (1u64 << k) - 1;
                    DyadicCube {
                        level: k,
                        index: [a & mask, b & mask][..dim].to_vec(),
                    }
                });
                GradedSparseFamily::new(FamilyGeometry::Cube { dim }, cubes).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn peeling_is_idempotent(f in arb_family()) {
            let again = GradedSparseFamily::new(f.geometry(), f.cubes().iter().cloned()).unwrap();
            prop_assert_eq!(again.layers(), f.layers());
            for layer in f.layers() {
                for (a, &i) in layer.iter().enumerate() {
                    for &j in &layer[a + 1..] {
                        prop_assert!(!f.cube(i).is_within(f.cube(j)) && !f.cube(j).is_within(f.cube(i)));
                    }
                }
            }
        }

        #[test]
        fn balanced_witness_is_valid(f in arb_family()) {
            let w = sparseness_witness(&f, WitnessKind::Balanced).unwrap();
            prop_assert!(w.eta > 0.0);
            prop_assert!(validate(&f, &w, w.eta).valid);
        }

        #[test]
        fn degree_at_least_one(f in arb_family()) {
            if f.num_layers() > 1 {
                prop_assert!(f.degree().unwrap() >= 1.0);
            }
        }
    }
}
