//! Dyadic arcs on the torus, Carleson boxes and upper tents in the unit disc.
//!
//! The torus is normalized to total length 1 and identified with `[0, 1)`;
//! the disc carries the normalized area measure, so the whole disc has
//! measure 1. Points of the disc are stored in *depth coordinates*
//! `(s, x)` with `s = 1 - |z|` and `x = arg(z) / 2π`, which keeps boundary
//! layers at depth `2^-60` representable without cancellation.
//!
//! Two dyadic systems are provided. The standard one has level-`k` arcs
//! `[m 2^-k, (m+1) 2^-k)`. The shifted one realizes the one-third trick with
//! arcs
//!
//! ```text
//! [2^-k (m + (-1)^k / 3), 2^-k (m + 1 + (-1)^k / 3))   (mod 1)
//! ```
//!
//! which is nested because `2^-k (m + (-1)^k/3) = 2^-(k+1) (2m + (-1)^k + (-1)^(k+1)/3)`.
//! For any arc `J` one of the two systems contains an arc `I ⊇ J` with
//! `|I| ≤ 6|J|`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Deepest level used when searching for common boxes.
pub const MAX_SEARCH_LEVEL: u32 = 60;

/// Measured bound for `|Q| / |1 - z w̄|²` over the boxes returned by
/// [`find_common_box`]; the acceptance suite checks the measured supremum
/// stays below 64.
pub const COMMON_BOX_CONSTANT: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DyadicSystem {
    Standard,
    Shifted,
}

impl DyadicSystem {
    pub const BOTH: [DyadicSystem; 2] = [DyadicSystem::Standard, DyadicSystem::Shifted];

    /// Offset of the level-`k` grid, in units of the level-`k` arc length.
    pub fn offset(self, level: u32) -> f64 {
        match self {
            DyadicSystem::Standard => 0.0,
            DyadicSystem::Shifted => {
                if level % 2 == 0 {
                    1.0 / 3.0
                } else {
                    -1.0 / 3.0
                }
            }
        }
    }

    /// Integer shift relating the children of `(k, m)` to `2m`.
    fn child_shift(self, level: u32) -> i64 {
        match self {
            DyadicSystem::Standard => 0,
            DyadicSystem::Shifted => {
                if level % 2 == 0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    /// Index of the level-`k` arc containing the torus point `x`.
    pub fn index_at(self, x: f64, level: u32) -> u64 {
        let n = (level as f64).exp2();
        let pos = (wrap(x) * n - self.offset(level)).floor();
        pos.rem_euclid(n) as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            DyadicSystem::Standard => "standard",
            DyadicSystem::Shifted => "shifted",
        }
    }
}

impl fmt::Display for DyadicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for DyadicSystem {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "standard" => Ok(DyadicSystem::Standard),
            "shifted" => Ok(DyadicSystem::Shifted),
            other => Err(crate::error::invalid(
                "system",
                format!("unknown dyadic system `{other}`"),
            )),
        }
    }
}

/// Reduces a torus coordinate to `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// An arc of a dyadic system: level `k`, index `m ∈ [0, 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicArc {
    pub level: u32,
    pub index: u64,
    pub system: DyadicSystem,
}

impl DyadicArc {
    pub fn new(level: u32, index: u64, system: DyadicSystem) -> crate::Result<Self> {
        if level > 62 || index >> level != 0 {
            return Err(crate::error::invalid(
                "arc",
                format!("index {index} out of range for level {level}"),
            ));
        }
        Ok(DyadicArc {
            level,
            index,
            system,
        })
    }

    pub fn root(system: DyadicSystem) -> Self {
        DyadicArc {
            level: 0,
            index: 0,
            system,
        }
    }

    pub fn length(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Left endpoint in `[0, 1)`.
    pub fn start(&self) -> f64 {
        wrap((self.index as f64 + self.system.offset(self.level)) * self.length())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.level == 0 || self.system.index_at(x, self.level) == self.index
    }

    pub fn children(&self) -> [DyadicArc; 2] {
        let n = 1i64 << (self.level + 1);
        let first = (2 * self.index as i64 + self.system.child_shift(self.level)).rem_euclid(n);
        let second = (first + 1).rem_euclid(n);
        [first, second].map(|index| DyadicArc {
            level: self.level + 1,
            index: index as u64,
            system: self.system,
        })
    }

    pub fn parent(&self) -> Option<DyadicArc> {
        if self.level == 0 {
            return None;
        }
        let n = 1i64 << self.level;
        let shifted = (self.index as i64 - self.system.child_shift(self.level - 1)).rem_euclid(n);
        Some(DyadicArc {
            level: self.level - 1,
            index: (shifted / 2) as u64,
            system: self.system,
        })
    }

    /// Set inclusion between arcs of the same system.
    pub fn is_ancestor_of(&self, other: &DyadicArc) -> bool {
        if self.system != other.system || other.level < self.level {
            return false;
        }
        let mut cur = *other;
        while cur.level > self.level {
            cur = cur.parent().expect("level > 0");
        }
        cur == *self
    }

    /// Position in the heap layout `2^k - 1 + m` used by box trees.
    pub fn heap_id(&self) -> usize {
        (1usize << self.level) - 1 + self.index as usize
    }
}

impl fmt::Display for DyadicArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.system, self.level, self.index)
    }
}

/// The chain of arcs of `system` containing `x`, one per level `0..=max_level`.
pub fn arcs_containing(x: f64, max_level: u32, system: DyadicSystem) -> Vec<DyadicArc> {
    let x = wrap(x);
    (0..=max_level)
        .map(|level| DyadicArc {
            level,
            index: system.index_at(x, level),
            system,
        })
        .collect()
}

/// A point of the open unit disc in depth coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPoint {
    /// `1 - |z|`, in `(0, 1]`.
    pub depth: f64,
    /// `arg(z) / 2π`, in `[0, 1)`.
    pub angle: f64,
}

impl DiscPoint {
    pub fn new(depth: f64, angle: f64) -> crate::Result<Self> {
        if !(depth > 0.0 && depth <= 1.0) {
            return Err(crate::error::invalid(
                "depth",
                format!("1 - |z| = {depth} must lie in (0, 1]"),
            ));
        }
        Ok(DiscPoint {
            depth,
            angle: wrap(angle),
        })
    }

    pub fn from_complex(z: Complex64) -> crate::Result<Self> {
        let r = z.norm();
        let angle = if r == 0.0 {
            0.0
        } else {
            z.im.atan2(z.re) / (2.0 * PI)
        };
        DiscPoint::new(1.0 - r, angle)
    }

    pub fn modulus(&self) -> f64 {
        1.0 - self.depth
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.modulus(), 2.0 * PI * self.angle)
    }

    /// `1 - |z|²` without cancellation.
    pub fn one_minus_modulus_sq(&self) -> f64 {
        self.depth * (2.0 - self.depth)
    }

    /// Deepest level `k` with `1 - |z| ≤ 2^-k`: the annulus index of the point.
    pub fn annulus_level(&self) -> u32 {
        annulus_level(self.depth)
    }
}

/// Deepest `k ≥ 0` with `s ≤ 2^-k`, i.e. `s ∈ (2^-(k+1), 2^-k]`.
pub fn annulus_level(s: f64) -> u32 {
    debug_assert!(s > 0.0 && s <= 1.0);
    let mut k = (-s.log2()).floor().max(0.0) as i32;
    while k > 0 && s > (-(k as f64)).exp2() {
        k -= 1;
    }
    while s <= (-(k as f64) - 1.0).exp2() {
        k += 1;
    }
    k as u32
}

/// `1 - z w̄` evaluated from depth coordinates without cancellation.
pub fn one_minus_z_conj_w(z: &DiscPoint, w: &DiscPoint) -> Complex64 {
    let rr = z.modulus() * w.modulus();
    let phi = 2.0 * PI * (z.angle - w.angle);
    let half = (0.5 * phi).sin();
    let radial_gap = z.depth + w.depth - z.depth * w.depth;
    Complex64::new(radial_gap + 2.0 * rr * half * half, -rr * phi.sin())
}

/// How `|Q_I|` is measured.
///
/// `Exact` uses the normalized area of the annular sector, `ℓ²(2 - ℓ)`;
/// `Dyadic` uses the model measure `ℓ²` in which a tent carries exactly half
/// of its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureConvention {
    #[default]
    Exact,
    Dyadic,
}

impl MeasureConvention {
    pub fn box_measure(self, len: f64) -> f64 {
        match self {
            MeasureConvention::Exact => len * len * (2.0 - len),
            MeasureConvention::Dyadic => len * len,
        }
    }

    pub fn tent_measure(self, len: f64) -> f64 {
        match self {
            MeasureConvention::Exact => len * len * (1.0 - 0.75 * len),
            MeasureConvention::Dyadic => 0.5 * len * len,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasureConvention::Exact => "exact",
            MeasureConvention::Dyadic => "dyadic",
        }
    }
}

impl std::str::FromStr for MeasureConvention {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exact" => Ok(MeasureConvention::Exact),
            "dyadic" => Ok(MeasureConvention::Dyadic),
            other => Err(crate::error::invalid(
                "convention",
                format!("unknown measure convention `{other}`"),
            )),
        }
    }
}

/// The Carleson box over a dyadic arc together with its upper tent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlesonBox {
    pub arc: DyadicArc,
    pub area: f64,
    pub tent_area: f64,
}

impl CarlesonBox {
    pub fn side(&self) -> f64 {
        self.arc.length()
    }

    /// `ℓ²(2 - ℓ) = (2^(k+1) - 1) / 2^(3k)`.
    pub fn area_exact(&self) -> BigRational {
        let k = self.arc.level as usize;
        let num = (BigInt::from(1) << (k + 1)) - 1;
        BigRational::new(num, BigInt::from(1) << (3 * k))
    }

    /// `ℓ²(1 - 3ℓ/4) = (2^(k+2) - 3) / 2^(3k+2)`.
    pub fn tent_area_exact(&self) -> BigRational {
        let k = self.arc.level as usize;
        let num = (BigInt::from(1) << (k + 2)) - 3;
        BigRational::new(num, BigInt::from(1) << (3 * k + 2))
    }

    pub fn side_sq_exact(&self) -> BigRational {
        let k = self.arc.level as usize;
        BigRational::new(BigInt::from(1), BigInt::from(1) << (2 * k))
    }

    pub fn contains(&self, z: &DiscPoint) -> bool {
        box_membership(z, self)
    }

    pub fn tent_contains(&self, z: &DiscPoint) -> bool {
        let len = self.side();
        z.depth <= len && z.depth > 0.5 * len && self.arc.contains(z.angle)
    }
}

pub fn carleson_box(arc: DyadicArc) -> CarlesonBox {
    let len = arc.length();
    CarlesonBox {
        arc,
        area: MeasureConvention::Exact.box_measure(len),
        tent_area: MeasureConvention::Exact.tent_measure(len),
    }
}

/// `z/|z| ∈ I` and `1 - |I| ≤ |z| < 1`.
pub fn box_membership(z: &DiscPoint, b: &CarlesonBox) -> bool {
    if b.arc.level == 0 {
        return true;
    }
    z.depth <= b.side() && b.arc.contains(z.angle)
}

/// A box containing two points, with its size relative to `|1 - z w̄|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonBox {
    pub cbox: CarlesonBox,
    pub ratio: f64,
}

/// Smallest box from either dyadic system containing both `z` and `w`.
pub fn find_common_box(z: &DiscPoint, w: &DiscPoint) -> CommonBox {
    let depth_cap = z
        .annulus_level()
        .min(w.annulus_level())
        .min(MAX_SEARCH_LEVEL);
    let mut best = DyadicArc::root(DyadicSystem::Standard);
    for system in DyadicSystem::BOTH {
        let mut level = 0;
        while level < depth_cap
            && system.index_at(z.angle, level + 1) == system.index_at(w.angle, level + 1)
        {
            level += 1;
        }
        if level > best.level {
            best = DyadicArc {
                level,
                index: system.index_at(z.angle, level),
                system,
            };
        }
    }
    let cbox = carleson_box(best);
    let gap = one_minus_z_conj_w(z, w).norm_sqr();
    CommonBox {
        cbox,
        ratio: cbox.area / gap,
    }
}
