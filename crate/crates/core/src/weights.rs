//! Radial weights, the weighted endpoint criteria for the maximal operator,
//! Békollé–Bonami constants and the extremal test functions.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{check_disc_index, invalid, Error, Result};
use crate::geometry::annulus_level;
use crate::grid::{GridFunction, RadialNodes};

/// Absolute tolerance for numerical window and annulus integrals.
const QUAD_TOL: f64 = 1e-12;

/// A radial weight `ω(|z|)` on the disc.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialWeight {
    /// `ω(r) = (1 - r)^γ`, with `γ > -1`.
    Power { gamma: f64 },
    /// Piecewise-linear interpolation of samples `(r, ω(r))`, held constant
    /// outside the sampled range.
    Table { r: Vec<f64>, w: Vec<f64> },
}

impl RadialWeight {
    pub fn unweighted() -> Self {
        RadialWeight::Power { gamma: 0.0 }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > -1.0) {
            return Err(invalid("gamma", format!("(1-r)^{gamma} is not locally integrable")));
        }
        Ok(RadialWeight::Power { gamma })
    }

    pub fn table(r: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if r.len() != w.len() || r.len() < 2 {
            return Err(invalid("table", "need at least two (r, w) samples of equal length"));
        }
        if r.windows(2).any(|p| p[0] >= p[1]) || r[0] < 0.0 || r[r.len() - 1] >= 1.0 {
            return Err(invalid("table", "radii must increase strictly inside [0, 1)"));
        }
        if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(invalid("table", "weights must be finite and nonnegative"));
        }
        let weight = RadialWeight::Table { r, w };
        if weight.floor() <= 0.0 {
            return Err(invalid("table", "weight must stay positive on [0, 1/2)"));
        }
        Ok(weight)
    }

    /// Reads a two-column `r ω(r)` text file; `#` starts a comment.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Vec::new();
        let mut w = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 1,
                    reason: format!("`{s}`: {e}"),
                })
            };
            match cols.as_slice() {
                [a, b] => {
                    r.push(parse(a)?);
                    w.push(parse(b)?);
                }
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        reason: "expected two columns".into(),
                    })
                }
            }
        }
        Self::table(r, w)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialWeight::Power { gamma } => (1.0 - r).powf(*gamma),
            RadialWeight::Table { r: rs, w } => {
                let i = rs.partition_point(|&x| x <= r);
                if i == 0 {
                    w[0]
                } else if i == rs.len() {
                    w[w.len() - 1]
                } else {
                    let u = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                    w[i - 1] + u * (w[i] - w[i - 1])
                }
            }
        }
    }

    /// `inf ω` on `[0, 1/2]`.
    pub fn floor(&self) -> f64 {
        match self {
            RadialWeight::Power { gamma } => {
                if *gamma >= 0.0 {
                    0.5f64.powf(*gamma)
                } else {
                    1.0
                }
            }
            RadialWeight::Table { r, .. } => {
                // piecewise linear: the minimum sits at a knot or an end point
                std::iter::once(0.0)
                    .chain(r.iter().copied().filter(|&x| x <= 0.5))
                    .chain(std::iter::once(0.5))
                    .map(|x| self.eval(x))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Interpolation knots strictly inside `(a, b)`.
    fn knots_between(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            RadialWeight::Power { .. } => Vec::new(),
            RadialWeight::Table { r, .. } => r.iter().copied().filter(|&x| x > a && x < b).collect(),
        }
    }

    /// `∫_a^b ω(r)^e dr`, split at the knots so each piece is smooth.
    pub fn integrate_power(&self, e: f64, a: f64, b: f64) -> f64 {
        if let RadialWeight::Power { gamma } = self {
            // ∫ u^{γe} du over u = 1 - r ∈ [1-b, 1-a]
            let s = gamma * e;
            let (lo, hi) = (1.0 - b, 1.0 - a);
            return if (s + 1.0).abs() < 1e-15 {
                if lo == 0.0 {
                    f64::INFINITY
                } else {
                    (hi / lo).ln()
                }
            } else if s + 1.0 < 0.0 && lo == 0.0 {
                f64::INFINITY
            } else {
                (hi.powf(s + 1.0) - lo.powf(s + 1.0)) / (s + 1.0)
            };
        }
        let mut cuts = vec![a];
        cuts.extend(self.knots_between(a, b));
        cuts.push(b);
        let mut total = 0.0;
        for piece in cuts.windows(2) {
            let (x0, x1) = (piece[0], piece[1]);
            // zeros of a piecewise-linear weight sit at knots or ends
            if e < 0.0 && (self.eval(x0) == 0.0 || self.eval(x1) == 0.0) {
                if e <= -1.0 {
                    return f64::INFINITY;
                }
            }
            let out = quadrature::double_exponential::integrate(|r| self.eval(r).powf(e), x0, x1, QUAD_TOL);
            if !out.integral.is_finite() {
                return f64::INFINITY;
            }
            total += out.integral;
        }
        total
    }
}

impl fmt::Display for RadialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialWeight::Power { gamma } => write!(f, "power:{gamma}"),
            RadialWeight::Table { r, .. } => write!(f, "table[{} samples]", r.len()),
        }
    }
}

/// Parses `power:γ` or `table:<path>`.
impl FromStr for RadialWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(g) = s.strip_prefix("power:") {
            let gamma = g.trim().parse().map_err(|_| invalid("weight", format!("bad exponent in `{s}`")))?;
            RadialWeight::power(gamma)
        } else if let Some(path) = s.strip_prefix("table:") {
            RadialWeight::from_table_file(Path::new(path.trim()))
        } else if s == "1" || s == "none" {
            Ok(RadialWeight::unweighted())
        } else {
            Err(invalid("weight", format!("`{s}` is neither power:<γ> nor table:<path>")))
        }
    }
}

/// `(3 - 2t) / (2t - 2)`: the dual exponent in both endpoint conditions.
pub fn endpoint_exponent(t: f64) -> f64 {
    (3.0 - 2.0 * t) / (2.0 * t - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Unbounded,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Verdict::Bounded => "bounded",
            Verdict::Unbounded => "unbounded",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Consecutive ratios of the last terms used by the verdict heuristics.
const TAIL: usize = 4;

/// Ratios above `1 + GROWTH` count as geometric growth.
pub const GROWTH: f64 = 1e-6;

/// Ratios within `RATIO_SLACK` of 1 count as flat.
pub const RATIO_SLACK: f64 = 1e-9;

fn tail_ratios(terms: &[f64]) -> Vec<f64> {
    let n = terms.len();
    terms[n.saturating_sub(TAIL + 1)..]
        .windows(2)
        .map(|w| w[1] / w[0])
        .collect()
}

/// `a_k = 2^k ∫_{D_k} ω^{-(3-2t)/(2t-2)} dr` for `k = 0..=k_max`.
pub fn annulus_terms(weight: &RadialWeight, t: f64, k_max: u32) -> Result<Vec<f64>> {
    check_disc_index(t)?;
    if k_max < 4 {
        return Err(invalid("k_max", format!("{k_max} is below 4")));
    }
    let e = -endpoint_exponent(t);
    Ok((0..=k_max)
        .map(|k| {
            let kf = k as f64;
            match weight {
                RadialWeight::Power { gamma } => {
                    // closed form in u = 1 - r, exponent s = γ(3-2t)/(2t-2)
                    let s = -gamma * e;
                    if (1.0 - s).abs() < 1e-14 {
                        kf.exp2() * std::f64::consts::LN_2
                    } else {
                        (kf * s).exp2() * (1.0 - (s - 1.0).exp2()) / (1.0 - s)
                    }
                }
                _ => {
                    let a = 1.0 - (-kf).exp2();
                    let b = 1.0 - (-kf - 1.0).exp2();
                    kf.exp2() * weight.integrate_power(e, a, b)
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeakCondition {
    pub terms: Vec<f64>,
    pub sup: f64,
    pub verdict: Verdict,
}

/// Weak endpoint criterion: `sup_k a_k < ∞`.
///
/// Bounded when the tail is non-increasing (ratios ≤ 1 + 1e-9), Unbounded when
/// it grows geometrically (every tail ratio above 1 + 1e-6) or a term is
/// infinite, Inconclusive otherwise.
pub fn endpoint_weak_condition(weight: &RadialWeight, t: f64, k_max: u32) -> Result<WeakCondition> {
    let terms = annulus_terms(weight, t, k_max)?;
    let sup = terms.iter().cloned().fold(0.0, f64::max);
    let verdict = if terms.iter().any(|v| !v.is_finite()) {
        Verdict::Unbounded
    } else {
        let ratios = tail_ratios(&terms);
        if ratios.iter().all(|&r| r <= 1.0 + RATIO_SLACK) {
            Verdict::Bounded
        } else if ratios.iter().all(|&r| r > 1.0 + GROWTH) {
            Verdict::Unbounded
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(WeakCondition { terms, sup, verdict })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StrongCondition {
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Békollé–Bonami estimate for `l = 1/(3-2t)`, the hypothesis of the
    /// strong characterization.
    pub bekolle_bonami: BekolleBonami,
}

/// Strong endpoint criterion: `Σ_k a_k < ∞`.
///
/// Bounded when the tail decays geometrically (every ratio below 1 - 1e-6),
/// Unbounded when the terms do not decay (ratios ≥ 1 - 1e-9) or one is
/// infinite, Inconclusive otherwise.
pub fn endpoint_strong_condition(weight: &RadialWeight, t: f64, k_max: u32) -> Result<StrongCondition> {
    let terms = annulus_terms(weight, t, k_max)?;
    let partial_sums: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let verdict = if terms.iter().any(|v| !v.is_finite()) {
        Verdict::Unbounded
    } else {
        let ratios = tail_ratios(&terms);
        if ratios.iter().all(|&r| r < 1.0 - GROWTH) {
            Verdict::Bounded
        } else if ratios.iter().all(|&r| r >= 1.0 - RATIO_SLACK) {
            Verdict::Unbounded
        } else {
            Verdict::Inconclusive
        }
    };
    let l = 1.0 / (3.0 - 2.0 * t);
    Ok(StrongCondition {
        partial_sums,
        verdict,
        bekolle_bonami: bekolle_bonami(weight, l, &default_schedule())?,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BekolleBonami {
    pub l: f64,
    /// `(h, window product)` along the schedule.
    pub windows: Vec<(f64, f64)>,
    pub estimate: f64,
    pub finite: bool,
}

/// Window sizes `2^-1, ..., 2^-30`.
pub fn default_schedule() -> Vec<f64> {
    (1..=30).map(|j| (-(j as f64)).exp2()).collect()
}

/// `max_h (h⁻¹∫_{1-h}^1 ω)(h⁻¹∫_{1-h}^1 ω^{-1/(l-1)})^{l-1}` over the schedule.
///
/// Power weights use the closed form, which is `h`-independent:
/// `1 / ((γ+1)(1 - γ/(l-1))^{l-1})` for `-1 < γ < l-1` and `+∞` otherwise.
pub fn bekolle_bonami(weight: &RadialWeight, l: f64, schedule: &[f64]) -> Result<BekolleBonami> {
    if !(l > 1.0 && l.is_finite()) {
        return Err(invalid("l", format!("{l} must exceed 1")));
    }
    if schedule.is_empty() || schedule.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
        return Err(invalid("h_schedule", "window sizes must lie in (0, 1]"));
    }
    let dual = -1.0 / (l - 1.0);
    let windows: Vec<(f64, f64)> = schedule
        .iter()
        .map(|&h| {
            let v = match weight {
                RadialWeight::Power { gamma } => {
                    let g = *gamma;
                    if g > -1.0 && g < l - 1.0 {
                        1.0 / ((g + 1.0) * (1.0 - g / (l - 1.0)).powf(l - 1.0))
                    } else {
                        f64::INFINITY
                    }
                }
                _ => {
                    let a = weight.integrate_power(1.0, 1.0 - h, 1.0) / h;
                    let b = weight.integrate_power(dual, 1.0 - h, 1.0) / h;
                    a * b.powf(l - 1.0)
                }
            };
            (h, v)
        })
        .collect();
    let estimate = windows.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(BekolleBonami {
        l,
        windows,
        estimate,
        finite: estimate.is_finite(),
    })
}

fn check_annulus<G: RadialNodes + ?Sized>(grid: &G, k: u32) -> Result<()> {
    let mut depths: Vec<f64> = (0..grid.len())
        .map(|i| grid.depth(i))
        .filter(|&s| annulus_level(s) == k)
        .collect();
    depths.sort_by(f64::total_cmp);
    depths.dedup();
    if depths.len() < 4 {
        return Err(Error::UnresolvedGrid {
            level: k,
            nodes: depths.len(),
            required: 4,
        });
    }
    Ok(())
}

/// `f_k = ω^{-(3-2t)/(2t-2)} 1_{D_k}`.
pub fn extremal_fk<'g, G: RadialNodes + ?Sized>(
    weight: &RadialWeight,
    t: f64,
    k: u32,
    grid: &'g G,
) -> Result<GridFunction<'g, G>> {
    extremal_fn_range(weight, t, k..=k, grid, |_| 1.0)
}

/// `f_N = Σ_{k=0}^N 2^{k(3-2t)} ω^{-(3-2t)/(2t-2)} 1_{D_k}`.
pub fn extremal_fn<'g, G: RadialNodes + ?Sized>(
    weight: &RadialWeight,
    t: f64,
    n: u32,
    grid: &'g G,
) -> Result<GridFunction<'g, G>> {
    extremal_fn_range(weight, t, 0..=n, grid, |k| (k as f64 * (3.0 - 2.0 * t)).exp2())
}

fn extremal_fn_range<'g, G: RadialNodes + ?Sized>(
    weight: &RadialWeight,
    t: f64,
    levels: std::ops::RangeInclusive<u32>,
    grid: &'g G,
    scale: impl Fn(u32) -> f64,
) -> Result<GridFunction<'g, G>> {
    check_disc_index(t)?;
    for k in levels.clone() {
        check_annulus(grid, k)?;
    }
    let e = -endpoint_exponent(t);
    let values = (0..grid.len())
        .map(|i| {
            let s = grid.depth(i);
            let k = annulus_level(s);
            if levels.contains(&k) {
                scale(k) * weight.eval(1.0 - s).powf(e)
            } else {
                0.0
            }
        })
        .collect();
    Ok(GridFunction { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, RadialGrid};
    use proptest::prelude::*;

    #[test]
    fn unweighted_terms_are_one_half() {
        let c = endpoint_weak_condition(&RadialWeight::unweighted(), 1.25, 20).unwrap();
        assert!(c.terms.iter().all(|&a| (a - 0.5).abs() < 1e-15));
        assert_eq!(c.verdict, Verdict::Bounded);
        let s = endpoint_strong_condition(&RadialWeight::unweighted(), 1.25, 20).unwrap();
        for (n, v) in s.partial_sums.iter().enumerate() {
            assert!((v - (n as f64 + 1.0) / 2.0).abs() < 1e-12);
        }
        assert_eq!(s.verdict, Verdict::Unbounded);
    }

    #[test]
    fn power_weight_example() {
        // γ = 0.1 at t = 1.25 gives s = 0.1
        let c = endpoint_weak_condition(&RadialWeight::power(0.1).unwrap(), 1.25, 30).unwrap();
        assert_eq!(c.verdict, Verdict::Unbounded);
        let ratio = c.terms[10] / c.terms[9];
        assert!((ratio - 0.1f64.exp2()).abs() < 1e-12);
    }

    #[test]
    fn table_weight_matches_closed_form() {
        // a fine table of (1-r)^0.3 reproduces the power-weight terms
        let r: Vec<f64> = (0..=20000).map(|i| i as f64 / 20001.0).collect();
        let w: Vec<f64> = r.iter().map(|x| (1.0 - x).powf(0.3)).collect();
        let table = RadialWeight::table(r, w).unwrap();
        let exact = annulus_terms(&RadialWeight::power(0.3).unwrap(), 1.3, 6).unwrap();
        let approx = annulus_terms(&table, 1.3, 6).unwrap();
        for (a, b) in exact.iter().zip(&approx) {
            assert!((a - b).abs() < 1e-4 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn table_bekolle_bonami_matches_closed_form() {
        // ω = 1 - r is reproduced exactly by linear interpolation
        let r: Vec<f64> = (0..=40).map(|j| 1.0 - (-(j as f64)).exp2()).collect();
        let w: Vec<f64> = r.iter().map(|x| 1.0 - x).collect();
        let table = RadialWeight::table(r, w).unwrap();
        let bb = bekolle_bonami(&table, 3.0, &[0.5, 0.25, 1.0 / 1024.0]).unwrap();
        let exact = bekolle_bonami(&RadialWeight::power(1.0).unwrap(), 3.0, &[0.5]).unwrap();
        assert!((exact.estimate - 2.0).abs() < 1e-15);
        for (_, v) in &bb.windows {
            assert!((v - 2.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn bekolle_bonami_unweighted_is_one() {
        let bb = bekolle_bonami(&RadialWeight::unweighted(), 2.0, &default_schedule()).unwrap();
        assert!(bb.windows.iter().all(|w| (w.1 - 1.0).abs() < 1e-15));
        let out = bekolle_bonami(&RadialWeight::power(1.0).unwrap(), 2.0, &default_schedule()).unwrap();
        assert!(!out.finite);
    }

    #[test]
    fn weight_parsing() {
        assert_eq!("power:-0.5".parse::<RadialWeight>().unwrap(), RadialWeight::Power { gamma: -0.5 });
        assert!("power:-1".parse::<RadialWeight>().is_err());
        assert!("cosine".parse::<RadialWeight>().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.txt");
        std::fs::write(&path, "# r w\n0 1\n0.5, 2\n0.9 3\n").unwrap();
        let w = RadialWeight::from_table_file(&path).unwrap();
        assert!((w.eval(0.25) - 1.5).abs() < 1e-15);
        assert_eq!(w.eval(0.95), 3.0);
        std::fs::write(&path, "0 1\n0.5\n").unwrap();
        assert!(matches!(RadialWeight::from_table_file(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn table_rejects_vanishing_floor() {
        assert!(RadialWeight::table(vec![0.0, 0.4, 0.9], vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn unweighted_fk_norm() {
        let grid = RadialGrid::dyadic(12, 8).unwrap();
        let t = 1.25;
        let p = 1.0 / (3.0 - 2.0 * t);
        for k in 0..10 {
            let f = extremal_fk(&RadialWeight::unweighted(), t, k, &grid).unwrap();
            let norm: f64 = f
                .values
                .iter()
                .zip(grid.weights())
                .map(|(v, w)| v.powf(p) * w)
                .sum::<f64>()
                .powf(1.0 / p);
            let lo = (-(k as f64) - 1.0).exp2();
            let hi = (-(k as f64)).exp2();
            let measure = (hi - lo) * (2.0 - hi - lo);
            assert!((norm - measure.powf(3.0 - 2.0 * t)).abs() < 1e-12);
        }
        assert!(matches!(
            extremal_fk(&RadialWeight::unweighted(), t, 13, &grid),
            Err(Error::UnresolvedGrid { level: 13, .. })
        ));
    }

    proptest! {
        #[test]
        fn power_thresholds(gamma in -0.95f64..2.0, t in 1.05f64..1.45) {
            prop_assume!(gamma.abs() > 1e-3);
            let w = RadialWeight::power(gamma).unwrap();
            let weak = endpoint_weak_condition(&w, t, 60).unwrap();
            let strong = endpoint_strong_condition(&w, t, 60).unwrap();
            prop_assert_eq!(weak.verdict == Verdict::Bounded, gamma <= 0.0);
            prop_assert_eq!(strong.verdict == Verdict::Bounded, gamma < 0.0);
            if strong.verdict == Verdict::Bounded {
                prop_assert_eq!(weak.verdict, Verdict::Bounded);
            }
        }
    }
}
