//! Lebesgue, weak and Lorentz norms on the discrete measure of a grid,
//! exact corner norms of positive sparse kernels, and weak-type operator
//! norms read off the image of the constant function.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction, RadialNodes};
use crate::operators::PositiveOperator;
use crate::sparse::GradedSparseFamily;
use crate::weights::RadialWeight;

/// `(∫ |f|^p dA)^{1/p}`; `p = ∞` gives `max |f|`.
pub fn lp_norm<G: Grid + ?Sized>(f: &GridFunction<'_, G>, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(lp_from(f.values.iter().copied(), f.grid.weights().iter().copied(), p))
}

/// `(∫ |f|^p ω(|z|) dA)^{1/p}`.
pub fn weighted_lp_norm<G: RadialNodes + ?Sized>(
    f: &GridFunction<'_, G>,
    p: f64,
    weight: &RadialWeight,
) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(lp_from(f.values.iter().copied(), f.grid.weights().iter().copied(), p));
    }
    let w = (0..f.grid.len()).map(|i| f.grid.weights()[i] * weight.eval(1.0 - f.grid.depth(i)));
    Ok(lp_from(f.values.iter().copied(), w, p))
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("{p} is below 1")))
    }
}

fn lp_from(values: impl Iterator<Item = f64>, weights: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return values.map(f64::abs).fold(0.0, f64::max);
    }
    let sum: f64 = values.zip(weights).map(|(v, w)| v.abs().powf(p) * w).sum();
    sum.powf(1.0 / p)
}

/// Distinct values of `|f|` in decreasing order, each with the measure of
/// `{|f| ≥ value}`. Zeros are dropped.
fn distribution<G: Grid + ?Sized>(f: &GridFunction<'_, G>) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = f
        .values
        .iter()
        .zip(f.grid.weights())
        .map(|(v, &w)| (v.abs(), w))
        .filter(|&(v, w)| v > 0.0 && w > 0.0)
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut mass = 0.0;
    for (v, w) in pairs {
        mass += w;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = mass,
            _ => out.push((v, mass)),
        }
    }
    out
}

/// `sup_λ λ |{|f| > λ}|^{1/q}`, attained just below one of the values.
pub fn weak_norm<G: Grid + ?Sized>(f: &GridFunction<'_, G>, q: f64) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(invalid("q", format!("{q} must lie in [1, ∞)")));
    }
    Ok(distribution(f)
        .into_iter()
        .map(|(v, m)| v * m.powf(1.0 / q))
        .fold(0.0, f64::max))
}

/// `‖f‖_{L^{p,1}} = p ∫_0^∞ |{|f| > λ}|^{1/p} dλ`, exact on the discrete
/// distribution (the integrand is a step function of λ).
///
/// With this normalization `‖f‖_{p,1} ≥ ‖f‖_p ≥ ‖f‖_{p,∞}` and the norm is
/// homogeneous of degree one.
pub fn lorentz_p1_norm<G: Grid + ?Sized>(f: &GridFunction<'_, G>, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("{p} must lie in [1, ∞)")));
    }
    let dist = distribution(f);
    let mut total = 0.0;
    for (k, &(v, m)) in dist.iter().enumerate() {
        let next = dist.get(k + 1).map_or(0.0, |d| d.0);
        total += m.powf(1.0 / p) * (v - next);
    }
    Ok(p * total)
}

/// `p ∫_0^∞ λ^{p-1} |{|f| > λ}| dλ`, which equals `‖f‖_p^p`.
///
/// This is the layer-cake integral without the `1/p` power on the
/// distribution function; it is not homogeneous of degree one and is kept
/// only for comparison with [`lorentz_p1_norm`].
pub fn layer_cake_integral<G: Grid + ?Sized>(f: &GridFunction<'_, G>, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("{p} must lie in [1, ∞)")));
    }
    let dist = distribution(f);
    let mut total = 0.0;
    for (k, &(v, m)) in dist.iter().enumerate() {
        let next = dist.get(k + 1).map_or(0.0, |d| d.0);
        total += m * (v.powf(p) - next.powf(p));
    }
    Ok(total)
}

/// Second Lorentz index; only the two endpoints are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LorentzIndex {
    One,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzExponent {
    pub p: f64,
    pub r: LorentzIndex,
}

impl LorentzExponent {
    pub fn new(p: f64, r: LorentzIndex) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("{p} must lie in [1, ∞)")));
        }
        Ok(LorentzExponent { p, r })
    }

    pub fn norm<G: Grid + ?Sized>(&self, f: &GridFunction<'_, G>) -> Result<f64> {
        match self.r {
            LorentzIndex::One => lorentz_p1_norm(f, self.p),
            LorentzIndex::Infinity => weak_norm(f, self.p),
        }
    }
}

/// The four corners of the `(1/p, 1/q)` square where positive kernels have
/// closed-form norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    /// `L¹ → L¹`
    OneOne,
    /// `L^∞ → L¹`
    InfOne,
    /// `L^∞ → L^∞`
    InfInf,
    /// `L¹ → L^∞`
    OneInf,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::OneOne, Corner::InfOne, Corner::InfInf, Corner::OneInf];

    pub fn label(self) -> &'static str {
        match self {
            Corner::OneOne => "1,1",
            Corner::InfOne => "inf,1",
            Corner::InfInf => "inf,inf",
            Corner::OneInf => "1,inf",
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

impl FromStr for Corner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace() && *c != '(' && *c != ')').collect();
        match key.as_str() {
            "1,1" => Ok(Corner::OneOne),
            "inf,1" | "∞,1" => Ok(Corner::InfOne),
            "inf,inf" | "∞,∞" => Ok(Corner::InfInf),
            "1,inf" | "1,∞" => Ok(Corner::OneInf),
            _ => Err(invalid("corner", format!("`{s}` is not one of 1,1 inf,1 inf,inf 1,inf"))),
        }
    }
}

/// Exact corner norm of `K(x,y) = Σ_Q 1_Q(x)1_Q(y)|Q|^{-t}`, optionally
/// restricted to one layer, computed from the family alone.
///
/// * `(1,1)` and `(∞,∞)`: `sup_x Σ_{Q∋x} |Q|^{1-t}` (the kernel is symmetric)
/// * `(∞,1)`: `Σ_Q |Q|^{2-t}`
/// * `(1,∞)`: `sup_x Σ_{Q∋x} |Q|^{-t}`
///
/// Suprema run over family chains: a point in a member and in none of its
/// family children lies in exactly that member's chain.
/// Measures are those stored in the family (its own normalization).
pub fn op_norm_corner(family: &GradedSparseFamily, t: f64, corner: Corner, layer: Option<usize>) -> Result<f64> {
    if !(t.is_finite() && t > 1.0) {
        return Err(invalid("t", format!("{t} must exceed 1")));
    }
    if let Some(j) = layer {
        if j >= family.num_layers() {
            return Err(invalid("layer", format!("family has {} layers, asked for {j}", family.num_layers())));
        }
    }
    let included = |i: usize| layer.is_none_or(|j| family.layer_of(i) == j);
    let chain_max = |exponent: f64| {
        // members are ordered parents-first, so one pass accumulates chains
        let mut acc = vec![0.0; family.len()];
        let mut best: f64 = 0.0;
        for i in 0..family.len() {
            let own = if included(i) { family.measure(i).powf(exponent) } else { 0.0 };
            acc[i] = family.parent(i).map_or(0.0, |p| acc[p]) + own;
            best = best.max(acc[i]);
        }
        best
    };
    Ok(match corner {
        Corner::OneOne | Corner::InfInf => chain_max(1.0 - t),
        Corner::OneInf => chain_max(-t),
        Corner::InfOne => (0..family.len())
            .filter(|&i| included(i))
            .map(|i| family.measure(i).powf(2.0 - t))
            .sum(),
    })
}

/// `‖T1‖_{L^{q,∞}}`, which equals `‖T‖_{L^∞ → L^{q,∞}}` for positive `T`
/// because `|Tf| ≤ ‖f‖_∞ T1`.
pub fn weak_opnorm_from_constant<G: Grid + ?Sized, T: PositiveOperator<G> + ?Sized>(
    op: &T,
    grid: &G,
    q: f64,
) -> Result<f64> {
    let image = op.apply(&GridFunction::constant(grid, 1.0))?;
    weak_norm(&image, q)
}

/// `sup_E ‖T 1_E‖_{L^{q,∞}} / |E|^{1/p}` over the given node sets: a lower
/// bound for the restricted weak-type constant.
pub fn restricted_probe<G: Grid + ?Sized, T: PositiveOperator<G> + ?Sized>(
    op: &T,
    grid: &G,
    p: f64,
    q: f64,
    sets: &[Vec<bool>],
) -> Result<f64> {
    if sets.is_empty() {
        return Err(invalid("sets", "restricted probe needs at least one test set"));
    }
    check_p(p)?;
    let mut best: f64 = 0.0;
    for mask in sets {
        let indicator = GridFunction::indicator(grid, mask)?;
        let measure = indicator.integral();
        if measure <= 0.0 {
            return Err(invalid("sets", "test sets must have positive measure"));
        }
        let image = op.apply(&indicator)?;
        best = best.max(weak_norm(&image, q)? / measure.powf(1.0 / p));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DyadicSystem, MeasureConvention};
    use crate::grid::{make_polar_grid, CubeGrid, RadialGrid};
    use crate::operators::SparseOperator;
    use crate::sparse::{family_carleson, full_tree, FamilyGeometry, DyadicCube};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_level(grid: &CubeGrid) -> GridFunction<'_, CubeGrid> {
        // a = 3 on the first quarter, b = 1 on the next half
        let n = grid.len();
        GridFunction {
            grid,
            values: (0..n)
                .map(|i| if i < n / 4 { 3.0 } else if i < 3 * n / 4 { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    #[test]
    fn constant_on_disc() {
        let g = make_polar_grid(16, 16, 0.8).unwrap();
        let one = GridFunction::constant(&g, 1.0);
        assert!((lp_norm(&one, 2.0).unwrap() - 0.8).abs() < 1e-14);
        assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn radial_singular_profile() {
        // ∫ (1-r)^{-1/2} dA = 2∫_0^1 s^{-1/2}(1-s) ds = 8/3
        let g = RadialGrid::dyadic(60, 64).unwrap();
        let f = g.sample(|s| s.powf(-0.25));
        let norm = lp_norm(&f, 2.0).unwrap();
        let exact = (8.0f64 / 3.0).sqrt();
        assert!((norm - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn weighted_norm_unweighted_agrees() {
        let g = RadialGrid::dyadic(10, 4).unwrap();
        let f = g.sample(|s| 1.0 + s);
        let a = lp_norm(&f, 3.0).unwrap();
        let b = weighted_lp_norm(&f, 3.0, &RadialWeight::unweighted()).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn indicator_norms() {
        let grid = CubeGrid::new(1, 6).unwrap();
        let mask: Vec<bool> = (0..64).map(|i| i % 4 == 0).collect();
        let f = GridFunction::indicator(&grid, &mask).unwrap();
        let mu: f64 = 0.25;
        for q in [1.0, 2.0, 3.5] {
            assert!((weak_norm(&f, q).unwrap() - mu.powf(1.0 / q)).abs() < 1e-15);
            assert!((lorentz_p1_norm(&f, q).unwrap() - q * mu.powf(1.0 / q)).abs() < 1e-15);
            assert!((layer_cake_integral(&f, q).unwrap() - mu).abs() < 1e-15);
        }
    }

    #[test]
    fn two_level_closed_forms() {
        let grid = CubeGrid::new(1, 8).unwrap();
        let f = two_level(&grid);
        let (a, b, m1, m2) = (3.0f64, 1.0f64, 0.25f64, 0.5f64);
        for q in [1.0, 1.5, 4.0] {
            let weak = (a * m1.powf(1.0 / q)).max(b * (m1 + m2).powf(1.0 / q));
            assert!((weak_norm(&f, q).unwrap() - weak).abs() < 1e-14);
            let lorentz = q * (m1.powf(1.0 / q) * (a - b) + (m1 + m2).powf(1.0 / q) * b);
            assert!((lorentz_p1_norm(&f, q).unwrap() - lorentz).abs() < 1e-14);
        }
    }

    #[test]
    fn weak_norm_beats_lambda_sampling() {
        let grid = CubeGrid::new(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = GridFunction::new(&grid, (0..grid.len()).map(|_| rng.gen::<f64>().powi(3)).collect()).unwrap();
        let exact = weak_norm(&f, 2.0).unwrap();
        let mut gaps = Vec::new();
        for samples in [10, 100, 1000] {
            let sampled = (1..=samples)
                .map(|i| {
                    let lambda = i as f64 / samples as f64;
                    let m: f64 = f.values.iter().zip(grid.weights()).filter(|(v, _)| **v > lambda).map(|(_, w)| w).sum();
                    lambda * m.sqrt()
                })
                .fold(0.0, f64::max);
            assert!(sampled <= exact + 1e-15);
            gaps.push(exact - sampled);
        }
        assert!(gaps[2] < gaps[0] && gaps[2] < 2e-3);
    }

    #[test]
    fn carleson_layer_corners() {
        let family = family_carleson(8, DyadicSystem::Standard, MeasureConvention::Exact).unwrap();
        let t = 1.25;
        for j in 0..=8usize {
            let len = (-(j as f64)).exp2();
            let q = len * len * (2.0 - len);
            let one_one = op_norm_corner(&family, t, Corner::OneOne, Some(j)).unwrap();
            assert!((one_one - q.powf(1.0 - t)).abs() < 1e-12 * one_one);
            let inf_one = op_norm_corner(&family, t, Corner::InfOne, Some(j)).unwrap();
            let expected = (-(j as f64) * (3.0 - 2.0 * t)).exp2() * (2.0 - len).powf(2.0 - t);
            assert!((inf_one - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn single_cube_corner() {
        let cube = DyadicCube::new(2, vec![1]).unwrap();
        let family = GradedSparseFamily::new(FamilyGeometry::Cube { dim: 1 }, [cube]).unwrap();
        let v = op_norm_corner(&family, 1.3, Corner::OneInf, Some(1)).unwrap();
        assert!((v - 0.25f64.powf(-1.3)).abs() < 1e-12);
    }

    #[test]
    fn corners_match_measured_ratios() {
        let grid = CubeGrid::new(1, 8).unwrap();
        let family = full_tree(1, 5).unwrap();
        let t = 1.3;
        let op = SparseOperator::new(&family, t).unwrap();
        let one = op.apply(&GridFunction::constant(&grid, 1.0)).unwrap();
        let inf_one = op_norm_corner(&family, t, Corner::InfOne, None).unwrap();
        assert!((one.integral() - inf_one).abs() < 1e-12 * inf_one);
        // concentrated inputs attain the (1,1) norm
        let one_one = op_norm_corner(&family, t, Corner::OneOne, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best: f64 = 0.0;
        for _ in 0..1000 {
            let spot = rng.gen_range(0..grid.len());
            let values = (0..grid.len()).map(|i| if i == spot { 1.0 } else { rng.gen::<f64>() * 1e-6 }).collect();
            let f = GridFunction::new(&grid, values).unwrap();
            let tf = op.apply(&f).unwrap();
            best = best.max(lp_norm(&tf, 1.0).unwrap() / lp_norm(&f, 1.0).unwrap());
        }
        assert!(best <= one_one * (1.0 + 1e-12));
        assert!(best >= 0.99 * one_one);
    }

    #[test]
    fn rank_one_weak_opnorm() {
        let grid = CubeGrid::new(1, 4).unwrap();
        let family = full_tree(1, 3).unwrap();
        let op = SparseOperator::new(&family, 1.2).unwrap().layer(0);
        for q in [1.0, 2.0, 5.0] {
            // |Q0| = 1
            assert!((weak_opnorm_from_constant(&op, &grid, q).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn probe_rejects_empty_list() {
        let grid = CubeGrid::new(1, 4).unwrap();
        let family = full_tree(1, 2).unwrap();
        let op = SparseOperator::new(&family, 1.2).unwrap();
        assert!(restricted_probe(&op, &grid, 1.0, 1.0, &[]).is_err());
        let full = vec![true; grid.len()];
        let probe = restricted_probe(&op, &grid, 2.0, 1.0, &[full]).unwrap();
        assert!((probe - weak_opnorm_from_constant(&op, &grid, 1.0).unwrap()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn homogeneous_and_ordered(seed in 0u64..1000, c in 0.01f64..100.0, p in 1.0f64..6.0) {
            let grid = CubeGrid::new(1, 7).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = GridFunction::new(&grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let cf = f.map(|v| c * v);
            let (l1, lp, w) = (lorentz_p1_norm(&f, p).unwrap(), lp_norm(&f, p).unwrap(), weak_norm(&f, p).unwrap());
            prop_assert!(l1 >= lp * (1.0 - 1e-12));
            prop_assert!(lp >= w * (1.0 - 1e-12));
            prop_assert!((lorentz_p1_norm(&cf, p).unwrap() - c * l1).abs() <= 1e-10 * c * l1);
            prop_assert!((lp_norm(&cf, p).unwrap() - c * lp).abs() <= 1e-10 * c * lp);
            prop_assert!((weak_norm(&cf, p).unwrap() - c * w).abs() <= 1e-10 * c * w);
            // monotone in |f|
            let bigger = f.map(|v| v.abs() + 0.1);
            prop_assert!(lorentz_p1_norm(&bigger, p).unwrap() >= l1);
            prop_assert!(weak_norm(&bigger, p).unwrap() >= w);
        }
    }
}
