//! Hypersingular Bergman-type operators
//! `K_{2t} f(z) = ∫ f(w) (1 - z w̄)^(-2t) dA(w)` and the positive variant with
//! kernel `|1 - z w̄|^(-2t)`, evaluated by grid quadrature.
//!
//! On tensor grids the kernel between two rings is circulant in the angular
//! index, so each ring pair is handled in Fourier space and only the angular
//! modes actually present in `f` are touched. Other grids use the direct
//! `O(N²)` sum.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{check_disc_index, Error, Result};
use crate::geometry::{one_minus_z_conj_w, DyadicSystem, MeasureConvention};
use crate::grid::{DiscGrid, Grid, GridFunction, PolarGrid, Ring};
use crate::operators::{full_sparse_on_tree, BoxTree, PositiveOperator};

/// Modes with `|f̂| ≤ ACTIVE_MODE_CUTOFF · max |f̂|` are dropped.
pub const ACTIVE_MODE_CUTOFF: f64 = 1e-13;

/// Near-diagonal warnings fire when cells with `|1 - z w̄|` below this many
/// cell diameters carry more than [`NEAR_SHARE_LIMIT`] of the value.
pub const NEAR_DIAMETERS: f64 = 4.0;
pub const NEAR_SHARE_LIMIT: f64 = 0.1;

/// At most this many nodes are probed for near-diagonal dominance.
pub const NEAR_PROBES: usize = 64;

/// Below this many active modes the ring-pair transforms are done directly.
const DIRECT_DFT_MODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BergmanKernel {
    /// `(1 - z w̄)^(-2t)`, principal branch.
    Analytic,
    /// `|1 - z w̄|^(-2t)`.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BergmanOperator {
    pub t: f64,
    pub kernel: BergmanKernel,
}

impl BergmanOperator {
    pub fn analytic(t: f64) -> Result<Self> {
        check_disc_index(t)?;
        Ok(BergmanOperator {
            t,
            kernel: BergmanKernel::Analytic,
        })
    }

    pub fn positive(t: f64) -> Result<Self> {
        check_disc_index(t)?;
        Ok(BergmanOperator {
            t,
            kernel: BergmanKernel::Positive,
        })
    }

    /// Kernel value from the gap `1 - z w̄`.
    #[inline]
    pub fn kernel_at(&self, gap: Complex64) -> Complex64 {
        match self.kernel {
            // Re(gap) > 0 on the disc, so the principal log is continuous
            BergmanKernel::Analytic => (gap.ln() * (-2.0 * self.t)).exp(),
            BergmanKernel::Positive => Complex64::new(gap.norm_sqr().powf(-self.t), 0.0),
        }
    }

    /// Applies the operator to several real inputs on the same grid at once.
    /// Kernel work is shared across the batch.
    pub fn apply_many(&self, grid: &PolarGrid, inputs: &[&[f64]]) -> Result<Vec<Vec<Complex64>>> {
        for f in inputs {
            if f.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    values: f.len(),
                    nodes: grid.len(),
                });
            }
        }
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        if grid.is_tensor() && grid.rings()[0].n_theta >= 2 {
            Ok(self.tensor_apply(grid, inputs))
        } else {
            Ok(self.direct_apply(grid, inputs))
        }
    }

    fn direct_apply<G: DiscGrid + ?Sized>(&self, grid: &G, inputs: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let points = grid.points();
        let weights = grid.weights();
        let rows: Vec<Vec<Complex64>> = points
            .par_iter()
            .map(|z| {
                let mut acc = vec![Complex64::new(0.0, 0.0); inputs.len()];
                for (j, (w, &weight)) in points.iter().zip(weights).enumerate() {
                    let k = self.kernel_at(one_minus_z_conj_w(z, w)) * weight;
                    for (a, f) in acc.iter_mut().zip(inputs) {
                        *a += k * f[j];
                    }
                }
                acc
            })
            .collect();
        transpose(rows, inputs.len())
    }

    fn tensor_apply(&self, grid: &PolarGrid, inputs: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let rings = grid.rings();
        let n = rings[0].n_theta;
        let nr = rings.len();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        // ring spectra of every input
        let spectra: Vec<Vec<Vec<Complex64>>> = inputs
            .iter()
            .map(|f| {
                rings
                    .iter()
                    .map(|ring| {
                        let mut buf: Vec<Complex64> = f[ring.offset..ring.offset + n]
                            .iter()
                            .map(|&v| Complex64::new(v, 0.0))
                            .collect();
                        forward.process(&mut buf);
                        buf
                    })
                    .collect()
            })
            .collect();
        let modes = active_modes(&spectra, n);
        if modes.is_empty() {
            return vec![vec![Complex64::new(0.0, 0.0); grid.len()]; inputs.len()];
        }
        let compact: Vec<Vec<Vec<Complex64>>> = spectra
            .iter()
            .map(|per_ring| per_ring.iter().map(|s| modes.iter().map(|&m| s[m]).collect()).collect())
            .collect();
        drop(spectra);

        let direct = modes.len() <= DIRECT_DFT_MODES;
        let twiddle: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let radius: Vec<f64> = rings.iter().map(|r| 1.0 - r.s_mid()).collect();
        let depth: Vec<f64> = rings.iter().map(Ring::s_mid).collect();
        let cell: Vec<f64> = rings.iter().map(Ring::cell_weight).collect();
        // sin²(φ/2) and sin φ for φ = 2πd/n
        let half: Vec<(f64, f64)> = (0..=n / 2)
            .map(|d| {
                let phi = 2.0 * PI * d as f64 / n as f64;
                let h = (0.5 * phi).sin();
                (2.0 * h * h, phi.sin())
            })
            .collect();

        let mut out_hat = vec![vec![vec![Complex64::new(0.0, 0.0); modes.len()]; nr]; inputs.len()];
        let mut kappa = vec![Complex64::new(0.0, 0.0); n];
        let mut kappa_hat = vec![Complex64::new(0.0, 0.0); modes.len()];
        for a in 0..nr {
            for b in a..nr {
                let rho = radius[a] * radius[b];
                let gap0 = depth[a] + depth[b] - depth[a] * depth[b];
                for (d, &(c, s)) in half.iter().enumerate() {
                    let k = self.kernel_at(Complex64::new(gap0 + rho * c, -rho * s));
                    kappa[d] = k;
                    if d > 0 && d < n - d {
                        kappa[n - d] = k.conj();
                    }
                }
                if direct {
                    for (slot, &m) in kappa_hat.iter_mut().zip(&modes) {
                        let mut acc = Complex64::new(0.0, 0.0);
                        let mut idx = 0usize;
                        for k in &kappa {
                            acc += k * twiddle[idx];
                            idx += m;
                            if idx >= n {
                                idx -= n;
                            }
                        }
                        *slot = acc;
                    }
                } else {
                    let mut buf = kappa.clone();
                    forward.process(&mut buf);
                    for (slot, &m) in kappa_hat.iter_mut().zip(&modes) {
                        *slot = buf[m];
                    }
                }
                for (fi, spec) in compact.iter().enumerate() {
                    let out = &mut out_hat[fi];
                    for mi in 0..modes.len() {
                        out[a][mi] += kappa_hat[mi] * spec[b][mi] * cell[b];
                    }
                    if a != b {
                        for mi in 0..modes.len() {
                            out[b][mi] += kappa_hat[mi] * spec[a][mi] * cell[a];
                        }
                    }
                }
            }
        }

        let scale = 1.0 / n as f64;
        out_hat
            .into_iter()
            .map(|per_ring| {
                let mut values = Vec::with_capacity(grid.len());
                for hat in per_ring {
                    if direct {
                        for j in 0..n {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (h, &m) in hat.iter().zip(&modes) {
                                // e^{+2πi mj/n} = conj(twiddle)
                                acc += h * twiddle[(m * j) % n].conj();
                            }
                            values.push(acc * scale);
                        }
                    } else {
                        let mut buf = vec![Complex64::new(0.0, 0.0); n];
                        for (h, &m) in hat.iter().zip(&modes) {
                            buf[m] = *h;
                        }
                        inverse.process(&mut buf);
                        values.extend(buf.into_iter().map(|v| v * scale));
                    }
                }
                values
            })
            .collect()
    }

    /// Nodes where cells with `|1 - z w̄| < 4 · diam(w)` carry more than 10%
    /// of `∫ |K(z, w)| |f(w)| dA(w)`.
    ///
    /// Since `|1 - z w̄| ≥ 1 - |z|`, only nodes with `1 - |z|` below four
    /// maximal cell diameters can be affected; up to [`NEAR_PROBES`] of them
    /// are probed, evenly spread over the candidates.
    pub fn near_diagonal<G: DiscGrid + ?Sized>(&self, grid: &G, f: &[f64]) -> Vec<NearDiagonal> {
        let points = grid.points();
        let diam: Vec<f64> = (0..grid.len()).map(|i| grid.cell_diameter(i)).collect();
        let reach = NEAR_DIAMETERS * diam.iter().cloned().fold(0.0, f64::max);
        let candidates: Vec<usize> = (0..grid.len()).filter(|&i| points[i].depth < reach).collect();
        if candidates.is_empty() {
            return Vec::new();
        }
        let step = candidates.len().div_ceil(NEAR_PROBES);
        let positive = BergmanOperator {
            t: self.t,
            kernel: BergmanKernel::Positive,
        };
        candidates
            .iter()
            .step_by(step)
            .filter_map(|&i| {
                let z = &points[i];
                let mut near = 0.0;
                let mut total = 0.0;
                for (j, w) in points.iter().enumerate() {
                    let gap = one_minus_z_conj_w(z, w);
                    let v = positive.kernel_at(gap).re * f[j].abs() * grid.weights()[j];
                    total += v;
                    if gap.norm() < NEAR_DIAMETERS * diam[j] {
                        near += v;
                    }
                }
                let share = if total > 0.0 { near / total } else { 0.0 };
                (share > NEAR_SHARE_LIMIT).then_some(NearDiagonal { node: i, share })
            })
            .collect()
    }
}

fn transpose(rows: Vec<Vec<Complex64>>, k: usize) -> Vec<Vec<Complex64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); k];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            o.push(v);
        }
    }
    out
}

/// Union over inputs of the angular modes above the cutoff.
fn active_modes(spectra: &[Vec<Vec<Complex64>>], n: usize) -> Vec<usize> {
    let mut active = vec![false; n];
    for per_ring in spectra {
        let peak = per_ring
            .iter()
            .flat_map(|s| s.iter().map(|c| c.norm()))
            .fold(0.0, f64::max);
        if peak == 0.0 {
            continue;
        }
        for s in per_ring {
            for (m, c) in s.iter().enumerate() {
                if c.norm() > ACTIVE_MODE_CUTOFF * peak {
                    active[m] = true;
                }
            }
        }
    }
    (0..n).filter(|&m| active[m]).collect()
}

/// A node whose value is dominated by cells the grid cannot resolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearDiagonal {
    pub node: usize,
    pub share: f64,
}

#[derive(Debug, Clone)]
pub struct BergmanOutput<'g, T> {
    pub values: GridFunction<'g, PolarGrid, T>,
    pub near_diagonal: Vec<NearDiagonal>,
}

pub fn apply_bergman<'g>(t: f64, f: &GridFunction<'g, PolarGrid>) -> Result<BergmanOutput<'g, Complex64>> {
    let op = BergmanOperator::analytic(t)?;
    let values = op.apply_many(f.grid, &[&f.values])?.pop().unwrap_or_default();
    Ok(BergmanOutput {
        values: GridFunction { grid: f.grid, values },
        near_diagonal: op.near_diagonal(f.grid, &f.values),
    })
}

pub fn apply_bergman_positive<'g>(t: f64, f: &GridFunction<'g, PolarGrid>) -> Result<BergmanOutput<'g, f64>> {
    let op = BergmanOperator::positive(t)?;
    let values = op.apply_many(f.grid, &[&f.values])?.pop().unwrap_or_default();
    Ok(BergmanOutput {
        values: GridFunction {
            grid: f.grid,
            values: values.into_iter().map(|c| c.re).collect(),
        },
        near_diagonal: op.near_diagonal(f.grid, &f.values),
    })
}

impl PositiveOperator<PolarGrid> for BergmanOperator {
    fn apply<'g>(&self, f: &GridFunction<'g, PolarGrid>) -> Result<GridFunction<'g, PolarGrid>> {
        match self.kernel {
            BergmanKernel::Positive => Ok(apply_bergman_positive(self.t, f)?.values),
            BergmanKernel::Analytic => Err(Error::Unsupported {
                kind: "bergman".into(),
                reason: "the analytic kernel is not positive; use bergman_positive".into(),
            }),
        }
    }

    fn label(&self) -> String {
        match self.kernel {
            BergmanKernel::Analytic => format!("bergman[t={}]", self.t),
            BergmanKernel::Positive => format!("bergman_positive[t={}]", self.t),
        }
    }
}

/// `∫_{|w|<R} |1 - z w̄|^(-2t) dA(w)` from the power series
/// `Σ a_k² |z|^{2k} R^{2k+2} / (k+1)` with `a_k = Γ(k+t) / (Γ(t) k!)`.
pub fn positive_series_one(t: f64, modulus: f64, r_max: f64) -> f64 {
    let x = (modulus * r_max).powi(2);
    let mut a = 1.0;
    let mut xk = 1.0;
    let mut sum = 0.0;
    for k in 0..10_000_000u64 {
        let term = a * a * xk / (k + 1) as f64;
        sum += term;
        if term < 1e-17 * sum && k > 8 {
            break;
        }
        a *= (k as f64 + t) / (k + 1) as f64;
        xk *= x;
    }
    sum * r_max * r_max
}

/// `∫_{|w|<R} (1 - z w̄)^(-2t) dA(w) = R²`: every non-constant mode integrates to zero.
pub fn analytic_series_one(r_max: f64) -> f64 {
    r_max * r_max
}

/// Result of [`sparse_domination_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominationRatio {
    /// `sup_z K⁺f(z) / (A_D f + A_D̃ f)(z)`.
    pub ratio: f64,
    pub node: usize,
    /// Shared depth of both box trees.
    pub depth: u32,
}

/// Box trees for both systems at a shared depth.
pub fn domination_trees(grid: &PolarGrid, depth: Option<u32>) -> Result<(BoxTree, BoxTree)> {
    let depth = match depth {
        Some(d) => d,
        None => DyadicSystem::BOTH
            .iter()
            .map(|&s| BoxTree::new(grid, s, None).map(|t| t.depth()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min()
            .unwrap_or(0),
    };
    Ok((
        BoxTree::new(grid, DyadicSystem::Standard, Some(depth))?,
        BoxTree::new(grid, DyadicSystem::Shifted, Some(depth))?,
    ))
}

/// Pointwise sparse domination ratio of the positive kernel by the full
/// sparse operators of the two dyadic systems.
pub fn sparse_domination_check(t: f64, f: &GridFunction<'_, PolarGrid>, depth: Option<u32>) -> Result<DominationRatio> {
    Ok(sparse_domination_batch(t, f.grid, &[&f.values], depth)?[0])
}

/// [`sparse_domination_check`] for several inputs sharing kernel work.
pub fn sparse_domination_batch(
    t: f64,
    grid: &PolarGrid,
    inputs: &[&[f64]],
    depth: Option<u32>,
) -> Result<Vec<DominationRatio>> {
    if inputs.iter().any(|f| f.iter().any(|&v| v < 0.0)) {
        return Err(crate::error::invalid("f", "sparse domination is checked on nonnegative inputs"));
    }
    let op = BergmanOperator::positive(t)?;
    let (std_tree, shifted_tree) = domination_trees(grid, depth)?;
    let numerators = op.apply_many(grid, inputs)?;
    Ok(inputs
        .iter()
        .zip(numerators)
        .map(|(f, num)| {
            let gf = GridFunction {
                grid,
                values: f.to_vec(),
            };
            let a = full_sparse_on_tree(&std_tree, t, MeasureConvention::Exact, &gf);
            let b = full_sparse_on_tree(&shifted_tree, t, MeasureConvention::Exact, &gf);
            let mut best = DominationRatio {
                ratio: 0.0,
                node: 0,
                depth: std_tree.depth(),
            };
            for (i, k) in num.iter().enumerate() {
                let den = a.values[i] + b.values[i];
                let r = if den > 0.0 {
                    k.re / den
                } else if k.re > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if r > best.ratio {
                    best.ratio = r;
                    best.node = i;
                }
            }
            best
        })
        .collect())
}
