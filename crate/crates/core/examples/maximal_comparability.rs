//! M_t 1 against (1-|z|^2)^{-2(t-1)} on a Whitney-type grid.

use hypersingular::geometry::DyadicSystem;
use hypersingular::grid::{DiscGrid, GridFunction, PolarGrid};
use hypersingular::operators::{apply_maximal, MaximalOperator};

fn main() -> hypersingular::Result<()> {
    let grid = PolarGrid::dyadic(12, 2, 4, 8)?;
    let one = GridFunction::constant(&grid, 1.0);
    for t in [1.1, 1.25, 1.4] {
        let out = apply_maximal(&MaximalOperator::new(DyadicSystem::Standard, t)?, &one)?;
        let ratios: Vec<f64> = grid
            .points()
            .iter()
            .zip(&out.values.values)
            .map(|(p, v)| v / p.one_minus_modulus_sq().powf(-2.0 * (t - 1.0)))
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        println!("t = {t}: ratio in [{lo:.4}, {hi:.4}] over {} nodes (depth {})", ratios.len(), out.depth);
    }
    Ok(())
}
