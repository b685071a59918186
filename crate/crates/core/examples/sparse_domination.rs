//! K+ f against the two-system sparse operator, over seeded random inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypersingular::bergman::sparse_domination_batch;
use hypersingular::experiment::random_band_limited;
use hypersingular::grid::{PolarGrid, RadialLayout};

fn main() -> hypersingular::Result<()> {
    let t = 1.25;
    let r_max = 1.0 - (-6f64).exp2();
    for n_r in [64, 128, 256] {
        let grid = PolarGrid::tensor(n_r, 256, r_max, RadialLayout::Uniform)?;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs: Vec<Vec<f64>> = (0..40).map(|_| random_band_limited(&grid, &mut rng, 3, 3)).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let ratios = sparse_domination_batch(t, &grid, &refs, Some(5))?;
        let sup = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
        println!("{n_r:>4} rings: sup K+f / (A f + A' f) = {sup:.5}");
    }
    Ok(())
}
