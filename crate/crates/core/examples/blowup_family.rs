//! The family S_m: a sparse family whose operator norm grows like 2^{m(t-1)}.

use hypersingular::grid::{CubeGrid, GridFunction};
use hypersingular::operators::{apply_sparse_cube, check_sparse_index, SparseOperator};
use hypersingular::sparse::{family_counterexample, sparseness_witness, WitnessKind};

fn main() -> hypersingular::Result<()> {
    let t = 1.25;
    println!("   m  degree  eta     admissible  S_m 1 on [0,1/2)   2^(m(t-1)) + 2^(1-t)");
    for m in [1, 2, 4, 8, 12, 16] {
        let family = family_counterexample(m)?;
        let w = sparseness_witness(&family, WitnessKind::Balanced)?;
        let degree = family.degree()?;
        let admissible = check_sparse_index(t, 1, w.eta, degree).is_ok();
        let grid = CubeGrid::new(1, m + 1)?;
        let image = apply_sparse_cube(&SparseOperator::new(&family, t)?, &GridFunction::constant(&grid, 1.0))?;
        let value = family.to_original_normalization(image.values[0], t);
        let expected = (m as f64 * (t - 1.0)).exp2() + (1.0 - t).exp2();
        println!("{m:>4}  {degree:>6}  {:.4}  {admissible:<10}  {value:<17.12}  {expected:.12}", w.eta);
    }
    Ok(())
}
