//! Level sets of the maximal function as unions of maximal Carleson boxes.

use hypersingular::geometry::DyadicSystem;
use hypersingular::grid::{Grid, PolarGrid};
use hypersingular::operators::{apply_maximal, level_set_decomposition, MaximalOperator};

fn main() -> hypersingular::Result<()> {
    let grid = PolarGrid::dyadic(8, 2, 4, 8)?;
    // a bump concentrated near the boundary point z = 1
    let f = grid.sample(|s, x| {
        let dx = x.min(1.0 - x);
        (-(dx * dx + s * s) / 0.002).exp() * 10.0
    });
    let op = MaximalOperator::new(DyadicSystem::Standard, 1.25)?;
    let mf = apply_maximal(&op, &f)?.values;
    for alpha in [0.5, 2.0, 8.0] {
        let set = level_set_decomposition(&op, &f, alpha)?;
        let mask = set.node_mask(&grid);
        let agree = mask.iter().zip(&mf.values).all(|(m, v)| *m == (*v > alpha));
        let levels: Vec<u32> = set.boxes.iter().map(|b| b.arc.level).collect();
        println!(
            "alpha = {alpha}: {} boxes at levels {levels:?}, {} of {} nodes, matches {{Mf > alpha}}: {agree}",
            set.boxes.len(),
            mask.iter().filter(|m| **m).count(),
            grid.len()
        );
    }
    Ok(())
}
