//! The analytic and positive Bergman-type kernels applied to 1.

use hypersingular::bergman::{apply_bergman, apply_bergman_positive, positive_series_one};
use hypersingular::grid::{DiscGrid, GridFunction, PolarGrid, RadialLayout};

fn main() -> hypersingular::Result<()> {
    let (t, r_max) = (1.25, 0.9999);
    let grid = PolarGrid::tensor(256, 512, r_max, RadialLayout::Geometric)?;
    let one = GridFunction::constant(&grid, 1.0);
    let k = apply_bergman(t, &one)?;
    let kp = apply_bergman_positive(t, &one)?;
    println!("|z|        K1 (re, im)              K+1          series       K+1 (1-|z|^2)^(2(t-1))");
    // the quadrature resolves the kernel peak only while 1-|z| spans several rings
    for ring in grid.rings().iter().step_by(24) {
        let i = ring.offset;
        let z = grid.point(i);
        if z.modulus() > 0.99 {
            break;
        }
        let v = k.values.values[i];
        let w = kp.values.values[i];
        println!(
            "{:.6}  ({:+.6}, {:+.1e})  {w:<11.6}  {:<11.6}  {:.4}",
            z.modulus(),
            v.re,
            v.im,
            positive_series_one(t, z.modulus(), r_max),
            w * z.one_minus_modulus_sq().powf(2.0 * (t - 1.0))
        );
    }
    println!("near-diagonal warnings: {}", kp.near_diagonal.len());
    Ok(())
}
