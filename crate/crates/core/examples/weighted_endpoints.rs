//! Weak and strong endpoint criteria for power weights (1-r)^γ.

use hypersingular::weights::{
    bekolle_bonami, default_schedule, endpoint_strong_condition, endpoint_weak_condition, RadialWeight,
};

fn main() -> hypersingular::Result<()> {
    let t = 1.25;
    let l = 1.0 / (3.0 - 2.0 * t);
    println!("gamma   weak        strong      B_l estimate");
    for gamma in [-0.6, -0.2, -0.05, 0.0, 0.05, 0.5, 1.0] {
        let w = RadialWeight::power(gamma)?;
        let weak = endpoint_weak_condition(&w, t, 40)?;
        let strong = endpoint_strong_condition(&w, t, 40)?;
        let bb = bekolle_bonami(&w, l, &default_schedule())?;
        println!("{gamma:>5}   {:<10}  {:<10}  {:.4}", weak.verdict, strong.verdict, bb.estimate);
    }
    Ok(())
}
