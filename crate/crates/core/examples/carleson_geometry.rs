//! Carleson boxes of both dyadic systems and their exact areas.

use hypersingular::geometry::{carleson_box, DyadicArc, DyadicSystem};
use hypersingular::sparse::{family_carleson, sparseness_witness, validate, WitnessKind};
use hypersingular::geometry::MeasureConvention;

fn main() -> hypersingular::Result<()> {
    println!("level  system    start      length     area        area/len^2");
    for level in 0..=4 {
        for system in DyadicSystem::BOTH {
            let arc = DyadicArc::new(level, 0, system)?;
            let b = carleson_box(arc);
            let len = arc.length();
            println!(
                "{level:>5}  {:<8}  {:<9.6}  {:<9.6}  {:<10.6}  {:.6}",
                system.to_string(),
                arc.start(),
                len,
                b.area,
                b.area / (len * len)
            );
        }
    }

    // tents of a Carleson family are disjoint, so they witness sparseness
    for convention in [MeasureConvention::Dyadic, MeasureConvention::Exact] {
        let family = family_carleson(8, DyadicSystem::Shifted, convention)?;
        let w = sparseness_witness(&family, WitnessKind::Tent)?;
        let report = validate(&family, &w, w.eta);
        println!(
            "{} boxes, {:?} convention: tent eta = {:.4}, valid = {}",
            family.len(),
            convention,
            w.eta,
            report.valid
        );
    }
    Ok(())
}
