//! Layer-wise corner norms of the Carleson family and their geometric rates.

use hypersingular::geometry::{DyadicSystem, MeasureConvention};
use hypersingular::norms::{op_norm_corner, Corner};
use hypersingular::regions::{fit_layer_exponent, LayerNormSeries};
use hypersingular::sparse::family_carleson;

fn main() -> hypersingular::Result<()> {
    let family = family_carleson(12, DyadicSystem::Standard, MeasureConvention::Exact)?;
    for t in [1.1, 1.25, 1.4] {
        println!("t = {t}");
        for corner in [Corner::OneOne, Corner::InfOne] {
            let points = (2..=12)
                .map(|j| Ok((j as u32, op_norm_corner(&family, t, corner, Some(j))?)))
                .collect::<hypersingular::Result<Vec<_>>>()?;
            let fit = fit_layer_exponent(&LayerNormSeries::new(corner.label(), points)?)?;
            let model = match corner {
                Corner::OneOne => 2.0 * (t - 1.0),
                _ => -(3.0 - 2.0 * t),
            };
            println!("  ({corner:<5})  fitted slope {:+.4}   model {model:+.4}", fit.slope);
        }
    }
    Ok(())
}
