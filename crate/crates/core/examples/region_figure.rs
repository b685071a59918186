//! Writes the classified (1/p, 1/q) square as CSV, ready for plotting.

use hypersingular::regions::{critical_slope, region_csv, region_samples, OperatorClass};

fn main() -> hypersingular::Result<()> {
    let sigma = critical_slope(2, 1.25, 0.5, 1.0)?;
    let samples = region_samples(sigma, OperatorClass::Singular, 21)?;
    let csv = region_csv(&samples)?;
    let path = std::env::temp_dir().join("hypersingular_region.csv");
    std::fs::write(&path, &csv)?;
    for class in ["strong", "weak_line", "restricted_endpoint", "unbounded"] {
        let count = samples.iter().filter(|s| s.class.name() == class).count();
        println!("{class:<20} {count}");
    }
    println!("sigma = {sigma}; wrote {}", path.display());
    Ok(())
}
