//! The `(1/p, 1/q)` boundedness regions: critical slope, point
//! classification, Bourgain's interpolation combiner and layer-exponent fits.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::sparse::sparse_index_bound;

/// Points within this distance of the critical line are on it.
pub const LINE_TOLERANCE: f64 = 1e-12;

/// `(1/p, 1/q)` with `1/∞ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPoint {
    pub ip: f64,
    pub iq: f64,
}

impl ExponentPoint {
    pub fn new(ip: f64, iq: f64) -> Result<Self> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !(ok(ip) && ok(iq)) {
            return Err(invalid("point", format!("({ip}, {iq}) is outside [0,1]²")));
        }
        Ok(ExponentPoint { ip, iq })
    }

    /// From exponents `p, q ∈ [1, ∞]`.
    pub fn from_exponents(p: f64, q: f64) -> Result<Self> {
        Self::new(1.0 / p, 1.0 / q)
    }

    pub fn l1_distance(&self, other: &ExponentPoint) -> f64 {
        (self.ip - other.ip).abs() + (self.iq - other.iq).abs()
    }
}

/// The best bound proven at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundClass {
    Strong,
    WeakLine,
    RestrictedEndpoint,
    Unbounded,
}

impl BoundClass {
    pub fn name(self) -> &'static str {
        match self {
            BoundClass::Strong => "strong",
            BoundClass::WeakLine => "weak_line",
            BoundClass::RestrictedEndpoint => "restricted_endpoint",
            BoundClass::Unbounded => "unbounded",
        }
    }

    /// Only restricted weak type is known here.
    pub fn is_restricted_only(self) -> bool {
        self == BoundClass::RestrictedEndpoint
    }

    /// Larger is better: Unbounded < RestrictedEndpoint < WeakLine < Strong.
    pub fn rank(self) -> u8 {
        match self {
            BoundClass::Unbounded => 0,
            BoundClass::RestrictedEndpoint => 1,
            BoundClass::WeakLine => 2,
            BoundClass::Strong => 3,
        }
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

/// Maximal operators get weak type on the whole closed critical segment;
/// singular (Bergman-type or sparse) operators only restricted weak type at
/// `1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorClass {
    Maximal,
    Singular,
}

impl std::str::FromStr for OperatorClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximal" => Ok(OperatorClass::Maximal),
            "singular" => Ok(OperatorClass::Singular),
            _ => Err(invalid("kind", format!("`{s}` is neither maximal nor singular"))),
        }
    }
}

/// `σ = nK(t-1) / (-log₂(1-η))`, after checking `1 < t < 1 - log₂(1-η)/(nK)`.
pub fn critical_slope(n: usize, t: f64, eta: f64, degree: f64) -> Result<f64> {
    check_graded(n, eta, degree)?;
    let upper = sparse_index_bound(n, eta, degree);
    if !(t.is_finite() && t > 1.0 && t < upper) {
        return Err(Error::InadmissibleIndex { t, lower: 1.0, upper });
    }
    Ok(n as f64 * degree * (t - 1.0) / -(1.0 - eta).log2())
}

fn check_graded(n: usize, eta: f64, degree: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "dimension must be at least 1"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid("eta", format!("{eta} must lie in (0, 1)")));
    }
    if !(degree >= 1.0 && degree.is_finite()) {
        return Err(invalid("K", format!("{degree} must be at least 1")));
    }
    Ok(())
}

/// `1/p` of the restricted endpoint on `1/q = 1`:
/// `(-log₂(1-η) + nK(1-t)) / (-log₂(1-η))`.
pub fn graded_endpoint(n: usize, t: f64, eta: f64, degree: f64) -> Result<f64> {
    let sigma = critical_slope(n, t, eta, degree)?;
    Ok(1.0 - sigma)
}

/// [`critical_slope`] in exact arithmetic, with `L = -log₂(1-η)` supplied as
/// a rational (it is `1` for `η = 1/2`).
pub fn critical_slope_rational(n: u32, t: &BigRational, log_term: &BigRational, degree: &BigRational) -> Result<BigRational> {
    if log_term <= &BigRational::zero() {
        return Err(invalid("log_term", "-log2(1-eta) must be positive"));
    }
    let n = BigRational::from_integer(BigInt::from(n));
    Ok(n * degree * (t - BigRational::one()) / log_term)
}

/// [`graded_endpoint`] in exact arithmetic.
pub fn graded_endpoint_rational(n: u32, t: &BigRational, log_term: &BigRational, degree: &BigRational) -> Result<BigRational> {
    let nk = BigRational::from_integer(BigInt::from(n)) * degree;
    let _ = critical_slope_rational(n, t, log_term, degree)?;
    Ok((log_term + nk * (BigRational::one() - t)) / log_term)
}

/// Class of a point relative to the line `1/q - 1/p = σ`.
pub fn classify(point: ExponentPoint, sigma: f64, kind: OperatorClass) -> BoundClass {
    let gap = point.iq - point.ip - sigma;
    if gap > LINE_TOLERANCE {
        BoundClass::Strong
    } else if gap >= -LINE_TOLERANCE {
        match kind {
            OperatorClass::Maximal => BoundClass::WeakLine,
            OperatorClass::Singular if (point.iq - 1.0).abs() <= LINE_TOLERANCE => BoundClass::RestrictedEndpoint,
            OperatorClass::Singular => BoundClass::WeakLine,
        }
    } else {
        BoundClass::Unbounded
    }
}

/// A bound at one exponent pair whose piecewise norms change geometrically
/// at rate `β` per layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerBound {
    pub beta: f64,
    pub constant: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BourgainResult {
    pub theta: f64,
    pub point: ExponentPoint,
    /// `M1^θ M2^{1-θ}`, the constant up to an absolute factor.
    pub constant_shape: f64,
}

/// Restricted weak type at `θ = β₂/(β₁+β₂)` between the two corners.
pub fn bourgain_combine(first: CornerBound, second: CornerBound) -> Result<BourgainResult> {
    if !(first.beta > 0.0 && second.beta > 0.0) {
        return Err(invalid("beta", "both rates must be positive"));
    }
    for c in [first, second] {
        if !(c.p >= 1.0 && c.q >= 1.0) {
            return Err(invalid("p/q", "exponents must lie in [1, ∞]"));
        }
    }
    let theta = second.beta / (first.beta + second.beta);
    let ip = theta / first.p + (1.0 - theta) / second.p;
    let iq = theta / first.q + (1.0 - theta) / second.q;
    Ok(BourgainResult {
        theta,
        point: ExponentPoint::new(ip.clamp(0.0, 1.0), iq.clamp(0.0, 1.0))?,
        constant_shape: first.constant.powf(theta) * second.constant.powf(1.0 - theta),
    })
}

/// Layer-wise norms of one corner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerNormSeries {
    pub corner: String,
    pub points: Vec<(u32, f64)>,
}

impl LayerNormSeries {
    pub fn new(corner: impl Into<String>, points: Vec<(u32, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("series", "layer indices must increase strictly"));
        }
        if points.iter().any(|p| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(invalid("series", "norms must be positive and finite"));
        }
        Ok(LayerNormSeries {
            corner: corner.into(),
            points,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in `log₂` units.
    pub residual: f64,
}

/// Least-squares fit of `log₂(value)` against `j`.
pub fn fit_layer_exponent(series: &LayerNormSeries) -> Result<ExponentFit> {
    if series.points.len() < 3 {
        return Err(invalid("series", "need at least three layers"));
    }
    let xs: Vec<f64> = series.points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = series.points.iter().map(|p| p.1.log2()).collect();
    Ok(least_squares(&xs, &ys))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> ExponentFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    ExponentFit {
        slope,
        intercept,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSample {
    pub point: ExponentPoint,
    pub class: BoundClass,
}

/// Classification on the `resolution × resolution` lattice of `[0,1]²`,
/// plus the two ends of the critical segment whenever they lie in the square.
pub fn region_samples(sigma: f64, kind: OperatorClass, resolution: usize) -> Result<Vec<RegionSample>> {
    if resolution < 2 {
        return Err(invalid("resolution", "need at least 2 points per axis"));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid("sigma", format!("{sigma} must be nonnegative")));
    }
    let step = (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution + 2);
    for i in 0..resolution {
        for j in 0..resolution {
            let point = ExponentPoint {
                ip: i as f64 / step,
                iq: j as f64 / step,
            };
            out.push(RegionSample {
                point,
                class: classify(point, sigma, kind),
            });
        }
    }
    for point in segment_ends(sigma) {
        if !out.iter().any(|s| s.point == point) {
            out.push(RegionSample {
                point,
                class: classify(point, sigma, kind),
            });
        }
    }
    Ok(out)
}

/// `(0, σ)` and `(1-σ, 1)` when `σ ≤ 1`.
pub fn segment_ends(sigma: f64) -> Vec<ExponentPoint> {
    if sigma > 1.0 {
        return Vec::new();
    }
    vec![
        ExponentPoint { ip: 0.0, iq: sigma },
        ExponentPoint {
            ip: 1.0 - sigma,
            iq: 1.0,
        },
    ]
}

/// `ip,iq,class` rows with a header line.
pub fn region_csv(samples: &[RegionSample]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer
        .write_record(["ip", "iq", "class"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for s in samples {
        writer
            .write_record([s.point.ip.to_string(), s.point.iq.to_string(), s.class.name().to_string()])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
