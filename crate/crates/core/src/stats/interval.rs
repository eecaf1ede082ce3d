use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    AgrestiCoull,
    Wilson,
}

/// A binomial proportion with a confidence interval.
///
/// `point` is the observed proportion `x / n`. `center` is the midpoint the
/// interval is built around, which both methods shrink toward one half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub x: u64,
    pub n: u64,
    pub z: f64,
    pub method: IntervalMethod,
    pub point: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ProportionEstimate {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

fn check_inputs(x: u64, n: u64, z: f64) -> Result<(), StatsError> {
    if n == 0 {
        return Err(StatsError::UndefinedEstimate);
    }
    if x > n {
        return Err(StatsError::Domain(format!("successes {x} exceed trials {n}")));
    }
    if !z.is_finite() || z < 0.0 {
        return Err(StatsError::Domain(format!("critical value {z} must be finite and >= 0")));
    }
    Ok(())
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Agresti-Coull interval: add `z²/2` successes and `z²/2` failures, then
/// take the Wald interval of the adjusted proportion.
pub fn agresti_coull(x: u64, n: u64, z: f64) -> Result<ProportionEstimate, StatsError> {
    check_inputs(x, n, z)?;
    let (xf, nf) = (x as f64, n as f64);
    let z2 = z * z;
    let n_adj = nf + z2;
    let center = (xf + z2 / 2.0) / n_adj;
    let half = z * (center * (1.0 - center) / n_adj).sqrt();
    Ok(ProportionEstimate {
        x,
        n,
        z,
        method: IntervalMethod::AgrestiCoull,
        point: xf / nf,
        center,
        lo: clamp_unit(center - half),
        hi: clamp_unit(center + half),
    })
}

/// Wilson score interval.
pub fn wilson(x: u64, n: u64, z: f64) -> Result<ProportionEstimate, StatsError> {
    check_inputs(x, n, z)?;
    let (xf, nf) = (x as f64, n as f64);
    let p = xf / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Ok(ProportionEstimate {
        x,
        n,
        z,
        method: IntervalMethod::Wilson,
        point: p,
        center,
        lo: clamp_unit(center - half),
        hi: clamp_unit(center + half),
    })
}

pub fn estimate(
    method: IntervalMethod,
    x: u64,
    n: u64,
    z: f64,
) -> Result<ProportionEstimate, StatsError> {
    match method {
        IntervalMethod::AgrestiCoull => agresti_coull(x, n, z),
        IntervalMethod::Wilson => wilson(x, n, z),
    }
}

/// Two-sided critical value for a confidence level such as `0.95`.
pub fn z_for_confidence(level: f64) -> Result<f64, StatsError> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Domain(format!(
            "confidence level {level} must lie strictly between 0 and 1"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}
