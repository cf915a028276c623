//! Forward implied vols, piecewise-constant instantaneous vols, total
//! variance and integrated correlation.
//!
//! All integrals are exact finite sums over bucket intersections. Past the
//! last breakpoint a step function is extended flat and the result carries
//! an `extrapolated` flag.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_data::VolTermStructure;

/// Buckets narrower than this are rejected.
pub const MIN_BUCKET_WIDTH: f64 = 1e-12;

/// Step function over `(Tₙ, Tₙ₊₁]` with `T₀ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseConstant {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.first() != Some(&0.0) {
            return Err(Error::Domain("breakpoints must start at 0".into()));
        }
        if values.len() + 1 != breakpoints.len() || values.is_empty() {
            return Err(Error::Domain(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                values.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].is_finite() && w[1] - w[0] >= MIN_BUCKET_WIDTH) {
                return Err(Error::Domain(format!(
                    "breakpoints must increase by at least {MIN_BUCKET_WIDTH:e} ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("bucket value {v} is not finite")));
        }
        Ok(PiecewiseConstant { breakpoints, values })
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// `(start, end, value)` per bucket.
    pub fn buckets(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.windows(2).zip(&self.values).map(|(w, &v)| (w[0], w[1], v))
    }

    /// Index of the bucket `(Tₙ, Tₙ₊₁]` holding `t`; flat outside the grid.
    pub fn bucket_index(&self, t: f64) -> usize {
        let below = self.breakpoints.partition_point(|&b| b < t);
        below.saturating_sub(1).min(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.bucket_index(t)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A value obtained by integrating step functions, possibly past their last
/// breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub extrapolated: bool,
}

fn forward_from_variances(earlier: f64, later: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 >= 0.0 && t2 - t1 >= MIN_BUCKET_WIDTH) {
        return Err(Error::Domain(format!("bucket ({t1}, {t2}] is empty or narrower than {MIN_BUCKET_WIDTH:e}")));
    }
    if later < earlier {
        return Err(Error::CalendarArbitrage { bucket: None, t1, t2, earlier, later });
    }
    Ok(((later - earlier) / (t2 - t1)).sqrt())
}

/// `σ̂(T₁,T₂)` from `σ̂(0,T₁)` and `σ̂(0,T₂)`.
pub fn forward_vol(vol1: f64, vol2: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(vol1 >= 0.0 && vol2 >= 0.0) {
        return Err(Error::Domain(format!("vols {vol1}, {vol2} must be non-negative")));
    }
    forward_from_variances(vol1 * vol1 * t1, vol2 * vol2 * t2, t1, t2)
}

/// Instantaneous vol implied by a term structure: first bucket `(0, T₁]`
/// carries `σ̂(0,T₁)`, later buckets the forward vols.
pub fn bootstrap_piecewise_vol(ts: &VolTermStructure) -> Result<PiecewiseConstant> {
    let points = ts.points();
    let mut breakpoints = Vec::with_capacity(points.len() + 1);
    let mut values = Vec::with_capacity(points.len());
    breakpoints.push(0.0);
    let (mut prev_t, mut prev_sigma) = (0.0, 0.0);
    for (n, &(t, sigma)) in points.iter().enumerate() {
        let value = if n == 0 {
            sigma
        } else {
            forward_vol(prev_sigma, sigma, prev_t, t).map_err(|e| e.in_bucket(n))?
        };
        breakpoints.push(t);
        values.push(value);
        (prev_t, prev_sigma) = (t, sigma);
    }
    PiecewiseConstant::new(breakpoints, values)
}

/// `∫₀ᵀ σ²(t) dt`.
pub fn total_variance(sigma: &PiecewiseConstant, t: f64) -> Result<Integral> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("horizon {t} must be positive")));
    }
    let mut value = 0.0;
    for (start, end, v) in sigma.buckets() {
        if start >= t {
            break;
        }
        value += v * v * (end.min(t) - start);
    }
    let horizon = sigma.horizon();
    let extrapolated = t > horizon;
    if extrapolated {
        let last = sigma.values()[sigma.values().len() - 1];
        value += last * last * (t - horizon);
    }
    Ok(Integral { value, extrapolated })
}

/// Union of all breakpoints below `t`, plus `t`.
fn merged_grid(functions: &[&PiecewiseConstant], t: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = functions
        .iter()
        .flat_map(|f| f.breakpoints().iter().copied())
        .filter(|&b| b < t)
        .collect();
    grid.push(t);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `∫₀ᵀ ρσ₁σ₂ dt / √(∫σ₁² ∫σ₂²)`.
pub fn integrated_correlation(
    rho: &PiecewiseConstant,
    sigma1: &PiecewiseConstant,
    sigma2: &PiecewiseConstant,
    t: f64,
) -> Result<Integral> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("horizon {t} must be positive")));
    }
    if rho.max_abs() > 1.0 {
        return Err(Error::Domain(format!("correlation bucket value {} outside [-1, 1]", rho.max_abs())));
    }
    let grid = merged_grid(&[rho, sigma1, sigma2], t);
    let mut covariance = 0.0;
    let mut prev = 0.0;
    for &next in &grid {
        let mid = 0.5 * (prev + next);
        covariance += rho.value_at(mid) * sigma1.value_at(mid) * sigma2.value_at(mid) * (next - prev);
        prev = next;
    }
    let v1 = total_variance(sigma1, t)?;
    let v2 = total_variance(sigma2, t)?;
    if v1.value == 0.0 || v2.value == 0.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "total variances {} and {} over (0, {t}]",
            v1.value, v2.value
        )));
    }
    let value = (covariance / (v1.value.sqrt() * v2.value.sqrt())).clamp(-1.0, 1.0);
    Ok(Integral {
        value,
        extrapolated: t > rho.horizon() || v1.extrapolated || v2.extrapolated,
    })
}

/// `σ̂²(0,T)·T` for any `T > 0`: quoted values at quoted maturities,
/// linear in `T` in between (and from zero before the first quote), and the
/// last forward variance carried flat past the last quote.
pub fn interpolated_total_variance(ts: &VolTermStructure, t: f64) -> Result<Integral> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("horizon {t} must be positive")));
    }
    let points = ts.points();
    if let Some(&(tq, s)) = points.iter().find(|p| p.0 == t) {
        return Ok(Integral { value: s * s * tq, extrapolated: false });
    }
    total_variance(&bootstrap_piecewise_vol(ts)?, t)
}

/// `σ̂(0,T)` at any horizon; see [`interpolated_total_variance`].
pub fn implied_vol_at(ts: &VolTermStructure, t: f64) -> Result<Integral> {
    if let Some(&(_, s)) = ts.points().iter().find(|p| p.0 == t) {
        return Ok(Integral { value: s, extrapolated: false });
    }
    let w = interpolated_total_variance(ts, t)?;
    Ok(Integral { value: (w.value / t).sqrt(), extrapolated: w.extrapolated })
}

/// `σ̂(T₁,T₂)` read off a term structure at arbitrary bucket edges.
pub fn forward_vol_between(ts: &VolTermStructure, t1: f64, t2: f64) -> Result<Integral> {
    if t1 == 0.0 {
        return implied_vol_at(ts, t2);
    }
    let earlier = interpolated_total_variance(ts, t1)?;
    let later = interpolated_total_variance(ts, t2)?;
    Ok(Integral {
        value: forward_from_variances(earlier.value, later.value, t1, t2)?,
        extrapolated: later.extrapolated,
    })
}
