//! Garman–Kohlhagen pricing of European FX options and implied-vol inversion.
//!
//! Rates are the average continuously compounded rates over `(0, T]`: `r_dom`
//! for the denominating currency, `r_for` for the foreign one.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{BandViolation, Error, Result};
use crate::market_data::FxPair;

/// Standard normal CDF via the complementary error function, which keeps
/// full relative accuracy in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    fn sign(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }

    pub fn intrinsic(self, underlying: f64, strike: f64) -> f64 {
        (self.sign() * (underlying - strike)).max(0.0)
    }
}

impl std::str::FromStr for OptionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            _ => Err(Error::Validation(format!("option kind {s:?} must be call or put"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaSpec {
    pub pair: FxPair,
    pub strike: f64,
    pub maturity: f64,
    pub kind: OptionKind,
}

impl VanillaSpec {
    pub fn new(pair: FxPair, strike: f64, maturity: f64, kind: OptionKind) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::Domain(format!("strike {strike} must be positive")));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::Domain(format!("maturity {maturity} must be positive")));
        }
        Ok(VanillaSpec { pair, strike, maturity, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInputs {
    pub spot: f64,
    pub domestic_rate: f64,
    pub foreign_rate: f64,
    pub vol: f64,
}

impl PricingInputs {
    pub fn new(spot: f64, domestic_rate: f64, foreign_rate: f64, vol: f64) -> Result<Self> {
        let inputs = PricingInputs { spot, domestic_rate, foreign_rate, vol };
        inputs.validate()?;
        Ok(inputs)
    }

    fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::Domain(format!("spot {} must be positive", self.spot)));
        }
        if !(self.vol.is_finite() && self.vol >= 0.0) {
            return Err(Error::Domain(format!("vol {} must be non-negative", self.vol)));
        }
        if !(self.domestic_rate.is_finite() && self.foreign_rate.is_finite()) {
            return Err(Error::Domain("rates must be finite".into()));
        }
        Ok(())
    }
}

/// `F = X·exp((r_dom − r_for)·T)`.
pub fn forward(spot: f64, r_dom: f64, r_for: f64, t: f64) -> Result<f64> {
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::Domain(format!("spot {spot} must be positive")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("maturity {t} must be positive")));
    }
    Ok(spot * ((r_dom - r_for) * t).exp())
}

/// Undiscounted Black price on a forward. `total_sd = σ·√T`.
pub(crate) fn black(kind: OptionKind, fwd: f64, strike: f64, total_sd: f64) -> f64 {
    if total_sd == 0.0 {
        return kind.intrinsic(fwd, strike);
    }
    let d1 = ((fwd / strike).ln() + 0.5 * total_sd * total_sd) / total_sd;
    let d2 = d1 - total_sd;
    match kind {
        OptionKind::Call => fwd * normal_cdf(d1) - strike * normal_cdf(d2),
        OptionKind::Put => strike * normal_cdf(-d2) - fwd * normal_cdf(-d1),
    }
}

/// Undiscounted `∂/∂(σ√T)` of [`black`].
fn black_sd_sensitivity(fwd: f64, strike: f64, total_sd: f64) -> f64 {
    let d1 = ((fwd / strike).ln() + 0.5 * total_sd * total_sd) / total_sd;
    fwd * normal_pdf(d1)
}

pub fn gk_price(spec: &VanillaSpec, inputs: &PricingInputs) -> Result<f64> {
    inputs.validate()?;
    let VanillaSpec { strike, maturity, kind, .. } = *spec;
    if !(strike > 0.0 && maturity > 0.0) {
        return Err(Error::Domain("strike and maturity must be positive".into()));
    }
    let fwd = forward(inputs.spot, inputs.domestic_rate, inputs.foreign_rate, maturity)?;
    let df = (-inputs.domestic_rate * maturity).exp();
    Ok(df * black(kind, fwd, strike, inputs.vol * maturity.sqrt()))
}

const LOWER_BRACKET: f64 = 1e-9;
const UPPER_BRACKET: f64 = 5.0;
const MAX_UPPER_BRACKET: f64 = 10.0;
const MAX_ITERATIONS: usize = 200;

/// Inverts [`gk_price`] for `σ̂`.
///
/// In-the-money prices are first mapped to the out-of-the-money option of
/// the other kind through put–call parity, so the solver only ever sees pure
/// time value. It then runs Newton on `ln(price)` inside a bisection
/// bracket.
pub fn implied_vol(spec: &VanillaSpec, market_price: f64, spot: f64, r_dom: f64, r_for: f64) -> Result<f64> {
    let VanillaSpec { strike, maturity, kind, .. } = *spec;
    if !(strike > 0.0 && maturity > 0.0) {
        return Err(Error::Domain("strike and maturity must be positive".into()));
    }
    if !market_price.is_finite() {
        return Err(Error::Domain(format!("market price {market_price} is not finite")));
    }
    let fwd = forward(spot, r_dom, r_for, maturity)?;
    let df = (-r_dom * maturity).exp();
    let lower = df * kind.intrinsic(fwd, strike);
    let upper = df * match kind {
        OptionKind::Call => fwd,
        OptionKind::Put => strike,
    };
    let band_error = |violation| Error::NoImpliedVol { violation, price: market_price, lower, upper };
    if market_price < lower {
        return Err(band_error(BandViolation::BelowIntrinsic));
    }
    if market_price >= upper {
        return Err(band_error(BandViolation::AboveCap));
    }
    if market_price == lower {
        return Ok(0.0);
    }

    // Out-of-the-money equivalent, undiscounted.
    let (otm_kind, target) = if lower > 0.0 {
        let other = match kind {
            OptionKind::Call => OptionKind::Put,
            OptionKind::Put => OptionKind::Call,
        };
        (other, (market_price - lower) / df)
    } else {
        (kind, market_price / df)
    };
    let sqrt_t = maturity.sqrt();
    let price_at = |sigma: f64| black(otm_kind, fwd, strike, sigma * sqrt_t);

    let (mut lo, mut hi) = (LOWER_BRACKET, UPPER_BRACKET);
    if price_at(lo) >= target {
        hi = lo;
        lo = 0.0;
    } else if price_at(hi) < target {
        hi = MAX_UPPER_BRACKET;
        let cap = price_at(hi);
        if cap < target {
            return Err(Error::NoImpliedVol {
                violation: BandViolation::AboveCap,
                price: market_price,
                lower,
                upper: lower + df * cap,
            });
        }
    }

    let log_target = target.ln();
    let moneyness = (fwd / strike).ln().abs();
    let mut sigma = if moneyness > 0.0 {
        (2.0 * moneyness / maturity).sqrt()
    } else {
        target / (0.4 * fwd * sqrt_t)
    };
    if !(sigma > lo && sigma < hi) {
        sigma = 0.5 * (lo + hi);
    }

    for _ in 0..MAX_ITERATIONS {
        let price = price_at(sigma);
        if price == target {
            return Ok(sigma);
        }
        if price > target {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let slope = black_sd_sensitivity(fwd, strike, sigma * sqrt_t) * sqrt_t;
        let mut next = if price > 0.0 && slope > 0.0 {
            sigma - (price.ln() - log_target) * price / slope
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - sigma).abs();
        sigma = next;
        if step <= 1e-14 * sigma || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(sigma);
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS })
}
