//! Market inputs: currencies, pairs, implied-vol term structures, rate curves
//! and the snapshot file that bundles them.
//!
//! Pairs are written denominating currency first: `EUR/USD` is the price of
//! one USD expressed in EUR. This is the opposite of the usual interbank
//! quote for some pairs, so snapshot authors must convert market tickers
//! before writing a file.
//!
//! Everything is stored under the canonical orientation (lexicographically
//! smaller code as the denominating currency). Queries in either orientation
//! are answered through [`FxPair::canonicalize`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for inverse-spot and inverse-vol consistency.
pub const INVERSE_TOLERANCE: f64 = 1e-10;

/// ISO-style three letter currency code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Currency([u8; 3]);

impl Currency {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(Error::Validation(format!(
                "currency code {code:?} must be exactly 3 uppercase ASCII letters"
            )));
        }
        Ok(Currency([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn code(&self) -> &str {
        // Constructed from ASCII only.
        std::str::from_utf8(&self.0).expect("ascii currency code")
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Currency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Currency::new(s)
    }
}

impl TryFrom<String> for Currency {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Currency::new(&s)
    }
}

impl From<Currency> for String {
    fn from(c: Currency) -> String {
        c.code().to_owned()
    }
}

/// `X_{i/j}`: the price of one unit of `foreign` (j) in `denominating` (i).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FxPair {
    pub denominating: Currency,
    pub foreign: Currency,
}

impl FxPair {
    pub fn new(denominating: Currency, foreign: Currency) -> Result<Self> {
        if denominating == foreign {
            return Err(Error::Validation(format!(
                "pair {denominating}/{foreign} uses the same currency twice"
            )));
        }
        Ok(FxPair { denominating, foreign })
    }

    pub fn inverse(&self) -> FxPair {
        FxPair { denominating: self.foreign, foreign: self.denominating }
    }

    /// Lexicographic orientation and whether `self` had to be flipped to
    /// reach it.
    pub fn canonicalize(&self) -> (FxPair, bool) {
        if self.denominating <= self.foreign {
            (*self, false)
        } else {
            (self.inverse(), true)
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.denominating < self.foreign
    }

    pub fn involves(&self, c: Currency) -> bool {
        self.denominating == c || self.foreign == c
    }

    /// True for the same pair in either orientation.
    pub fn same_currencies(&self, other: &FxPair) -> bool {
        self.canonicalize().0 == other.canonicalize().0
    }
}

impl fmt::Display for FxPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.denominating, self.foreign)
    }
}

impl FromStr for FxPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (d, f) = s.split_once('/').ok_or_else(|| {
            Error::Validation(format!("pair {s:?} must be written DENOMINATING/FOREIGN, e.g. EUR/USD"))
        })?;
        FxPair::new(Currency::new(d.trim())?, Currency::new(f.trim())?)
    }
}

impl TryFrom<String> for FxPair {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FxPair> for String {
    fn from(p: FxPair) -> String {
        p.to_string()
    }
}

/// A single implied-vol observation `σ̂(0, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolQuote {
    pub pair: FxPair,
    pub maturity: f64,
    pub implied_vol: f64,
}

impl VolQuote {
    pub fn new(pair: FxPair, maturity: f64, implied_vol: f64) -> Result<Self> {
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::Validation(format!("{pair}: maturity {maturity} must be > 0")));
        }
        if !(implied_vol.is_finite() && implied_vol >= 0.0) {
            return Err(Error::Validation(format!("{pair}: implied vol {implied_vol} must be >= 0")));
        }
        Ok(VolQuote { pair, maturity, implied_vol })
    }
}

/// Implied vols of one pair at strictly increasing maturities, free of
/// calendar arbitrage.
#[derive(Debug, Clone, PartialEq)]
pub struct VolTermStructure {
    pair: FxPair,
    points: Vec<(f64, f64)>,
}

impl VolTermStructure {
    pub fn new(pair: FxPair, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation(format!("{pair}: vol term structure has no points")));
        }
        let mut prev: Option<(f64, f64)> = None;
        for (n, &(t, sigma)) in points.iter().enumerate() {
            VolQuote::new(pair, t, sigma)?;
            if let Some((pt, psigma)) = prev {
                if t <= pt {
                    return Err(Error::Validation(format!(
                        "{pair}: maturities must be strictly increasing ({pt} then {t})"
                    )));
                }
                let (earlier, later) = (psigma * psigma * pt, sigma * sigma * t);
                if later < earlier {
                    return Err(Error::CalendarArbitrage { bucket: Some(n), t1: pt, t2: t, earlier, later });
                }
            }
            prev = Some((t, sigma));
        }
        Ok(VolTermStructure { pair, points })
    }

    /// Single-maturity structure.
    pub fn flat(pair: FxPair, maturity: f64, sigma: f64) -> Result<Self> {
        Self::new(pair, vec![(maturity, sigma)])
    }

    pub fn pair(&self) -> FxPair {
        self.pair
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn maturities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn last_maturity(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn quotes(&self) -> impl Iterator<Item = VolQuote> + '_ {
        self.points.iter().map(|&(maturity, implied_vol)| VolQuote { pair: self.pair, maturity, implied_vol })
    }

    fn relabel(mut self, pair: FxPair) -> Self {
        self.pair = pair;
        self
    }
}

/// Average continuously compounded rates `r̂(T)` of one currency.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    currency: Currency,
    points: Vec<(f64, f64)>,
}

impl RateCurve {
    pub fn new(currency: Currency, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation(format!("{currency}: rate curve has no points")));
        }
        for (n, &(t, r)) in points.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Validation(format!("{currency}: rate maturity {t} must be > 0")));
            }
            if !r.is_finite() {
                return Err(Error::Validation(format!("{currency}: rate {r} is not finite")));
            }
            if n > 0 && t <= points[n - 1].0 {
                return Err(Error::Validation(format!(
                    "{currency}: rate maturities must be strictly increasing ({} then {t})",
                    points[n - 1].0
                )));
            }
        }
        Ok(RateCurve { currency, points })
    }

    pub fn flat(currency: Currency, rate: f64) -> Self {
        RateCurve { currency, points: vec![(1.0, rate)] }
    }

    pub fn currency(&self) -> Currency {
        self.currency
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// `∫₀ᵀ r(t) dt = r̂(T)·T`, linear in `T` between quoted maturities and
    /// with `r̂` held flat outside them.
    pub fn integrated(&self, t: f64) -> f64 {
        let pts = &self.points;
        let (t0, r0) = pts[0];
        if t <= t0 {
            return r0 * t;
        }
        let (tn, rn) = pts[pts.len() - 1];
        if t >= tn {
            return rn * t;
        }
        let k = pts.partition_point(|p| p.0 <= t);
        let (ta, ra) = pts[k - 1];
        let (tb, rb) = pts[k];
        let (ia, ib) = (ra * ta, rb * tb);
        ia + (ib - ia) * (t - ta) / (tb - ta)
    }

    /// `r̂(T)`.
    pub fn average_rate(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.points[0].1;
        }
        if let Some(&(_, r)) = self.points.iter().find(|p| p.0 == t) {
            return r;
        }
        self.integrated(t) / t
    }
}

/// Immutable, validated market state.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    as_of: String,
    spots: BTreeMap<FxPair, f64>,
    vols: BTreeMap<FxPair, VolTermStructure>,
    rates: BTreeMap<Currency, RateCurve>,
}

impl MarketSnapshot {
    /// Builds a snapshot from already-canonical or mixed-orientation parts.
    pub fn new(
        as_of: impl Into<String>,
        spots: impl IntoIterator<Item = (FxPair, f64)>,
        vols: impl IntoIterator<Item = VolTermStructure>,
        rates: impl IntoIterator<Item = RateCurve>,
    ) -> Result<Self> {
        let mut snap = MarketSnapshot {
            as_of: as_of.into(),
            spots: BTreeMap::new(),
            vols: BTreeMap::new(),
            rates: BTreeMap::new(),
        };
        for (pair, value) in spots {
            snap.insert_spot(pair, value)?;
        }
        for ts in vols {
            snap.insert_vols(ts)?;
        }
        for curve in rates {
            let c = curve.currency();
            if snap.rates.insert(c, curve).is_some() {
                return Err(Error::Validation(format!("duplicate rate curve for {c}")));
            }
        }
        snap.validate()?;
        Ok(snap)
    }

    fn insert_spot(&mut self, pair: FxPair, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Validation(format!("spot {pair} = {value} must be positive")));
        }
        let (canon, flipped) = pair.canonicalize();
        let stored = if flipped { 1.0 / value } else { value };
        match self.spots.get(&canon) {
            None => {
                self.spots.insert(canon, stored);
            }
            Some(&existing) => {
                if (stored / existing - 1.0).abs() > INVERSE_TOLERANCE {
                    return Err(Error::Validation(format!(
                        "inverse spot check failed: {pair} = {value} inconsistent with {canon} = {existing}"
                    )));
                }
                // Keep the value quoted in canonical orientation.
                if !flipped {
                    self.spots.insert(canon, stored);
                }
            }
        }
        Ok(())
    }

    fn insert_vols(&mut self, ts: VolTermStructure) -> Result<()> {
        let (canon, flipped) = ts.pair().canonicalize();
        match self.vols.get(&canon) {
            None => {
                self.vols.insert(canon, ts.relabel(canon));
            }
            Some(existing) => {
                let same_grid = existing.points.len() == ts.points.len()
                    && existing.points.iter().zip(&ts.points).all(|(a, b)| {
                        a.0 == b.0 && (a.1 - b.1).abs() <= INVERSE_TOLERANCE
                    });
                if !same_grid {
                    return Err(Error::Validation(format!(
                        "inverse vol check failed: {} quoted inconsistently with {canon}",
                        ts.pair()
                    )));
                }
                if !flipped {
                    self.vols.insert(canon, ts.relabel(canon));
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let referenced: BTreeSet<Currency> = self
            .spots
            .keys()
            .chain(self.vols.keys())
            .flat_map(|p| [p.denominating, p.foreign])
            .collect();
        for c in referenced {
            if !self.rates.contains_key(&c) {
                return Err(Error::Validation(format!("currency {c} has no rate curve")));
            }
        }
        Ok(())
    }

    pub fn as_of(&self) -> &str {
        &self.as_of
    }

    /// Spot in the requested orientation.
    pub fn spot(&self, pair: FxPair) -> Option<f64> {
        let (canon, flipped) = pair.canonicalize();
        self.spots.get(&canon).map(|&x| if flipped { 1.0 / x } else { x })
    }

    /// Vol term structure for either orientation; vols are orientation
    /// invariant.
    pub fn vols(&self, pair: FxPair) -> Option<&VolTermStructure> {
        self.vols.get(&pair.canonicalize().0)
    }

    pub fn rate_curve(&self, currency: Currency) -> Option<&RateCurve> {
        self.rates.get(&currency)
    }

    pub fn spots(&self) -> impl Iterator<Item = (FxPair, f64)> + '_ {
        self.spots.iter().map(|(p, v)| (*p, *v))
    }

    pub fn vol_structures(&self) -> impl Iterator<Item = &VolTermStructure> {
        self.vols.values()
    }

    pub fn rate_curves(&self) -> impl Iterator<Item = &RateCurve> {
        self.rates.values()
    }

    pub fn currencies(&self) -> BTreeSet<Currency> {
        self.rates.keys().copied().collect()
    }

    pub fn to_document(&self) -> SnapshotDocument {
        SnapshotDocument {
            as_of: self.as_of.clone(),
            spots: self.spots.iter().map(|(p, v)| SpotEntry { pair: *p, value: *v }).collect(),
            vols: self
                .vols
                .values()
                .map(|ts| VolEntry {
                    pair: ts.pair,
                    points: ts.points.iter().map(|&(t, sigma)| VolPoint { t, sigma }).collect(),
                })
                .collect(),
            rates: self
                .rates
                .values()
                .map(|c| RateEntry {
                    currency: c.currency,
                    points: c.points.iter().map(|&(t, r)| RatePoint { t, r }).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("snapshot serializes")
    }
}

/// On-disk snapshot layout (JSON). Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotDocument {
    pub as_of: String,
    pub spots: Vec<SpotEntry>,
    pub vols: Vec<VolEntry>,
    pub rates: Vec<RateEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotEntry {
    pub pair: FxPair,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolEntry {
    pub pair: FxPair,
    pub points: Vec<VolPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolPoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub currency: Currency,
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// When set, spot triangles violating this relative tolerance fail the load.
    pub triangle_tolerance: Option<f64>,
}

pub fn load_snapshot(source: &str) -> Result<MarketSnapshot> {
    load_snapshot_with(source, LoadOptions::default())
}

pub fn load_snapshot_with(source: &str, options: LoadOptions) -> Result<MarketSnapshot> {
    let doc: SnapshotDocument = serde_json::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    let vols = doc
        .vols
        .into_iter()
        .map(|v| {
            VolTermStructure::new(v.pair, v.points.into_iter().map(|p| (p.t, p.sigma)).collect())
                .map_err(|e| Error::Entry { entry: format!("vols for {}", v.pair), source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let rates = doc
        .rates
        .into_iter()
        .map(|r| RateCurve::new(r.currency, r.points.into_iter().map(|p| (p.t, p.r)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let snapshot = MarketSnapshot::new(doc.as_of, doc.spots.into_iter().map(|s| (s.pair, s.value)), vols, rates)?;
    if let Some(tol) = options.triangle_tolerance {
        if let Some(v) = check_spot_triangles(&snapshot, tol).first() {
            return Err(Error::Validation(format!(
                "spot triangle {}/{}/{} violates no-arbitrage by {:e} (tolerance {tol:e})",
                v.currencies[0], v.currencies[1], v.currencies[2], v.magnitude
            )));
        }
    }
    Ok(snapshot)
}

pub fn load_snapshot_file(path: impl AsRef<Path>, options: LoadOptions) -> Result<MarketSnapshot> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    load_snapshot_with(&text, options)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    /// `(i, j, k)` in lexicographic order.
    pub currencies: [Currency; 3],
    pub magnitude: f64,
}

/// For every lexicographically ordered triple `i < j < k` whose three pairs
/// have spots, reports `|X_{j/k}·X_{i/j}/X_{i/k} − 1|` when it exceeds `tol`.
pub fn check_spot_triangles(snapshot: &MarketSnapshot, tol: f64) -> Vec<TriangleViolation> {
    let currencies: Vec<Currency> = snapshot
        .spots
        .keys()
        .flat_map(|p| [p.denominating, p.foreign])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let spot = |a: Currency, b: Currency| snapshot.spots.get(&FxPair { denominating: a, foreign: b }).copied();
    let mut out = Vec::new();
    for (a, &i) in currencies.iter().enumerate() {
        for (b, &j) in currencies.iter().enumerate().skip(a + 1) {
            for &k in currencies.iter().skip(b + 1) {
                let (Some(x_ij), Some(x_ik), Some(x_jk)) = (spot(i, j), spot(i, k), spot(j, k)) else {
                    continue;
                };
                let magnitude = (x_jk * x_ij / x_ik - 1.0).abs();
                if magnitude > tol {
                    out.push(TriangleViolation { currencies: [i, j, k], magnitude });
                }
            }
        }
    }
    out
}
