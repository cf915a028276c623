//! Synthetic arbitrage-free FX worlds used as oracles.
//!
//! Each currency `c` carries an exposure vector `a_c` to `d` independent
//! Brownian drivers, so `Y_{i/j} = (a_j − a_i)·W(T)`. Covariances then follow
//! from dot products alone, without going through any vol formula.

#![allow(dead_code)]

use fxcorr::market_data::{Currency, FxPair, MarketSnapshot, RateCurve, VolTermStructure};
use rand::Rng;

pub const CODES: [&str; 6] = ["AUD", "CHF", "EUR", "GBP", "JPY", "USD"];

pub fn ccy(code: &str) -> Currency {
    Currency::new(code).unwrap()
}

pub fn pair(s: &str) -> FxPair {
    s.parse().unwrap()
}

/// Piecewise-constant exposures: `exposures[bucket][currency][driver]` over
/// buckets `(edges[n], edges[n+1]]` with `edges[0] = 0`.
#[derive(Debug, Clone)]
pub struct World {
    pub currencies: Vec<Currency>,
    pub edges: Vec<f64>,
    pub exposures: Vec<Vec<Vec<f64>>>,
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl World {
    pub fn constant(currencies: &[&str], exposures: Vec<Vec<f64>>, horizon: f64) -> Self {
        World { currencies: currencies.iter().map(|c| ccy(c)).collect(), edges: vec![0.0, horizon], exposures: vec![exposures] }
    }

    pub fn random(rng: &mut impl Rng, n_ccy: usize, drivers: usize, horizon: f64) -> Self {
        let exposures = (0..n_ccy)
            .map(|_| (0..drivers).map(|_| rng.random_range(-0.25..0.25)).collect())
            .collect();
        World {
            currencies: CODES[..n_ccy].iter().map(|c| ccy(c)).collect(),
            edges: vec![0.0, horizon],
            exposures: vec![exposures],
        }
    }

    fn idx(&self, c: Currency) -> usize {
        self.currencies.iter().position(|&x| x == c).unwrap()
    }

    /// Instantaneous exposure of `Y_p` in bucket `n`.
    pub fn loading(&self, n: usize, p: FxPair) -> Vec<f64> {
        let e = &self.exposures[n];
        diff(&e[self.idx(p.foreign)], &e[self.idx(p.denominating)])
    }

    /// `Cov(Y_a, Y_b)` over `(t1, t2]` (must align with edges).
    pub fn covariance(&self, a: FxPair, b: FxPair, t1: f64, t2: f64) -> f64 {
        let mut cov = 0.0;
        for n in 0..self.exposures.len() {
            let (s, e) = (self.edges[n].max(t1), self.edges[n + 1].min(t2));
            if e > s {
                cov += dot(&self.loading(n, a), &self.loading(n, b)) * (e - s);
            }
        }
        cov
    }

    pub fn correlation(&self, a: FxPair, b: FxPair, t1: f64, t2: f64) -> f64 {
        self.covariance(a, b, t1, t2) / (self.covariance(a, a, t1, t2) * self.covariance(b, b, t1, t2)).sqrt()
    }

    pub fn vol(&self, p: FxPair, t: f64) -> f64 {
        (self.covariance(p, p, 0.0, t) / t).sqrt()
    }

    pub fn all_pairs(&self) -> Vec<FxPair> {
        let mut out = Vec::new();
        for (n, &i) in self.currencies.iter().enumerate() {
            for &j in &self.currencies[n + 1..] {
                out.push(FxPair::new(i, j).unwrap());
            }
        }
        out
    }

    /// Snapshot quoting every pair at every edge, spots of 1 and flat rates.
    pub fn snapshot(&self) -> MarketSnapshot {
        let vols = self.all_pairs().into_iter().map(|p| {
            let points = self.edges[1..].iter().map(|&t| (t, self.vol(p, t))).collect();
            VolTermStructure::new(p, points).unwrap()
        });
        let spots: Vec<_> = self.all_pairs().into_iter().map(|p| (p, 1.0)).collect();
        let rates: Vec<_> = self.currencies.iter().map(|&c| RateCurve::flat(c, 0.0)).collect();
        MarketSnapshot::new("synthetic", spots, vols.collect::<Vec<_>>(), rates).unwrap()
    }
}

/// Minimal JSON snapshot text for a list of `(pair, [(T, sigma)])` quotes.
pub fn snapshot_json(spots: &[(&str, f64)], vols: &[(&str, &[(f64, f64)])], rates: &[(&str, f64)]) -> String {
    let spots: Vec<_> = spots.iter().map(|(p, v)| serde_json::json!({"pair": p, "value": v})).collect();
    let vols: Vec<_> = vols
        .iter()
        .map(|(p, pts)| {
            serde_json::json!({"pair": p, "points": pts.iter().map(|(t, s)| serde_json::json!({"T": t, "sigma": s})).collect::<Vec<_>>()})
        })
        .collect();
    let rates: Vec<_> = rates.iter().map(|(c, r)| serde_json::json!({"currency": c, "points": [{"T": 1.0, "r": r}]})).collect();
    serde_json::to_string_pretty(&serde_json::json!({"as_of": "fixture", "spots": spots, "vols": vols, "rates": rates})).unwrap()
}
