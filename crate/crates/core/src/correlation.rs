//! Implied correlations between FX log-increments from implied vols.
//!
//! With `Yᵢ/ⱼ = ln Xᵢ/ⱼ(T) − ln Xᵢ/ⱼ(0)` and the no-arbitrage identity
//! `Xⱼ/ₖ = Xᵢ/ₖ / Xᵢ/ⱼ`, every covariance between log-increments is a
//! signed combination of pair variances:
//!
//! * shared denominating currency (triangle):
//!   `ρ(i/k, i/j) = (σ²ᵢ/ₖ + σ²ᵢ/ⱼ − σ²ⱼ/ₖ) / (2 σᵢ/ₖ σᵢ/ⱼ)`
//! * four distinct currencies (cross):
//!   `ρ(i/j, m/k) = (σ²ᵢ/ₖ + σ²ₘ/ⱼ − σ²ⱼ/ₖ − σ²ᵢ/ₘ) / (2 σᵢ/ⱼ σₘ/ₖ)`
//!
//! The same identities hold for forward vols over a bucket, which is how
//! term correlations are built.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{Currency, FxPair, MarketSnapshot};
use crate::term_structure::{forward_vol_between, implied_vol_at, PiecewiseConstant};

/// Values in `(1, 1 + RANGE_HEADROOM]` are snapped to 1 without a warning.
pub const RANGE_HEADROOM: f64 = 1e-12;
/// Minimum eigenvalue at or above this counts as positive semidefinite.
pub const PSD_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorrOptions {
    /// Clamp out-of-range results to ±1 instead of failing.
    pub clamp: bool,
    /// Repair indefinite bucket matrices by eigenvalue clipping.
    pub repair: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrValue {
    pub value: f64,
    /// Formula output before any snapping or clamping.
    pub raw: f64,
    pub clamped: bool,
}

fn finish(raw: f64, clamp: bool, describe: impl FnOnce() -> String) -> Result<CorrValue> {
    if raw.is_nan() {
        return Err(Error::UndefinedCorrelation(describe()));
    }
    if raw.abs() <= 1.0 {
        return Ok(CorrValue { value: raw, raw, clamped: false });
    }
    if raw.abs() <= 1.0 + RANGE_HEADROOM {
        return Ok(CorrValue { value: raw.signum(), raw, clamped: false });
    }
    if clamp {
        return Ok(CorrValue { value: raw.signum(), raw, clamped: true });
    }
    Err(Error::CorrelationOutOfRange { value: raw, bucket: None, inputs: describe() })
}

fn check_vols(named: &[(&str, f64)], positive: usize) -> Result<()> {
    for (n, &(name, v)) in named.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("vol {name} = {v} must be finite and non-negative")));
        }
        if n < positive && v == 0.0 {
            return Err(Error::UndefinedCorrelation(format!("vol {name} is zero")));
        }
    }
    Ok(())
}

/// `ρ̂ᵢ/ₖ,ᵢ/ⱼ` from the three vols of a currency triangle.
pub fn triangle_corr(vol_ik: f64, vol_ij: f64, vol_jk: f64, clamp: bool) -> Result<CorrValue> {
    check_vols(&[("i/k", vol_ik), ("i/j", vol_ij), ("j/k", vol_jk)], 2)?;
    let raw = (vol_ik * vol_ik + vol_ij * vol_ij - vol_jk * vol_jk) / (2.0 * vol_ik * vol_ij);
    finish(raw, clamp, || format!("triangle vols i/k={vol_ik}, i/j={vol_ij}, j/k={vol_jk}"))
}

/// `ρ̂ᵢ/ⱼ,ₘ/ₖ` for pairs with different denominating currencies.
pub fn cross_corr(
    vol_ij: f64,
    vol_mk: f64,
    vol_ik: f64,
    vol_mj: f64,
    vol_jk: f64,
    vol_im: f64,
    clamp: bool,
) -> Result<CorrValue> {
    check_vols(
        &[("i/j", vol_ij), ("m/k", vol_mk), ("i/k", vol_ik), ("m/j", vol_mj), ("j/k", vol_jk), ("i/m", vol_im)],
        2,
    )?;
    let numerator = vol_ik * vol_ik + vol_mj * vol_mj - vol_jk * vol_jk - vol_im * vol_im;
    let raw = numerator / (2.0 * vol_ij * vol_mk);
    finish(raw, clamp, || {
        format!(
            "cross vols i/j={vol_ij}, m/k={vol_mk}, i/k={vol_ik}, m/j={vol_mj}, j/k={vol_jk}, i/m={vol_im}"
        )
    })
}

/// Time window a correlation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `(0, T]`.
    Total(f64),
    /// `(T₁, T₂]`.
    Bucket(f64, f64),
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Horizon::Total(t) => write!(f, "(0, {t}]"),
            Horizon::Bucket(a, b) => write!(f, "({a}, {b}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrQuery {
    pub pair_a: FxPair,
    pub pair_b: FxPair,
    pub horizon: Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Triangle,
    Cross,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolInput {
    /// Position in the formula, e.g. `i/k`.
    pub role: &'static str,
    pub pair: FxPair,
    pub vol: f64,
    pub extrapolated: bool,
}

/// Everything needed to recompute a correlation by hand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub formula: Formula,
    pub horizon: Horizon,
    /// Pairs the formula was evaluated on, in formula orientation.
    pub formula_pairs: [FxPair; 2],
    pub inputs: Vec<VolInput>,
    /// +1 or −1: maps the formula's orientation onto the query's.
    pub orientation_sign: f64,
    pub raw: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpliedCorrelation {
    pub value: f64,
    pub degenerate: bool,
    pub clamped: bool,
    pub provenance: Provenance,
}

fn lookup_vol(snapshot: &MarketSnapshot, pair: FxPair, horizon: Horizon) -> Result<(f64, bool)> {
    let ts = snapshot
        .vols(pair)
        .ok_or_else(|| Error::MissingVol { pair: pair.to_string(), horizon: horizon.to_string() })?;
    let v = match horizon {
        Horizon::Total(t) => implied_vol_at(ts, t)?,
        Horizon::Bucket(t1, t2) => forward_vol_between(ts, t1, t2)?,
    };
    Ok((v.value, v.extrapolated))
}

fn pair(d: Currency, f: Currency) -> FxPair {
    FxPair { denominating: d, foreign: f }
}

/// Pair re-oriented so that `c` is the denominating currency, with the sign
/// that maps its log-increment back.
fn denominated_in(p: FxPair, c: Currency) -> (FxPair, f64) {
    if p.denominating == c {
        (p, 1.0)
    } else {
        (p.inverse(), -1.0)
    }
}

/// Correlation between the log-increments of `query.pair_a` and
/// `query.pair_b`, in the orientation given.
pub fn implied_corr(query: &CorrQuery, snapshot: &MarketSnapshot, options: CorrOptions) -> Result<ImpliedCorrelation> {
    let CorrQuery { pair_a, pair_b, horizon } = *query;
    match horizon {
        Horizon::Total(t) if t.is_nan() || t <= 0.0 => return Err(Error::Domain(format!("horizon {t} must be positive"))),
        Horizon::Bucket(a, b) if !(a >= 0.0 && b > a) => {
            return Err(Error::Domain(format!("bucket ({a}, {b}] is empty")))
        }
        _ => {}
    }
    let get = |role: &'static str, p: FxPair| -> Result<VolInput> {
        let (vol, extrapolated) = lookup_vol(snapshot, p, horizon)?;
        Ok(VolInput { role, pair: p, vol, extrapolated })
    };

    if pair_a.same_currencies(&pair_b) {
        let sign = if pair_a == pair_b { 1.0 } else { -1.0 };
        let input = get("a", pair_a)?;
        return Ok(ImpliedCorrelation {
            value: sign,
            degenerate: true,
            clamped: false,
            provenance: Provenance {
                formula: Formula::Degenerate,
                horizon,
                formula_pairs: [pair_a, pair_b],
                inputs: vec![input],
                orientation_sign: sign,
                raw: sign,
                clamped: false,
            },
        });
    }

    let shared = [pair_a.denominating, pair_a.foreign].into_iter().find(|&c| pair_b.involves(c));
    let (formula_pairs, sign, inputs, corr) = if let Some(c) = shared {
        let (a, sa) = denominated_in(pair_a, c);
        let (b, sb) = denominated_in(pair_b, c);
        // Order the two legs so the evaluation is independent of query order.
        let (j, k) = if a.foreign <= b.foreign { (a.foreign, b.foreign) } else { (b.foreign, a.foreign) };
        let ik = get("i/k", pair(c, k))?;
        let ij = get("i/j", pair(c, j))?;
        let jk = get("j/k", pair(j, k))?;
        let corr = triangle_corr(ik.vol, ij.vol, jk.vol, options.clamp)?;
        ([pair(c, k), pair(c, j)], sa * sb, vec![ik, ij, jk], corr)
    } else {
        let (ca, sa) = pair_a.canonicalize();
        let (cb, sb) = pair_b.canonicalize();
        let (first, second) = if ca <= cb { (ca, cb) } else { (cb, ca) };
        let (i, j) = (first.denominating, first.foreign);
        let (m, k) = (second.denominating, second.foreign);
        let ij = get("i/j", first)?;
        let mk = get("m/k", second)?;
        let ik = get("i/k", pair(i, k))?;
        let mj = get("m/j", pair(m, j))?;
        let jk = get("j/k", pair(j, k))?;
        let im = get("i/m", pair(i, m))?;
        let corr = cross_corr(ij.vol, mk.vol, ik.vol, mj.vol, jk.vol, im.vol, options.clamp)?;
        let sign = if sa == sb { 1.0 } else { -1.0 };
        ([first, second], sign, vec![ij, mk, ik, mj, jk, im], corr)
    };

    Ok(ImpliedCorrelation {
        value: sign * corr.value,
        degenerate: false,
        clamped: corr.clamped,
        provenance: Provenance {
            formula: if shared.is_some() { Formula::Triangle } else { Formula::Cross },
            horizon,
            formula_pairs,
            inputs,
            orientation_sign: sign,
            raw: corr.raw,
            clamped: corr.clamped,
        },
    })
}

/// Bucket edges starting at zero.
pub fn normalize_breakpoints(edges: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(edges.len() + 1);
    if edges.first() != Some(&0.0) {
        out.push(0.0);
    }
    out.extend_from_slice(edges);
    if out.len() < 2 {
        return Err(Error::Domain("at least one bucket edge after 0 is required".into()));
    }
    if out.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) || out.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("bucket edges {edges:?} must be finite and strictly increasing")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermCorrelation {
    pub curve: PiecewiseConstant,
    pub buckets: Vec<ImpliedCorrelation>,
}

/// Per-bucket implied correlations from forward vols.
pub fn term_corr(
    pair_a: FxPair,
    pair_b: FxPair,
    snapshot: &MarketSnapshot,
    edges: &[f64],
    options: CorrOptions,
) -> Result<TermCorrelation> {
    let breakpoints = normalize_breakpoints(edges)?;
    let buckets = breakpoints
        .windows(2)
        .enumerate()
        .map(|(n, w)| {
            let query = CorrQuery { pair_a, pair_b, horizon: Horizon::Bucket(w[0], w[1]) };
            implied_corr(&query, snapshot, options).map_err(|e| e.in_bucket(n))
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = PiecewiseConstant::new(breakpoints, buckets.iter().map(|c| c.value).collect())?;
    Ok(TermCorrelation { curve, buckets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdStatus {
    PositiveSemidefinite,
    Repaired,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationBucket {
    pub start: f64,
    pub end: f64,
    /// Row-major, symmetric, unit diagonal.
    pub matrix: Vec<Vec<f64>>,
    pub status: PsdStatus,
    /// Minimum eigenvalue of `matrix` as stored.
    pub min_eigenvalue: f64,
    /// Before repair, when a repair took place.
    pub original_min_eigenvalue: Option<f64>,
    /// Frobenius norm of the change made by the repair.
    pub repair_distance: Option<f64>,
}

impl CorrelationBucket {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.matrix.len();
        DMatrix::from_fn(n, n, |r, c| self.matrix[r][c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketedCorrelationMatrix {
    pub pairs: Vec<FxPair>,
    pub buckets: Vec<CorrelationBucket>,
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigenvalue clipping at zero followed by one rescaling back to unit
/// diagonal. Returns the repaired matrix and the Frobenius distance moved.
pub fn repair_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let mut a = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let scale: Vec<f64> = (0..n).map(|i| a[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] /= scale[r] * scale[c];
        }
    }
    for r in 0..n {
        a[(r, r)] = 1.0;
        for c in (r + 1)..n {
            let v = (0.5 * (a[(r, c)] + a[(c, r)])).clamp(-1.0, 1.0);
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
    }
    let distance = (&a - m).norm();
    (a, distance)
}

fn bucket_from_matrix(start: f64, end: f64, m: DMatrix<f64>, repair: bool) -> CorrelationBucket {
    let min_eig = min_eigenvalue(&m);
    let to_rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
    if min_eig >= PSD_TOLERANCE {
        CorrelationBucket {
            start,
            end,
            matrix: to_rows(&m),
            status: PsdStatus::PositiveSemidefinite,
            min_eigenvalue: min_eig,
            original_min_eigenvalue: None,
            repair_distance: None,
        }
    } else if repair {
        let (fixed, distance) = repair_psd(&m);
        CorrelationBucket {
            start,
            end,
            min_eigenvalue: min_eigenvalue(&fixed),
            matrix: to_rows(&fixed),
            status: PsdStatus::Repaired,
            original_min_eigenvalue: Some(min_eig),
            repair_distance: Some(distance),
        }
    } else {
        CorrelationBucket {
            start,
            end,
            matrix: to_rows(&m),
            status: PsdStatus::Indefinite,
            min_eigenvalue: min_eig,
            original_min_eigenvalue: None,
            repair_distance: None,
        }
    }
}

impl BucketedCorrelationMatrix {
    /// Builds from explicit per-bucket matrices over `edges`.
    pub fn from_matrices(pairs: Vec<FxPair>, edges: &[f64], matrices: Vec<DMatrix<f64>>, repair: bool) -> Result<Self> {
        let breakpoints = normalize_breakpoints(edges)?;
        if matrices.len() + 1 != breakpoints.len() {
            return Err(Error::Domain(format!("{} buckets need {} matrices", breakpoints.len() - 1, matrices.len())));
        }
        let n = pairs.len();
        let signs: Vec<f64> = pairs.iter().map(|p| if p.canonicalize().1 { -1.0 } else { 1.0 }).collect();
        let pairs: Vec<FxPair> = pairs.iter().map(|p| p.canonicalize().0).collect();
        for (k, p) in pairs.iter().enumerate() {
            if pairs[..k].contains(p) {
                return Err(Error::Domain(format!("pair {p} listed twice")));
            }
        }
        let mut buckets = Vec::with_capacity(matrices.len());
        for (w, mut m) in breakpoints.windows(2).zip(matrices) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Domain(format!("matrix must be {n}x{n}")));
            }
            for r in 0..n {
                if m[(r, r)] != 1.0 {
                    return Err(Error::Domain("correlation matrix diagonal must be exactly 1".into()));
                }
                for c in 0..n {
                    let v = m[(r, c)];
                    if !(-1.0..=1.0).contains(&v) || (v - m[(c, r)]).abs() > 1e-14 {
                        return Err(Error::Domain(format!("entry ({r}, {c}) = {v} invalid or asymmetric")));
                    }
                }
            }
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] *= signs[r] * signs[c];
                }
            }
            buckets.push(bucket_from_matrix(w[0], w[1], m, repair));
        }
        Ok(BucketedCorrelationMatrix { pairs, buckets })
    }

    /// One bucket `(0, horizon]` with a constant matrix.
    pub fn constant(pairs: Vec<FxPair>, horizon: f64, matrix: DMatrix<f64>) -> Result<Self> {
        Self::from_matrices(pairs, &[horizon], vec![matrix], false)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.buckets.iter().map(|b| b.end)).collect()
    }

    /// Bucket holding `t` in `(start, end]`; flat outside.
    pub fn bucket_index(&self, t: f64) -> usize {
        self.buckets.iter().position(|b| t <= b.end).unwrap_or(self.buckets.len() - 1)
    }

    pub fn index_of(&self, pair: FxPair) -> Option<usize> {
        self.pairs.iter().position(|p| *p == pair)
    }
}

/// Pairwise term correlations for `pairs` (stored canonically), one matrix
/// per bucket, with PSD classification and optional repair.
pub fn build_matrix(
    pairs: &[FxPair],
    snapshot: &MarketSnapshot,
    edges: &[f64],
    options: CorrOptions,
) -> Result<BucketedCorrelationMatrix> {
    if pairs.len() < 2 {
        return Err(Error::Domain("a correlation matrix needs at least two pairs".into()));
    }
    let canonical: Vec<FxPair> = pairs.iter().map(|p| p.canonicalize().0).collect();
    for (n, p) in canonical.iter().enumerate() {
        if canonical[..n].contains(p) {
            return Err(Error::Domain(format!("pair {p} listed twice")));
        }
    }
    let breakpoints = normalize_breakpoints(edges)?;
    let size = canonical.len();
    let mut matrices: Vec<DMatrix<f64>> = (0..breakpoints.len() - 1).map(|_| DMatrix::identity(size, size)).collect();
    for r in 0..size {
        for c in (r + 1)..size {
            let term = term_corr(canonical[r], canonical[c], snapshot, &breakpoints, options).map_err(|e| Error::Entry {
                entry: format!("matrix entry ({}, {})", canonical[r], canonical[c]),
                source: Box::new(e),
            })?;
            for (m, &v) in matrices.iter_mut().zip(term.curve.values()) {
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
    }
    let buckets = breakpoints
        .windows(2)
        .zip(matrices)
        .map(|(w, m)| bucket_from_matrix(w[0], w[1], m, options.repair))
        .collect();
    Ok(BucketedCorrelationMatrix { pairs: canonical, buckets })
}
