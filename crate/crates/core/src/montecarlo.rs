//! Correlated multi-FX lognormal simulation and Monte Carlo pricing of
//! vanilla, basket and two-pair barrier payoffs.
//!
//! Pairs are simulated in canonical orientation. Each step `(tₘ, tₘ₊₁]`
//! lies inside one vol bucket and one correlation bucket, so stepping is
//! exact: the log-increment of pair `i/j` is
//! `∫(rᵢ − rⱼ) − ½∫σ² + √(∫σ²)·(L z)`, with `L Lᵀ` the bucket's correlation
//! matrix.
//!
//! Path `p` draws its normals from a ChaCha stream keyed by `(seed, p)`, and
//! per-path results are reduced in index order, so results do not depend on
//! the number of worker threads.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_matrix, BucketedCorrelationMatrix, CorrOptions, PsdStatus, PSD_TOLERANCE};
use crate::error::{Error, Result};
use crate::market_data::{Currency, FxPair, MarketSnapshot, RateCurve};
use crate::term_structure::{bootstrap_piecewise_vol, total_variance, PiecewiseConstant, MIN_BUCKET_WIDTH};
use crate::vanilla::OptionKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Extra simulation times; vol and correlation breakpoints, barrier
    /// monitoring times and the maturity are always added.
    pub grid: Vec<f64>,
    pub antithetic: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        SimulationConfig { n_paths, seed, grid: Vec::new(), antithetic: false, workers: None }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Domain("n_paths must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Domain("workers must be positive".into()));
        }
        if self.grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierStyle {
    KnockIn,
    KnockOut,
}

/// Payoff description, also the on-disk payoff file (JSON, tagged by `type`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Vanilla {
        pair: FxPair,
        strike: f64,
        kind: OptionKind,
        maturity: f64,
    },
    Basket {
        weights: BTreeMap<FxPair, f64>,
        strike: f64,
        kind: OptionKind,
        maturity: f64,
    },
    Barrier {
        payoff_pair: FxPair,
        strike: f64,
        kind: OptionKind,
        barrier_pair: FxPair,
        barrier_level: f64,
        direction: BarrierDirection,
        style: BarrierStyle,
        /// Discrete monitoring times; empty means every simulation time.
        #[serde(default)]
        monitoring: Vec<f64>,
        maturity: f64,
    },
}

impl PayoffSpec {
    pub fn maturity(&self) -> f64 {
        match self {
            PayoffSpec::Vanilla { maturity, .. }
            | PayoffSpec::Basket { maturity, .. }
            | PayoffSpec::Barrier { maturity, .. } => *maturity,
        }
    }

    /// Pairs the payoff observes, in payoff orientation.
    pub fn pairs(&self) -> Vec<FxPair> {
        match self {
            PayoffSpec::Vanilla { pair, .. } => vec![*pair],
            PayoffSpec::Basket { weights, .. } => weights.keys().copied().collect(),
            PayoffSpec::Barrier { payoff_pair, barrier_pair, .. } => vec![*payoff_pair, *barrier_pair],
        }
    }

    /// Currency the payoff is paid and discounted in.
    pub fn settlement_currency(&self) -> Result<Currency> {
        match self {
            PayoffSpec::Vanilla { pair, .. } => Ok(pair.denominating),
            PayoffSpec::Barrier { payoff_pair, .. } => Ok(payoff_pair.denominating),
            PayoffSpec::Basket { weights, .. } => {
                let mut ccys = weights.keys().map(|p| p.denominating);
                let first = ccys.next().ok_or_else(|| Error::Domain("basket has no weights".into()))?;
                if let Some(other) = ccys.find(|&c| c != first) {
                    return Err(Error::CurrencyMismatch(format!(
                        "basket legs denominated in {first} and {other}; all legs must share one denominating currency"
                    )));
                }
                Ok(first)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let maturity = self.maturity();
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(Error::Domain(format!("maturity {maturity} must be positive")));
        }
        let strike = match self {
            PayoffSpec::Vanilla { strike, .. } | PayoffSpec::Basket { strike, .. } | PayoffSpec::Barrier { strike, .. } => *strike,
        };
        if !strike.is_finite() {
            return Err(Error::Domain(format!("strike {strike} is not finite")));
        }
        match self {
            PayoffSpec::Vanilla { .. } => {}
            PayoffSpec::Basket { weights, .. } => {
                if weights.is_empty() {
                    return Err(Error::Domain("basket weights must be non-empty".into()));
                }
                if weights.values().any(|w| !w.is_finite()) {
                    return Err(Error::Domain("basket weights must be finite".into()));
                }
                let legs: Vec<FxPair> = weights.keys().map(|p| p.canonicalize().0).collect();
                if legs.iter().collect::<BTreeSet<_>>().len() != legs.len() {
                    return Err(Error::Domain("basket lists the same pair twice".into()));
                }
            }
            PayoffSpec::Barrier { barrier_level, monitoring, .. } => {
                if !(barrier_level.is_finite() && *barrier_level > 0.0) {
                    return Err(Error::Domain(format!("barrier level {barrier_level} must be positive")));
                }
                if monitoring.iter().any(|&t| !(t > 0.0 && t <= maturity)) || monitoring.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain("monitoring times must be increasing within (0, maturity]".into()));
                }
            }
        }
        self.settlement_currency().map(|_| ())
    }
}

/// Everything the simulation needs, in canonical pair orientation.
#[derive(Debug, Clone)]
pub struct MarketModel {
    pairs: Vec<FxPair>,
    spots: Vec<f64>,
    vols: Vec<PiecewiseConstant>,
    rates: BTreeMap<Currency, RateCurve>,
    corr: BucketedCorrelationMatrix,
}

impl MarketModel {
    /// `pairs`, `spots` and `vols` are aligned; `corr.pairs` must list the
    /// same pairs (any order).
    pub fn new(
        pairs: Vec<FxPair>,
        spots: Vec<f64>,
        vols: Vec<PiecewiseConstant>,
        rates: impl IntoIterator<Item = RateCurve>,
        corr: BucketedCorrelationMatrix,
    ) -> Result<Self> {
        if pairs.is_empty() || spots.len() != pairs.len() || vols.len() != pairs.len() {
            return Err(Error::Domain("pairs, spots and vols must be non-empty and aligned".into()));
        }
        let rates: BTreeMap<Currency, RateCurve> = rates.into_iter().map(|c| (c.currency(), c)).collect();
        let mut canon_pairs = Vec::with_capacity(pairs.len());
        let mut canon_spots = Vec::with_capacity(pairs.len());
        for (p, s) in pairs.iter().zip(&spots) {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::Domain(format!("spot {p} = {s} must be positive")));
            }
            let (c, flipped) = p.canonicalize();
            if canon_pairs.contains(&c) {
                return Err(Error::Domain(format!("pair {c} listed twice")));
            }
            for ccy in [c.denominating, c.foreign] {
                if !rates.contains_key(&ccy) {
                    return Err(Error::MissingData(format!("no rate curve for {ccy}")));
                }
            }
            canon_pairs.push(c);
            canon_spots.push(if flipped { 1.0 / s } else { *s });
        }
        let corr_pairs: Vec<FxPair> = corr.pairs.iter().map(|p| p.canonicalize().0).collect();
        for p in &canon_pairs {
            if !corr_pairs.contains(p) {
                return Err(Error::MissingData(format!("no correlation entries for {p}")));
            }
        }
        Ok(MarketModel { pairs: canon_pairs, spots: canon_spots, vols, rates, corr })
    }

    /// Bootstrapped instantaneous vols for `pairs` and implied term
    /// correlations over `edges`.
    pub fn from_snapshot(snapshot: &MarketSnapshot, pairs: &[FxPair], edges: &[f64], options: CorrOptions) -> Result<Self> {
        let mut canon: Vec<FxPair> = pairs.iter().map(|p| p.canonicalize().0).collect();
        canon.sort();
        canon.dedup();
        let mut spots = Vec::with_capacity(canon.len());
        let mut vols = Vec::with_capacity(canon.len());
        for &p in &canon {
            spots.push(snapshot.spot(p).ok_or_else(|| Error::MissingData(format!("no spot for {p}")))?);
            let ts = snapshot
                .vols(p)
                .ok_or_else(|| Error::MissingVol { pair: p.to_string(), horizon: "any".into() })?;
            vols.push(bootstrap_piecewise_vol(ts)?);
        }
        let corr = if canon.len() == 1 {
            BucketedCorrelationMatrix::constant(canon.clone(), edges[edges.len() - 1], DMatrix::identity(1, 1))?
        } else {
            build_matrix(&canon, snapshot, edges, options)?
        };
        let rates = canon
            .iter()
            .flat_map(|p| [p.denominating, p.foreign])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|c| snapshot.rate_curve(c).cloned().ok_or_else(|| Error::MissingData(format!("no rate curve for {c}"))))
            .collect::<Result<Vec<_>>>()?;
        MarketModel::new(canon, spots, vols, rates, corr)
    }

    pub fn pairs(&self) -> &[FxPair] {
        &self.pairs
    }

    pub fn correlation(&self) -> &BucketedCorrelationMatrix {
        &self.corr
    }

    pub fn rate_curve(&self, c: Currency) -> Option<&RateCurve> {
        self.rates.get(&c)
    }

    fn index_of(&self, pair: FxPair) -> Result<(usize, bool)> {
        let (c, flipped) = pair.canonicalize();
        self.pairs
            .iter()
            .position(|p| *p == c)
            .map(|i| (i, flipped))
            .ok_or_else(|| Error::MissingData(format!("pair {pair} is not part of the model")))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.vols
            .iter()
            .flat_map(|v| v.breakpoints().iter().copied())
            .chain(self.corr.breakpoints())
            .collect()
    }
}

/// Factor `F` with `F Fᵀ = C`: Cholesky, or eigenvalue square root for
/// singular PSD matrices.
pub fn correlation_factor(c: &DMatrix<f64>, bucket: usize) -> Result<DMatrix<f64>> {
    if let Some(chol) = c.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < PSD_TOLERANCE {
        return Err(Error::Factorization { bucket, min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Precomputed stepping coefficients.
struct Stepper {
    times: Vec<f64>,
    drift: Vec<Vec<f64>>,
    sd: Vec<Vec<f64>>,
    factor_of_step: Vec<usize>,
    factors: Vec<DMatrix<f64>>,
    n_pairs: usize,
    seed: u64,
    antithetic: bool,
}

/// Words of generator output reserved per factor slot and path.
const SLOT_SHIFT: u32 = 48;

impl Stepper {
    /// `lead` is factorized first, so its shocks are exactly the slot-0
    /// normals whatever else the model holds.
    fn new(model: &MarketModel, times: Vec<f64>, config: &SimulationConfig, lead: usize) -> Result<Self> {
        let order: Vec<usize> = std::iter::once(lead).chain((0..model.pairs.len()).filter(|&p| p != lead)).collect();
        let factors = model
            .corr
            .buckets
            .iter()
            .enumerate()
            .map(|(n, b)| {
                if b.status == PsdStatus::Indefinite {
                    return Err(Error::Factorization { bucket: n, min_eigenvalue: b.min_eigenvalue });
                }
                let idx: Vec<usize> = order
                    .iter()
                    .map(|&p| {
                        let pair = model.pairs[p];
                        model.corr.pairs.iter().position(|q| q.canonicalize().0 == pair).expect("checked in MarketModel::new")
                    })
                    .collect();
                let full = b.to_dmatrix();
                let m = DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]);
                let l = correlation_factor(&m, n)?;
                // Back to model pair order; columns stay factor slots.
                let mut f = DMatrix::zeros(idx.len(), idx.len());
                for (r, &p) in order.iter().enumerate() {
                    f.set_row(p, &l.row(r));
                }
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;

        let n_pairs = model.pairs.len();
        let mut drift = Vec::with_capacity(times.len());
        let mut sd = Vec::with_capacity(times.len());
        let mut factor_of_step = Vec::with_capacity(times.len());
        let mut prev = 0.0;
        for &t in &times {
            let mid = 0.5 * (prev + t);
            factor_of_step.push(model.corr.bucket_index(mid));
            let mut d = Vec::with_capacity(n_pairs);
            let mut s = Vec::with_capacity(n_pairs);
            for (p, vol) in model.pairs.iter().zip(&model.vols) {
                let var = integrated_variance(vol, prev, t)?;
                let rate = |c: Currency| {
                    let curve = &model.rates[&c];
                    curve.integrated(t) - curve.integrated(prev)
                };
                d.push(rate(p.denominating) - rate(p.foreign) - 0.5 * var);
                s.push(var.sqrt());
            }
            drift.push(d);
            sd.push(s);
            prev = t;
        }
        Ok(Stepper { times, drift, sd, factor_of_step, factors, n_pairs, seed: config.seed, antithetic: config.antithetic })
    }

    /// Writes the log-increments of path `path` into `out` (step-major).
    fn fill(&self, path: usize, out: &mut [f64], z: &mut DVector<f64>) {
        let (stream, sign) = if self.antithetic { ((path / 2) as u64, if path.is_multiple_of(2) { 1.0 } else { -1.0 }) } else { (path as u64, 1.0) };
        // One substream per factor slot, so slot q sees the same normals
        // regardless of how many slots the model has.
        let mut rngs: Vec<ChaCha8Rng> = (0..self.n_pairs)
            .map(|q| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(stream);
                rng.set_word_pos((q as u128) << SLOT_SHIFT);
                rng
            })
            .collect();
        for m in 0..self.times.len() {
            for (v, rng) in z.iter_mut().zip(&mut rngs) {
                let draw: f64 = StandardNormal.sample(rng);
                *v = sign * draw;
            }
            let f = &self.factors[self.factor_of_step[m]];
            let row = &mut out[m * self.n_pairs..(m + 1) * self.n_pairs];
            for (p, y) in row.iter_mut().enumerate() {
                // Eigen-based factors are not triangular, so use the full row.
                let shock: f64 = (0..self.n_pairs).map(|q| f[(p, q)] * z[q]).sum();
                *y = self.drift[m][p] + self.sd[m][p] * shock;
            }
        }
    }
}

fn integrated_variance(vol: &PiecewiseConstant, t0: f64, t1: f64) -> Result<f64> {
    let upper = total_variance(vol, t1)?.value;
    let lower = if t0 > 0.0 { total_variance(vol, t0)?.value } else { 0.0 };
    Ok((upper - lower).max(0.0))
}

/// Sorted union of times in `(0, horizon]`, always ending at `horizon`.
fn merge_grid(horizon: f64, sources: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
    let mut times: Vec<f64> = sources.into_iter().filter(|&t| t > 0.0 && t < horizon).collect();
    times.push(horizon);
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.windows(2).any(|w| w[1] - w[0] < MIN_BUCKET_WIDTH) {
        return Err(Error::Domain("simulation grid has steps narrower than 1e-12".into()));
    }
    Ok(times)
}

/// Simulated log-increments, indexed `[path][step][pair]`.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub pairs: Vec<FxPair>,
    pub times: Vec<f64>,
    pub n_paths: usize,
    data: Vec<f64>,
}

impl PathSet {
    pub fn increment(&self, path: usize, step: usize, pair: usize) -> f64 {
        self.data[(path * self.times.len() + step) * self.pairs.len() + pair]
    }

    /// `Y(T)` of pair index `pair` on path `path`.
    pub fn terminal(&self, path: usize, pair: usize) -> f64 {
        (0..self.times.len()).map(|m| self.increment(path, m, pair)).sum()
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Domain(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

const CHUNK: usize = 1024;

/// Log-increments for every model pair on `config.grid` (plus model
/// breakpoints) up to the last grid time.
pub fn simulate_increments(model: &MarketModel, config: &SimulationConfig) -> Result<PathSet> {
    config.validate()?;
    let horizon = *config.grid.last().ok_or_else(|| Error::Domain("grid must not be empty".into()))?;
    let breakpoints = model.breakpoints();
    let missing: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < horizon && !config.grid.contains(&b))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Domain(format!("grid is missing vol/correlation breakpoints {missing:?}")));
    }
    let stepper = Stepper::new(model, config.grid.clone(), config, 0)?;
    let stride = stepper.times.len() * stepper.n_pairs;
    let mut data = vec![0.0; config.n_paths * stride];
    with_workers(config.workers, || {
        data.par_chunks_mut(stride * CHUNK).enumerate().for_each(|(chunk, block)| {
            let mut z = DVector::zeros(stepper.n_pairs);
            for (k, out) in block.chunks_mut(stride).enumerate() {
                stepper.fill(chunk * CHUNK + k, out, &mut z);
            }
        })
    })?;
    Ok(PathSet { pairs: model.pairs.clone(), times: stepper.times, n_paths: config.n_paths, data })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingResult {
    pub price: f64,
    pub standard_error: f64,
    /// Paths simulated (rounded up to even with antithetics).
    pub n_paths: usize,
    /// Independent samples behind the standard error.
    pub n_effective: usize,
    pub discount_currency: Currency,
    /// Average rate `r̂(T)` used for discounting.
    pub discount_rate: f64,
    pub maturity: f64,
}

/// Discounted per-sample payoffs (antithetic pairs already averaged).
#[derive(Debug, Clone)]
pub struct PayoffSamples {
    pub discounted: Vec<f64>,
    pub n_paths: usize,
    pub discount_currency: Currency,
    pub discount_rate: f64,
    pub maturity: f64,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

impl PayoffSamples {
    pub fn summarize(&self) -> PricingResult {
        let n = self.discounted.len();
        let mean = pairwise_sum(&self.discounted) / n as f64;
        let standard_error = if n > 1 {
            let dev: Vec<f64> = self.discounted.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        PricingResult {
            price: mean,
            standard_error,
            n_paths: self.n_paths,
            n_effective: n,
            discount_currency: self.discount_currency,
            discount_rate: self.discount_rate,
            maturity: self.maturity,
        }
    }
}

enum Evaluator {
    Vanilla { leg: (usize, bool), strike: f64, kind: OptionKind },
    Basket { legs: Vec<((usize, bool), f64)>, strike: f64, kind: OptionKind },
    Barrier {
        payoff: (usize, bool),
        strike: f64,
        kind: OptionKind,
        barrier: (usize, bool),
        level: f64,
        direction: BarrierDirection,
        style: BarrierStyle,
        monitor: Vec<bool>,
    },
}

/// Per-path discounted payoffs of `payoff` under `model`. The model may hold
/// more pairs than the payoff observes.
pub fn simulate_payoffs(payoff: &PayoffSpec, model: &MarketModel, config: &SimulationConfig) -> Result<PayoffSamples> {
    payoff.validate()?;
    config.validate()?;
    let maturity = payoff.maturity();
    let monitoring: &[f64] = match payoff {
        PayoffSpec::Barrier { monitoring, .. } => monitoring,
        _ => &[],
    };
    let times = merge_grid(
        maturity,
        config.grid.iter().copied().chain(monitoring.iter().copied()).chain(model.breakpoints()),
    )?;

    let evaluator = match payoff {
        PayoffSpec::Vanilla { pair, strike, kind, .. } => Evaluator::Vanilla { leg: model.index_of(*pair)?, strike: *strike, kind: *kind },
        PayoffSpec::Basket { weights, strike, kind, .. } => Evaluator::Basket {
            legs: weights.iter().map(|(p, w)| Ok((model.index_of(*p)?, *w))).collect::<Result<_>>()?,
            strike: *strike,
            kind: *kind,
        },
        PayoffSpec::Barrier { payoff_pair, strike, kind, barrier_pair, barrier_level, direction, style, .. } => Evaluator::Barrier {
            payoff: model.index_of(*payoff_pair)?,
            strike: *strike,
            kind: *kind,
            barrier: model.index_of(*barrier_pair)?,
            level: *barrier_level,
            direction: *direction,
            style: *style,
            monitor: times.iter().map(|t| monitoring.is_empty() || monitoring.contains(t)).collect(),
        },
    };

    let currency = payoff.settlement_currency()?;
    let curve = model
        .rate_curve(currency)
        .ok_or_else(|| Error::MissingData(format!("no rate curve for {currency}")))?;
    let discount_rate = curve.average_rate(maturity);
    let df = (-curve.integrated(maturity)).exp();

    let lead = match &evaluator {
        Evaluator::Vanilla { leg, .. } => leg.0,
        Evaluator::Basket { legs, .. } => legs[0].0 .0,
        Evaluator::Barrier { payoff, .. } => payoff.0,
    };
    let stepper = Stepper::new(model, times, config, lead)?;
    let n_paths = if config.antithetic { config.n_paths.div_ceil(2) * 2 } else { config.n_paths };
    let per_sample = if config.antithetic { 2 } else { 1 };
    let n_samples = n_paths / per_sample;
    let n_steps = stepper.times.len();
    let n_pairs = stepper.n_pairs;
    let log_spot: Vec<f64> = model.spots.iter().map(|s| s.ln()).collect();

    let path_value = |path: usize, buf: &mut [f64], level: &mut [f64], z: &mut DVector<f64>| -> f64 {
        stepper.fill(path, buf, z);
        level.copy_from_slice(&log_spot);
        let at = |level: &[f64], (i, flipped): (usize, bool)| if flipped { (-level[i]).exp() } else { level[i].exp() };
        let mut hit = false;
        for m in 0..n_steps {
            for (l, y) in level.iter_mut().zip(&buf[m * n_pairs..(m + 1) * n_pairs]) {
                *l += y;
            }
            if let Evaluator::Barrier { barrier, level: b, direction, monitor, .. } = &evaluator {
                if !hit && monitor[m] {
                    let x = at(level, *barrier);
                    hit = match direction {
                        BarrierDirection::Up => x >= *b,
                        BarrierDirection::Down => x <= *b,
                    };
                }
            }
        }
        let raw = match &evaluator {
            Evaluator::Vanilla { leg, strike, kind } => kind.intrinsic(at(level, *leg), *strike),
            Evaluator::Basket { legs, strike, kind } => {
                let basket: f64 = legs.iter().map(|(leg, w)| w * at(level, *leg)).sum();
                kind.intrinsic(basket, *strike)
            }
            Evaluator::Barrier { payoff, strike, kind, style, .. } => {
                let alive = match style {
                    BarrierStyle::KnockOut => !hit,
                    BarrierStyle::KnockIn => hit,
                };
                if alive {
                    kind.intrinsic(at(level, *payoff), *strike)
                } else {
                    0.0
                }
            }
        };
        df * raw
    };

    let mut discounted = vec![0.0; n_samples];
    with_workers(config.workers, || {
        discounted.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
            let mut buf = vec![0.0; n_steps * n_pairs];
            let mut level = vec![0.0; n_pairs];
            let mut z = DVector::zeros(n_pairs);
            for (k, slot) in out.iter_mut().enumerate() {
                let sample = chunk * CHUNK + k;
                *slot = if per_sample == 2 {
                    0.5 * (path_value(2 * sample, &mut buf, &mut level, &mut z)
                        + path_value(2 * sample + 1, &mut buf, &mut level, &mut z))
                } else {
                    path_value(sample, &mut buf, &mut level, &mut z)
                };
            }
        })
    })?;

    Ok(PayoffSamples { discounted, n_paths, discount_currency: currency, discount_rate, maturity })
}

pub fn price_with_model(payoff: &PayoffSpec, model: &MarketModel, config: &SimulationConfig) -> Result<PricingResult> {
    Ok(simulate_payoffs(payoff, model, config)?.summarize())
}

/// Edges for term correlations when pricing from a snapshot: every quoted
/// maturity below `maturity`, then `maturity`.
pub fn default_edges(snapshot: &MarketSnapshot, maturity: f64) -> Vec<f64> {
    let mut edges: Vec<f64> = snapshot
        .vol_structures()
        .flat_map(|ts| ts.maturities().collect::<Vec<_>>())
        .filter(|&t| t < maturity)
        .collect();
    edges.push(maturity);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// Prices `payoff` from a snapshot: bootstrapped vols, implied term
/// correlations on [`default_edges`], Monte Carlo expectation.
pub fn price(payoff: &PayoffSpec, snapshot: &MarketSnapshot, config: &SimulationConfig, options: CorrOptions) -> Result<PricingResult> {
    payoff.validate()?;
    let edges = default_edges(snapshot, payoff.maturity());
    let model = MarketModel::from_snapshot(snapshot, &payoff.pairs(), &edges, options)?;
    price_with_model(payoff, &model, config)
}
