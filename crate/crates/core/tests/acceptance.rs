//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines appear in
//! order and are never captured.

mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{ccy, pair, World};
use fxcorr::correlation::{
    build_matrix, cross_corr, implied_corr, term_corr, triangle_corr, CorrOptions, CorrQuery, Horizon,
    BucketedCorrelationMatrix, PsdStatus,
};
use fxcorr::error::{Error, ErrorClass};
use fxcorr::market_data::{load_snapshot, load_snapshot_file, FxPair, LoadOptions, RateCurve, VolTermStructure};
use fxcorr::montecarlo::{
    price, simulate_payoffs, BarrierDirection, BarrierStyle, MarketModel, PayoffSpec, SimulationConfig,
};
use fxcorr::term_structure::{bootstrap_piecewise_vol, forward_vol, integrated_correlation, total_variance, PiecewiseConstant};
use fxcorr::vanilla::{forward, gk_price, implied_vol, OptionKind, PricingInputs, VanillaSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn no_options() -> CorrOptions {
    CorrOptions::default()
}

// 1. Triangle formula against covariance algebra.
fn triangle_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_dispatch) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let world = World::random(&mut rng, 3, 3, 1.0);
        let [i, j, k] = [world.currencies[0], world.currencies[1], world.currencies[2]];
        let (ik, ij, jk) = (FxPair::new(i, k).unwrap(), FxPair::new(i, j).unwrap(), FxPair::new(j, k).unwrap());
        let analytic = world.correlation(ik, ij, 0.0, 1.0);
        let got = triangle_corr(world.vol(ik, 1.0), world.vol(ij, 1.0), world.vol(jk, 1.0), false).unwrap().value;
        worst = worst.max((got - analytic).abs());

        // Same thing through dispatch, with a random orientation.
        let (a, b) = if rng.random_bool(0.5) { (ik, ij.inverse()) } else { (ik.inverse(), ij) };
        let query = CorrQuery { pair_a: a, pair_b: b, horizon: Horizon::Total(1.0) };
        let got = implied_corr(&query, &world.snapshot(), no_options()).unwrap().value;
        worst_dispatch = worst_dispatch.max((got + analytic).abs());
    }
    let m = worst.max(worst_dispatch);
    outcome(m <= 1e-12, format!("1000 worlds, max |Δ| = {worst:.2e} (formula), {worst_dispatch:.2e} (dispatch); tol 1e-12"))
}

// 2. Cross formula, plus the m = i reduction.
fn cross_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let world = World::random(&mut rng, 4, 3, 1.0);
        let c = &world.currencies;
        let (i, j, m, k) = (c[0], c[1], c[2], c[3]);
        let p = |a, b| FxPair::new(a, b).unwrap();
        let v = |a, b| world.vol(p(a, b), 1.0);
        let analytic = world.correlation(p(i, j), p(m, k), 0.0, 1.0);
        let got = cross_corr(v(i, j), v(m, k), v(i, k), v(m, j), v(j, k), v(i, m), false).unwrap().value;
        worst = worst.max((got - analytic).abs());
    }
    let mut worst_reduction = 0.0f64;
    for _ in 0..10_000 {
        let (ik, ij): (f64, f64) = (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
        let jk = rng.random_range((ik - ij).abs()..(ik + ij));
        let t = triangle_corr(ik, ij, jk, true).unwrap().value;
        let x = cross_corr(ij, ik, ik, ij, jk, 0.0, true).unwrap().value;
        worst_reduction = worst_reduction.max((t - x).abs());
    }
    outcome(
        worst <= 1e-12 && worst_reduction <= 1e-15,
        format!("1000 worlds, max |Δ| = {worst:.2e} (tol 1e-12); reduction on 10000 triples max |Δ| = {worst_reduction:.2e} (tol 1e-15)"),
    )
}

fn sample_stats(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    (saa / (n - 1.0), sbb / (n - 1.0), sab / (saa * sbb).sqrt())
}

// 3. Formulas against brute-force sampling.
fn sampling_oracle() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Triangle: Y_ik, Y_ij bivariate normal, Y_jk = Y_ik − Y_ij.
    let (rho, s_ik, s_ij) = (0.3, 0.10, 0.15);
    let mut y_ik = Vec::with_capacity(N);
    let mut y_ij = Vec::with_capacity(N);
    let mut y_jk = Vec::with_capacity(N);
    for _ in 0..N {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let a = -0.5 * s_ik * s_ik + s_ik * z1;
        let b = -0.5 * s_ij * s_ij + s_ij * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
        y_ik.push(a);
        y_ij.push(b);
        y_jk.push(a - b);
    }
    let (_, var_jk, _) = sample_stats(&y_jk, &y_jk);
    let (_, _, sample_rho) = sample_stats(&y_ik, &y_ij);
    let true_jk2 = s_ik * s_ik + s_ij * s_ij - 2.0 * rho * s_ik * s_ij;
    let from_sampled_vol = triangle_corr(s_ik, s_ij, var_jk.sqrt(), false).unwrap().value;
    let se_delta = true_jk2 * (2.0 / N as f64).sqrt() / (2.0 * s_ik * s_ij);
    let z_tri_vol = (from_sampled_vol - rho) / se_delta;
    let from_true_vols = triangle_corr(s_ik, s_ij, true_jk2.sqrt(), false).unwrap().value;
    let se_corr = (1.0 - rho * rho) / (N as f64).sqrt();
    let z_tri_corr = (from_true_vols - sample_rho) / se_corr;

    // Cross: four currencies on three drivers.
    let world = World::constant(
        &["EUR", "GBP", "JPY", "USD"],
        vec![vec![0.0, 0.0, 0.0], vec![0.07, 0.01, -0.04], vec![-0.06, 0.08, 0.02], vec![0.02, -0.05, 0.03]],
        1.0,
    );
    let (ij, mk) = (pair("EUR/GBP"), pair("JPY/USD"));
    let v = |s: &str| world.vol(pair(s), 1.0);
    let formula = cross_corr(v("EUR/GBP"), v("JPY/USD"), v("EUR/USD"), v("JPY/GBP"), v("GBP/USD"), v("EUR/JPY"), false)
        .unwrap()
        .value;
    let (la, lb) = (world.loading(0, ij), world.loading(0, mk));
    let mut ya = Vec::with_capacity(N);
    let mut yb = Vec::with_capacity(N);
    for _ in 0..N {
        let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        ya.push(la.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>());
        yb.push(lb.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>());
    }
    let (_, _, sample_cross) = sample_stats(&ya, &yb);
    let z_cross = (formula - sample_cross) / ((1.0 - formula * formula) / (N as f64).sqrt());

    let worst = z_tri_vol.abs().max(z_tri_corr.abs()).max(z_cross.abs());
    outcome(
        worst <= 4.0,
        format!(
            "n=1e6; triangle from sampled σjk {from_sampled_vol:.5} vs 0.3 ({z_tri_vol:+.2} SE), formula vs sample corr {sample_rho:.5} ({z_tri_corr:+.2} SE); cross {formula:.5} vs sample {sample_cross:.5} ({z_cross:+.2} SE); tol 4 SE"
        ),
    )
}

// 4. Implied-vol round trip and put–call parity.
fn implied_vol_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = pair("EUR/USD");
    let (mut worst_vol, mut worst_parity) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..10_000 {
        let sigma = rng.random_range(0.01..1.0);
        let t = rng.random_range(0.02..5.0);
        let spot = rng.random_range(0.5..2.0);
        let (r_dom, r_for) = (rng.random_range(-0.02..0.1), rng.random_range(-0.02..0.1));
        // Strike within ±3 standard deviations of the forward.
        let fwd = forward(spot, r_dom, r_for, t).unwrap();
        let strike = fwd * (rng.random_range(-3.0..3.0) * sigma * t.sqrt()).exp();
        let kind = if rng.random_bool(0.5) { OptionKind::Call } else { OptionKind::Put };
        let inputs = PricingInputs::new(spot, r_dom, r_for, sigma).unwrap();
        let spec = VanillaSpec::new(p, strike, t, kind).unwrap();
        let price = gk_price(&spec, &inputs).unwrap();
        match implied_vol(&spec, price, spot, r_dom, r_for) {
            Ok(v) => worst_vol = worst_vol.max((v - sigma).abs()),
            Err(_) => failures += 1,
        }
        let call = gk_price(&VanillaSpec::new(p, strike, t, OptionKind::Call).unwrap(), &inputs).unwrap();
        let put = gk_price(&VanillaSpec::new(p, strike, t, OptionKind::Put).unwrap(), &inputs).unwrap();
        let parity = call - put - (-r_dom * t).exp() * (fwd - strike);
        worst_parity = worst_parity.max(parity.abs());
    }
    outcome(
        failures == 0 && worst_vol <= 1e-10 && worst_parity <= 1e-12,
        format!("10000 draws, max |Δσ| = {worst_vol:.2e} (tol 1e-10), {failures} inversion failures; max parity gap {worst_parity:.2e} (tol 1e-12)"),
    )
}

// 5. Bootstrap reconstructs total variance; calendar violations are errors.
fn bootstrap_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = pair("EUR/USD");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let (mut t, mut var) = (0.0, 0.0);
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let dt = rng.random_range(0.01..2.0);
            let fwd_vol: f64 = rng.random_range(0.01..0.6);
            t += dt;
            var += fwd_vol * fwd_vol * dt;
            points.push((t, (var / t).sqrt()));
        }
        let ts = VolTermStructure::new(p, points.clone()).unwrap();
        let pc = bootstrap_piecewise_vol(&ts).unwrap();
        for (t, sigma) in points {
            let rebuilt = total_variance(&pc, t).unwrap().value;
            worst = worst.max((rebuilt - sigma * sigma * t).abs());
        }
    }
    let violation = VolTermStructure::new(p, vec![(1.0, 0.2), (2.0, 0.1)]);
    let fwd = forward_vol(0.2, 0.1, 1.0, 2.0);
    let loaded = load_snapshot(&common::snapshot_json(
        &[("EUR/USD", 1.1)],
        &[("EUR/USD", &[(1.0, 0.2), (2.0, 0.1)])],
        &[("EUR", 0.0), ("USD", 0.0)],
    ));
    let is_calendar = |r: &Result<_, Error>| matches!(r, Err(e) if e.class() == ErrorClass::CalendarArbitrage);
    let raised = is_calendar(&violation.map(|_| ())) && is_calendar(&fwd.map(|_| ())) && is_calendar(&loaded.map(|_| ()));
    outcome(
        worst <= 1e-14 && raised,
        format!("1000 structures, max total-variance residual {worst:.2e} (tol 1e-14); violation raises calendar arbitrage: {raised}"),
    )
}

// 6. Two-bucket term correlation recovery.
fn term_correlation() -> Outcome {
    let (s1, s2) = (0.10, 0.12);
    let (r1, r2): (f64, f64) = (0.8, 0.2);
    let tri = |r: f64| vec![vec![0.0, 0.0], vec![s1, 0.0], vec![s2 * r, s2 * (1.0 - r * r).sqrt()]];
    let triangle = World {
        currencies: ["EUR", "GBP", "USD"].iter().map(|c| ccy(c)).collect(),
        edges: vec![0.0, 1.0, 2.0],
        exposures: vec![tri(r1), tri(r2)],
    };
    // Cross: corr(Y_{EUR/GBP}, Y_{JPY/USD}) with a_EUR = 0 and a_JPY fixed.
    let m = [0.01, -0.02, 0.05];
    let cross = |r: f64| {
        vec![
            vec![0.0, 0.0, 0.0],
            vec![s1, 0.0, 0.0],
            m.to_vec(),
            vec![s2 * r + m[0], s2 * (1.0 - r * r).sqrt() + m[1], m[2]],
        ]
    };
    let four = World {
        currencies: ["EUR", "GBP", "JPY", "USD"].iter().map(|c| ccy(c)).collect(),
        edges: vec![0.0, 1.0, 2.0],
        exposures: vec![cross(r1), cross(r2)],
    };

    let mut worst_bucket = 0.0f64;
    let mut worst_integrated = 0.0f64;
    for (world, a, b) in [(&triangle, "EUR/GBP", "EUR/USD"), (&four, "EUR/GBP", "JPY/USD")] {
        let snap = world.snapshot();
        let (a, b) = (pair(a), pair(b));
        let term = term_corr(a, b, &snap, &[1.0, 2.0], no_options()).unwrap();
        for (got, want) in term.curve.values().iter().zip([r1, r2]) {
            worst_bucket = worst_bucket.max((got - want).abs());
        }
        let sa = bootstrap_piecewise_vol(snap.vols(a).unwrap()).unwrap();
        let sb = bootstrap_piecewise_vol(snap.vols(b).unwrap()).unwrap();
        let integrated = integrated_correlation(&term.curve, &sa, &sb, 2.0).unwrap().value;
        let single = implied_corr(&CorrQuery { pair_a: a, pair_b: b, horizon: Horizon::Total(2.0) }, &snap, no_options())
            .unwrap()
            .value;
        worst_integrated = worst_integrated.max((integrated - single).abs());
    }
    outcome(
        worst_bucket <= 1e-12 && worst_integrated <= 1e-12,
        format!("triangle and cross worlds, bucket recovery max |Δ| = {worst_bucket:.2e}, integrated vs single-horizon max |Δ| = {worst_integrated:.2e}; tol 1e-12"),
    )
}

fn single_pair_snapshot(spot: f64, sigma: f64, t: f64, r_dom: f64, r_for: f64) -> fxcorr::market_data::MarketSnapshot {
    load_snapshot(&common::snapshot_json(
        &[("EUR/USD", spot)],
        &[("EUR/USD", &[(t, sigma)])],
        &[("EUR", r_dom), ("USD", r_for)],
    ))
    .unwrap()
}

// 7. Monte Carlo vanilla against the analytic price.
fn mc_vanilla() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = pair("EUR/USD");
    let mut worst_z = 0.0f64;
    for n in 0..20 {
        let spot = rng.random_range(0.5..2.0);
        let t = rng.random_range(0.1..3.0);
        let sigma = rng.random_range(0.05..0.4);
        let (r_dom, r_for) = (rng.random_range(-0.01..0.06), rng.random_range(-0.01..0.06));
        // Strike within ±1.5 standard deviations of the forward.
        let fwd = forward(spot, r_dom, r_for, t).unwrap();
        let strike = fwd * (rng.random_range(-1.5..1.5) * sigma * t.sqrt()).exp();
        let kind = if rng.random_bool(0.5) { OptionKind::Call } else { OptionKind::Put };
        let snap = single_pair_snapshot(spot, sigma, t, r_dom, r_for);
        let payoff = PayoffSpec::Vanilla { pair: p, strike, kind, maturity: t };
        let mc = price(&payoff, &snap, &SimulationConfig::new(1_000_000, 100 + n), no_options()).unwrap();
        let analytic = gk_price(&VanillaSpec::new(p, strike, t, kind).unwrap(), &PricingInputs::new(spot, r_dom, r_for, sigma).unwrap()).unwrap();
        let gap = (mc.price - analytic).abs();
        worst_z = worst_z.max(if gap == 0.0 { 0.0 } else { gap / mc.standard_error });
    }

    let snap = single_pair_snapshot(1.1, 0.15, 1.0, 0.02, 0.04);
    let payoff = PayoffSpec::Vanilla { pair: p, strike: 1.12, kind: OptionKind::Call, maturity: 1.0 };
    let analytic = gk_price(&VanillaSpec::new(p, 1.12, 1.0, OptionKind::Call).unwrap(), &PricingInputs::new(1.1, 0.02, 0.04, 0.15).unwrap()).unwrap();
    let within = (0..100u64)
        .filter(|&seed| {
            let mc = price(&payoff, &snap, &SimulationConfig::new(100_000, seed), no_options()).unwrap();
            (mc.price - analytic).abs() <= 3.0 * mc.standard_error
        })
        .count();
    outcome(
        worst_z <= 4.0 && within >= 97,
        format!("20 sets at n=1e6, worst |MC − GK| = {worst_z:.2} SE (tol 4); seed sweep {within}/100 within 3 SE (need ≥ 97)"),
    )
}

fn two_pair_model(rho: f64) -> MarketModel {
    let pairs = vec![pair("EUR/JPY"), pair("EUR/USD")];
    let corr = BucketedCorrelationMatrix::constant(pairs.clone(), 1.0, DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap();
    MarketModel::new(
        pairs,
        vec![0.0062, 0.92],
        vec![PiecewiseConstant::constant(0.12, 1.0).unwrap(), PiecewiseConstant::constant(0.09, 1.0).unwrap()],
        [RateCurve::flat(ccy("EUR"), 0.025), RateCurve::flat(ccy("JPY"), -0.001), RateCurve::flat(ccy("USD"), 0.045)],
        corr,
    )
    .unwrap()
}

fn barrier(level: f64, style: BarrierStyle) -> PayoffSpec {
    PayoffSpec::Barrier {
        payoff_pair: pair("EUR/USD"),
        strike: 0.93,
        kind: OptionKind::Call,
        barrier_pair: pair("EUR/JPY"),
        barrier_level: level,
        direction: BarrierDirection::Up,
        style,
        monitoring: Vec::new(),
        maturity: 1.0,
    }
}

// 8. Barrier parities and correlation sign.
fn barrier_parities() -> Outcome {
    let mut config = SimulationConfig::new(200_000, 8);
    config.grid = (1..=12).map(|m| m as f64 / 12.0).collect();
    let model = two_pair_model(0.4);
    let vanilla = PayoffSpec::Vanilla { pair: pair("EUR/USD"), strike: 0.93, kind: OptionKind::Call, maturity: 1.0 };
    let v = simulate_payoffs(&vanilla, &model, &config).unwrap().discounted;
    let ki = simulate_payoffs(&barrier(0.0066, BarrierStyle::KnockIn), &model, &config).unwrap().discounted;
    let ko = simulate_payoffs(&barrier(0.0066, BarrierStyle::KnockOut), &model, &config).unwrap().discounted;
    let parity_breaks = (0..v.len()).filter(|&n| ki[n] + ko[n] != v[n]).count();
    let knocked = ki.iter().filter(|x| **x > 0.0).count();
    let far = simulate_payoffs(&barrier(0.0062 * 1e6, BarrierStyle::KnockOut), &model, &config).unwrap().discounted;
    let far_breaks = (0..v.len()).filter(|&n| far[n] != v[n]).count();

    // Up-and-out call on EUR/USD, up barrier on EUR/JPY: more correlation,
    // more knock-outs when the call pays, so a lower price.
    let at = |rho| simulate_payoffs(&barrier(0.0066, BarrierStyle::KnockOut), &two_pair_model(rho), &config).unwrap().discounted;
    let runs: Vec<Vec<f64>> = [-0.5, 0.0, 0.5].into_iter().map(at).collect();
    let mut sign_ok = true;
    let mut details = Vec::new();
    for w in runs.windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let se = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) / n).sqrt();
        sign_ok &= mean < 0.0 && mean.abs() > 3.0 * se;
        details.push(format!("{mean:.3e} ({:.1} SE)", mean / se));
    }
    outcome(
        parity_breaks == 0 && far_breaks == 0 && knocked > 0 && sign_ok,
        format!(
            "2e5 paths: in+out ≠ vanilla on {parity_breaks} paths ({knocked} knocked in), unreachable ≠ vanilla on {far_breaks}; price differences across ρ = -0.5, 0, 0.5: {}",
            details.join(", ")
        ),
    )
}

// 9. Byte-identical price results across worker counts.
fn determinism() -> Outcome {
    let run = |payoff: &str, workers: &str, extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_fxcorr"))
            .env_remove("FXCORR_SNAPSHOT")
            .arg("--snapshot")
            .arg(fixture("pricing.json"))
            .args(["price", "--payoff"])
            .arg(fixture(payoff))
            .args(["--workers", workers, "--seed", "11"])
            .args(extra)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&doc["result"]).unwrap()
    };
    let mut identical = true;
    let mut count = 0;
    for (payoff, extra) in [("payoff_knock_out.json", &[][..]), ("payoff_basket.json", &["--antithetic"][..])] {
        let reference = run(payoff, "1", extra);
        for workers in ["1", "2", "8", "2", "8"] {
            identical &= run(payoff, workers, extra) == reference;
            count += 1;
        }
    }
    outcome(identical, format!("{count} repeated runs over 1, 2 and 8 workers, result sections byte-identical: {identical}"))
}

// 10. Correlation matrix PSD handling.
fn matrix_psd() -> Outcome {
    let oracle: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture("matrix_oracle.json")).unwrap()).unwrap();
    let pairs: Vec<FxPair> = ["USD/EUR", "USD/GBP", "USD/JPY"].iter().map(|p| pair(p)).collect();
    let load = |name| load_snapshot_file(fixture(name), LoadOptions::default()).unwrap();

    let consistent = build_matrix(&pairs, &load("matrix_consistent.json"), &[1.0], no_options()).unwrap();
    let b = &consistent.buckets[0];
    let want: Vec<Vec<f64>> = serde_json::from_value(oracle["consistent"].clone()).unwrap();
    let max_dev = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| (b.matrix[r][c] - want[r][c]).abs()).fold(0.0, f64::max);
    let consistent_ok = b.status == PsdStatus::PositiveSemidefinite && b.min_eigenvalue >= -1e-10 && max_dev <= 1e-12;

    let snap = load("matrix_perturbed.json");
    let perturbed = build_matrix(&pairs, &snap, &[1.0], no_options()).unwrap();
    let p = &perturbed.buckets[0];
    let flagged = p.status == PsdStatus::Indefinite && p.min_eigenvalue < -1e-6;

    let repaired = build_matrix(&pairs, &snap, &[1.0], CorrOptions { clamp: false, repair: true }).unwrap();
    let r = &repaired.buckets[0];
    let unit = (0..3).all(|n| r.matrix[n][n] == 1.0);
    let moved = (r.to_dmatrix() - p.to_dmatrix()).norm();
    let reported = r.repair_distance.unwrap_or(f64::NAN);
    let repair_ok = r.status == PsdStatus::Repaired && unit && r.min_eigenvalue >= -1e-10 && (reported - moved).abs() <= 1e-15 && reported > 0.0;
    outcome(
        consistent_ok && flagged && repair_ok,
        format!(
            "consistent min eigenvalue {:.2e} (≥ -1e-10, oracle dev {max_dev:.1e}); perturbed {:?} with min eigenvalue {:.3e}; repaired unit diagonal {unit}, min eigenvalue {:.1e}, Frobenius movement {reported:.6e}",
            b.min_eigenvalue, p.status, p.min_eigenvalue, r.min_eigenvalue
        ),
    )
}

type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

fn main() {
    // libtest flags such as --list or --nocapture are accepted and ignored.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        (1, "triangle formula", Duration::from_secs(1), triangle_formula),
        (2, "cross formula", Duration::from_secs(1), cross_formula),
        (3, "sampling oracle", Duration::from_secs(30), sampling_oracle),
        (4, "implied-vol round trip", Duration::from_secs(5), implied_vol_round_trip),
        (5, "bootstrap identity", Duration::from_secs(1), bootstrap_identity),
        (6, "term-correlation recovery", Duration::from_secs(1), term_correlation),
        (7, "MC vanilla oracle", Duration::from_secs(120), mc_vanilla),
        (8, "barrier parities", Duration::from_secs(120), barrier_parities),
        (9, "determinism", Duration::from_secs(60), determinism),
        (10, "matrix PSD handling", Duration::from_secs(1), matrix_psd),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        let start = Instant::now();
        let Outcome { pass, detail } = run();
        let elapsed = start.elapsed();
        let on_time = elapsed <= budget;
        let ok = pass && on_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {detail}; {:.2} s (limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
