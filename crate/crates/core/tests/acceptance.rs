//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line; run with `-- --nocapture --test-threads=1` to see them.

use std::fs;

use rand::Rng;

use mvprof::backtest::{horizon_count, monte_carlo_campaign, run_backtest, BacktestConfig};
use mvprof::config::{ConfigMap, ExperimentConfig, ExperimentKind};
use mvprof::estimators::{
    build_aux_wealth, error_reduction_holds, quadratic_variation, AuxSource, ErrorReductionOutcome,
};
use mvprof::experiments::table1_cell;
use mvprof::ingest::ingest_prices;
use mvprof::market::{
    simulate_gbm_path, simulate_path, HestonParams, MarketSpec, PathSeed, PricePath, TimeGrid,
};
use mvprof::metrics::{mean, population_variance, welch_test};
use mvprof::{run_experiment, Strategy};

const SEED: u64 = 20_240_101;

struct Report {
    id: u32,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(id: u32) -> Self {
        Self {
            id,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn finish(self) {
        let ok = self.checks.iter().all(|(_, ok)| *ok);
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|(w, ok)| format!("{}{w}", if *ok { "" } else { "!" }))
            .collect();
        println!(
            "criterion {}: {} [{}]",
            self.id,
            if ok { "PASS" } else { "FAIL" },
            detail.join("; ")
        );
        assert!(ok, "criterion {} failed", self.id);
    }
}

#[test]
fn criterion_1_estimator_dispersion_table() {
    let mut rep = Report::new(1);
    let dts = [21.0 / 252.0, 12.0 / 252.0, 1.0 / 252.0];
    let cells: Vec<_> = dts
        .iter()
        .enumerate()
        .map(|(i, dt)| table1_cell(0.1, 0.1, 0.02, *dt, 10_000, SEED + i as u64).unwrap())
        .collect();
    let daily = &cells[2];
    let (a, b) = (daily.std_a(), daily.std_b());
    rep.check(
        format!("std b at dt=1/252 = {b:.4} in [0.95, 1.05]"),
        (0.95..=1.05).contains(&b),
    );
    rep.check(
        format!("std a at dt=1/252 = {a:.4} in [0.45, 0.70]"),
        (0.45..=0.70).contains(&a),
    );
    let sa: Vec<f64> = cells.iter().map(|c| c.std_a()).collect();
    rep.check(
        format!(
            "std a decreasing over dt: {:.4} > {:.4} > {:.4}",
            sa[0], sa[1], sa[2]
        ),
        sa[0] > sa[1] && sa[1] > sa[2],
    );
    rep.finish();
}

fn truth_fed_qv(steps: usize, seed: u64) -> Vec<f64> {
    let spec = MarketSpec::constant_gbm(0.1, 0.1, 0.02);
    let grid = TimeGrid::new(1.0, steps, 0).unwrap();
    (0..1_000)
        .map(|i| {
            let p = simulate_gbm_path(&spec, &grid, PathSeed::new(seed, i)).unwrap();
            let aux = build_aux_wealth(&p, AuxSource::Truth, 0.02, 0, steps as isize).unwrap();
            quadratic_variation(&aux.increments) / grid.horizon()
        })
        .collect()
}

#[test]
fn criterion_2_quadratic_variation_convergence() {
    let mut rep = Report::new(2);
    let q252 = truth_fed_qv(252, SEED);
    let q504 = truth_fed_qv(504, SEED + 1);
    let m = mean(&q252);
    rep.check(
        format!("mean QV/T = {m:.4} within 2% of 0.64"),
        (m / 0.64 - 1.0).abs() <= 0.02,
    );
    let ratio = population_variance(&q252).sqrt() / population_variance(&q504).sqrt();
    rep.check(
        format!("std ratio N=252/504 = {ratio:.3} in 1.41 +- 0.15"),
        (ratio - 1.41).abs() <= 0.15,
    );
    rep.finish();
}

#[test]
fn criterion_3_error_reduction_property() {
    let mut rep = Report::new(3);
    let mut rng = PathSeed::new(SEED, 3).rng();
    let (mut applicable, mut holds, mut false_claims, mut violating) = (0, 0, 0, 0);
    while applicable < 10_000 || violating < 10_000 {
        let r: f64 = rng.random_range(-0.05..0.1);
        let mu: f64 = rng.random_range(-0.5..0.5);
        let sigma: f64 = rng.random_range(0.01..1.0);
        let mu_hat: f64 = rng.random_range(-2.0..2.0);
        let sigma_hat: f64 = rng.random_range(0.01..1.5);
        let p2 = ((mu - r) / sigma).powi(2);
        let ph2 = ((mu_hat - r) / sigma_hat).powi(2);
        let hypotheses = sigma * sigma < sigma_hat * sigma_hat && 2.0 * p2 < ph2;
        let out = error_reduction_holds(mu, sigma, mu_hat, sigma_hat, r);
        if hypotheses && applicable < 10_000 {
            applicable += 1;
            holds += (out == ErrorReductionOutcome::Holds) as usize;
        } else if !hypotheses && violating < 10_000 {
            violating += 1;
            false_claims += (out != ErrorReductionOutcome::NotApplicable) as usize;
        }
    }
    rep.check(
        format!("holds in {holds}/10000 applicable tuples"),
        holds == 10_000,
    );
    rep.check(
        format!("{false_claims} of 10000 violating tuples not flagged not-applicable"),
        false_claims == 0,
    );
    rep.finish();
}

#[test]
fn criterion_4_heston_campaign() {
    let mut rep = Report::new(4);
    let cfg = BacktestConfig::daily_defaults(Strategy::Profitability);
    let params = HestonParams {
        reversion: 42.5,
        correlation: -0.7,
        ..HestonParams::typical()
    };
    let spec = MarketSpec::heston(params, cfg.prefs.risk_free);
    let strategies = [
        Strategy::Profitability,
        Strategy::ConstantPremium,
        Strategy::BuyAndHold,
        Strategy::TrueParameters,
    ];
    let c = monte_carlo_campaign(&spec, &cfg, 2_000, &strategies, SEED, false).unwrap();
    let s = |x: Strategy| c.summary(x).unwrap().clone();
    let (a, b, n, t) = (
        s(Strategy::Profitability),
        s(Strategy::ConstantPremium),
        s(Strategy::BuyAndHold),
        s(Strategy::TrueParameters),
    );
    let ceq = |x: &mvprof::StrategySummary| x.ceq.unwrap_or(f64::NAN);
    let ret = |x: Strategy| c.returns(x).unwrap();
    let p_an = welch_test(&ret(Strategy::Profitability), &ret(Strategy::BuyAndHold))
        .map(|w| w.p)
        .unwrap_or(1.0);
    let p_nb = welch_test(&ret(Strategy::BuyAndHold), &ret(Strategy::ConstantPremium))
        .map(|w| w.p)
        .unwrap_or(1.0);
    rep.check(
        format!(
            "CEQ A {:.4} > N {:.4} > B {:.4} with p(A,N) = {p_an:.3}, p(N,B) = {p_nb:.3} < 0.01",
            ceq(&a),
            ceq(&n),
            ceq(&b)
        ),
        ceq(&a) > ceq(&n) && ceq(&n) > ceq(&b) && p_an < 0.01 && p_nb < 0.01,
    );
    rep.check(
        format!("CEQ(A) = {:.4} within 0.02 of 0.1284", ceq(&a)),
        (ceq(&a) - 0.1284).abs() <= 0.02,
    );
    rep.check(
        format!("CEQ(T) = {:.4} within 0.02 of 0.1344", ceq(&t)),
        (ceq(&t) - 0.1344).abs() <= 0.02,
    );
    rep.check(format!("TR(N) = {:?}", n.turnover), n.turnover == Some(0.0));
    let (tra, trb) = (
        a.turnover.unwrap_or(f64::NAN),
        b.turnover.unwrap_or(f64::NAN),
    );
    rep.check(format!("TR(A) = {tra:.4} < TR(B) = {trb:.4}"), tra < trb);
    rep.check(
        format!("TR(A) = {tra:.4} within 1.0 of 3.4759"),
        (tra - 3.4759).abs() <= 1.0,
    );
    let sra = a.sharpe.unwrap_or(f64::NAN);
    rep.check(
        format!("SR(A) = {sra:.4} within 0.1 of 0.8074"),
        (sra - 0.8074).abs() <= 0.1,
    );
    rep.finish();
}

#[test]
fn criterion_5_gbm_terminal_wealth_shift() {
    let mut rep = Report::new(5);
    let cfg = BacktestConfig::daily_defaults(Strategy::Profitability);
    let spec = MarketSpec::constant_gbm(0.1, 0.1, cfg.prefs.risk_free);
    let strategies = [Strategy::Profitability, Strategy::ConstantPremium];
    let c = monte_carlo_campaign(&spec, &cfg, 10_000, &strategies, SEED, false).unwrap();
    let wealth =
        |j: usize| -> Vec<f64> { c.outcomes(j).iter().map(|o| o.terminal_wealth).collect() };
    let (wa, wb) = (wealth(0), wealth(1));
    let p = welch_test(&wa, &wb).map(|w| w.p).unwrap_or(1.0);
    rep.check(
        format!(
            "mean W_T A {:.4} > B {:.4} with p = {p:.3} < 0.05",
            mean(&wa),
            mean(&wb)
        ),
        mean(&wa) > mean(&wb) && p < 0.05,
    );
    let da = c.summaries[0].cp_dispersion.unwrap_or(f64::NAN);
    let db = c.summaries[1].cp_dispersion.unwrap_or(f64::NAN);
    rep.check(format!("mean-CP dispersion A {da:.4} < B {db:.4}"), da < db);
    rep.finish();
}

#[test]
fn criterion_6_deterministic_replay() {
    let mut rep = Report::new(6);
    let small = ConfigMap::parse(
        "paths = 200\nheston_reversion = 42.5\nheston_correlation = -0.7\ntable1_dt = 21/252\ntable1_mu = 0.1\ntrace_samples = 3\nkeep_ledgers = true\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let mut body = String::from("date,close\n");
    let mut rng = PathSeed::new(SEED, 6).rng();
    let mut close = 100.0;
    let start = chrono::NaiveDate::from_ymd_opt(2014, 1, 2).unwrap();
    for i in 0..900u64 {
        body.push_str(&format!("{},{close}\n", start + chrono::Days::new(i)));
        close *= 1.0 + rng.random_range(-0.02..0.021);
    }
    fs::write(&prices, body).unwrap();
    let mut real = ConfigMap::default();
    real.set("prices", prices.to_str().unwrap()).unwrap();
    for kind in [
        ExperimentKind::Table1,
        ExperimentKind::Gbm,
        ExperimentKind::Heston,
        ExperimentKind::ApTraces,
        ExperimentKind::Real,
    ] {
        let cfg = ExperimentConfig::resolve(kind, &[&small, &real]).unwrap();
        let (a, b) = (
            dir.path().join(format!("{kind}-a")),
            dir.path().join(format!("{kind}-b")),
        );
        let files = run_experiment(&cfg, &a, "acceptance").unwrap();
        run_experiment(&cfg, &b, "acceptance").unwrap();
        let mut identical = true;
        for f in files.iter().filter(|f| !f.ends_with("manifest.txt")) {
            let name = f.file_name().unwrap();
            identical &= fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap();
        }
        rep.check(
            format!("{kind}: {} data files identical", files.len() - 1),
            identical,
        );
    }
    rep.finish();
}

/// Prices after step `k` reversed, grid and truth unchanged.
fn scramble_after(path: &PricePath, k: isize) -> PricePath {
    let cut = path.grid().index(k).unwrap() + 1;
    let mut prices = path.prices().to_vec();
    prices[cut..].reverse();
    for p in prices[cut..].iter_mut().step_by(3) {
        *p *= 1.25;
    }
    PricePath::new(*path.grid(), prices, path.truth().map(|t| t.to_vec())).unwrap()
}

#[test]
fn criterion_7_self_financing_and_no_look_ahead() {
    let mut rep = Report::new(7);
    let base = BacktestConfig::daily_defaults(Strategy::Profitability);
    let spec = MarketSpec::heston(HestonParams::typical(), base.prefs.risk_free);
    let all = [
        Strategy::Profitability,
        Strategy::ConstantPremium,
        Strategy::BuyAndHold,
        Strategy::TrueParameters,
        Strategy::combined(),
    ];
    for s in all {
        let cfg = base.with_strategy(s);
        let (mut exact, mut blind) = (true, true);
        for i in 0..20 {
            let path = simulate_path(&spec, &cfg.grid, PathSeed::new(SEED, i)).unwrap();
            let l = run_backtest(&path, &cfg).unwrap();
            let h = path.horizon_prices();
            for k in 0..l.steps.len() {
                let next = l.wealth[k] + l.steps[k].theta * (h[k + 1] - h[k]) / h[k];
                exact &= next.to_bits() == l.wealth[k + 1].to_bits();
            }
            for k in [0isize, 63, 126, 251] {
                let alt = run_backtest(&scramble_after(&path, k), &cfg).unwrap();
                blind &= (0..=k as usize)
                    .all(|j| alt.steps[j].theta.to_bits() == l.steps[j].theta.to_bits());
            }
        }
        rep.check(format!("{s}: recursion exact"), exact);
        rep.check(format!("{s}: theta blind to later prices"), blind);
    }
    rep.finish();
}

#[test]
fn criterion_8_ingestion_and_flat_market() {
    let mut rep = Report::new(8);
    let dir = tempfile::tempdir().unwrap();
    let start = chrono::NaiveDate::from_ymd_opt(2014, 1, 2).unwrap();
    let write = |name: &str, closes: &[f64]| {
        let mut body = String::from("date,close\n");
        for (i, c) in closes.iter().enumerate() {
            body.push_str(&format!("{},{c}\n", start + chrono::Days::new(i as u64)));
        }
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };

    let closes: Vec<f64> = (0..2_521)
        .map(|i| 100.0 * (1.0 + 0.1 * ((i % 50) as f64 / 50.0)))
        .collect();
    let file = write("series.csv", &closes);
    let path = ingest_prices(&file, 0.02).unwrap();
    let last = closes[2_520] * (-0.02f64 * 2_520.0 / 252.0).exp();
    rep.check(
        "round trip: length and discounted last close",
        path.prices().len() == closes.len() && (path.prices()[2_520] - last).abs() <= 1e-12 * last,
    );
    let undiscounted = ingest_prices(&file, 0.0).unwrap();
    rep.check(
        "r = 0 leaves closes unchanged",
        undiscounted.prices() == &closes[..],
    );
    let count = horizon_count(closes.len(), 504, 252);
    rep.check(
        format!("2,520-day series, burn-in 504 -> {count} horizons"),
        count == 1_765,
    );

    let flat = write("flat.csv", &vec![100.0; 900]);
    let mut cfg = ConfigMap::default();
    cfg.set("prices", flat.to_str().unwrap()).unwrap();
    cfg.set("risk_free", "0").unwrap();
    cfg.set("strategies", "N,A,A+N").unwrap();
    let ecfg = ExperimentConfig::resolve(ExperimentKind::Real, &[&cfg]).unwrap();
    let out = dir.path().join("out");
    run_experiment(&ecfg, &out, "acceptance").unwrap();
    let row = |name: &str| -> Vec<String> {
        let text = fs::read_to_string(out.join(name)).unwrap();
        text.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(str::to_string)
            .collect()
    };
    let (ceq, sr, tr) = (row("ceq.csv"), row("sr.csv"), row("tr.csv"));
    rep.check(format!("flat market CEQ(N) = {}", ceq[1]), ceq[1] == "0");
    rep.check(
        format!("flat market SR(N) = {}", sr[1]),
        sr[1] == "undefined",
    );
    rep.check(format!("flat market TR(N) = {}", tr[1]), tr[1] == "0");
    rep.finish();
}
