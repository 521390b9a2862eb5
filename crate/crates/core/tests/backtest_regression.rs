use mvprof::backtest::{
    horizon_count, monte_carlo_campaign, rolling_horizons, run_backtest, BacktestConfig,
};
use mvprof::estimators::EstimationWindow;
use mvprof::market::{simulate_path, HestonParams, MarketSpec, PathSeed, PricePath, TimeGrid};
use mvprof::strategies::{PremiumSign, RiskPreferences, Strategy};
use mvprof::Error;

const ALL: [Strategy; 5] = [
    Strategy::Profitability,
    Strategy::ConstantPremium,
    Strategy::BuyAndHold,
    Strategy::TrueParameters,
    Strategy::Combined {
        sigma_threshold: 0.1,
    },
];

fn cfg(steps: usize, lookback: usize) -> BacktestConfig {
    let window = EstimationWindow::new(lookback).unwrap();
    BacktestConfig {
        grid: TimeGrid::with_dt(
            1.0 / 252.0,
            steps,
            BacktestConfig::required_burn_in(steps, &window),
        )
        .unwrap(),
        window,
        prefs: RiskPreferences::default(),
        strategy: Strategy::Profitability,
        initial_wealth: 1.0,
        premium_sign: PremiumSign::Signed,
    }
}

/// Same grid and truth; prices after step `k` reversed and rescaled.
fn scramble_after(path: &PricePath, k: isize) -> PricePath {
    let cut = path.grid().index(k).unwrap() + 1;
    let mut prices = path.prices().to_vec();
    prices[cut..].reverse();
    for (j, p) in prices[cut..].iter_mut().enumerate() {
        *p *= 1.0 + 0.37 * ((j % 5) as f64 - 2.0) / 10.0;
    }
    PricePath::new(*path.grid(), prices, path.truth().map(|t| t.to_vec())).unwrap()
}

#[test]
fn positions_ignore_future_prices() {
    let base = cfg(60, 40);
    let spec = MarketSpec::heston(HestonParams::typical(), 0.02);
    let path = simulate_path(&spec, &base.grid, PathSeed::new(21, 0)).unwrap();
    for s in ALL {
        let c = base.with_strategy(s);
        let orig = run_backtest(&path, &c).unwrap();
        for k in [0isize, 1, 17, 30, 59] {
            let alt = run_backtest(&scramble_after(&path, k), &c).unwrap();
            for j in 0..=k as usize {
                assert_eq!(
                    orig.steps[j].theta.to_bits(),
                    alt.steps[j].theta.to_bits(),
                    "{s} theta at step {j} moved when prices after step {k} changed"
                );
            }
        }
    }
}

#[test]
fn wealth_recursion_exact_on_heston() {
    let base = cfg(100, 60);
    let spec = MarketSpec::heston(HestonParams::typical(), 0.02);
    for i in 0..5 {
        let path = simulate_path(&spec, &base.grid, PathSeed::new(22, i)).unwrap();
        let h = path.horizon_prices();
        for s in ALL {
            let l = run_backtest(&path, &base.with_strategy(s)).unwrap();
            assert_eq!(l.wealth[0], 1.0);
            for k in 0..l.steps.len() {
                let next = l.wealth[k] + l.steps[k].theta * (h[k + 1] - h[k]) / h[k];
                assert_eq!(l.wealth[k + 1].to_bits(), next.to_bits(), "{s} step {k}");
            }
        }
    }
}

#[test]
fn buy_and_hold_ledger_is_trade_free() {
    let base = cfg(80, 40).with_strategy(Strategy::BuyAndHold);
    let spec = MarketSpec::constant_gbm(0.1, 0.3, 0.02);
    let path = simulate_path(&spec, &base.grid, PathSeed::new(23, 0)).unwrap();
    let l = run_backtest(&path, &base).unwrap();
    assert!(l.steps.iter().all(|s| s.weight == 1.0));
    assert_eq!(mvprof::turnover(&l, &path).unwrap(), 0.0);
    let h = path.horizon_prices();
    assert!((l.terminal_wealth() - h[h.len() - 1] / h[0]).abs() < 1e-12);
}

#[test]
fn campaign_two_paths_buy_and_hold() {
    let base = cfg(50, 30);
    let spec = MarketSpec::constant_gbm(0.1, 0.1, 0.02);
    let c = monte_carlo_campaign(&spec, &base, 2, &[Strategy::BuyAndHold], 5, true).unwrap();
    assert_eq!(c.paths.len(), 2);
    assert_eq!(
        c.paths
            .iter()
            .map(|p| p.ledgers.as_ref().unwrap().len())
            .sum::<usize>(),
        2
    );
    assert_eq!(c.summary(Strategy::BuyAndHold).unwrap().turnover, Some(0.0));
}

#[test]
fn campaign_is_paired_and_deterministic() {
    let base = cfg(50, 30);
    let spec = MarketSpec::heston(HestonParams::typical(), 0.02);
    let a = monte_carlo_campaign(&spec, &base, 16, &ALL, 9, false).unwrap();
    let b = monte_carlo_campaign(&spec, &base, 16, &ALL, 9, false).unwrap();
    assert_eq!(a.summaries, b.summaries);
    for (pa, pb) in a.paths.iter().zip(&b.paths) {
        assert_eq!(pa.checksum, pb.checksum);
        assert_eq!(pa.outcomes, pb.outcomes);
    }
    // every strategy on a path saw the prices with this checksum
    for p in &a.paths {
        let path = simulate_path(&spec, &base.grid, PathSeed::new(9, p.index as u64)).unwrap();
        assert_eq!(path.checksum(), p.checksum);
    }
    let other = monte_carlo_campaign(&spec, &base, 16, &ALL, 10, false).unwrap();
    assert_ne!(a.paths[0].checksum, other.paths[0].checksum);
}

#[test]
fn rolling_horizon_counts() {
    let base = cfg(20, 10);
    let burn = base.grid.burn_in();
    let exact = burn + 20 + 1;
    let series = |len: usize| {
        let g = TimeGrid::with_dt(1.0 / 252.0, len - 1, 0).unwrap();
        let prices = (0..len)
            .map(|i| 100.0 * (1.0 + 0.01 * ((i * 7) % 11) as f64))
            .collect();
        PricePath::new(g, prices, None).unwrap()
    };
    let strategies = [Strategy::combined(), Strategy::BuyAndHold];
    let one = rolling_horizons(&series(exact), &base, &strategies, false).unwrap();
    assert_eq!(one.paths.len(), 1);
    let many = rolling_horizons(&series(exact + 9), &base, &strategies, false).unwrap();
    assert_eq!(many.paths.len(), 10);
    assert_eq!(many.paths[3].index, burn + 3);
    assert!(matches!(
        rolling_horizons(&series(exact - 1), &base, &strategies, false),
        Err(Error::ShortSeries { required, .. }) if required == exact
    ));
    assert_eq!(horizon_count(2_521, 504, 252), 1_765);
}
