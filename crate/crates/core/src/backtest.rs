//! Step-by-step rebalancing over a horizon, plus Monte Carlo and
//! rolling-horizon drivers.
//!
//! At each step `k = 0 .. N-1` the engine estimates from prices up to and
//! including `S_k`, sets `theta_k`, and rolls wealth with
//! `W_{k+1} = W_k + theta_k (S_{k+1} - S_k) / S_k`. Nothing after `S_k` is
//! read before `theta_k` is fixed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    mle_track, AuxSource, EstimationWindow, ParamEstimate, ProfitabilityTrack,
};
use crate::market::{simulate_path, MarketSpec, PathSeed, PricePath, TimeGrid};
use crate::metrics::{self, StrategySummary};
use crate::strategies::{
    theta_buy_and_hold, theta_combined, theta_precommit, theta_strategy_b, true_ap, true_cp,
    PortfolioState, PremiumSign, RiskPreferences, Strategy,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub grid: TimeGrid,
    pub window: EstimationWindow,
    pub prefs: RiskPreferences,
    pub strategy: Strategy,
    pub initial_wealth: f64,
    pub premium_sign: PremiumSign,
}

impl BacktestConfig {
    /// Burn-in needed so that the MLE at the first mirror-window step
    /// (`k = -N`) has its full window: `N + M + 1`.
    pub fn required_burn_in(steps: usize, window: &EstimationWindow) -> usize {
        steps + window.lookback() + 1
    }

    /// One year of daily steps, a one-year window, gamma = 1.4, r = 0.02, w0 = 1.
    pub fn daily_defaults(strategy: Strategy) -> Self {
        let window = EstimationWindow::new(252).expect("positive");
        let grid = TimeGrid::new(1.0, 252, Self::required_burn_in(252, &window)).expect("valid");
        Self {
            grid,
            window,
            prefs: RiskPreferences::default(),
            strategy,
            initial_wealth: 1.0,
            premium_sign: PremiumSign::Signed,
        }
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        Self {
            strategy,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_wealth.is_finite() && self.initial_wealth > 0.0) {
            return Err(Error::Config(format!(
                "initial wealth must be positive, got {}",
                self.initial_wealth
            )));
        }
        let need = Self::required_burn_in(self.grid.steps(), &self.window);
        if self.grid.burn_in() < need {
            return Err(Error::Config(format!(
                "burn-in of {} steps cannot cover the estimation and mirror windows ({} needed)",
                self.grid.burn_in(),
                need
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub theta: f64,
    /// `theta / W`.
    pub weight: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    /// AP used for the position, if the strategy uses one.
    pub k_hat: Option<f64>,
    /// CP used for the position, if the strategy uses one.
    pub a_hat: Option<f64>,
    pub clamped: bool,
    /// Buy-and-hold position carried over from the previous step (no trade).
    pub carried: bool,
}

/// Wealth `W_0 ..= W_N` and the step decisions `0 .. N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthLedger {
    pub strategy: Strategy,
    pub wealth: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl WealthLedger {
    pub fn initial_wealth(&self) -> f64 {
        self.wealth[0]
    }

    pub fn terminal_wealth(&self) -> f64 {
        *self.wealth.last().expect("non-empty")
    }

    pub fn simple_return(&self) -> f64 {
        (self.terminal_wealth() - self.initial_wealth()) / self.initial_wealth()
    }

    /// Mean CP estimate over the horizon (None for strategies without one).
    pub fn mean_cp(&self) -> Option<f64> {
        let cps: Vec<f64> = self.steps.iter().filter_map(|s| s.a_hat).collect();
        (!cps.is_empty()).then(|| cps.iter().sum::<f64>() / cps.len() as f64)
    }
}

pub fn wealth_step(wealth: f64, theta: f64, s_now: f64, s_next: f64) -> Result<f64> {
    if !(s_now > 0.0) {
        return Err(Error::Data {
            index: 0,
            reason: format!("price must be positive to form a return, got {s_now}"),
        });
    }
    Ok(wealth + theta * (s_next - s_now) / s_now)
}

/// Per-path estimates shared by every strategy run on the same path.
pub struct PathContext<'a> {
    path: &'a PricePath,
    cfg: &'a BacktestConfig,
    estimates: Vec<ParamEstimate>,
    profitability: Option<ProfitabilityTrack>,
    truth: Option<(f64, Vec<f64>)>,
}

impl<'a> PathContext<'a> {
    pub fn new(
        path: &'a PricePath,
        cfg: &'a BacktestConfig,
        strategies: &[Strategy],
    ) -> Result<Self> {
        cfg.validate()?;
        let grid = path.grid();
        if grid.steps() != cfg.grid.steps() {
            return Err(Error::Config(format!(
                "path horizon has {} steps, configuration expects {}",
                grid.steps(),
                cfg.grid.steps()
            )));
        }
        let r = cfg.prefs.risk_free;
        let n = grid.steps() as isize;
        let estimates = mle_track(path, &cfg.window, r, 0, n)?;
        let needs_ap = strategies
            .iter()
            .any(|s| matches!(s, Strategy::Profitability | Strategy::Combined { .. }));
        let profitability = if needs_ap {
            Some(ProfitabilityTrack::new(
                path,
                AuxSource::Estimated(cfg.window),
                r,
            )?)
        } else {
            None
        };
        let truth = if strategies.contains(&Strategy::TrueParameters) {
            let cp = true_cp(path, r)?;
            Some((true_ap(path, r)?, cp[grid.burn_in()..].to_vec()))
        } else {
            None
        };
        Ok(Self {
            path,
            cfg,
            estimates,
            profitability,
            truth,
        })
    }

    pub fn estimates(&self) -> &[ParamEstimate] {
        &self.estimates
    }

    pub fn profitability(&self) -> Option<&ProfitabilityTrack> {
        self.profitability.as_ref()
    }

    fn theta_a(&self, state: &PortfolioState, est: &ParamEstimate) -> (f64, f64, f64, bool) {
        let track = self.profitability.as_ref().expect("built for A");
        let pe = track.estimate(state.step);
        let sign = self.cfg.premium_sign.of(est.mu - self.cfg.prefs.risk_free);
        let pos = theta_precommit(
            state,
            pe.k_hat,
            pe.a_hat,
            est.sigma,
            sign,
            &self.cfg.prefs,
            self.path.grid().horizon(),
        );
        (pos.theta, pe.k_hat, pe.a_hat, pos.clamped)
    }

    pub fn run(&self, strategy: Strategy) -> Result<WealthLedger> {
        let grid = self.path.grid();
        let horizon = grid.horizon();
        let prices = self.path.horizon_prices();
        let prefs = &self.cfg.prefs;
        let r = prefs.risk_free;
        let n = grid.steps();

        let mut wealth = Vec::with_capacity(n + 1);
        let mut steps = Vec::with_capacity(n);
        let mut w = self.cfg.initial_wealth;
        wealth.push(w);
        let mut held = false;
        for k in 0..n {
            let est = self.estimates[k];
            let state = PortfolioState {
                wealth: w,
                initial_wealth: self.cfg.initial_wealth,
                step: k as isize,
            };
            let mut rec = StepRecord {
                theta: 0.0,
                weight: 0.0,
                mu_hat: est.mu,
                sigma_hat: est.sigma,
                k_hat: None,
                a_hat: None,
                clamped: false,
                carried: false,
            };
            match strategy {
                Strategy::Profitability => {
                    let (theta, k_hat, a_hat, clamped) = self.theta_a(&state, &est);
                    rec.theta = theta;
                    rec.k_hat = Some(k_hat);
                    rec.a_hat = Some(a_hat);
                    rec.clamped = clamped;
                }
                Strategy::ConstantPremium => {
                    let pos = theta_strategy_b(&state, &est, prefs, horizon);
                    let p2 = est.premium(r).powi(2);
                    rec.theta = pos.theta;
                    rec.k_hat = Some(p2);
                    rec.a_hat = Some(p2);
                    rec.clamped = pos.clamped;
                }
                Strategy::BuyAndHold => {
                    rec.theta = theta_buy_and_hold(&state);
                    rec.carried = k > 0;
                }
                Strategy::TrueParameters => {
                    let (k_true, cp) = self.truth.as_ref().ok_or(Error::MissingTruth("T"))?;
                    let tp = self
                        .path
                        .truth_at(k as isize)
                        .ok_or(Error::MissingTruth("T"))?;
                    let sign = PremiumSign::Signed.of(tp.mu - r);
                    let pos =
                        theta_precommit(&state, *k_true, cp[k], tp.sigma, sign, prefs, horizon);
                    rec.theta = pos.theta;
                    rec.k_hat = Some(*k_true);
                    rec.a_hat = Some(cp[k]);
                    rec.clamped = pos.clamped;
                }
                Strategy::Combined { sigma_threshold } => {
                    let (theta_a, k_hat, a_hat, clamped) = self.theta_a(&state, &est);
                    let theta_n = theta_buy_and_hold(&state);
                    let hold = est.sigma >= sigma_threshold;
                    rec.theta = theta_combined(&est, theta_a, theta_n, sigma_threshold);
                    rec.k_hat = Some(k_hat);
                    rec.a_hat = Some(a_hat);
                    rec.clamped = clamped && !hold;
                    rec.carried = hold && held;
                    held = hold;
                }
            }
            rec.weight = rec.theta / w;
            steps.push(rec);
            w = wealth_step(w, rec.theta, prices[k], prices[k + 1]).map_err(|e| match e {
                Error::Data { reason, .. } => Error::Data {
                    index: grid.burn_in() + k,
                    reason,
                },
                other => other,
            })?;
            wealth.push(w);
        }
        Ok(WealthLedger {
            strategy,
            wealth,
            steps,
        })
    }
}

/// Runs `cfg.strategy` on one path.
pub fn run_backtest(path: &PricePath, cfg: &BacktestConfig) -> Result<WealthLedger> {
    PathContext::new(path, cfg, &[cfg.strategy])?.run(cfg.strategy)
}

/// Compact per-path result of one strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub terminal_wealth: f64,
    pub simple_return: f64,
    /// None when wealth hit exactly zero and weights are undefined.
    pub turnover: Option<f64>,
    pub mean_cp: Option<f64>,
}

impl StrategyOutcome {
    pub fn from_ledger(ledger: &WealthLedger, path: &PricePath) -> Self {
        Self {
            strategy: ledger.strategy,
            terminal_wealth: ledger.terminal_wealth(),
            simple_return: ledger.simple_return(),
            turnover: metrics::turnover(ledger, path).ok(),
            mean_cp: ledger.mean_cp(),
        }
    }
}

/// All strategies on one path (or one rolling start).
#[derive(Debug, Clone)]
pub struct PathOutcome {
    /// Path index in a campaign, start index in a rolling run.
    pub index: usize,
    pub checksum: u64,
    pub outcomes: Vec<StrategyOutcome>,
    pub ledgers: Option<Vec<WealthLedger>>,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub strategies: Vec<Strategy>,
    pub paths: Vec<PathOutcome>,
    pub summaries: Vec<StrategySummary>,
}

impl Campaign {
    /// Outcomes of strategy `j` (in `strategies` order) across paths.
    pub fn outcomes(&self, j: usize) -> Vec<StrategyOutcome> {
        self.paths.iter().map(|p| p.outcomes[j]).collect()
    }

    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    pub fn returns(&self, strategy: Strategy) -> Option<Vec<f64>> {
        let j = self.strategies.iter().position(|s| *s == strategy)?;
        Some(
            self.paths
                .iter()
                .map(|p| p.outcomes[j].simple_return)
                .collect(),
        )
    }
}

fn run_path(
    path: &PricePath,
    cfg: &BacktestConfig,
    strategies: &[Strategy],
    index: usize,
    keep: bool,
) -> Result<PathOutcome> {
    let ctx = PathContext::new(path, cfg, strategies)?;
    let ledgers = strategies
        .iter()
        .map(|s| ctx.run(*s))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOutcome {
        index,
        checksum: path.checksum(),
        outcomes: ledgers
            .iter()
            .map(|l| StrategyOutcome::from_ledger(l, path))
            .collect(),
        ledgers: keep.then_some(ledgers),
    })
}

fn summarize_all(
    strategies: &[Strategy],
    paths: &[PathOutcome],
    cfg: &BacktestConfig,
) -> Vec<StrategySummary> {
    strategies
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let outs: Vec<StrategyOutcome> = paths.iter().map(|p| p.outcomes[j]).collect();
            metrics::summarize(*s, &outs, &cfg.prefs)
        })
        .collect()
}

/// Simulates `n_paths` paths from `spec` and runs every strategy on each
/// one. Path `i` uses stream `PathSeed::new(master_seed, i)`.
pub fn monte_carlo_campaign(
    spec: &MarketSpec,
    cfg: &BacktestConfig,
    n_paths: usize,
    strategies: &[Strategy],
    master_seed: u64,
    keep_ledgers: bool,
) -> Result<Campaign> {
    if n_paths == 0 {
        return Err(Error::Config("a campaign needs at least one path".into()));
    }
    cfg.validate()?;
    spec.validate()?;
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(spec, &cfg.grid, PathSeed::new(master_seed, i as u64))?;
            run_path(&path, cfg, strategies, i, keep_ledgers)
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = summarize_all(strategies, &paths, cfg);
    Ok(Campaign {
        strategies: strategies.to_vec(),
        paths,
        summaries,
    })
}

/// Number of horizons a series of `len` prices supports.
pub fn horizon_count(len: usize, burn_in: usize, steps: usize) -> usize {
    len.saturating_sub(burn_in + steps)
}

/// One backtest per start index whose trailing history covers the burn-in,
/// advancing by one observation; wealth restarts at `w0` each time.
pub fn rolling_horizons(
    series: &PricePath,
    cfg: &BacktestConfig,
    strategies: &[Strategy],
    keep_ledgers: bool,
) -> Result<Campaign> {
    cfg.validate()?;
    let (burn_in, steps) = (cfg.grid.burn_in(), cfg.grid.steps());
    let len = series.prices().len();
    let count = horizon_count(len, burn_in, steps);
    if count == 0 {
        return Err(Error::ShortSeries {
            len,
            required: burn_in + steps + 1,
        });
    }
    let paths = (burn_in..burn_in + count)
        .into_par_iter()
        .map(|start| {
            let sub = series.window(start, burn_in, steps)?;
            run_path(&sub, cfg, strategies, start, keep_ledgers)
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = summarize_all(strategies, &paths, cfg);
    Ok(Campaign {
        strategies: strategies.to_vec(),
        paths,
        summaries,
    })
}
