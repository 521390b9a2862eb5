//! Mean-variance portfolio selection with estimated average and current
//! profitability of the risky asset.
//!
//! - [`market`]: discounted price models (constant/functional GBM, Heston),
//!   time grid, seeded simulation, discounting.
//! - [`estimators`]: windowed MLE, auxiliary wealth, AP/CP estimates.
//! - [`strategies`]: positions for strategies A, B, N, T and A+N.
//! - [`backtest`]: wealth recursion, Monte Carlo and rolling-horizon drivers.
//! - [`metrics`]: CEQ, Sharpe ratio, turnover, Welch test.
//! - [`config`], [`ingest`], [`experiments`]: configuration, price files and
//!   report output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod config;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod ingest;
pub mod market;
pub mod metrics;
pub mod strategies;

pub use backtest::{
    monte_carlo_campaign, rolling_horizons, run_backtest, wealth_step, BacktestConfig, Campaign,
    PathContext, PathOutcome, StepRecord, StrategyOutcome, WealthLedger,
};
pub use config::{ConfigMap, ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use estimators::{
    error_reduction_holds, estimate_ap, estimate_cp, mle_estimate, mle_track, AuxSource,
    ErrorReductionOutcome, EstimationWindow, ParamEstimate, ProfitabilityTrack,
};
pub use experiments::run_experiment;
pub use ingest::ingest_prices;
pub use market::{
    discount_prices, simulate_path, HestonParams, MarketModel, MarketSpec, PathSeed, PricePath,
    TimeGrid, TruthPoint,
};
pub use metrics::{ceq, sharpe, turnover, welch_test, ReturnSample, StrategySummary, WelchTest};
pub use strategies::{PremiumSign, RiskPreferences, Strategy};
