//! Performance metrics over samples of simple returns, turnover of a
//! single ledger, and Welch's unequal-variance t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::backtest::{StrategyOutcome, WealthLedger};
use crate::error::{Error, Result};
use crate::market::PricePath;
use crate::strategies::{RiskPreferences, Strategy};

/// Simple returns `(W_T - W_0) / W_0`, one per path or horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    returns: Vec<f64>,
}

impl ReturnSample {
    pub fn new(returns: Vec<f64>) -> Self {
        Self { returns }
    }

    pub fn from_terminal_wealth(initial_wealth: f64, terminal: &[f64]) -> Result<Self> {
        if !(initial_wealth > 0.0) {
            return Err(Error::Config(format!(
                "initial wealth must be positive, got {initial_wealth}"
            )));
        }
        Ok(Self::new(
            terminal
                .iter()
                .map(|w| (w - initial_wealth) / initial_wealth)
                .collect(),
        ))
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.returns)
    }

    /// Population variance (divisor n).
    pub fn variance(&self) -> f64 {
        population_variance(&self.returns)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn require(len: usize, required: usize) -> Result<()> {
    if len < required {
        return Err(Error::InsufficientSample { len, required });
    }
    Ok(())
}

/// Certainty equivalent `mean - gamma * var` of the return sample.
pub fn ceq(sample: &ReturnSample, gamma: f64) -> Result<f64> {
    require(sample.len(), 2)?;
    Ok(sample.mean() - gamma * sample.variance())
}

/// `(mean - r) / std`, population standard deviation.
pub fn sharpe(sample: &ReturnSample, risk_free: f64) -> Result<f64> {
    require(sample.len(), 2)?;
    let r = sample.returns();
    let sd = sample.variance().sqrt();
    if r.iter().all(|x| *x == r[0]) || !(sd > 0.0) {
        return Err(Error::UndefinedRatio(
            "return sample has zero standard deviation",
        ));
    }
    Ok((sample.mean() - risk_free) / sd)
}

/// Sum over `i = 1 .. N-1` of `|theta_{i-1} S_i / S_{i-1} / W_i - theta_i / W_i|`.
///
/// The `i = N` term (liquidation at the horizon) is excluded. Steps flagged
/// as carried hold the drifted position without trading and add zero.
pub fn turnover(ledger: &WealthLedger, path: &PricePath) -> Result<f64> {
    let s = path.horizon_prices();
    let n = ledger.steps.len();
    let mut total = 0.0;
    for i in 1..n {
        let step = &ledger.steps[i];
        if step.carried {
            continue;
        }
        let w = ledger.wealth[i];
        if w == 0.0 {
            return Err(Error::DegenerateWeight(i));
        }
        let drifted = ledger.steps[i - 1].theta * s[i] / s[i - 1] / w;
        total += (drifted - step.theta / w).abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's t-test for equal means of two independent samples.
pub fn welch_test(x: &[f64], y: &[f64]) -> Result<WelchTest> {
    require(x.len(), 2)?;
    require(y.len(), 2)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    let (vx, vy) = (sample_variance(x) / nx, sample_variance(y) / ny);
    if constant(x) || constant(y) || !(vx > 0.0 && vy > 0.0) {
        return Err(Error::DegenerateVariance(
            "Welch test needs both samples to vary",
        ));
    }
    let se2 = vx + vy;
    let t = (mean(x) - mean(y)) / se2.sqrt();
    let df = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|_| Error::DegenerateVariance("Welch degrees of freedom"))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchTest { t, df, p })
}

/// Aggregate statistics of one strategy across a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub paths: usize,
    pub mean_return: f64,
    pub mean_terminal_wealth: f64,
    pub median_terminal_wealth: f64,
    /// None with fewer than two paths.
    pub ceq: Option<f64>,
    /// None with fewer than two paths or zero dispersion.
    pub sharpe: Option<f64>,
    /// Mean over paths where turnover is defined.
    pub turnover: Option<f64>,
    /// Population standard deviation of the per-path mean CP.
    pub cp_dispersion: Option<f64>,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(
    strategy: Strategy,
    outcomes: &[StrategyOutcome],
    prefs: &RiskPreferences,
) -> StrategySummary {
    let returns: Vec<f64> = outcomes.iter().map(|o| o.simple_return).collect();
    let terminal: Vec<f64> = outcomes.iter().map(|o| o.terminal_wealth).collect();
    let sample = ReturnSample::new(returns);
    let tr: Vec<f64> = outcomes.iter().filter_map(|o| o.turnover).collect();
    let cp: Vec<f64> = outcomes.iter().filter_map(|o| o.mean_cp).collect();
    StrategySummary {
        strategy,
        paths: outcomes.len(),
        mean_return: sample.mean(),
        mean_terminal_wealth: mean(&terminal),
        median_terminal_wealth: median(&terminal),
        ceq: ceq(&sample, prefs.gamma).ok(),
        sharpe: sharpe(&sample, prefs.risk_free).ok(),
        turnover: (!tr.is_empty()).then(|| mean(&tr)),
        cp_dispersion: (cp.len() >= 2).then(|| population_variance(&cp).sqrt()),
    }
}
