//! Closed-form position rules.
//!
//! All positions are discounted amounts held in the risky asset; the rest of
//! the wealth sits in the risk-free asset. Positions are unconstrained in
//! sign and size and stay defined for negative wealth.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{ParamEstimate, SIGMA_FLOOR};
use crate::market::PricePath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPreferences {
    pub gamma: f64,
    pub risk_free: f64,
}

impl RiskPreferences {
    pub fn new(gamma: f64, risk_free: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma, risk_free })
    }
}

impl Default for RiskPreferences {
    fn default() -> Self {
        Self {
            gamma: 1.4,
            risk_free: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioState {
    pub wealth: f64,
    pub initial_wealth: f64,
    pub step: isize,
}

/// Default `sigma_hat` threshold of the A+N rule (per year).
pub const DEFAULT_SIGMA_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// "A": AP from the auxiliary wealth's quadratic variation, CP = AP.
    Profitability,
    /// "B": current MLE premium treated as constant over the horizon.
    ConstantPremium,
    /// "N": everything in the risky asset, never rebalanced.
    BuyAndHold,
    /// "T": true coefficients (not attainable in practice).
    TrueParameters,
    /// "A+N": A while `sigma_hat < sigma_threshold`, otherwise N.
    Combined { sigma_threshold: f64 },
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Profitability => "A",
            Strategy::ConstantPremium => "B",
            Strategy::BuyAndHold => "N",
            Strategy::TrueParameters => "T",
            Strategy::Combined { .. } => "A+N",
        }
    }

    pub fn combined() -> Self {
        Strategy::Combined {
            sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
        }
    }

    /// Parses a comma-separated list of tags, e.g. `"A,B,N,T"`.
    pub fn parse_list(s: &str, sigma_threshold: f64) -> Result<Vec<Strategy>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let st: Strategy = t.parse()?;
                Ok(match st {
                    Strategy::Combined { .. } => {
                        if !(sigma_threshold > 0.0) {
                            return Err(Error::Config("A+N threshold must be positive".into()));
                        }
                        Strategy::Combined { sigma_threshold }
                    }
                    other => other,
                })
            })
            .collect()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Strategy::Profitability),
            "B" => Ok(Strategy::ConstantPremium),
            "N" => Ok(Strategy::BuyAndHold),
            "T" => Ok(Strategy::TrueParameters),
            "A+N" | "AN" | "A_PLUS_N" => Ok(Strategy::combined()),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Sign convention applied to `sqrt(CP)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PremiumSign {
    /// `sign(mu_hat - r)`, zero when the estimated premium is exactly zero.
    #[default]
    Signed,
    /// Always `+1`.
    Unsigned,
}

impl PremiumSign {
    pub fn of(&self, excess_drift: f64) -> f64 {
        match self {
            PremiumSign::Unsigned => 1.0,
            PremiumSign::Signed => {
                if excess_drift > 0.0 {
                    1.0
                } else if excess_drift < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for PremiumSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "signed" => Ok(PremiumSign::Signed),
            "unsigned" => Ok(PremiumSign::Unsigned),
            other => Err(Error::Config(format!(
                "premium_sign must be signed|unsigned, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub theta: f64,
    /// Volatility input was below [`SIGMA_FLOOR`] and was replaced by it.
    pub clamped: bool,
}

fn target_gap(state: &PortfolioState, k_hat: f64, prefs: &RiskPreferences, horizon: f64) -> f64 {
    -state.wealth + state.initial_wealth + (k_hat * horizon).exp() / (2.0 * prefs.gamma)
}

/// Pre-commitment optimum written in AP and CP:
/// `(-w + w0 + exp(K T) / (2 gamma)) * sign * sqrt(A) / sigma`.
pub fn theta_precommit(
    state: &PortfolioState,
    k_hat: f64,
    a_hat: f64,
    sigma: f64,
    sign: f64,
    prefs: &RiskPreferences,
    horizon: f64,
) -> Position {
    let clamped = sigma < SIGMA_FLOOR;
    let sigma = sigma.max(SIGMA_FLOOR);
    let gap = target_gap(state, k_hat, prefs, horizon);
    Position {
        theta: gap * sign * a_hat.max(0.0).sqrt() / sigma,
        clamped,
    }
}

/// Constant-coefficient optimum with the current MLE plugged in for the
/// whole horizon.
pub fn theta_strategy_b(
    state: &PortfolioState,
    est: &ParamEstimate,
    prefs: &RiskPreferences,
    horizon: f64,
) -> Position {
    let clamped = est.sigma < SIGMA_FLOOR;
    let sigma = est.sigma.max(SIGMA_FLOOR);
    let excess = est.mu - prefs.risk_free;
    let premium = excess / sigma;
    let gap = target_gap(state, premium * premium, prefs, horizon);
    Position {
        theta: gap * excess / (sigma * sigma),
        clamped,
    }
}

pub fn theta_buy_and_hold(state: &PortfolioState) -> f64 {
    state.wealth
}

/// A+N rule: `theta_a` while `sigma_hat < threshold`, else `theta_n`.
pub fn theta_combined(est: &ParamEstimate, theta_a: f64, theta_n: f64, threshold: f64) -> f64 {
    if est.sigma < threshold {
        theta_a
    } else {
        theta_n
    }
}

/// True CP `((mu(t) - r) / sigma(t))^2` at every grid point of the path.
pub fn true_cp(path: &PricePath, risk_free: f64) -> Result<Vec<f64>> {
    let truth = path.truth().ok_or(Error::MissingTruth("T"))?;
    Ok(truth
        .iter()
        .map(|tp| {
            let p = (tp.mu - risk_free) / tp.sigma.max(SIGMA_FLOOR);
            p * p
        })
        .collect())
}

/// True AP `K(0, T)`: trapezoid rule on the true CP over the horizon grid.
pub fn true_ap(path: &PricePath, risk_free: f64) -> Result<f64> {
    let cp = true_cp(path, risk_free)?;
    let grid = path.grid();
    let h = &cp[grid.burn_in()..];
    let integral: f64 = h.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * grid.dt();
    Ok(integral / grid.horizon())
}
