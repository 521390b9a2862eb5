//! Windowed MLE of drift and volatility, the auxiliary time-consistent
//! wealth process, and the average/current profitability (AP/CP)
//! estimators built on its realized quadratic variation.
//!
//! Notation used throughout: `k` is a grid step (negative inside burn-in),
//! `M` is [`EstimationWindow::lookback`], `N`/`T` are the horizon steps and
//! length of the path's grid.
//!
//! * MLE at step `k` averages the `M + 1` log-returns
//!   `ln(S_{i+1}/S_i)`, `i = k-1-M ..= k-1`, so it reads prices
//!   `S_{k-1-M} ..= S_k`.
//! * The auxiliary position is `(mu_hat - r) / sigma_hat^2` and its wealth
//!   increment over `[t_i, t_{i+1}]` is `theta_i (S_{i+1} - S_i) / S_i`.
//! * AP at step `k` is `(1/T) (sum_{i=0}^{k-1} + sum_{i=2k-N}^{k-1}) dW_i^2`:
//!   realized variation so far plus the mirror window standing in for the
//!   unobserved remainder of the horizon.
//! * CP at step `k` is the AP estimate at `k`.

use crate::error::{Error, Result};
use crate::market::PricePath;

/// Volatility floor (per year) for any position that divides by `sigma_hat^2`.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimationWindow {
    lookback: usize,
}

impl EstimationWindow {
    pub fn new(lookback: usize) -> Result<Self> {
        if lookback == 0 {
            return Err(Error::Config("estimation window needs M >= 1".into()));
        }
        Ok(Self { lookback })
    }

    /// `M`.
    pub fn lookback(&self) -> usize {
        self.lookback
    }

    /// Number of log-returns averaged: `M + 1`.
    pub fn returns(&self) -> usize {
        self.lookback + 1
    }

    /// Earliest price step read by an estimate at `step`.
    pub fn first_price_step(&self, step: isize) -> isize {
        step - 1 - self.lookback as isize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEstimate {
    pub step: isize,
    /// Per-year log drift.
    pub alpha: f64,
    /// Per-year squared volatility.
    pub beta: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Set when every return in the window is identical (`beta == 0`).
    pub degenerate: bool,
}

impl ParamEstimate {
    /// `(mu_hat - r) / sigma_hat` with the volatility floor applied.
    pub fn premium(&self, r: f64) -> f64 {
        (self.mu - r) / self.sigma.max(SIGMA_FLOOR)
    }
}

fn check_history(path: &PricePath, step: isize, needed: isize) -> Result<()> {
    let first = path.grid().first_step();
    if needed < first {
        return Err(Error::Window {
            step,
            needed,
            available: first,
        });
    }
    if path.grid().index(step).is_none() {
        return Err(Error::Window {
            step,
            needed: step,
            available: first,
        });
    }
    Ok(())
}

fn mle_from_log_returns(log_returns: &[f64], step: isize, dt: f64, r: f64) -> ParamEstimate {
    let n = log_returns.len() as f64;
    let alpha = log_returns.iter().sum::<f64>() / (n * dt);
    let beta = log_returns
        .iter()
        .map(|lr| {
            let d = lr - alpha * dt;
            d * d
        })
        .sum::<f64>()
        / (n * dt);
    ParamEstimate {
        step,
        alpha,
        beta,
        mu: alpha + r + 0.5 * beta,
        sigma: beta.sqrt(),
        degenerate: beta <= 0.0,
    }
}

/// MLE of `(mu, sigma)` at grid step `step` from the window ending there.
pub fn mle_estimate(
    path: &PricePath,
    step: isize,
    window: &EstimationWindow,
    r: f64,
) -> Result<ParamEstimate> {
    let first = window.first_price_step(step);
    check_history(path, step, first)?;
    let grid = path.grid();
    let lo = grid.index(first).expect("checked");
    let hi = grid.index(step).expect("checked");
    let prices = &path.prices()[lo..=hi];
    let lr: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(mle_from_log_returns(&lr, step, grid.dt(), r))
}

/// MLE estimates for every step in `from..to`, sharing one pass of log-returns.
pub fn mle_track(
    path: &PricePath,
    window: &EstimationWindow,
    r: f64,
    from: isize,
    to: isize,
) -> Result<Vec<ParamEstimate>> {
    if to <= from {
        return Ok(Vec::new());
    }
    check_history(path, from, window.first_price_step(from))?;
    check_history(path, to - 1, window.first_price_step(to - 1))?;
    let grid = path.grid();
    let lr: Vec<f64> = path
        .prices()
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let m1 = window.returns();
    let dt = grid.dt();
    Ok((from..to)
        .map(|k| {
            // returns i = k-1-M ..= k-1 sit at array positions index(i)
            let end = grid.index(k).expect("checked");
            mle_from_log_returns(&lr[end - m1..end], k, dt, r)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxPosition {
    pub theta: f64,
    /// `sigma_hat` was below [`SIGMA_FLOOR`] and was replaced by it.
    pub floored: bool,
}

/// Time-consistent auxiliary position `(mu_hat - r) / sigma_hat^2`.
pub fn aux_position(est: &ParamEstimate, r: f64) -> AuxPosition {
    let floored = est.sigma < SIGMA_FLOOR;
    let sigma = est.sigma.max(SIGMA_FLOOR);
    AuxPosition {
        theta: (est.mu - r) / (sigma * sigma),
        floored,
    }
}

/// Where the auxiliary position comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxSource {
    /// Windowed MLE at each step (the implementable estimator).
    Estimated(EstimationWindow),
    /// True `(mu(t) - r) / sigma(t)^2` from the path's truth fields.
    Truth,
}

impl AuxSource {
    /// Earliest price step read when the aux position at `step` is formed.
    fn first_price_step(&self, step: isize) -> isize {
        match self {
            AuxSource::Estimated(w) => w.first_price_step(step),
            AuxSource::Truth => step,
        }
    }
}

/// Auxiliary discounted wealth on steps `start ..= start + increments.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxWealthSeries {
    pub start: isize,
    pub theta: Vec<f64>,
    /// Starts at 0; `wealth[j + 1] = wealth[j] + increments[j]`.
    pub wealth: Vec<f64>,
    pub increments: Vec<f64>,
    pub floored: Vec<bool>,
}

impl AuxWealthSeries {
    pub fn end(&self) -> isize {
        self.start + self.increments.len() as isize
    }

    /// Increment over `[t_step, t_{step+1}]`.
    pub fn increment(&self, step: isize) -> Option<f64> {
        let j = step - self.start;
        (j >= 0)
            .then(|| self.increments.get(j as usize).copied())
            .flatten()
    }
}

/// Auxiliary wealth over steps `from..to` (increments for `i in from..to`).
pub fn build_aux_wealth(
    path: &PricePath,
    source: AuxSource,
    r: f64,
    from: isize,
    to: isize,
) -> Result<AuxWealthSeries> {
    let to = to.max(from);
    if to > from {
        check_history(path, from, source.first_price_step(from))?;
        // the last increment reads S_to
        check_history(path, to, to)?;
    }
    let positions: Vec<AuxPosition> = match source {
        AuxSource::Estimated(window) => mle_track(path, &window, r, from, to)?
            .iter()
            .map(|e| aux_position(e, r))
            .collect(),
        AuxSource::Truth => {
            let truth = path
                .truth()
                .ok_or(Error::MissingTruth("truth-fed auxiliary"))?;
            (from..to)
                .map(|k| {
                    let tp = truth[path.grid().index(k).expect("checked")];
                    let floored = tp.sigma < SIGMA_FLOOR;
                    let s = tp.sigma.max(SIGMA_FLOOR);
                    AuxPosition {
                        theta: (tp.mu - r) / (s * s),
                        floored,
                    }
                })
                .collect()
        }
    };
    let grid = path.grid();
    let prices = path.prices();
    let mut theta = Vec::with_capacity(positions.len());
    let mut floored = Vec::with_capacity(positions.len());
    let mut increments = Vec::with_capacity(positions.len());
    let mut wealth = Vec::with_capacity(positions.len() + 1);
    wealth.push(0.0);
    for (pos, k) in positions.iter().zip(from..to) {
        let i = grid.index(k).expect("checked");
        let inc = pos.theta * (prices[i + 1] - prices[i]) / prices[i];
        theta.push(pos.theta);
        floored.push(pos.floored);
        increments.push(inc);
        wealth.push(wealth.last().copied().unwrap_or(0.0) + inc);
    }
    Ok(AuxWealthSeries {
        start: from,
        theta,
        wealth,
        increments,
        floored,
    })
}

/// Realized quadratic variation: the sum of squared increments.
pub fn quadratic_variation(increments: &[f64]) -> f64 {
    increments.iter().map(|d| d * d).sum()
}

fn mirror_start(step: isize, steps: usize) -> isize {
    2 * step - steps as isize
}

fn check_ap_step(step: isize, steps: usize) -> Result<()> {
    if step < 0 || step > steps as isize {
        return Err(Error::Config(format!(
            "AP is estimated for steps 0..={steps}, got {step}"
        )));
    }
    Ok(())
}

/// AP estimate `K_hat(0, T)` at step `step` of the path's horizon.
pub fn estimate_ap(path: &PricePath, step: isize, source: AuxSource, r: f64) -> Result<f64> {
    let grid = path.grid();
    let n = grid.steps();
    check_ap_step(step, n)?;
    let mirror = mirror_start(step, n);
    let aux = build_aux_wealth(path, source, r, mirror.min(0), step)?;
    let realized: f64 = (0..step)
        .map(|i| aux.increment(i).expect("built").powi(2))
        .sum();
    let future: f64 = (mirror..step)
        .map(|i| aux.increment(i).expect("built").powi(2))
        .sum();
    Ok((realized + future) / grid.horizon())
}

/// CP estimate: the current AP estimate.
pub fn estimate_cp(k_hat: f64) -> f64 {
    k_hat
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitabilityEstimate {
    pub step: isize,
    pub k_hat: f64,
    pub a_hat: f64,
}

/// AP/CP for every horizon step from one auxiliary wealth series over
/// `[-N, N)`, answered in O(1) per step from running sums of `dW^2`.
#[derive(Debug, Clone)]
pub struct ProfitabilityTrack {
    steps: usize,
    horizon: f64,
    /// `cum[j] = sum of dW_i^2 for i in -N .. -N + j`.
    cum: Vec<f64>,
    aux: AuxWealthSeries,
}

impl ProfitabilityTrack {
    pub fn new(path: &PricePath, source: AuxSource, r: f64) -> Result<Self> {
        let grid = path.grid();
        let n = grid.steps() as isize;
        let aux = build_aux_wealth(path, source, r, -n, n)?;
        let mut cum = Vec::with_capacity(aux.increments.len() + 1);
        let mut acc = 0.0;
        cum.push(acc);
        for d in &aux.increments {
            acc += d * d;
            cum.push(acc);
        }
        Ok(Self {
            steps: grid.steps(),
            horizon: grid.horizon(),
            cum,
            aux,
        })
    }

    fn cum_before(&self, step: isize) -> f64 {
        self.cum[(step + self.steps as isize) as usize]
    }

    pub fn ap(&self, step: isize) -> f64 {
        assert!(
            (0..=self.steps as isize).contains(&step),
            "AP step {step} outside 0..={}",
            self.steps
        );
        let now = self.cum_before(step);
        let realized = now - self.cum_before(0);
        let future = now - self.cum_before(mirror_start(step, self.steps));
        (realized + future) / self.horizon
    }

    pub fn estimate(&self, step: isize) -> ProfitabilityEstimate {
        let k_hat = self.ap(step);
        ProfitabilityEstimate {
            step,
            k_hat,
            a_hat: estimate_cp(k_hat),
        }
    }

    pub fn aux(&self) -> &AuxWealthSeries {
        &self.aux
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorReductionOutcome {
    /// Hypotheses hold and the volatility-corrected estimate is closer.
    Holds,
    /// Hypotheses hold but the inequality does not.
    Fails,
    /// `sigma^2 < sigma_hat^2` or `2 premium^2 < premium_hat^2` is violated.
    NotApplicable,
}

/// Compares `|premium_hat^2 sigma^2/sigma_hat^2 - premium^2|` against
/// `|premium_hat^2 - premium^2|` when the error-reduction hypotheses hold.
pub fn error_reduction_holds(
    mu: f64,
    sigma: f64,
    mu_hat: f64,
    sigma_hat: f64,
    r: f64,
) -> ErrorReductionOutcome {
    let p2 = ((mu - r) / sigma).powi(2);
    let ph2 = ((mu_hat - r) / sigma_hat).powi(2);
    let (s2, sh2) = (sigma * sigma, sigma_hat * sigma_hat);
    if !(s2 < sh2 && 2.0 * p2 < ph2) {
        return ErrorReductionOutcome::NotApplicable;
    }
    let scaled = (ph2 * s2 / sh2 - p2).abs();
    let raw = (ph2 - p2).abs();
    if scaled < raw {
        ErrorReductionOutcome::Holds
    } else {
        ErrorReductionOutcome::Fails
    }
}
