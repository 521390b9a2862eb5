//! Discounted risky-asset price paths.
//!
//! Simulated markets are GBM (constant or deterministic time-varying
//! coefficients) and Heston. Real closes are turned into a [`PricePath`]
//! by [`discount_prices`]. Every path lives on a [`TimeGrid`] whose step
//! `k` runs from `-burn_in` to `steps`; `t_k = k * dt`, so the investment
//! horizon starts at `k = 0` and everything before it is estimation history.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Floor applied to the Heston variance when it is reported as a volatility.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Equally spaced grid over `[-burn_in * dt, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    burn_in: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, burn_in: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one step is required".into()));
        }
        Ok(Self {
            horizon,
            steps,
            burn_in,
        })
    }

    /// Grid with a fixed step length, e.g. one trading day = 1/252 years.
    pub fn with_dt(dt: f64, steps: usize, burn_in: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        Self::new(dt * steps as f64, steps, burn_in)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Number of grid points, burn-in included.
    pub fn len(&self) -> usize {
        self.burn_in + self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_step(&self) -> isize {
        -(self.burn_in as isize)
    }

    pub fn time(&self, step: isize) -> f64 {
        step as f64 * self.dt()
    }

    /// Array index of grid step `step`, if it lies on the grid.
    pub fn index(&self, step: isize) -> Option<usize> {
        let idx = step + self.burn_in as isize;
        if idx < 0 || idx as usize >= self.len() {
            None
        } else {
            Some(idx as usize)
        }
    }

    pub fn step_of(&self, index: usize) -> isize {
        index as isize - self.burn_in as isize
    }
}

/// Deterministic coefficient `t -> value`, evaluated in years.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FunctionalGbm {
    pub mu: Coefficient,
    pub sigma: Coefficient,
}

impl fmt::Debug for FunctionalGbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FunctionalGbm { .. }")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    /// `a`: excess drift per unit of variance.
    pub slope: f64,
    /// `iota`: mean-reversion speed of the variance.
    pub reversion: f64,
    /// `k`: long-run variance level.
    pub long_run_variance: f64,
    /// `v`: volatility of variance.
    pub vol_of_vol: f64,
    /// `kappa`: correlation between the price and variance shocks.
    pub correlation: f64,
    /// `X0`: variance at the first grid point.
    pub initial_variance: f64,
}

impl HestonParams {
    /// `a = 8.5, iota = 42.5, k = 0.01, v = 0.6, kappa = -0.7, X0 = 0.02`.
    pub fn typical() -> Self {
        Self {
            slope: 8.5,
            reversion: 42.5,
            long_run_variance: 0.01,
            vol_of_vol: 0.6,
            correlation: -0.7,
            initial_variance: 0.02,
        }
    }
}

#[derive(Debug, Clone)]
pub enum MarketModel {
    ConstantGbm { mu: f64, sigma: f64 },
    FunctionalGbm(FunctionalGbm),
    Heston(HestonParams),
}

/// Generative model of the discounted risky asset plus the risk-free rate.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    pub risk_free: f64,
    pub initial_price: f64,
    pub model: MarketModel,
}

impl MarketSpec {
    pub fn constant_gbm(mu: f64, sigma: f64, risk_free: f64) -> Self {
        Self {
            risk_free,
            initial_price: 1.0,
            model: MarketModel::ConstantGbm { mu, sigma },
        }
    }

    pub fn functional_gbm(
        mu: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        risk_free: f64,
    ) -> Self {
        Self {
            risk_free,
            initial_price: 1.0,
            model: MarketModel::FunctionalGbm(FunctionalGbm {
                mu: Arc::new(mu),
                sigma: Arc::new(sigma),
            }),
        }
    }

    pub fn heston(params: HestonParams, risk_free: f64) -> Self {
        Self {
            risk_free,
            initial_price: 1.0,
            model: MarketModel::Heston(params),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_price.is_finite() && self.initial_price > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "initial price must be positive, got {}",
                self.initial_price
            )));
        }
        if !self.risk_free.is_finite() {
            return Err(Error::InvalidSpec("risk-free rate must be finite".into()));
        }
        match &self.model {
            MarketModel::ConstantGbm { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidSpec("mu must be finite".into()));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "sigma must be positive, got {sigma}"
                    )));
                }
            }
            MarketModel::FunctionalGbm(_) => {}
            MarketModel::Heston(p) => {
                if !(p.initial_variance > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "initial variance must be positive, got {}",
                        p.initial_variance
                    )));
                }
                if !(p.reversion >= 0.0) {
                    return Err(Error::InvalidSpec(
                        "mean-reversion speed must be >= 0".into(),
                    ));
                }
                if !(p.vol_of_vol >= 0.0) {
                    return Err(Error::InvalidSpec("vol-of-vol must be >= 0".into()));
                }
                if !(-1.0..=1.0).contains(&p.correlation) {
                    return Err(Error::InvalidSpec(format!(
                        "correlation must lie in [-1, 1], got {}",
                        p.correlation
                    )));
                }
                if !(p.long_run_variance.is_finite() && p.slope.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "Heston parameters must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// True instantaneous coefficients at a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPoint {
    pub mu: f64,
    pub sigma: f64,
}

/// Discounted prices on a [`TimeGrid`], burn-in history first.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    grid: TimeGrid,
    prices: Vec<f64>,
    truth: Option<Vec<TruthPoint>>,
}

impl PricePath {
    pub fn new(grid: TimeGrid, prices: Vec<f64>, truth: Option<Vec<TruthPoint>>) -> Result<Self> {
        if prices.len() != grid.len() {
            return Err(Error::ShortSeries {
                len: prices.len(),
                required: grid.len(),
            });
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Data {
                index: i,
                reason: format!("price must be positive and finite, got {}", prices[i]),
            });
        }
        if let Some(t) = &truth {
            if t.len() != prices.len() {
                return Err(Error::Data {
                    index: t.len().min(prices.len()),
                    reason: "truth series length differs from price series".into(),
                });
            }
        }
        Ok(Self {
            grid,
            prices,
            truth,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn truth(&self) -> Option<&[TruthPoint]> {
        self.truth.as_deref()
    }

    /// Price at grid step `step`; `None` off the grid.
    pub fn price(&self, step: isize) -> Option<f64> {
        self.grid.index(step).map(|i| self.prices[i])
    }

    pub fn truth_at(&self, step: isize) -> Option<TruthPoint> {
        let i = self.grid.index(step)?;
        self.truth.as_ref().map(|t| t[i])
    }

    /// Prices of the investment horizon, `k = 0 ..= steps`.
    pub fn horizon_prices(&self) -> &[f64] {
        &self.prices[self.grid.burn_in()..]
    }

    /// Sub-path whose horizon starts at array index `start` of this path.
    pub fn window(&self, start: usize, burn_in: usize, steps: usize) -> Result<PricePath> {
        let required = burn_in + steps + 1;
        if start < burn_in || start + steps >= self.prices.len() {
            return Err(Error::ShortSeries {
                len: self.prices.len(),
                required: start.max(burn_in) + steps + 1,
            });
        }
        let grid = TimeGrid::with_dt(self.grid.dt(), steps, burn_in)?;
        let lo = start - burn_in;
        let prices = self.prices[lo..lo + required].to_vec();
        let truth = self.truth.as_ref().map(|t| t[lo..lo + required].to_vec());
        Ok(PricePath {
            grid,
            prices,
            truth,
        })
    }

    /// FNV-1a over the price bit patterns; used to check that paired
    /// strategies saw the same path.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.prices {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Per-path random stream identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub fn new(master: u64, path: u64) -> Self {
        Self { master, path }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.path);
        rng
    }

    pub fn normals(&self) -> SeededNormals {
        SeededNormals(self.rng())
    }
}

/// Source of standard normal draws for the simulators.
pub trait NormalDraws {
    fn next_normal(&mut self) -> f64;
}

pub struct SeededNormals(ChaCha8Rng);

impl NormalDraws for SeededNormals {
    fn next_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
}

/// Replays a fixed list of draws. Panics once the list is exhausted.
#[derive(Debug, Clone)]
pub struct ScriptedNormals {
    draws: Vec<f64>,
    pos: usize,
}

impl ScriptedNormals {
    pub fn new(draws: Vec<f64>) -> Self {
        Self { draws, pos: 0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }
}

impl NormalDraws for ScriptedNormals {
    fn next_normal(&mut self) -> f64 {
        let z = self.draws[self.pos];
        self.pos += 1;
        z
    }
}

pub fn simulate_gbm_path(spec: &MarketSpec, grid: &TimeGrid, seed: PathSeed) -> Result<PricePath> {
    simulate_gbm_path_with(spec, grid, &mut seed.normals())
}

/// Exact log-normal stepping:
/// `S' = S exp((mu(t) - r - sigma(t)^2 / 2) dt + sigma(t) sqrt(dt) Z)`.
pub fn simulate_gbm_path_with(
    spec: &MarketSpec,
    grid: &TimeGrid,
    draws: &mut impl NormalDraws,
) -> Result<PricePath> {
    spec.validate()?;
    let r = spec.risk_free;
    let coeff: Box<dyn Fn(f64) -> (f64, f64)> = match &spec.model {
        MarketModel::ConstantGbm { mu, sigma } => {
            let (mu, sigma) = (*mu, *sigma);
            Box::new(move |_| (mu, sigma))
        }
        MarketModel::FunctionalGbm(f) => {
            let f = f.clone();
            Box::new(move |t| ((f.mu)(t), (f.sigma)(t)))
        }
        MarketModel::Heston(_) => {
            return Err(Error::InvalidSpec(
                "GBM simulator called with a Heston model".into(),
            ))
        }
    };

    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let n = grid.len();
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let (mu, sigma) = coeff(grid.time(grid.step_of(i)));
        if !(sigma.is_finite() && sigma > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sigma must be positive at t = {}, got {sigma}",
                grid.time(grid.step_of(i))
            )));
        }
        truth.push(TruthPoint { mu, sigma });
    }

    let mut prices = Vec::with_capacity(n);
    let mut s = spec.initial_price;
    prices.push(s);
    for tp in &truth[..n - 1] {
        let z = draws.next_normal();
        s *= ((tp.mu - r - 0.5 * tp.sigma * tp.sigma) * dt + tp.sigma * sqrt_dt * z).exp();
        prices.push(s);
    }
    PricePath::new(*grid, prices, Some(truth))
}

/// A Heston price path together with its simulated variance.
#[derive(Debug, Clone)]
pub struct HestonPath {
    pub path: PricePath,
    pub variance: Vec<f64>,
}

pub fn simulate_heston_path(
    spec: &MarketSpec,
    grid: &TimeGrid,
    seed: PathSeed,
) -> Result<PricePath> {
    Ok(simulate_heston_with(spec, grid, &mut seed.normals())?.path)
}

/// Full-truncation Euler for the variance, log-Euler for the price.
///
/// Each step consumes two draws, `z1` (price shock) then `z2`; the variance
/// shock is `kappa z1 + sqrt(1 - kappa^2) z2`. `max(X, 0)` replaces `X`
/// everywhere it enters a drift or diffusion coefficient.
pub fn simulate_heston_with(
    spec: &MarketSpec,
    grid: &TimeGrid,
    draws: &mut impl NormalDraws,
) -> Result<HestonPath> {
    spec.validate()?;
    let p = match &spec.model {
        MarketModel::Heston(p) => *p,
        _ => {
            return Err(Error::InvalidSpec(
                "Heston simulator called with a GBM model".into(),
            ))
        }
    };
    let r = spec.risk_free;
    let dt = grid.dt();
    let n = grid.len();
    let ortho = (1.0 - p.correlation * p.correlation).max(0.0).sqrt();

    let mut prices = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let (mut s, mut x) = (spec.initial_price, p.initial_variance);
    for i in 0..n {
        let xp = x.max(0.0);
        prices.push(s);
        variance.push(x);
        truth.push(TruthPoint {
            mu: p.slope * xp + r,
            sigma: x.max(VARIANCE_FLOOR).sqrt(),
        });
        if i + 1 == n {
            break;
        }
        let z1 = draws.next_normal();
        let z2 = draws.next_normal();
        let diffusion = (xp * dt).sqrt();
        s *= ((p.slope * xp - 0.5 * xp) * dt + diffusion * z1).exp();
        x += p.reversion * (p.long_run_variance - xp) * dt
            + p.vol_of_vol * diffusion * (p.correlation * z1 + ortho * z2);
    }
    Ok(HestonPath {
        path: PricePath::new(*grid, prices, Some(truth))?,
        variance,
    })
}

/// Simulates one path with the simulator matching the spec's model.
pub fn simulate_path(spec: &MarketSpec, grid: &TimeGrid, seed: PathSeed) -> Result<PricePath> {
    match spec.model {
        MarketModel::Heston(_) => simulate_heston_path(spec, grid, seed),
        _ => simulate_gbm_path(spec, grid, seed),
    }
}

/// Deflates raw prices by `exp(-r t)`, with `t` measured from the first
/// observation of the series.
pub fn discount_prices(raw: &[f64], grid: &TimeGrid, r: f64) -> Result<PricePath> {
    if raw.len() != grid.len() {
        return Err(Error::ShortSeries {
            len: raw.len(),
            required: grid.len(),
        });
    }
    let dt = grid.dt();
    let mut prices = Vec::with_capacity(raw.len());
    for (i, &p) in raw.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Data {
                index: i,
                reason: format!("raw price must be positive, got {p}"),
            });
        }
        prices.push(p * (-r * i as f64 * dt).exp());
    }
    PricePath::new(*grid, prices, None)
}
