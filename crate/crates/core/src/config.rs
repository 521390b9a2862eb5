//! Experiment configuration: a flat `key = value` file with `#` comments,
//! overridden by command-line values, over built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::backtest::BacktestConfig;
use crate::error::{Error, Result};
use crate::estimators::EstimationWindow;
use crate::market::{HestonParams, TimeGrid};
use crate::strategies::{PremiumSign, RiskPreferences, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Table1,
    Gbm,
    Heston,
    ApTraces,
    Real,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::Gbm => "gbm",
            ExperimentKind::Heston => "heston",
            ExperimentKind::ApTraces => "ap-traces",
            ExperimentKind::Real => "real",
        }
    }

    fn default_strategies(&self) -> &'static str {
        match self {
            ExperimentKind::Gbm => "A,B",
            ExperimentKind::Real => "A+N,A,B,N",
            _ => "A,B,N,T",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(ExperimentKind::Table1),
            "gbm" => Ok(ExperimentKind::Gbm),
            "heston" => Ok(ExperimentKind::Heston),
            "ap-traces" => Ok(ExperimentKind::ApTraces),
            "real" => Ok(ExperimentKind::Real),
            other => Err(Error::Config(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Every key the resolver understands, with its default.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("gamma", "1.4"),
    ("risk_free", "0.02"),
    ("horizon", "1"),
    ("steps", "252"),
    ("lookback", "252"),
    ("burn_in", "auto"),
    ("initial_wealth", "1"),
    ("paths", "10000"),
    ("seed", "20240101"),
    ("strategies", "auto"),
    ("sigma_threshold", "0.1"),
    ("premium_sign", "signed"),
    ("mu", "0.1"),
    ("sigma", "0.1"),
    ("heston_slope", "8.5"),
    ("heston_reversion", "40,42.5,45"),
    ("heston_long_run_variance", "0.01"),
    ("heston_vol_of_vol", "0.6"),
    ("heston_correlation", "-0.6,-0.7,-0.8"),
    ("heston_initial_variance", "0.02"),
    ("table1_dt", "21/252,12/252,1/252"),
    ("table1_mu", "0.08,0.1,0.12"),
    ("table1_sigma", "0.1"),
    ("trace_samples", "10"),
    ("prices", ""),
    ("close_kind", "unspecified"),
    ("keep_ledgers", "false"),
];

/// Raw key/value layers before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim().to_string();
            if !DEFAULTS.iter().any(|(d, _)| *d == key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !DEFAULTS.iter().any(|(d, _)| *d == key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// `key=value` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `self` over `base`.
    pub fn layered_over(&self, base: &ConfigMap) -> ConfigMap {
        let mut values = base.values.clone();
        values.extend(self.values.clone());
        ConfigMap { values }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// Number or ratio such as `21/252`.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    match v.split_once('/') {
        Some((a, b)) => Ok(parse_num::<f64>(key, a.trim())? / parse_num::<f64>(key, b.trim())?),
        None => parse_num(key, v),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_real(key, x.trim())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub prefs: RiskPreferences,
    pub horizon: f64,
    pub steps: usize,
    pub lookback: usize,
    pub burn_in: usize,
    pub initial_wealth: f64,
    pub paths: usize,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub sigma_threshold: f64,
    pub premium_sign: PremiumSign,
    pub mu: f64,
    pub sigma: f64,
    pub heston: HestonParams,
    pub heston_reversion: Vec<f64>,
    pub heston_correlation: Vec<f64>,
    pub table1_dt: Vec<f64>,
    pub table1_mu: Vec<f64>,
    pub table1_sigma: f64,
    pub trace_samples: usize,
    pub prices: Option<PathBuf>,
    pub close_kind: String,
    pub keep_ledgers: bool,
    /// Fully resolved key/value view, echoed into the manifest.
    pub resolved: ConfigMap,
}

impl ExperimentConfig {
    /// Resolves `layers` (highest precedence last) over the defaults.
    pub fn resolve(kind: ExperimentKind, layers: &[&ConfigMap]) -> Result<Self> {
        let mut map = ConfigMap {
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        };
        for layer in layers {
            map = layer.layered_over(&map);
        }
        let raw = map.clone();
        let g = |k: &str| raw.get(k).expect("defaulted").to_string();

        let steps: usize = parse_num("steps", &g("steps"))?;
        let lookback: usize = parse_num("lookback", &g("lookback"))?;
        let burn_in = match g("burn_in").as_str() {
            "auto" => steps + lookback + 1,
            v => parse_num("burn_in", v)?,
        };
        map.set("burn_in", burn_in.to_string())?;
        let sigma_threshold = parse_real("sigma_threshold", &g("sigma_threshold"))?;
        let strategies_src = match g("strategies").as_str() {
            "auto" => kind.default_strategies().to_string(),
            v => v.to_string(),
        };
        map.set("strategies", strategies_src.clone())?;
        let strategies = Strategy::parse_list(&strategies_src, sigma_threshold)?;
        let keep_ledgers = match g("keep_ledgers").as_str() {
            "true" => true,
            "false" => false,
            v => {
                return Err(Error::Config(format!(
                    "keep_ledgers: expected true|false, got {v:?}"
                )))
            }
        };
        let prices = match g("prices").as_str() {
            "" => None,
            v => Some(PathBuf::from(v)),
        };
        let base = HestonParams::typical();
        let cfg = Self {
            kind,
            prefs: RiskPreferences::new(
                parse_real("gamma", &g("gamma"))?,
                parse_real("risk_free", &g("risk_free"))?,
            )?,
            horizon: parse_real("horizon", &g("horizon"))?,
            steps,
            lookback,
            burn_in,
            initial_wealth: parse_real("initial_wealth", &g("initial_wealth"))?,
            paths: parse_num("paths", &g("paths"))?,
            seed: parse_num("seed", &g("seed"))?,
            strategies,
            sigma_threshold,
            premium_sign: g("premium_sign").parse()?,
            mu: parse_real("mu", &g("mu"))?,
            sigma: parse_real("sigma", &g("sigma"))?,
            heston: HestonParams {
                slope: parse_real("heston_slope", &g("heston_slope"))?,
                long_run_variance: parse_real(
                    "heston_long_run_variance",
                    &g("heston_long_run_variance"),
                )?,
                vol_of_vol: parse_real("heston_vol_of_vol", &g("heston_vol_of_vol"))?,
                initial_variance: parse_real(
                    "heston_initial_variance",
                    &g("heston_initial_variance"),
                )?,
                ..base
            },
            heston_reversion: parse_list("heston_reversion", &g("heston_reversion"))?,
            heston_correlation: parse_list("heston_correlation", &g("heston_correlation"))?,
            table1_dt: parse_list("table1_dt", &g("table1_dt"))?,
            table1_mu: parse_list("table1_mu", &g("table1_mu"))?,
            table1_sigma: parse_real("table1_sigma", &g("table1_sigma"))?,
            trace_samples: parse_num("trace_samples", &g("trace_samples"))?,
            prices,
            close_kind: g("close_kind"),
            keep_ledgers,
            resolved: map,
        };
        if cfg.paths == 0 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        if kind == ExperimentKind::Real && cfg.prices.is_none() {
            return Err(Error::Config(
                "the real experiment needs a price file (prices = ...)".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn backtest(&self) -> Result<BacktestConfig> {
        let window = EstimationWindow::new(self.lookback)?;
        let grid = TimeGrid::new(self.horizon, self.steps, self.burn_in)?;
        let cfg = BacktestConfig {
            grid,
            window,
            prefs: self.prefs,
            strategy: self
                .strategies
                .first()
                .copied()
                .unwrap_or(Strategy::BuyAndHold),
            initial_wealth: self.initial_wealth,
            premium_sign: self.premium_sign,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` lines of the resolved configuration, sorted by key.
    pub fn echo(&self) -> String {
        self.resolved
            .values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::resolve(ExperimentKind::Heston, &[]).expect("defaults resolve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::resolve(ExperimentKind::Heston, &[]).unwrap();
        assert_eq!(c.prefs.gamma, 1.4);
        assert_eq!(c.prefs.risk_free, 0.02);
        assert_eq!(
            (c.horizon, c.steps, c.lookback, c.burn_in),
            (1.0, 252, 252, 505)
        );
        assert_eq!(c.initial_wealth, 1.0);
        assert_eq!(c.paths, 10_000);
        assert_eq!(c.heston_reversion, vec![40.0, 42.5, 45.0]);
        assert_eq!(c.table1_dt[0], 21.0 / 252.0);
        assert_eq!(c.strategies.len(), 4);
    }

    #[test]
    fn precedence_cli_over_file_over_default() {
        let file =
            ConfigMap::parse("# campaign\ngamma = 2.0\npaths = 50 # small\nseed=7\n").unwrap();
        let mut cli = ConfigMap::default();
        cli.set("paths", "3").unwrap();
        let c = ExperimentConfig::resolve(ExperimentKind::Gbm, &[&file, &cli]).unwrap();
        assert_eq!(c.prefs.gamma, 2.0);
        assert_eq!(c.paths, 3);
        assert_eq!(c.seed, 7);
        assert_eq!(c.prefs.risk_free, 0.02);
        assert!(c.echo().contains("paths = 3\n"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ConfigMap::parse("gama = 1").is_err());
        assert!(ConfigMap::parse("gamma 1").is_err());
        let bad = ConfigMap::parse("gamma = x").unwrap();
        assert!(ExperimentConfig::resolve(ExperimentKind::Heston, &[&bad]).is_err());
        assert!(ExperimentConfig::resolve(ExperimentKind::Real, &[]).is_err());
        assert!("bogus".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn backtest_config_from_defaults() {
        let c = ExperimentConfig::default().backtest().unwrap();
        assert_eq!(c.grid.burn_in(), 505);
        assert_eq!(c.window.lookback(), 252);
    }
}
