//! Experiment drivers and their comma-separated outputs.
//!
//! Every run writes `summary.csv`, `ledgers.csv` and `manifest.txt` into
//! the output directory, plus experiment-specific tables. Data files depend
//! only on the configuration and seed; the manifest also carries a
//! timestamp.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::backtest::{monte_carlo_campaign, rolling_horizons, BacktestConfig, Campaign};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::estimators::{mle_estimate, AuxSource, EstimationWindow, ProfitabilityTrack};
use crate::ingest::{read_price_file, TRADING_DAYS_PER_YEAR};
use crate::market::{discount_prices, simulate_path, HestonParams, MarketSpec, PathSeed, TimeGrid};
use crate::metrics::{self, welch_test};
use crate::strategies::{true_ap, Strategy};

/// Standard deviations of the two premium estimators for one `(dt, mu)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Cell {
    pub dt: f64,
    pub mu: f64,
    /// `sqrt(K_hat)` at `t_0`, one per repetition.
    pub a: Vec<f64>,
    /// MLE premium `(mu_hat - r) / sigma_hat` at `t_0`, one per repetition.
    pub b: Vec<f64>,
}

impl Table1Cell {
    pub fn std_a(&self) -> f64 {
        metrics::population_variance(&self.a).sqrt()
    }

    pub fn std_b(&self) -> f64 {
        metrics::population_variance(&self.b).sqrt()
    }
}

/// Both estimators at `t_0` under constant GBM with `N = M = round(1/dt)`
/// and a one-year horizon.
pub fn table1_cell(
    mu: f64,
    sigma: f64,
    risk_free: f64,
    dt: f64,
    reps: usize,
    seed: u64,
) -> Result<Table1Cell> {
    let n = (1.0 / dt).round() as usize;
    let window = EstimationWindow::new(n)?;
    let grid = TimeGrid::with_dt(dt, n, BacktestConfig::required_burn_in(n, &window))?;
    let spec = MarketSpec::constant_gbm(mu, sigma, risk_free);
    let pairs = (0..reps)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(&spec, &grid, PathSeed::new(seed, i as u64))?;
            let est = mle_estimate(&path, 0, &window, risk_free)?;
            let track = ProfitabilityTrack::new(&path, AuxSource::Estimated(window), risk_free)?;
            Ok((track.ap(0).sqrt(), est.premium(risk_free)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (a, b) = pairs.into_iter().unzip();
    Ok(Table1Cell { dt, mu, a, b })
}

/// Heston market from the configured base parameters and one `{iota, kappa}` setting.
pub fn heston_spec(cfg: &ExperimentConfig, reversion: f64, correlation: f64) -> MarketSpec {
    MarketSpec::heston(
        HestonParams {
            reversion,
            correlation,
            ..cfg.heston
        },
        cfg.prefs.risk_free,
    )
}

pub fn setting_label(reversion: f64, correlation: f64) -> String {
    format!("{{{reversion};{correlation}}}")
}

/// Shortest round-trip form; scientific outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>, missing: &str) -> String {
    x.map(num).unwrap_or_else(|| missing.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv_writer(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

const SUMMARY_COLUMNS: &[&str] = &[
    "setting",
    "strategy",
    "paths",
    "mean_return",
    "mean_terminal_wealth",
    "median_terminal_wealth",
    "ceq",
    "sharpe",
    "turnover",
    "cp_dispersion",
];

const LEDGER_COLUMNS: &[&str] = &[
    "setting",
    "index",
    "checksum",
    "strategy",
    "terminal_wealth",
    "return",
    "turnover",
    "mean_cp",
];

const STEP_COLUMNS: &[&str] = &[
    "setting",
    "index",
    "strategy",
    "step",
    "wealth",
    "theta",
    "weight",
    "mu_hat",
    "sigma_hat",
    "k_hat",
    "a_hat",
    "clamped",
    "carried",
];

struct CampaignTables {
    summary: Vec<Vec<String>>,
    ledgers: Vec<Vec<String>>,
    steps: Vec<Vec<String>>,
    pvalues: Vec<Vec<String>>,
}

impl CampaignTables {
    fn new() -> Self {
        Self {
            summary: Vec::new(),
            ledgers: Vec::new(),
            steps: Vec::new(),
            pvalues: Vec::new(),
        }
    }

    fn add(&mut self, setting: &str, c: &Campaign) {
        for s in &c.summaries {
            self.summary.push(vec![
                setting.to_string(),
                s.strategy.tag().to_string(),
                s.paths.to_string(),
                num(s.mean_return),
                num(s.mean_terminal_wealth),
                num(s.median_terminal_wealth),
                opt(s.ceq, "NA"),
                opt(s.sharpe, "undefined"),
                opt(s.turnover, "NA"),
                opt(s.cp_dispersion, "NA"),
            ]);
        }
        for p in &c.paths {
            for o in &p.outcomes {
                self.ledgers.push(vec![
                    setting.to_string(),
                    p.index.to_string(),
                    format!("{:016x}", p.checksum),
                    o.strategy.tag().to_string(),
                    num(o.terminal_wealth),
                    num(o.simple_return),
                    opt(o.turnover, "NA"),
                    opt(o.mean_cp, "NA"),
                ]);
            }
            for l in p.ledgers.iter().flatten() {
                for (k, st) in l.steps.iter().enumerate() {
                    self.steps.push(vec![
                        setting.to_string(),
                        p.index.to_string(),
                        l.strategy.tag().to_string(),
                        k.to_string(),
                        num(l.wealth[k]),
                        num(st.theta),
                        num(st.weight),
                        num(st.mu_hat),
                        num(st.sigma_hat),
                        opt(st.k_hat, "NA"),
                        opt(st.a_hat, "NA"),
                        st.clamped.to_string(),
                        st.carried.to_string(),
                    ]);
                }
            }
        }
        for (i, x) in c.strategies.iter().enumerate() {
            for (j, y) in c.strategies.iter().enumerate().skip(i + 1) {
                let rx: Vec<f64> = c.outcomes(i).iter().map(|o| o.simple_return).collect();
                let ry: Vec<f64> = c.outcomes(j).iter().map(|o| o.simple_return).collect();
                let (t, df, p) = match welch_test(&rx, &ry) {
                    Ok(w) => (num(w.t), num(w.df), num(w.p)),
                    Err(_) => ("NA".into(), "NA".into(), "NA".into()),
                };
                self.pvalues.push(vec![
                    setting.into(),
                    x.tag().into(),
                    y.tag().into(),
                    t,
                    df,
                    p,
                ]);
            }
        }
    }

    fn write(&self, out: &mut Output, with_steps: bool) -> Result<()> {
        out.table("summary.csv", &header(SUMMARY_COLUMNS), &self.summary)?;
        out.table("ledgers.csv", &header(LEDGER_COLUMNS), &self.ledgers)?;
        if with_steps {
            out.table("steps.csv", &header(STEP_COLUMNS), &self.steps)?;
        }
        out.table(
            "pvalues.csv",
            &header(&["setting", "x", "y", "t", "df", "p"]),
            &self.pvalues,
        )
    }
}

/// Rows = settings, columns = strategies.
fn metric_tables(
    out: &mut Output,
    strategies: &[Strategy],
    rows: &[(String, Campaign)],
) -> Result<()> {
    let mut cols = vec!["setting".to_string()];
    cols.extend(strategies.iter().map(|s| s.tag().to_string()));
    type Pick = fn(&metrics::StrategySummary) -> String;
    let picks: [(&str, Pick); 3] = [
        ("ceq.csv", |s| opt(s.ceq, "NA")),
        ("sr.csv", |s| opt(s.sharpe, "undefined")),
        ("tr.csv", |s| opt(s.turnover, "NA")),
    ];
    for (name, pick) in picks {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|(label, c)| {
                let mut r = vec![label.clone()];
                r.extend(c.summaries.iter().map(pick));
                r
            })
            .collect();
        out.table(name, &cols, &body)?;
    }
    Ok(())
}

fn manifest(cfg: &ExperimentConfig, version: &str, extra: &[(String, String)]) -> String {
    let mut m = format!(
        "experiment = {}\nversion = {}\nseed = {}\ncreated = {}\n",
        cfg.kind,
        version,
        cfg.seed,
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    );
    for (k, v) in extra {
        m.push_str(&format!("{k} = {v}\n"));
    }
    m.push_str("\n[config]\n");
    m.push_str(&cfg.echo());
    m
}

fn run_table1(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let mut summary = Vec::new();
    let mut ledgers = Vec::new();
    for (di, &dt) in cfg.table1_dt.iter().enumerate() {
        for (mi, &mu) in cfg.table1_mu.iter().enumerate() {
            let seed = cfg
                .seed
                .wrapping_add((di * cfg.table1_mu.len() + mi) as u64);
            let cell = table1_cell(
                mu,
                cfg.table1_sigma,
                cfg.prefs.risk_free,
                dt,
                cfg.paths,
                seed,
            )?;
            summary.push(vec![
                num(dt),
                num(mu),
                num(cell.std_a()),
                num(cell.std_b()),
                num(metrics::mean(&cell.a)),
                num(metrics::mean(&cell.b)),
            ]);
            for (i, (a, b)) in cell.a.iter().zip(&cell.b).enumerate() {
                ledgers.push(vec![num(dt), num(mu), i.to_string(), num(*a), num(*b)]);
            }
        }
    }
    out.table(
        "summary.csv",
        &header(&["dt", "mu", "std_a", "std_b", "mean_a", "mean_b"]),
        &summary,
    )?;
    out.table(
        "ledgers.csv",
        &header(&["dt", "mu", "rep", "a", "b"]),
        &ledgers,
    )
}

fn run_gbm(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let bt = cfg.backtest()?;
    let spec = MarketSpec::constant_gbm(cfg.mu, cfg.sigma, cfg.prefs.risk_free);
    let c = monte_carlo_campaign(
        &spec,
        &bt,
        cfg.paths,
        &cfg.strategies,
        cfg.seed,
        cfg.keep_ledgers,
    )?;
    let mut t = CampaignTables::new();
    t.add(&format!("gbm({};{})", cfg.mu, cfg.sigma), &c);
    t.write(out, cfg.keep_ledgers)
}

fn heston_settings(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    cfg.heston_reversion
        .iter()
        .flat_map(|&i| cfg.heston_correlation.iter().map(move |&k| (i, k)))
        .collect()
}

fn run_heston(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let bt = cfg.backtest()?;
    let mut t = CampaignTables::new();
    let mut rows = Vec::new();
    for (iota, kappa) in heston_settings(cfg) {
        let spec = heston_spec(cfg, iota, kappa);
        let c = monte_carlo_campaign(
            &spec,
            &bt,
            cfg.paths,
            &cfg.strategies,
            cfg.seed,
            cfg.keep_ledgers,
        )?;
        let label = setting_label(iota, kappa);
        t.add(&label, &c);
        rows.push((label, c));
    }
    t.write(out, cfg.keep_ledgers)?;
    metric_tables(out, &cfg.strategies, &rows)
}

fn run_ap_traces(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let bt = cfg.backtest()?;
    let r = cfg.prefs.risk_free;
    let mut traces = Vec::new();
    let mut summary = Vec::new();
    for (iota, kappa) in heston_settings(cfg) {
        let spec = heston_spec(cfg, iota, kappa);
        let label = setting_label(iota, kappa);
        let per_path = (0..cfg.trace_samples)
            .into_par_iter()
            .map(|i| {
                let path = simulate_path(&spec, &bt.grid, PathSeed::new(cfg.seed, i as u64))?;
                let est = ProfitabilityTrack::new(&path, AuxSource::Estimated(bt.window), r)?;
                let fed = ProfitabilityTrack::new(&path, AuxSource::Truth, r)?;
                let k_true = true_ap(&path, r)?;
                let rows: Vec<(f64, f64)> = (0..=bt.grid.steps() as isize)
                    .map(|k| (est.ap(k), fed.ap(k)))
                    .collect();
                Ok((path.checksum(), k_true, rows))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, (checksum, k_true, rows)) in per_path.into_iter().enumerate() {
            for (k, (k_hat, k_fed)) in rows.iter().enumerate() {
                traces.push(vec![
                    label.clone(),
                    i.to_string(),
                    k.to_string(),
                    num(bt.grid.time(k as isize)),
                    num(*k_hat),
                    num(*k_fed),
                    num(k_true),
                ]);
            }
            let last = rows.last().expect("non-empty");
            summary.push(vec![
                label.clone(),
                i.to_string(),
                format!("{checksum:016x}"),
                num(last.0),
                num(last.1),
                num(k_true),
            ]);
        }
    }
    out.table(
        "summary.csv",
        &header(&[
            "setting",
            "sample",
            "checksum",
            "k_hat_final",
            "k_truth_fed_final",
            "k_true",
        ]),
        &summary,
    )?;
    out.table(
        "ledgers.csv",
        &header(&[
            "setting",
            "sample",
            "step",
            "time",
            "k_hat",
            "k_truth_fed",
            "k_true",
        ]),
        &traces,
    )
}

fn run_real(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<(String, String)>> {
    let file = cfg.prices.as_ref().expect("checked by resolve");
    let prices = read_price_file(file)?;
    let grid = TimeGrid::with_dt(1.0 / TRADING_DAYS_PER_YEAR, prices.closes.len() - 1, 0)?;
    let series = discount_prices(&prices.closes, &grid, cfg.prefs.risk_free)?;
    let mut bt = cfg.backtest()?;
    bt.grid = TimeGrid::with_dt(1.0 / TRADING_DAYS_PER_YEAR, cfg.steps, cfg.burn_in)?;
    let c = rolling_horizons(&series, &bt, &cfg.strategies, cfg.keep_ledgers)?;
    let label = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "prices".into());
    let mut t = CampaignTables::new();
    t.add(&label, &c);
    t.write(out, cfg.keep_ledgers)?;
    let extra = vec![
        ("price_file".to_string(), file.display().to_string()),
        ("close_kind".to_string(), cfg.close_kind.clone()),
        ("rows".to_string(), prices.closes.len().to_string()),
        ("first_date".to_string(), prices.dates[0].to_string()),
        (
            "last_date".to_string(),
            prices.dates[prices.dates.len() - 1].to_string(),
        ),
        ("horizons".to_string(), c.paths.len().to_string()),
    ];
    metric_tables(out, &cfg.strategies, &[(label, c)])?;
    Ok(extra)
}

/// Runs the configured experiment and returns the files written.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    version: &str,
) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(out_dir).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot write to {}: {io}", out_dir.display())),
        other => other,
    })?;
    let extra = match cfg.kind {
        ExperimentKind::Table1 => run_table1(cfg, &mut out).map(|_| Vec::new()),
        ExperimentKind::Gbm => run_gbm(cfg, &mut out).map(|_| Vec::new()),
        ExperimentKind::Heston => run_heston(cfg, &mut out).map(|_| Vec::new()),
        ExperimentKind::ApTraces => run_ap_traces(cfg, &mut out).map(|_| Vec::new()),
        ExperimentKind::Real => run_real(cfg, &mut out),
    }?;
    out.text("manifest.txt", &manifest(cfg, version, &extra))?;
    Ok(out.files)
}
