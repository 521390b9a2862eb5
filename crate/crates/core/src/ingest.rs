//! Daily closes from a `date,close` CSV file.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market::{discount_prices, PricePath, TimeGrid};

/// One trading day per row.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceFile {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

/// Reads and validates a price file. Rows are numbered from 1 after the header.
pub fn read_price_file(path: &Path) -> Result<PriceFile> {
    let err = |row: usize, reason: String| Error::PriceFile {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "date" || &header[1] != "close" {
        return Err(err(
            0,
            format!(
                "header must be `date,close`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut closes = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(row, format!("expected 2 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| err(row, format!("bad date {:?}: {e}", &rec[0])))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(err(row, format!("date {date} does not follow {prev}")));
            }
        }
        let close: f64 = rec[1]
            .parse()
            .map_err(|_| err(row, format!("bad close {:?}", &rec[1])))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(err(row, format!("close must be positive, got {close}")));
        }
        dates.push(date);
        closes.push(close);
    }
    if closes.len() < 2 {
        return Err(Error::ShortSeries {
            len: closes.len(),
            required: 2,
        });
    }
    Ok(PriceFile { dates, closes })
}

/// Discounted price path at `dt = 1/252` per row, horizon covering the whole file.
pub fn ingest_prices(path: &Path, risk_free: f64) -> Result<PricePath> {
    let file = read_price_file(path)?;
    let grid = TimeGrid::with_dt(1.0 / TRADING_DAYS_PER_YEAR, file.closes.len() - 1, 0)?;
    discount_prices(&file.closes, &grid, risk_free)
}
