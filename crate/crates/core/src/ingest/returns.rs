//! Next/previous-day close returns.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(p_next - p_prev) / p_prev`.
pub fn compute_return(p_prev: f64, p_next: f64) -> Result<f64> {
    if !(p_prev > 0.0) || !p_prev.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "previous price must be positive, got {p_prev}"
        )));
    }
    if !p_next.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "next price is not finite: {p_next}"
        )));
    }
    Ok((p_next - p_prev) / p_prev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub ticker: String,
    pub date: NaiveDate,
    pub close_bid_ask_avg: f64,
}

/// Return for a ticker on `date`, spanning the previous and the next
/// available trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsRow {
    pub ticker: String,
    pub date: NaiveDate,
    pub p_prev: f64,
    pub p_next: f64,
    pub r: f64,
}

pub fn read_prices(path: &Path) -> Result<Vec<PriceRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Builds a return for every (ticker, date) that has both a previous and a
/// next price record. Output is sorted by ticker, then date.
pub fn build_returns(prices: &[PriceRow]) -> Result<Vec<ReturnsRow>> {
    let mut by_ticker: BTreeMap<&str, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for p in prices {
        if by_ticker
            .entry(&p.ticker)
            .or_default()
            .insert(p.date, p.close_bid_ask_avg)
            .is_some()
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate price for {} on {}",
                p.ticker, p.date
            )));
        }
    }
    let mut out = Vec::new();
    for (ticker, series) in by_ticker {
        let days: Vec<(NaiveDate, f64)> = series.into_iter().collect();
        for w in days.windows(3) {
            let (_, p_prev) = w[0];
            let (date, _) = w[1];
            let (_, p_next) = w[2];
            out.push(ReturnsRow {
                ticker: ticker.to_string(),
                date,
                p_prev,
                p_next,
                r: compute_return(p_prev, p_next)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn return_examples() {
        assert!((compute_return(100.0, 105.0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(compute_return(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(compute_return(80.0, 60.0).unwrap(), -0.25);
        assert!(compute_return(0.0, 1.0).is_err());
        assert!(compute_return(-3.0, 1.0).is_err());
    }

    #[test]
    fn builds_from_neighbouring_days() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let prices = vec![
            PriceRow {
                ticker: "B".into(),
                date: d("2023-01-04"),
                close_bid_ask_avg: 10.0,
            },
            PriceRow {
                ticker: "A".into(),
                date: d("2023-01-03"),
                close_bid_ask_avg: 100.0,
            },
            PriceRow {
                ticker: "A".into(),
                date: d("2023-01-05"),
                close_bid_ask_avg: 110.0,
            },
            PriceRow {
                ticker: "A".into(),
                date: d("2023-01-04"),
                close_bid_ask_avg: 50.0,
            },
            PriceRow {
                ticker: "A".into(),
                date: d("2023-01-06"),
                close_bid_ask_avg: 25.0,
            },
        ];
        let rows = build_returns(&prices).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].date, d("2023-01-04"));
        assert_eq!((rows[0].p_prev, rows[0].p_next), (100.0, 110.0));
        assert!((rows[0].r - 0.1).abs() < 1e-15);
        assert_eq!(rows[1].date, d("2023-01-05"));
        assert_eq!(rows[1].r, -0.5);
    }

    proptest! {
        #[test]
        fn scale_invariant(a in 0.01f64..1e4, b in 0.0f64..1e4, k in 0.001f64..1e3) {
            let r1 = compute_return(a, b).unwrap();
            let r2 = compute_return(k * a, k * b).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12 * r1.abs().max(1.0));
        }
    }
}
