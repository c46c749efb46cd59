//! Observations CSV: `date,benchmark_inverse[,longevity_index]`.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`) and are mapped linearly onto `[0, 1]`
//! from the first to the last row. A blank index cell means unobserved.

use std::io::{Read, Write};

use chrono::NaiveDate;
use polylife::calibrate::ObservationSet;

use crate::CliError;

pub struct Observations {
    pub set: ObservationSet,
    pub dates: Vec<NaiveDate>,
    /// The file had a `longevity_index` column.
    pub has_index: bool,
}

pub fn read_observations<R: Read>(reader: R, bps: bool) -> Result<Observations, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let date_col = col("date").ok_or_else(|| CliError::Config("observations need a `date` column".into()))?;
    let bench_col =
        col("benchmark_inverse").ok_or_else(|| CliError::Config("observations need a `benchmark_inverse` column".into()))?;
    let index_col = col("longevity_index");
    let scale = if bps { 1e-4 } else { 1.0 };
    let mut dates = Vec::new();
    let mut bench = Vec::new();
    let mut index = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| CliError::Config(format!("line {line}: {e}")))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(date_col), "%Y-%m-%d")
            .map_err(|e| CliError::Config(format!("line {line}: date `{}`: {e}", field(date_col))))?;
        let number = |text: &str| -> Result<f64, CliError> {
            text.parse::<f64>().map_err(|e| CliError::Config(format!("line {line}: `{text}`: {e}")))
        };
        bench.push(number(field(bench_col))? * scale);
        index.push(match index_col.map(field) {
            Some(t) if !t.is_empty() => Some(number(t)?),
            _ => None,
        });
        dates.push(date);
    }
    if dates.len() < 2 {
        return Err(CliError::Config(format!("need at least two observations, got {}", dates.len())));
    }
    let first = dates[0];
    let span = (dates[dates.len() - 1] - first).num_days() as f64;
    if span <= 0.0 {
        return Err(CliError::Config("observation dates must increase".into()));
    }
    let times = dates.iter().map(|d| (*d - first).num_days() as f64 / span).collect();
    let set = ObservationSet::new(times, bench, index).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Observations { set, dates, has_index: index_col.is_some() })
}

/// Month ends from January 1970 onward, one per observation.
pub fn monthly_dates(n: usize) -> Vec<NaiveDate> {
    (0..n)
        .map(|k| {
            let (y, m) = (1970 + (k / 12) as i32, (k % 12) as u32 + 1);
            let next = if m == 12 { NaiveDate::from_ymd_opt(y + 1, 1, 1) } else { NaiveDate::from_ymd_opt(y, m + 1, 1) };
            next.and_then(|d| d.pred_opt()).expect("valid calendar date")
        })
        .collect()
}

pub fn write_observations<W: Write>(w: W, dates: &[NaiveDate], obs: &ObservationSet) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "benchmark_inverse", "longevity_index"])?;
    for (k, d) in dates.iter().enumerate() {
        let idx = obs.longevity_index[k].map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([d.format("%Y-%m-%d").to_string(), obs.benchmark_inverse[k].to_string(), idx])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_sparse_index() {
        let text = "date,benchmark_inverse,longevity_index\n2000-01-31,0.005,0.99\n2000-02-29,0.0051,\n2000-03-31,0.0052,0.98\n";
        let o = read_observations(text.as_bytes(), false).unwrap();
        assert_eq!(o.set.len(), 3);
        assert_eq!(o.set.times[0], 0.0);
        assert_eq!(o.set.times[2], 1.0);
        assert_eq!(o.set.longevity_index, vec![Some(0.99), None, Some(0.98)]);
        assert!(o.has_index);
    }

    #[test]
    fn basis_points_and_missing_column() {
        let text = "date,benchmark_inverse\n2000-01-31,50\n2000-12-31,51\n";
        let o = read_observations(text.as_bytes(), true).unwrap();
        assert!((o.set.benchmark_inverse[0] - 0.005).abs() < 1e-15);
        assert!(!o.has_index);
    }

    #[test]
    fn bad_rows_name_the_line() {
        let text = "date,benchmark_inverse\n2000-01-31,abc\n2000-12-31,51\n";
        let err = read_observations(text.as_bytes(), false).err().unwrap();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(read_observations("when,v\n".as_bytes(), false).is_err());
    }

    #[test]
    fn month_ends() {
        let d = monthly_dates(14);
        assert_eq!(d[1].to_string(), "1970-02-28");
        assert_eq!(d[13].to_string(), "1971-02-28");
    }
}
