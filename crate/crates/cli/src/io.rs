//! Series CSV files, model JSON files and report writers.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::Serialize;
use switchseg::model::{Model, ModelDoc, TimeSeries};
use switchseg::synth::LabeledSeries;

/// A loaded series with its regime labels when the file has a `regime` column.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub series: TimeSeries,
    pub regimes: Option<Vec<usize>>,
}

/// Reads a CSV with a header row; value columns are `v` or `v_1..v_D`, `t` is ignored.
pub fn read_series(path: &Path) -> Result<SeriesFile> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let value_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "v" || h.starts_with("v_"))
        .map(|(i, _)| i)
        .collect();
    if value_cols.is_empty() {
        bail!("{}: no `v` or `v_i` column", path.display());
    }
    let regime_col = header.iter().position(|h| h == "regime");
    let mut data = Vec::new();
    let mut regimes = Vec::new();
    let mut n = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &c in &value_cols {
            let x: f64 = rec[c].trim().parse().with_context(|| format!("{}: row {}", path.display(), line + 1))?;
            data.push(x);
        }
        if let Some(c) = regime_col {
            regimes.push(rec[c].trim().parse().with_context(|| format!("{}: row {} regime", path.display(), line + 1))?);
        }
        n += 1;
    }
    let series = TimeSeries::new(data, n, value_cols.len())?;
    Ok(SeriesFile { series, regimes: regime_col.map(|_| regimes) })
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: &f64) -> String {
    format!("{x:?}")
}

fn value_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["v".into()]
    } else {
        (1..=dim).map(|i| format!("v_{i}")).collect()
    }
}

pub fn write_labeled(path: &Path, x: &LabeledSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(value_header(x.series.dim()));
    header.push("regime".into());
    w.write_record(&header)?;
    for t in 0..x.series.len() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(x.series.row(t).iter().map(fmt_f64));
        rec.push(x.true_regimes[t].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, p_0 .. p_{S-1}`.
pub fn write_posterior(path: &Path, gamma: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..gamma.ncols()).map(|s| format!("p_{s}")));
    w.write_record(&header)?;
    for (t, row) in gamma.outer_iter().enumerate() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(row.iter().map(fmt_f64));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, regime` and `count` when given.
pub fn write_segmentation(path: &Path, regimes: &[usize], counts: Option<&[usize]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match counts {
        Some(_) => w.write_record(["t", "regime", "count"])?,
        None => w.write_record(["t", "regime"])?,
    }
    for (t, r) in regimes.iter().enumerate() {
        let mut rec = vec![(t + 1).to_string(), r.to_string()];
        if let Some(c) = counts {
            rec.push(c[t].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `regime` column of a segmentation or labeled series file.
pub fn read_regimes(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "regime")
        .with_context(|| format!("{}: no `regime` column", path.display()))?;
    rdr.records()
        .map(|r| Ok(r?[col].trim().parse::<usize>()?))
        .collect::<Result<Vec<_>>>()
        .with_context(|| format!("{}: bad regime label", path.display()))
}

pub fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(ModelDoc::from_json(&text)?.build()?)
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    let mut text = ModelDoc::from(model).to_json_pretty();
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_series_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let v = vec![0.1, -1e-300, 1.0 / 3.0, 12345.678901234567, f64::MIN_POSITIVE, -0.0];
        let x = LabeledSeries {
            series: TimeSeries::univariate(v.clone()).unwrap(),
            true_regimes: vec![0, 0, 1, 1, 2, 2],
            true_boundaries: vec![0, 2, 4],
            seed: 0,
        };
        write_labeled(&p, &x).unwrap();
        let back = read_series(&p).unwrap();
        for (a, b) in back.series.values().iter().zip(&v) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.regimes.as_deref(), Some(&x.true_regimes[..]));
    }

    #[test]
    fn multivariate_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "t,v_1,v_2\n1,0.5,1\n2,-2,3.25\n").unwrap();
        let s = read_series(&p).unwrap();
        assert_eq!(s.series.dim(), 2);
        assert_eq!(s.series.row(1), &[-2.0, 3.25]);
        assert!(s.regimes.is_none());
    }

    #[test]
    fn missing_value_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "t,x\n1,2\n").unwrap();
        assert!(read_series(&p).is_err());
    }
}
