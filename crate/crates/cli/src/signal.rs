//! Load signal files. Both forms carry a time column followed by one column
//! per channel; CSV files have the header `t,ch1,...,chU`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use modalstat::TimeSeriesSet;

use crate::binary::{self, RawMatrix};
use crate::error::{CliError, CliResult};

/// Relative tolerance on the spacing of the time column.
pub const DT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Csv,
    Bin,
}

pub fn write_signal(path: &Path, set: &TimeSeriesSet, format: SignalFormat) -> CliResult<()> {
    match format {
        SignalFormat::Csv => write_csv(path, set),
        SignalFormat::Bin => {
            let cols = set.n_channels() + 1;
            let mut data = Vec::with_capacity(set.len() * cols);
            for i in 0..set.len() {
                data.push(i as f64 * set.dt());
                data.extend(set.channels().iter().map(|c| c[i]));
            }
            binary::write(path, &RawMatrix::new(set.len(), cols, data)?)
        }
    }
}

fn write_csv(path: &Path, set: &TimeSeriesSet) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let err = |e| CliError::io(path, e);
    write!(w, "t").map_err(err)?;
    for c in 1..=set.n_channels() {
        write!(w, ",ch{c}").map_err(err)?;
    }
    writeln!(w).map_err(err)?;
    // `{}` on f64 prints the shortest text that parses back to the same value
    for i in 0..set.len() {
        write!(w, "{}", i as f64 * set.dt()).map_err(err)?;
        for ch in set.channels() {
            write!(w, ",{}", ch[i]).map_err(err)?;
        }
        writeln!(w).map_err(err)?;
    }
    w.flush().map_err(err)
}

pub fn read_signal(path: &Path) -> CliResult<TimeSeriesSet> {
    let (t, channels) = if binary::is_binary(path)? {
        let m = binary::read(path)?;
        if m.cols < 2 {
            return Err(CliError::data(format!("{}: need a time column and at least one channel", path.display())));
        }
        let t: Vec<f64> = (0..m.rows).map(|r| m.row(r)[0]).collect();
        let channels = (1..m.cols).map(|c| (0..m.rows).map(|r| m.row(r)[c]).collect()).collect();
        (t, channels)
    } else {
        read_csv(path)?
    };
    let dt = infer_dt(&t).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(TimeSeriesSet::new(channels, dt)?)
}

fn read_csv(path: &Path) -> CliResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::data(format!("{}: {e}", path.display())))?.clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(CliError::data(format!("{}: header must be t,ch1,...", path.display())));
    }
    let n_ch = headers.len() - 1;
    let mut t = Vec::new();
    let mut channels = vec![Vec::new(); n_ch];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> CliResult<f64> {
            rec[i].parse::<f64>().map_err(|e| {
                CliError::data(format!("{}: row {} column {}: {e}", path.display(), line + 2, i + 1))
            })
        };
        t.push(parse(0)?);
        for (c, ch) in channels.iter_mut().enumerate() {
            ch.push(parse(c + 1)?);
        }
    }
    Ok((t, channels))
}

/// Sampling step from a time column, checked for uniform spacing.
///
/// Uniformity is judged against the end-to-end step; the first step is
/// returned when it agrees, so files written by this tool round-trip exactly.
pub fn infer_dt(t: &[f64]) -> Result<f64, String> {
    let n = t.len();
    if n < 2 {
        return Err("need at least two samples".into());
    }
    let span_dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(span_dt.is_finite() && span_dt > 0.0) {
        return Err(format!("time step {span_dt} must be positive"));
    }
    for (i, &ti) in t.iter().enumerate() {
        let expect = t[0] + i as f64 * span_dt;
        // allow a few ulps of the time value itself on long records
        if (ti - expect).abs() > DT_RTOL * span_dt + 4.0 * f64::EPSILON * expect.abs() {
            return Err(format!("non-uniform time column at sample {i}: {ti} vs {expect}"));
        }
    }
    let first = t[1] - t[0];
    Ok(if (first - span_dt).abs() <= DT_RTOL * span_dt { first } else { span_dt })
}
