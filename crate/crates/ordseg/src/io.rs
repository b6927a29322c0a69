//! CSV interchange for time series.
//!
//! The on-disk format is a plain `t,y` file with an optional third
//! `true_label` column (written by the simulator, ignored by the
//! estimators), a mandatory header row, LF line endings, and `%.17g`
//! number formatting so every `f64` survives a write/read round trip
//! bit for bit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Formats `x` exactly like C's `printf("%.17g", x)`: 17 significant
/// digits, fixed notation while the decimal exponent lies in `[-4, 17)`,
/// scientific otherwise, trailing fractional zeros removed.
///
/// 17 significant digits are enough to reproduce any `f64` exactly, so
/// `fmt_g17(x).parse::<f64>()` returns `x` bit for bit.
pub fn fmt_g17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // The decimal exponent after rounding to 17 significant digits decides
    // the notation (e.g. 9.99...9e-5 rounds up into the fixed range).
    let sci = format!("{x:.16e}");
    let e_pos = sci.find('e').expect("{:e} always contains an exponent");
    let exp: i32 = sci[e_pos + 1..].parse().expect("exponent is an integer");
    if (-4..17).contains(&exp) {
        trim_fraction(format!("{x:.*}", (16 - exp) as usize))
    } else {
        let mantissa = trim_fraction(sci[..e_pos].to_string());
        let (sign, abs) = if exp < 0 { ('-', -exp) } else { ('+', exp) };
        format!("{mantissa}e{sign}{abs:02}")
    }
}

/// Drops trailing zeros after the decimal point, and the point itself if
/// nothing remains behind it.
fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Renders `series` (plus optional per-sample labels) as CSV text.
pub fn series_to_csv(series: &TimeSeries, labels: Option<&[usize]>) -> Result<String> {
    if let Some(labels) = labels {
        if labels.len() != series.len() {
            return Err(Error::InvalidInput(format!(
                "series has {} samples but {} labels were supplied",
                series.len(),
                labels.len()
            )));
        }
    }
    let mut out = String::with_capacity(series.len() * 48);
    out.push_str(if labels.is_some() { "t,y,true_label\n" } else { "t,y\n" });
    for i in 0..series.len() {
        out.push_str(&fmt_g17(series.t()[i]));
        out.push(',');
        out.push_str(&fmt_g17(series.y()[i]));
        if let Some(labels) = labels {
            out.push(',');
            out.push_str(&labels[i].to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `series` to `path` as CSV (header row, LF endings, `%.17g`).
pub fn write_series_csv(
    path: impl AsRef<Path>,
    series: &TimeSeries,
    labels: Option<&[usize]>,
) -> Result<()> {
    let path = path.as_ref();
    let text = series_to_csv(series, labels)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a `t,y[,true_label]` CSV file. The label column is returned when
/// present; estimators simply ignore it.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<(TimeSeries, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(&text, path)
}

/// Parses CSV text; `path` only labels error messages. Errors name the
/// first malformed line (1-based).
pub fn parse_series_csv(text: &str, path: &Path) -> Result<(TimeSeries, Option<Vec<usize>>)> {
    let csv_err = |line: usize, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "missing header row (expected `t,y` or `t,y,true_label`)".into()))?;
    let with_labels = match header.trim() {
        "t,y" => false,
        "t,y,true_label" => true,
        other => {
            return Err(csv_err(
                header_line + 1,
                format!("unrecognised header `{other}` (expected `t,y` or `t,y,true_label`)"),
            ))
        }
    };
    let n_cols = if with_labels { 3 } else { 2 };

    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n_cols {
            return Err(csv_err(
                line_no,
                format!("expected {n_cols} columns, found {}", fields.len()),
            ));
        }
        let parse_f64 = |name: &str, field: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(line_no, format!("column `{name}` is not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(csv_err(line_no, format!("column `{name}` is not finite: `{field}`")));
            }
            Ok(v)
        };
        let ti = parse_f64("t", fields[0])?;
        let yi = parse_f64("y", fields[1])?;
        if let Some(&prev) = t.last() {
            if ti <= prev {
                return Err(csv_err(
                    line_no,
                    format!("t must be strictly increasing, but {ti} follows {prev}"),
                ));
            }
        }
        t.push(ti);
        y.push(yi);
        if with_labels {
            let label: usize = fields[2].parse().map_err(|_| {
                csv_err(
                    line_no,
                    format!("column `true_label` is not a non-negative integer: `{}`", fields[2]),
                )
            })?;
            labels.push(label);
        }
    }

    if t.is_empty() {
        return Err(csv_err(header_line + 2, "no data rows after the header".into()));
    }
    let series = TimeSeries::new(t, y)?;
    Ok((series, with_labels.then_some(labels)))
}
