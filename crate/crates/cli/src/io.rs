use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use energy_cpd::MultiSeries;

/// Opens `path`, or stdout when `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

/// Wide layout: `time_label` followed by one column per dimension.
pub fn read_series_csv<R: Read>(source: R) -> Result<MultiSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("time_label") || headers.len() < 2 {
        bail!("series CSV must start with a 'time_label' column followed by at least one value column");
    }
    let dim_labels: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        labels.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().with_context(|| format!("line {line}: unparsable value '{v}'")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(MultiSeries::new(rows, labels, dim_labels)?)
}

pub fn write_series_csv<W: Write>(series: &MultiSeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["time_label".to_string()];
    header.extend(series.dim_labels().iter().cloned());
    w.write_record(&header)?;
    for (label, row) in series.time_labels().iter().zip(series.rows()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Restricts a series to the rows from `start` through `end` by label.
pub fn slice_by_label(series: &MultiSeries, start: Option<&str>, end: Option<&str>) -> Result<MultiSeries> {
    let find = |label: &str| {
        series
            .time_labels()
            .iter()
            .position(|l| l == label)
            .with_context(|| format!("time label '{label}' not in series"))
    };
    let from = start.map(find).transpose()?.unwrap_or(0);
    let to = end.map(find).transpose()?.unwrap_or(series.len() - 1);
    if to < from {
        bail!("end label precedes start label");
    }
    Ok(series.slice(from, to + 1)?)
}
