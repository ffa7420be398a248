use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use energy_cpd::excess::{
    build_baseline, build_detection_series, compute_excess, parse_weekly_deaths, read_excess_csv, write_excess_csv,
    AgeGroup, ColumnMapping, ExcessOptions, ExcessSeries, Group, Grouping, WeekLabel, WeekSpan,
};
use energy_cpd::synthetic::{generate, Distribution, SegmentSpec};
use energy_cpd::{assign_clusters, detect, ChangePointReport, DetectParams, EnergyParams, MultiSeries};
use serde::{Deserialize, Serialize};

use crate::io::{open, read_series_csv, sink, slice_by_label, write_series_csv};
use crate::{DetectArgs, ExcessArgs, Format, GroupingArg, RawArgs, ReportArgs, SimulateArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable input (exit 2).
    Input(anyhow::Error),
    /// Series too short to split (exit 3).
    Degenerate(String),
    /// Report and data do not belong together (exit 4).
    Inconsistent(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "{e:#}"),
            CliError::Degenerate(m) => write!(f, "series too short: {m}"),
            CliError::Inconsistent(m) => write!(f, "inconsistent inputs: {m}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Input(err.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn parse_years(spec: &str) -> anyhow::Result<BTreeSet<i32>> {
    let bad = || anyhow!("baseline years must be FROM-TO or a comma list, got '{spec}'");
    let years: BTreeSet<i32> = if let Some((from, to)) = spec.split_once('-') {
        let (from, to): (i32, i32) = (from.trim().parse().map_err(|_| bad())?, to.trim().parse().map_err(|_| bad())?);
        if to < from {
            return Err(bad());
        }
        (from..=to).collect()
    } else {
        spec.split(',').map(|y| y.trim().parse().map_err(|_| bad())).collect::<anyhow::Result<_>>()?
    };
    if years.is_empty() {
        return Err(bad());
    }
    Ok(years)
}

fn parse_week(label: &str) -> anyhow::Result<WeekLabel> {
    label.parse::<WeekLabel>().map_err(|e| anyhow!("{e}"))
}

fn excess_from_raw(path: &Path, raw: &RawArgs, start: Option<&str>, end: Option<&str>) -> CliResult<ExcessSeries> {
    let years = parse_years(&raw.baseline_years)?;
    let mapping = ColumnMapping {
        countries: raw.country.clone().map(|c| vec![c]),
        skip_other_countries: raw.country.is_some(),
        ..ColumnMapping::default()
    };
    let records = parse_weekly_deaths(open(path)?, &mapping).with_context(|| format!("reading {}", path.display()))?;
    let covering = WeekSpan::covering(&records).ok_or_else(|| anyhow!("{} holds no records", path.display()))?;
    let span = WeekSpan::new(
        start.map(parse_week).transpose()?.unwrap_or(covering.start),
        end.map(parse_week).transpose()?.unwrap_or(covering.end),
    )?;
    let baseline = build_baseline(&records, &years)?;
    let excess = compute_excess(&records, &baseline, span, ExcessOptions { null_rate: raw.null_rate })?;
    for label in excess.week53_fallbacks() {
        eprintln!("note: {label} baselined against the week-52 median");
    }
    Ok(excess)
}

#[derive(Serialize)]
struct ExcessRow {
    week_label: String,
    sex: &'static str,
    age_group: &'static str,
    actual: f64,
    median: f64,
    excess: f64,
    rate: Option<f64>,
}

pub fn cmd_excess(args: &ExcessArgs) -> CliResult {
    let excess = excess_from_raw(&args.input, &args.raw, args.start.as_deref(), args.end.as_deref())?;
    let mut out = sink(args.output.as_deref())?;
    match args.format {
        Format::Csv => write_excess_csv(&excess, &mut out)?,
        Format::Json => {
            let rows: Vec<ExcessRow> = excess
                .weeks
                .iter()
                .flat_map(|w| {
                    Group::all().into_iter().map(move |g| {
                        let c = w.cell(g);
                        ExcessRow {
                            week_label: w.label.to_string(),
                            sex: g.sex.code(),
                            age_group: g.age.code(),
                            actual: c.actual,
                            median: c.median,
                            excess: c.excess,
                            rate: c.rate,
                        }
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Detection report plus the data selection it was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    /// `all`, `totals`, `pair:<age>` for excess input; `series` for wide CSVs.
    pub grouping: String,
    pub start: String,
    pub end: String,
    pub week53_fallbacks: Vec<String>,
    #[serde(flatten)]
    pub report: ChangePointReport,
}

fn grouping_name(g: Grouping) -> String {
    match g {
        Grouping::AllGroups => "all".into(),
        Grouping::Totals => "totals".into(),
        Grouping::AgeGroupPair(age) => format!("pair:{}", age.code()),
        Grouping::AgeGroupTotal(age) => format!("pooled:{}", age.code()),
    }
}

fn grouping_from_name(name: &str) -> anyhow::Result<Grouping> {
    Ok(match name.split_once(':') {
        None if name == "all" => Grouping::AllGroups,
        None if name == "totals" => Grouping::Totals,
        Some(("pair", age)) => Grouping::AgeGroupPair(age.parse().map_err(|e| anyhow!("{e}"))?),
        Some(("pooled", age)) => Grouping::AgeGroupTotal(age.parse().map_err(|e| anyhow!("{e}"))?),
        _ => bail!("unknown grouping '{name}'"),
    })
}

fn run_one(
    series: &MultiSeries,
    params: &DetectParams,
    grouping: String,
    fallbacks: &[WeekLabel],
) -> CliResult<DetectOutput> {
    let min_len = 2 * params.energy.min_segment;
    if series.len() < min_len {
        return Err(CliError::Degenerate(format!(
            "{} observations, need at least {min_len} for min-size {}",
            series.len(),
            params.energy.min_segment
        )));
    }
    let labels = series.time_labels();
    let (start, end) = (labels[0].clone(), labels[labels.len() - 1].clone());
    let week53_fallbacks = fallbacks.iter().map(WeekLabel::to_string).filter(|l| labels.contains(l)).collect();
    let report = detect(series, params)?;
    Ok(DetectOutput { grouping, start, end, week53_fallbacks, report })
}

fn write_detect(output: &DetectOutput, format: Format, path: Option<&Path>) -> CliResult {
    let mut out = sink(path)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, output)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["index", "label", "q_value", "p_value", "iteration"])?;
            for cp in &output.report.change_points {
                w.write_record([
                    cp.index.to_string(),
                    cp.label.clone(),
                    cp.q_value.to_string(),
                    cp.p_value.to_string(),
                    cp.iteration.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn cmd_detect(args: &DetectArgs) -> CliResult {
    let params = DetectParams {
        energy: EnergyParams { alpha: args.alpha, min_segment: args.min_size },
        permutations: args.permutations,
        sig_level: args.sig,
        seed: args.seed,
        max_points: args.max_points,
    };
    params.validate()?;

    let mut runs = Vec::new();
    if let Some(path) = &args.series {
        if args.grouping != GroupingArg::All || args.age_group.is_some() {
            return Err(anyhow!("--grouping and --age-group apply to excess input only").into());
        }
        let series = read_series_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        let series = slice_by_label(&series, args.start.as_deref(), args.end.as_deref())?;
        runs.push((None, run_one(&series, &params, "series".into(), &[])?));
    } else {
        let excess = match (&args.input, &args.from_raw) {
            (Some(path), _) => read_excess_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(path)) => excess_from_raw(path, &args.raw, None, None)?,
            (None, None) => unreachable!("clap requires a source"),
        };
        let first = excess.weeks.first().ok_or_else(|| anyhow!("excess series is empty"))?.label;
        let last = excess.weeks.last().expect("non-empty").label;
        let start = args.start.as_deref().map(parse_week).transpose()?.unwrap_or(first);
        let end = args.end.as_deref().map(parse_week).transpose()?.unwrap_or(last);
        let groupings: Vec<(Option<&'static str>, Grouping)> = match args.grouping {
            GroupingArg::All => vec![(None, Grouping::AllGroups)],
            GroupingArg::Totals => vec![(None, Grouping::Totals)],
            GroupingArg::PerAgeGroup => match &args.age_group {
                Some(age) => {
                    let age: AgeGroup = age.parse()?;
                    vec![(None, Grouping::AgeGroupPair(age))]
                }
                None => AgeGroup::ALL.iter().map(|&a| (Some(a.code()), Grouping::AgeGroupPair(a))).collect(),
            },
        };
        let fallbacks = excess.week53_fallbacks();
        for (name, grouping) in groupings {
            let series = build_detection_series(&excess, start, end, grouping)?;
            runs.push((name, run_one(&series, &params, grouping_name(grouping), &fallbacks)?));
        }
    }

    if let [(None, output)] = runs.as_slice() {
        return write_detect(output, args.format, args.output.as_deref());
    }
    let dir = args
        .output
        .as_deref()
        .ok_or_else(|| anyhow!("--output DIR is required when emitting one report per age group"))?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let ext = if args.format == Format::Json { "json" } else { "csv" };
    for (name, output) in &runs {
        let name = name.expect("per-group runs are named");
        write_detect(output, args.format, Some(&dir.join(format!("{name}.{ext}"))))?;
    }
    Ok(())
}

fn tidy_for(output: &DetectOutput, args: &ReportArgs, excess: Option<&ExcessSeries>) -> CliResult<Vec<u8>> {
    let mismatch = |m: String| CliError::Inconsistent(m);
    let series = match excess {
        Some(ex) => {
            let grouping = grouping_from_name(&output.grouping).map_err(|e| mismatch(e.to_string()))?;
            let (start, end) = (parse_week(&output.start), parse_week(&output.end));
            let (Ok(start), Ok(end)) = (start, end) else {
                return Err(mismatch(format!("report span {}..{} is not a week range", output.start, output.end)));
            };
            build_detection_series(ex, start, end, grouping).map_err(|e| mismatch(e.to_string()))?
        }
        None => {
            if output.grouping != "series" {
                return Err(mismatch(format!("report was computed on '{}' data, not a series CSV", output.grouping)));
            }
            let path = args.series.as_ref().expect("clap requires a data source");
            let series = read_series_csv(open(path)?)?;
            slice_by_label(&series, Some(&output.start), Some(&output.end)).map_err(|e| mismatch(e.to_string()))?
        }
    };
    let report = &output.report;
    if series.len() != report.series_len || series.dim_labels() != report.dim_labels.as_slice() {
        return Err(mismatch(format!(
            "report covers {} observations of {:?}, data has {} of {:?}",
            report.series_len,
            report.dim_labels,
            series.len(),
            series.dim_labels()
        )));
    }
    let clusters = assign_clusters(series.len(), &report.indices()).map_err(|e| mismatch(e.to_string()))?;
    if clusters != report.clusters.iter().map(|c| c.segment()).collect::<Vec<_>>() {
        return Err(mismatch("report clusters do not match its change points".into()));
    }
    let mut cluster_of = vec![0; series.len()];
    for (id, seg) in clusters.iter().enumerate() {
        cluster_of[seg.start..seg.end].fill(id + 1);
    }

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["week", "group", "rate", "cluster_id"])?;
        for (j, group) in series.dim_labels().iter().enumerate() {
            for (t, label) in series.time_labels().iter().enumerate() {
                w.write_record([label.as_str(), group, &series.row(t)[j].to_string(), &cluster_of[t].to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn cmd_report(args: &ReportArgs) -> CliResult {
    let excess = match &args.excess {
        Some(path) => Some(read_excess_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?),
        None => None,
    };
    let mut tidy = Vec::new();
    for path in &args.reports {
        let output: DetectOutput = serde_json::from_reader(open(path)?)
            .with_context(|| format!("{} is not a detection report", path.display()))?;
        tidy.push((path, tidy_for(&output, args, excess.as_ref())?));
    }
    if let [(_, bytes)] = tidy.as_slice() {
        sink(args.output.as_deref())?.write_all(bytes)?;
        return Ok(());
    }
    let dir = args.output.as_deref().ok_or_else(|| anyhow!("--output DIR is required for several reports"))?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (path, bytes) in tidy {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        fs::write(dir.join(format!("{stem}.csv")), bytes)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Truth<'a> {
    seed: u64,
    segments: &'a [SegmentSpec],
    change_points: &'a [usize],
}

fn parse_segments(spec: &str, dim: usize, df: Option<f64>) -> anyhow::Result<Vec<SegmentSpec>> {
    let distribution = df.map_or(Distribution::Gaussian, |df| Distribution::HeavyTailed { df });
    spec.split(',')
        .map(|part| {
            let fields: Vec<&str> = part.trim().split(':').collect();
            let bad = || anyhow!("segment '{part}' is not LENGTH:MEAN[:SCALE]");
            if !(2..=3).contains(&fields.len()) {
                return Err(bad());
            }
            let length = fields[0].parse().map_err(|_| bad())?;
            let mean: f64 = fields[1].parse().map_err(|_| bad())?;
            let scale = fields.get(2).map_or(Ok(1.0), |s| s.parse()).map_err(|_| bad())?;
            Ok(SegmentSpec { length, mean: vec![mean; dim], scale, distribution })
        })
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let specs = parse_segments(&args.segments, args.dim, args.df)?;
    let truth = generate(&specs, args.seed)?;
    write_series_csv(&truth.series, sink(Some(&args.output))?)?;
    let mut sidecar = args.output.clone().into_os_string();
    sidecar.push(".truth.json");
    let body = Truth { seed: args.seed, segments: &specs, change_points: &truth.change_points };
    let mut text = serde_json::to_string_pretty(&body)?;
    text.push('\n');
    fs::write(&sidecar, text)?;
    Ok(())
}
