//! Weekly death counts to excess-death series.
//!
//! Raw counts by sex and broad age group are reduced to a week-of-year
//! median baseline over reference years. Excess counts are actual minus
//! median; excess rates divide the excess by the same median.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::MultiSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "f",
            Sex::Male => "m",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "f" => Some(Sex::Female),
            "m" => Some(Sex::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    Age0To14,
    Age15To64,
    Age65To74,
    Age75To84,
    Age85Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] =
        [AgeGroup::Age0To14, AgeGroup::Age15To64, AgeGroup::Age65To74, AgeGroup::Age75To84, AgeGroup::Age85Plus];

    pub fn code(self) -> &'static str {
        match self {
            AgeGroup::Age0To14 => "0_14",
            AgeGroup::Age15To64 => "15_64",
            AgeGroup::Age65To74 => "65_74",
            AgeGroup::Age75To84 => "75_84",
            AgeGroup::Age85Plus => "85p",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for AgeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace(['-', ' '], "_").replace('+', "p");
        let normalized = normalized.trim_start_matches('d');
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.code() == normalized)
            .ok_or_else(|| Error::InvalidInput(format!("unknown age group '{s}'")))
    }
}

/// One of the ten sex x age-group cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    pub sex: Sex,
    pub age: AgeGroup,
}

impl Group {
    /// Females by ascending age, then males by ascending age.
    pub fn all() -> [Group; 10] {
        let mut out = [Group { sex: Sex::Female, age: AgeGroup::Age0To14 }; 10];
        for (k, sex) in Sex::ALL.into_iter().enumerate() {
            for age in AgeGroup::ALL {
                out[k * 5 + age.index()] = Group { sex, age };
            }
        }
        out
    }

    pub fn index(self) -> usize {
        (self.sex as usize) * 5 + self.age.index()
    }

    pub fn label(self) -> String {
        format!("{}_{}", self.sex.code(), self.age.code())
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.sex.code(), self.age.code())
    }
}

/// ISO-8601 week, printed as `YYYY-Www`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeekLabel {
    pub year: i32,
    pub week: u32,
}

impl WeekLabel {
    pub fn new(year: i32, week: u32) -> Result<Self> {
        if NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).is_none() {
            return Err(Error::InvalidInput(format!("{year} has no ISO week {week}")));
        }
        Ok(Self { year, week })
    }

    pub fn next(self) -> Self {
        let monday = NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon).expect("valid ISO week");
        let iso = (monday + Duration::days(7)).iso_week();
        Self { year: iso.year(), week: iso.week() }
    }
}

impl fmt::Display for WeekLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

impl FromStr for WeekLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("week label '{s}' is not of the form YYYY-Www"));
        let (year, week) = s.trim().split_once("-W").ok_or_else(bad)?;
        let year: i32 = year.parse().map_err(|_| bad())?;
        let week: u32 = week.parse().map_err(|_| bad())?;
        WeekLabel::new(year, week)
    }
}

impl Serialize for WeekLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WeekLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeeklyDeathRecord {
    pub year: i32,
    pub iso_week: u32,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub deaths: f64,
}

impl WeeklyDeathRecord {
    pub fn week(&self) -> WeekLabel {
        WeekLabel { year: self.year, week: self.iso_week }
    }

    pub fn group(&self) -> Group {
        Group { sex: self.sex, age: self.age_group }
    }
}

/// Column names and codes for a delimited weekly-deaths table. The default
/// matches the HMD Short-Term Mortality Fluctuations layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub delimiter: u8,
    pub country_column: Option<String>,
    /// Accepted country codes; `None` accepts every code.
    pub countries: Option<Vec<String>>,
    /// Skip rows for countries outside `countries` instead of failing.
    pub skip_other_countries: bool,
    pub year_column: String,
    pub week_column: String,
    pub sex_column: String,
    pub female_code: String,
    pub male_code: String,
    /// Sex codes whose rows are skipped (STMF uses `b` for both sexes).
    pub ignored_sex_codes: Vec<String>,
    /// Death-count columns in [`AgeGroup::ALL`] order.
    pub age_columns: [String; 5],
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            delimiter: b',',
            country_column: Some("CountryCode".into()),
            countries: None,
            skip_other_countries: false,
            year_column: "Year".into(),
            week_column: "Week".into(),
            sex_column: "Sex".into(),
            female_code: "f".into(),
            male_code: "m".into(),
            ignored_sex_codes: vec!["b".into()],
            age_columns: ["D0_14", "D15_64", "D65_74", "D75_84", "D85p"].map(String::from),
        }
    }
}

pub fn parse_weekly_deaths<R: Read>(source: R, mapping: &ColumnMapping) -> Result<Vec<WeeklyDeathRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    if headers.iter().all(str::is_empty) {
        return Ok(Vec::new());
    }
    let header_line = reader.position().line().saturating_sub(1).max(1);
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: header_line, message: format!("missing column '{name}'") })
    };
    let country_col = mapping.country_column.as_deref().map(column).transpose()?;
    let year_col = column(&mapping.year_column)?;
    let week_col = column(&mapping.week_column)?;
    let sex_col = column(&mapping.sex_column)?;
    let age_cols = mapping.age_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        let field = |idx: usize, name: &str| row.get(idx).ok_or_else(|| parse_err(format!("missing field '{name}'")));

        if let (Some(idx), Some(accepted)) = (country_col, mapping.countries.as_ref()) {
            let code = field(idx, "country")?;
            if !accepted.iter().any(|c| c == code) {
                if mapping.skip_other_countries {
                    continue;
                }
                return Err(parse_err(format!("unexpected country code '{code}'")));
            }
        }
        let sex_code = field(sex_col, &mapping.sex_column)?;
        let sex = if sex_code == mapping.female_code {
            Sex::Female
        } else if sex_code == mapping.male_code {
            Sex::Male
        } else if mapping.ignored_sex_codes.iter().any(|c| c == sex_code) {
            continue;
        } else {
            return Err(parse_err(format!("unknown sex code '{sex_code}'")));
        };

        let year_raw = field(year_col, &mapping.year_column)?;
        let year: i32 = year_raw.parse().map_err(|_| parse_err(format!("unparsable year '{year_raw}'")))?;
        let week_raw = field(week_col, &mapping.week_column)?;
        let week: u32 = week_raw.parse().map_err(|_| parse_err(format!("unparsable week '{week_raw}'")))?;
        WeekLabel::new(year, week).map_err(|_| parse_err(format!("invalid ISO week {week} for {year}")))?;

        let country = country_col.and_then(|i| row.get(i)).unwrap_or("");
        if !seen.insert((country.to_string(), year, week, sex)) {
            return Err(Error::DuplicateData(format!(
                "line {line}: second row for {year}-W{week:02}, sex {}",
                sex.code()
            )));
        }

        for (age, &idx) in AgeGroup::ALL.into_iter().zip(&age_cols) {
            let name = &mapping.age_columns[age.index()];
            let raw = field(idx, name)?;
            let deaths: f64 =
                raw.parse().map_err(|_| parse_err(format!("unparsable death count '{raw}' in column '{name}'")))?;
            if !deaths.is_finite() || deaths < 0.0 {
                return Err(parse_err(format!("death count {raw} in column '{name}' must be finite and non-negative")));
            }
            out.push(WeeklyDeathRecord { year, iso_week: week, sex, age_group: age, deaths });
        }
    }
    Ok(out)
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Week-of-year median deaths per group over the baseline years.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    pub years: BTreeSet<i32>,
    medians: BTreeMap<(Group, u32), f64>,
}

impl BaselineTable {
    /// Median for `week` (1..=52).
    pub fn get(&self, group: Group, week: u32) -> Option<f64> {
        self.medians.get(&(group, week)).copied()
    }

    /// Median used for a given ISO week; week 53 falls back to week 52.
    pub fn for_week(&self, group: Group, week: u32) -> Option<f64> {
        self.get(group, week.min(52))
    }
}

pub fn build_baseline(records: &[WeeklyDeathRecord], years: &BTreeSet<i32>) -> Result<BaselineTable> {
    if years.is_empty() {
        return Err(Error::InvalidParams("baseline years must not be empty".into()));
    }
    let mut cells: HashMap<(Group, u32), Vec<f64>> = HashMap::new();
    for r in records {
        if years.contains(&r.year) && r.iso_week <= 52 {
            cells.entry((r.group(), r.iso_week)).or_default().push(r.deaths);
        }
    }
    let mut medians = BTreeMap::new();
    for group in Group::all() {
        for week in 1..=52 {
            let m = cells
                .get_mut(&(group, week))
                .and_then(|v| median(v))
                .ok_or_else(|| Error::MissingBaseline { group: group.label(), week })?;
            medians.insert((group, week), m);
        }
    }
    Ok(BaselineTable { years: years.clone(), medians })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessCell {
    pub actual: f64,
    pub median: f64,
    pub excess: f64,
    /// `excess / median`; `None` only when the median is zero and missing
    /// rates were requested.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessWeek {
    pub label: WeekLabel,
    /// Week of year whose median served as the baseline.
    pub baseline_week: u32,
    /// Indexed by [`Group::index`].
    pub groups: [ExcessCell; 10],
    pub total: ExcessCell,
}

impl ExcessWeek {
    pub fn cell(&self, group: Group) -> &ExcessCell {
        &self.groups[group.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessSeries {
    pub weeks: Vec<ExcessWeek>,
}

impl ExcessSeries {
    /// Weeks baselined against the week-52 median.
    pub fn week53_fallbacks(&self) -> Vec<WeekLabel> {
        self.weeks.iter().filter(|w| w.label.week == 53).map(|w| w.label).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = WeekLabel> + '_ {
        self.weeks.iter().map(|w| w.label)
    }

    fn position(&self, label: WeekLabel) -> Option<usize> {
        self.weeks.iter().position(|w| w.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeekSpan {
    pub start: WeekLabel,
    pub end: WeekLabel,
}

impl WeekSpan {
    pub fn new(start: WeekLabel, end: WeekLabel) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidSpan(format!("{end} precedes {start}")));
        }
        Ok(Self { start, end })
    }

    /// Smallest span covering every record.
    pub fn covering(records: &[WeeklyDeathRecord]) -> Option<Self> {
        let start = records.iter().map(WeeklyDeathRecord::week).min()?;
        let end = records.iter().map(WeeklyDeathRecord::week).max()?;
        Some(Self { start, end })
    }

    pub fn weeks(&self) -> impl Iterator<Item = WeekLabel> {
        let end = self.end;
        std::iter::successors(Some(self.start), move |w| (*w < end).then(|| w.next()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExcessOptions {
    /// Emit a missing rate instead of failing when a median is zero.
    pub null_rate: bool,
}

fn rate(excess: f64, median: f64, options: ExcessOptions, group: &str, week: WeekLabel) -> Result<Option<f64>> {
    if median == 0.0 {
        if options.null_rate {
            return Ok(None);
        }
        return Err(Error::ZeroMedian { group: group.into(), week: week.to_string() });
    }
    Ok(Some(excess / median))
}

fn total_cell(groups: &[ExcessCell; 10], week: WeekLabel, options: ExcessOptions) -> Result<ExcessCell> {
    let actual = groups.iter().map(|c| c.actual).sum();
    let median = groups.iter().map(|c| c.median).sum();
    let excess = groups.iter().map(|c| c.excess).sum();
    Ok(ExcessCell { actual, median, excess, rate: rate(excess, median, options, "total", week)? })
}

pub fn compute_excess(
    records: &[WeeklyDeathRecord],
    baseline: &BaselineTable,
    span: WeekSpan,
    options: ExcessOptions,
) -> Result<ExcessSeries> {
    let mut actual: HashMap<(WeekLabel, Group), f64> = HashMap::with_capacity(records.len());
    for r in records {
        actual.insert((r.week(), r.group()), r.deaths);
    }
    let mut weeks = Vec::new();
    for label in span.weeks() {
        let baseline_week = label.week.min(52);
        let mut groups = [ExcessCell { actual: 0.0, median: 0.0, excess: 0.0, rate: None }; 10];
        for group in Group::all() {
            let a = *actual
                .get(&(label, group))
                .ok_or_else(|| Error::InvalidSpan(format!("no {group} deaths recorded for {label}")))?;
            let m = baseline
                .get(group, baseline_week)
                .ok_or_else(|| Error::MissingBaseline { group: group.label(), week: baseline_week })?;
            let e = a - m;
            groups[group.index()] =
                ExcessCell { actual: a, median: m, excess: e, rate: rate(e, m, options, &group.label(), label)? };
        }
        let total = total_cell(&groups, label, options)?;
        weeks.push(ExcessWeek { label, baseline_week, groups, total });
    }
    Ok(ExcessSeries { weeks })
}

/// Column layout of the detector input built from an excess series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// All ten groups; females by ascending age then males.
    AllGroups,
    /// Female and male rates of one age group.
    AgeGroupPair(AgeGroup),
    /// Rate of one age group with both sexes pooled.
    AgeGroupTotal(AgeGroup),
    /// Rate of the all-group weekly total.
    Totals,
}

impl Grouping {
    pub fn dim_labels(&self) -> Vec<String> {
        match self {
            Grouping::AllGroups => Group::all().iter().map(|g| g.label()).collect(),
            Grouping::AgeGroupPair(age) => Sex::ALL.iter().map(|&sex| Group { sex, age: *age }.label()).collect(),
            Grouping::AgeGroupTotal(age) => vec![format!("all_{}", age.code())],
            Grouping::Totals => vec!["total".into()],
        }
    }
}

fn required(rate: Option<f64>, what: &str, label: WeekLabel) -> Result<f64> {
    rate.ok_or_else(|| Error::InvalidInput(format!("excess rate for {what} in {label} is undefined")))
}

fn row_for(week: &ExcessWeek, grouping: Grouping) -> Result<Vec<f64>> {
    match grouping {
        Grouping::AllGroups => {
            Group::all().iter().map(|&g| required(week.cell(g).rate, &g.label(), week.label)).collect()
        }
        Grouping::AgeGroupPair(age) => Sex::ALL
            .iter()
            .map(|&sex| {
                let g = Group { sex, age };
                required(week.cell(g).rate, &g.label(), week.label)
            })
            .collect(),
        Grouping::AgeGroupTotal(age) => {
            let f = week.cell(Group { sex: Sex::Female, age });
            let m = week.cell(Group { sex: Sex::Male, age });
            let median = f.median + m.median;
            if median == 0.0 {
                return Err(Error::InvalidInput(format!("pooled median for {} in {} is zero", age.code(), week.label)));
            }
            Ok(vec![(f.excess + m.excess) / median])
        }
        Grouping::Totals => Ok(vec![required(week.total.rate, "total", week.label)?]),
    }
}

/// Excess rates from `start` through `end` (inclusive) as a detector input.
pub fn build_detection_series(
    excess: &ExcessSeries,
    start: WeekLabel,
    end: WeekLabel,
    grouping: Grouping,
) -> Result<MultiSeries> {
    let from = excess.position(start).ok_or_else(|| Error::InvalidSpan(format!("start week {start} not in series")))?;
    let to = excess.position(end).ok_or_else(|| Error::InvalidSpan(format!("end week {end} not in series")))?;
    if to < from {
        return Err(Error::InvalidSpan(format!("{end} precedes {start}")));
    }
    let weeks = &excess.weeks[from..=to];
    for pair in weeks.windows(2) {
        if pair[1].label != pair[0].label.next() {
            return Err(Error::InvalidSpan(format!("gap between {} and {}", pair[0].label, pair[1].label)));
        }
    }
    let rows = weeks.iter().map(|w| row_for(w, grouping)).collect::<Result<Vec<_>>>()?;
    let labels = weeks.iter().map(|w| w.label.to_string()).collect();
    MultiSeries::new(rows, labels, grouping.dim_labels())
}

pub const EXCESS_CSV_HEADER: [&str; 7] = ["week_label", "sex", "age_group", "actual", "median", "excess", "rate"];

pub fn write_excess_csv<W: Write>(series: &ExcessSeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(EXCESS_CSV_HEADER).map_err(io)?;
    for week in &series.weeks {
        let label = week.label.to_string();
        for group in Group::all() {
            let c = week.cell(group);
            let rate = c.rate.map(|r| r.to_string()).unwrap_or_default();
            w.write_record([
                label.as_str(),
                group.sex.code(),
                group.age.code(),
                &c.actual.to_string(),
                &c.median.to_string(),
                &c.excess.to_string(),
                &rate,
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the excess CSV written by [`write_excess_csv`]; weekly totals are
/// recomputed from the group rows.
pub fn read_excess_csv<R: Read>(source: R) -> Result<ExcessSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if headers.iter().ne(EXCESS_CSV_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", EXCESS_CSV_HEADER.join(",")) });
    }
    let mut rows: BTreeMap<WeekLabel, [Option<ExcessCell>; 10]> = BTreeMap::new();
    for row in reader.records() {
        let row =
            row.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        let num = |idx: usize| -> Result<f64> {
            let raw = &row[idx];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("unparsable {} '{raw}'", EXCESS_CSV_HEADER[idx])))
        };
        let label: WeekLabel = row[0].parse().map_err(|e: Error| err(e.to_string()))?;
        let sex = Sex::from_code(&row[1]).ok_or_else(|| err(format!("unknown sex '{}'", &row[1])))?;
        let age: AgeGroup = row[2].parse().map_err(|e: Error| err(e.to_string()))?;
        let rate = if row[6].is_empty() { None } else { Some(num(6)?) };
        let cell = ExcessCell { actual: num(3)?, median: num(4)?, excess: num(5)?, rate };
        let slot = &mut rows.entry(label).or_default()[Group { sex, age }.index()];
        if slot.is_some() {
            return Err(Error::DuplicateData(format!("line {line}: repeated row for {label} {sex:?} {}", age.code())));
        }
        *slot = Some(cell);
    }

    let mut weeks = Vec::with_capacity(rows.len());
    for (label, cells) in rows {
        let mut groups = [ExcessCell { actual: 0.0, median: 0.0, excess: 0.0, rate: None }; 10];
        for group in Group::all() {
            groups[group.index()] =
                cells[group.index()].ok_or_else(|| Error::InvalidInput(format!("{label} is missing group {group}")))?;
        }
        let total = total_cell(&groups, label, ExcessOptions { null_rate: true })?;
        weeks.push(ExcessWeek { label, baseline_week: label.week.min(52), groups, total });
    }
    Ok(ExcessSeries { weeks })
}
