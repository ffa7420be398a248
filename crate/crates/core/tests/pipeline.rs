mod common;

use std::collections::BTreeSet;
use std::fs;

use energy_cpd::excess::{
    build_baseline, build_detection_series, compute_excess, median, parse_weekly_deaths, read_excess_csv,
    write_excess_csv, AgeGroup, ColumnMapping, ExcessCell, ExcessOptions, ExcessSeries, ExcessWeek, Group, Grouping,
    Sex, WeekLabel, WeekSpan, WeeklyDeathRecord,
};
use proptest::prelude::*;

fn records() -> Vec<WeeklyDeathRecord> {
    let text = fs::read(common::fixture("synthetic_stmf.csv")).unwrap();
    parse_weekly_deaths(text.as_slice(), &ColumnMapping::default()).unwrap()
}

fn years() -> BTreeSet<i32> {
    (2015..=2019).collect()
}

fn week(s: &str) -> WeekLabel {
    s.parse().unwrap()
}

#[test]
fn fixture_parses_completely() {
    let recs = records();
    // 281 ISO weeks x 2 sexes x 5 age groups.
    assert_eq!(recs.len(), 281 * 10);
    let span = WeekSpan::covering(&recs).unwrap();
    assert_eq!((span.start, span.end), (week("2015-W01"), week("2020-W20")));
    assert_eq!(span.weeks().count(), 281);
}

#[test]
fn baseline_spot_checks_against_raw_lines() {
    let baseline = build_baseline(&records(), &years()).unwrap();
    let raw = fs::read_to_string(common::fixture("synthetic_stmf.csv")).unwrap();
    // (sex code, week, column index in the raw row, group)
    let cells = [
        ("f", 1, 8, Group { sex: Sex::Female, age: AgeGroup::Age85Plus }),
        ("m", 27, 5, Group { sex: Sex::Male, age: AgeGroup::Age15To64 }),
        ("f", 52, 4, Group { sex: Sex::Female, age: AgeGroup::Age0To14 }),
    ];
    for (sex, wk, col, group) in cells {
        let mut values: Vec<f64> = raw
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[3] == sex && f[2] == wk.to_string() && (2015..=2019).contains(&f[1].parse::<i32>().unwrap()))
            .map(|f| f[col].parse().unwrap())
            .collect();
        assert_eq!(values.len(), 5);
        values.sort_by(f64::total_cmp);
        assert_eq!(baseline.get(group, wk), Some(values[2]), "{group} week {wk}");
    }
}

#[test]
fn baseline_years_have_zero_median_excess() {
    let recs = records();
    let baseline = build_baseline(&recs, &years()).unwrap();
    let span = WeekSpan::new(week("2015-W01"), week("2019-W52")).unwrap();
    let ex = compute_excess(&recs, &baseline, span, ExcessOptions::default()).unwrap();
    for group in Group::all() {
        for wk in 1..=52 {
            let mut cell: Vec<f64> =
                ex.weeks.iter().filter(|w| w.label.week == wk).map(|w| w.cell(group).excess).collect();
            assert_eq!(cell.len(), 5);
            assert_eq!(median(&mut cell), Some(0.0), "{group} week {wk}");
        }
    }
}

#[test]
fn detection_span_matches_published_layout() {
    let recs = records();
    let baseline = build_baseline(&recs, &years()).unwrap();
    let ex = compute_excess(&recs, &baseline, WeekSpan::covering(&recs).unwrap(), ExcessOptions::default()).unwrap();
    assert_eq!(ex.week53_fallbacks(), vec![week("2015-W53")]);
    let s = build_detection_series(&ex, week("2019-W27"), week("2020-W20"), Grouping::AllGroups).unwrap();
    assert_eq!((s.len(), s.dim()), (46, 10));
    let oldest =
        build_detection_series(&ex, week("2019-W27"), week("2020-W20"), Grouping::AgeGroupPair(AgeGroup::Age85Plus))
            .unwrap();
    assert_eq!((oldest.len(), oldest.dim()), (46, 2));
    // The fixture carries a spring-2020 surge among the oldest.
    for wk in ["2020-W13", "2020-W14", "2020-W15"] {
        let t = s.time_labels().iter().position(|l| l == wk).unwrap();
        assert!(oldest.row(t).iter().all(|&r| r > 0.2), "{wk}: {:?}", oldest.row(t));
    }
    assert!(build_detection_series(&ex, week("2020-W20"), week("2019-W27"), Grouping::Totals).is_err());
}

fn cell_strategy() -> impl Strategy<Value = ExcessCell> {
    (0u32..100_000, 1u32..50_000, prop::bool::weighted(0.1)).prop_map(|(a, m, missing)| {
        let (actual, median) = (a as f64 / 8.0, m as f64 / 4.0);
        let excess = actual - median;
        ExcessCell { actual, median, excess, rate: (!missing).then(|| excess / median) }
    })
}

proptest! {
    #[test]
    fn excess_csv_round_trips(cells in prop::collection::vec(prop::array::uniform10(cell_strategy()), 1..6), start in 1u32..50) {
        let mut label = WeekLabel::new(2019, start).unwrap();
        let mut weeks = Vec::new();
        for groups in cells {
            let actual = groups.iter().map(|c| c.actual).sum();
            let median = groups.iter().map(|c| c.median).sum::<f64>();
            let excess = groups.iter().map(|c| c.excess).sum::<f64>();
            let total = ExcessCell { actual, median, excess, rate: Some(excess / median) };
            weeks.push(ExcessWeek { label, baseline_week: label.week.min(52), groups, total });
            label = label.next();
        }
        let series = ExcessSeries { weeks };
        let mut first = Vec::new();
        write_excess_csv(&series, &mut first).unwrap();
        let back = read_excess_csv(first.as_slice()).unwrap();
        prop_assert_eq!(&back, &series);
        let mut second = Vec::new();
        write_excess_csv(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
