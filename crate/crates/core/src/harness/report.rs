//! Aggregates a results file and draws one accuracy chart per (task, kind):
//! bold mean line, a ±1 std band and a lighter min/max band per signal.
//!
//! Statistics are taken across seeds of the per-seed mean over runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{aggregate_stats, read_results, HarnessError, ResultRow, Signal, Stats};
use crate::dataset::{CorruptionKind, Task};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const RECALL_AGGREGATE_FILE: &str = "recall_aggregate.csv";
pub const AGGREGATE_HEADER: &str = "task,kind,level,signal,mean,std,min,max";
pub const RECALL_AGGREGATE_HEADER: &str = "task,kind,level,model,mean,std,min,max";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub task: Task,
    pub kind: CorruptionKind,
    pub level: f64,
    /// Signal name for accuracy, model name for recall loss.
    pub series: String,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub accuracy: Vec<AggregateRow>,
    pub recall: Vec<AggregateRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub aggregate: PathBuf,
    pub recall_aggregate: PathBuf,
    pub charts: Vec<PathBuf>,
}

/// Orders levels numerically inside a BTreeMap key.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level(f64);

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

type SeriesKey = (Task, CorruptionKind, Level, usize, String);

fn aggregate<F>(rows: &[ResultRow], pick: F) -> Result<Vec<AggregateRow>, HarnessError>
where
    F: Fn(&ResultRow) -> Option<(usize, String, f64)>,
{
    // (task, kind, level, series order, series) -> seed -> values over runs
    let mut groups: BTreeMap<SeriesKey, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        if let Some((order, series, value)) = pick(row) {
            groups
                .entry((row.task, row.kind, Level(row.level), order, series))
                .or_default()
                .entry(row.seed)
                .or_default()
                .push(value);
        }
    }
    groups
        .into_iter()
        .map(|((task, kind, level, _, series), per_seed)| {
            let name = format!("{task}/{kind}/{}/{series}", level.0);
            let means: Vec<f64> = per_seed
                .values()
                .map(|v| aggregate_stats(v, &name).map(|s| s.mean))
                .collect::<Result<_, _>>()?;
            Ok(AggregateRow {
                task,
                kind,
                level: level.0,
                series,
                stats: aggregate_stats(&means, &name)?,
            })
        })
        .collect()
}

pub fn build_report(rows: &[ResultRow]) -> Result<Report, HarnessError> {
    let accuracy = aggregate(rows, |r| {
        let order = Signal::ALL.iter().position(|&s| s == r.signal).unwrap();
        Some((order, r.signal.to_string(), r.accuracy))
    })?;
    // AHA-PR and AHA-PC rows carry the same AHA recall loss
    let recall = aggregate(rows, |r| match (r.signal, r.recall_loss) {
        (Signal::AhaPr, Some(v)) => Some((0, "AHA".to_string(), v)),
        (Signal::FastNn, Some(v)) => Some((1, "FastNN".to_string(), v)),
        _ => None,
    })?;
    Ok(Report { accuracy, recall })
}

fn write_aggregate(path: &Path, header: &str, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut out = String::new();
    writeln!(out, "{header}").unwrap();
    for r in rows {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.task, r.kind, r.level, r.series, s.mean, s.std, s.min, s.max
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))
}

/// Reads `results` and writes the aggregate CSVs and one SVG per (task, kind).
pub fn write_report(results: &Path, out_dir: &Path) -> Result<ReportFiles, HarnessError> {
    let rows = read_results(results)?;
    let report = build_report(&rows)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let aggregate = out_dir.join(AGGREGATE_FILE);
    let recall_aggregate = out_dir.join(RECALL_AGGREGATE_FILE);
    write_aggregate(&aggregate, AGGREGATE_HEADER, &report.accuracy)?;
    write_aggregate(&recall_aggregate, RECALL_AGGREGATE_HEADER, &report.recall)?;

    let mut panels: BTreeMap<(Task, CorruptionKind), Vec<&AggregateRow>> = BTreeMap::new();
    for r in &report.accuracy {
        panels.entry((r.task, r.kind)).or_default().push(r);
    }
    let mut charts = Vec::new();
    for ((task, kind), rows) in panels {
        let path = out_dir.join(format!("{task}_{kind}.svg"));
        fs::write(&path, render_chart(task, kind, &rows)).map_err(|e| HarnessError::io(&path, e))?;
        charts.push(path);
    }
    Ok(ReportFiles {
        aggregate,
        recall_aggregate,
        charts,
    })
}

fn colour(series: &str) -> &'static str {
    match series {
        "LTM" => "#1f77b4",
        "AHA-PR" => "#d62728",
        "AHA-PC" => "#ff7f0e",
        "FastNN" => "#2ca02c",
        _ => "#555555",
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn render_chart(task: Task, kind: CorruptionKind, rows: &[&AggregateRow]) -> String {
    let max_level = rows.iter().map(|r| r.level).fold(0.0, f64::max).max(1e-9);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |level: f64| LEFT + plot_w * level / max_level;
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut series: Vec<&str> = Vec::new();
    for r in rows {
        if !series.contains(&r.series.as_str()) {
            series.push(&r.series);
        }
    }
    let mut levels: Vec<f64> = rows.iter().map(|r| r.level).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{task} / {kind}</text>"#,
        LEFT + plot_w / 2.0
    )
    .unwrap();

    for i in 0..=5 {
        let v = i as f64 / 5.0;
        writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#dddddd"/><text x="{2}" y="{3:.1}" text-anchor="end">{v:.1}</text>"##,
            y(v),
            LEFT + plot_w,
            LEFT - 6.0,
            y(v) + 4.0
        )
        .unwrap();
    }
    for &l in &levels {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{l:.2}</text>"#,
            x(l),
            TOP + plot_h + 18.0
        )
        .unwrap();
    }
    let x_label = match kind {
        CorruptionKind::Occlusion => "occlusion diameter (fraction of width)",
        CorruptionKind::Noise => "fraction of pixels replaced",
        CorruptionKind::None => "corruption level",
    };
    writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333333"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>
<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">accuracy</text>"##,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    let band = |pts: &[(&AggregateRow, f64, f64)]| -> String {
        let upper = pts.iter().map(|(r, _, hi)| format!("{:.1},{:.1}", x(r.level), y(*hi)));
        let lower = pts.iter().rev().map(|(r, lo, _)| format!("{:.1},{:.1}", x(r.level), y(*lo)));
        upper.chain(lower).collect::<Vec<_>>().join(" ")
    };
    for (i, name) in series.iter().enumerate() {
        let c = colour(name);
        let pts: Vec<&AggregateRow> = rows.iter().copied().filter(|r| r.series == *name).collect();
        let minmax: Vec<_> = pts.iter().map(|r| (*r, r.stats.min, r.stats.max)).collect();
        let std: Vec<_> = pts
            .iter()
            .map(|r| (*r, r.stats.mean - r.stats.std, r.stats.mean + r.stats.std))
            .collect();
        let mean = pts
            .iter()
            .map(|r| format!("{:.1},{:.1}", x(r.level), y(r.stats.mean)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            s,
            r#"<g><polygon points="{}" fill="{c}" fill-opacity="0.12" stroke="none"/>
<polygon points="{}" fill="{c}" fill-opacity="0.28" stroke="none"/>
<polyline points="{mean}" fill="none" stroke="{c}" stroke-width="2.5"/></g>"#,
            band(&minmax),
            band(&std)
        )
        .unwrap();
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 14.0;
        writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2.5"/><text x="{}" y="{}">{name}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::write_results;

    fn rows() -> Vec<ResultRow> {
        let mut out = Vec::new();
        for seed in 0..3u64 {
            for run in 0..4 {
                for (li, level) in [0.0, 0.49, 0.98].into_iter().enumerate() {
                    for signal in Signal::ALL {
                        let acc = ((seed as usize + run + li + signal as usize) % 21) as f64 / 20.0;
                        out.push(ResultRow {
                            task: Task::Classification,
                            kind: CorruptionKind::Occlusion,
                            level,
                            seed,
                            run,
                            signal,
                            accuracy: acc,
                            recall_loss: (signal != Signal::Ltm).then_some(0.01 * (run + 1) as f64),
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn row_counts_and_level_zero_mean() {
        let rows = rows();
        let report = build_report(&rows).unwrap();
        assert_eq!(report.accuracy.len(), 3 * 4);
        assert_eq!(report.recall.len(), 3 * 2);
        let raw: Vec<f64> = rows
            .iter()
            .filter(|r| r.level == 0.0 && r.signal == Signal::AhaPr)
            .map(|r| r.accuracy)
            .collect();
        let direct = raw.iter().sum::<f64>() / raw.len() as f64;
        let agg = report
            .accuracy
            .iter()
            .find(|a| a.level == 0.0 && a.series == "AHA-PR")
            .unwrap();
        assert!((agg.stats.mean - direct).abs() < 1e-12);
    }

    #[test]
    fn writes_csvs_and_well_formed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let results = dir.path().join("results.csv");
        write_results(&results, &rows()).unwrap();
        let files = write_report(&results, &dir.path().join("report")).unwrap();
        assert_eq!(files.charts.len(), 1);
        let svg = fs::read_to_string(&files.charts[0]).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 4);
        let agg = fs::read_to_string(&files.aggregate).unwrap();
        assert!(agg.starts_with(AGGREGATE_HEADER));
        assert_eq!(agg.lines().count(), 1 + 12);
    }
}
