use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use d3r_core::metrics::{MetricsReport, RocCurve};
use d3r_core::reference::{self, ReferenceRow};
use d3r_core::trainer::Method;

use super::eval::EvalReport;
use super::{fmt_metric, fmt_short, write_file};
use crate::error::{io_err, CliError, CliResult};
use crate::manifest;
use crate::render;
use crate::settings::Common;

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub category: String,
    pub method: String,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodAverage {
    pub method: String,
    pub img_auc: Option<f64>,
    pub img_ap: Option<f64>,
    pub px_auc: Option<f64>,
    pub px_ap: Option<f64>,
    pub pro_auc: Option<f64>,
    pub fps: Option<f64>,
    /// Categories with a report for this method.
    pub categories: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkSummary {
    pub rows: Vec<BenchRow>,
    pub averages: Vec<MethodAverage>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl BenchmarkSummary {
    /// Builds method averages in first-seen method order.
    pub fn new(rows: Vec<BenchRow>) -> Self {
        let mut methods: Vec<String> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        let averages = methods
            .into_iter()
            .map(|m| {
                let reps: Vec<&MetricsReport> = rows.iter().filter(|r| r.method == m).filter_map(|r| r.report.as_ref()).collect();
                MethodAverage {
                    img_auc: mean(reps.iter().map(|r| r.img_auc)),
                    img_ap: mean(reps.iter().map(|r| r.img_ap)),
                    px_auc: mean(reps.iter().map(|r| r.px_auc)),
                    px_ap: mean(reps.iter().map(|r| r.px_ap)),
                    pro_auc: mean(reps.iter().map(|r| r.pro_auc)),
                    fps: mean(reps.iter().map(|r| Some(r.fps))),
                    categories: reps.len(),
                    method: m,
                }
            })
            .collect();
        BenchmarkSummary { rows, averages }
    }

    pub fn categories(&self) -> Vec<String> {
        let mut c: Vec<String> = Vec::new();
        for r in &self.rows {
            if !c.contains(&r.category) {
                c.push(r.category.clone());
            }
        }
        c
    }

    /// Method averages, one row per method.
    pub fn averages_csv(&self) -> String {
        let mut s = String::from("method,img_auc,img_ap,px_auc,px_ap,pro,fps,categories\n");
        for a in &self.averages {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                a.method,
                fmt_metric(a.img_auc),
                fmt_metric(a.img_ap),
                fmt_metric(a.px_auc),
                fmt_metric(a.px_ap),
                fmt_metric(a.pro_auc),
                fmt_metric(a.fps),
                a.categories
            )
            .unwrap();
        }
        s
    }

    /// Per-category table; failed or missing cells are left empty.
    pub fn category_csv(&self, category: &str) -> String {
        let mut s = String::from("method,img_auc,img_ap,px_auc,px_ap,pro,fps,error\n");
        for r in self.rows.iter().filter(|r| r.category == category) {
            let m = r.report.clone().unwrap_or_default();
            let fps = r.report.as_ref().map(|x| x.fps);
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.method,
                fmt_metric(m.img_auc),
                fmt_metric(m.img_ap),
                fmt_metric(m.px_auc),
                fmt_metric(m.px_ap),
                fmt_metric(m.pro_auc),
                fmt_metric(fps),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
            )
            .unwrap();
        }
        s
    }

    pub fn markdown(&self) -> String {
        let mut s = String::from("# Benchmark summary\n\n## Method averages\n\n");
        s.push_str("| Method | Img AUC | Img AP | Px AUC | Px AP | PRO | FPS | Categories |\n");
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for a in &self.averages {
            writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                a.method,
                fmt_short(a.img_auc),
                fmt_short(a.img_ap),
                fmt_short(a.px_auc),
                fmt_short(a.px_ap),
                fmt_short(a.pro_auc),
                a.fps.map_or_else(|| "n/a".into(), |f| format!("{f:.1}")),
                a.categories
            )
            .unwrap();
        }
        for cat in self.categories() {
            write!(s, "\n## {cat}\n\n| Method | Img AUC | Img AP | Px AUC | Px AP | PRO | FPS |\n|---|---|---|---|---|---|---|\n").unwrap();
            for r in self.rows.iter().filter(|r| r.category == cat) {
                match &r.report {
                    Some(m) => writeln!(
                        s,
                        "| {} | {} | {} | {} | {} | {} | {:.1} |",
                        r.method,
                        fmt_short(m.img_auc),
                        fmt_short(m.img_ap),
                        fmt_short(m.px_auc),
                        fmt_short(m.px_ap),
                        fmt_short(m.pro_auc),
                        m.fps
                    ),
                    None => writeln!(s, "| {} | missing | | | | | |", r.method),
                }
                .unwrap();
            }
            if let Some(table) = reference::category_table(&cat) {
                s.push_str("\nPublished reference values for this category:\n\n");
                reference_table(&mut s, table, false);
            }
        }
        s.push_str(
            "\n## Published MVTec AD averages (reference only)\n\n\
             Reported with undisclosed loss weights on different hardware; not a reproduction target.\n\n",
        );
        reference_table(&mut s, &reference::MVTEC_AVERAGE, true);
        s.push_str("\nPublished PRO AUC by category:\n\n| Category |");
        for m in reference::PRO_METHODS {
            write!(s, " {m} |").unwrap();
        }
        s.push_str("\n|---|---|---|---|---|\n");
        for (cat, v) in reference::PRO_BY_CATEGORY {
            writeln!(s, "| {cat} | {} | {} | {} | {} |", v[0], v[1], v[2], v[3]).unwrap();
        }
        s
    }

    /// Writes `summary.{csv,json,md}` and `tables/<category>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut out = vec![
            write_file(&dir.join("summary.csv"), self.averages_csv())?,
            write_file(&dir.join("summary.md"), self.markdown())?,
            write_file(
                &dir.join("summary.json"),
                serde_json::to_string_pretty(self).expect("serializable summary") + "\n",
            )?,
        ];
        for cat in self.categories() {
            out.push(write_file(&dir.join("tables").join(format!("{cat}.csv")), self.category_csv(&cat))?);
        }
        Ok(out)
    }
}

fn reference_table(s: &mut String, rows: &[ReferenceRow], fps: bool) {
    s.push_str("| Method | Img AUC | Img AP | Px AUC | Px AP | PRO |");
    s.push_str(if fps { " FPS |\n|---|---|---|---|---|---|---|\n" } else { "\n|---|---|---|---|---|---|\n" });
    for r in rows {
        write!(s, "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |", r.method, r.img_auc, r.img_ap, r.px_auc, r.px_ap, r.pro).unwrap();
        if let (true, Some(f)) = (fps, r.fps) {
            write!(s, " {f:.1} |").unwrap();
        }
        s.push('\n');
    }
}

pub fn read_roc_csv(path: &Path) -> CliResult<RocCurve> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut curve = RocCurve { thresholds: Vec::new(), fprs: Vec::new(), tprs: Vec::new() };
    for (n, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if cols.len() != 3 {
            return Err(CliError::data(format!("{}:{}: expected 3 columns", path.display(), n + 1)));
        }
        curve.thresholds.push(cols[0]);
        curve.fprs.push(cols[1]);
        curve.tprs.push(cols[2]);
    }
    Ok(curve)
}

/// `(category, method) -> run directory` for every `report.json` two levels
/// below `out`.
fn find_reports(out: &Path) -> CliResult<BTreeMap<(String, String), PathBuf>> {
    let mut found = BTreeMap::new();
    let Ok(cats) = fs::read_dir(out) else {
        return Ok(found);
    };
    for cat in cats.flatten().filter(|e| e.path().is_dir()) {
        for run in fs::read_dir(cat.path()).map_err(io_err(&cat.path()))?.flatten() {
            if run.path().join("report.json").is_file() {
                found.insert(
                    (cat.file_name().to_string_lossy().into_owned(), run.file_name().to_string_lossy().into_owned()),
                    run.path(),
                );
            }
        }
    }
    Ok(found)
}

pub fn run(_args: &ReportArgs, c: &Common) -> CliResult<()> {
    let out = c.out();
    let found = find_reports(&out)?;
    if found.is_empty() {
        return Err(CliError::data(format!("no report.json files found under {}", out.display())));
    }
    let expected: Vec<String> = match &c.methods {
        Some(_) => c.methods(true)?.iter().map(|m| m.name().to_string()).collect(),
        None => Method::ALL.iter().map(|m| m.name().to_string()).collect(),
    };
    let mut rows = Vec::new();
    let mut curves: BTreeMap<String, BTreeMap<String, RocCurve>> = BTreeMap::new();
    for ((cat, method), dir) in &found {
        let path = dir.join("report.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let roc_path = dir.join("roc.csv");
        if roc_path.is_file() {
            curves.entry(cat.clone()).or_default().insert(method.clone(), read_roc_csv(&roc_path)?);
        }
        rows.push(BenchRow { category: cat.clone(), method: method.clone(), report: Some(report.metrics), error: None });
    }
    rows.sort_by_key(|r| {
        let rank = expected.iter().position(|m| *m == r.method).unwrap_or(usize::MAX);
        (r.category.clone(), rank, r.method.clone())
    });
    let summary = BenchmarkSummary::new(rows);
    let report_dir = out.join("report");
    let mut artifacts = summary.write(&report_dir)?;
    for cat in summary.categories() {
        let per_method = curves.get(&cat);
        let mut names = expected.clone();
        if let Some(m) = per_method {
            names.extend(m.keys().filter(|k| !expected.contains(k)).cloned());
        }
        let entries: Vec<(String, Option<&RocCurve>)> =
            names.into_iter().map(|n| { let c = per_method.and_then(|m| m.get(&n)); (n, c) }).collect();
        let svg = render::roc_svg(&format!("{cat}: image-level ROC"), &entries);
        artifacts.push(write_file(&report_dir.join(format!("roc_{cat}.svg")), svg)?);
    }
    manifest::write(&report_dir, "report", c, &artifacts)?;
    println!("{}", summary.markdown());
    println!("wrote {} files to {}", artifacts.len(), report_dir.display());
    Ok(())
}
