use clap::Args;

use super::eval::{check_strict, eval_one};
use super::report::{BenchRow, BenchmarkSummary};
use super::train::train_one;
use crate::error::{CliError, CliResult};
use crate::manifest;
use crate::settings::Common;

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
}

/// Trains and evaluates every (category, method) cell, then writes the
/// summary tables. A failing cell is recorded and the sweep continues.
pub fn run(_args: &BenchArgs, c: &Common) -> CliResult<()> {
    let categories = c.categories()?;
    let methods = c.methods(true)?;
    let (_, probe) = c.train_config(methods[0])?;
    if probe == "custom" && methods.len() > 1 {
        return Err(CliError::usage(
            "loss weight or corruption overrides apply to a single method; pass one --method",
        ));
    }
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for category in &categories {
        for &method in &methods {
            let outcome = train_one(c, category, method, None)
                .and_then(|t| eval_one(c, category, &t.label, &t.dir, &t.checkpoint).map(|r| (t.label, r)));
            match outcome {
                Ok((label, report)) => {
                    if let Err(e) = check_strict(c, &report.metrics) {
                        problems.push(e.message);
                    }
                    rows.push(BenchRow { category: category.clone(), method: label, report: Some(report.metrics), error: None });
                }
                Err(e) => {
                    eprintln!("error: {category}/{method}: {e}");
                    problems.push(format!("{category}/{method}: {e}"));
                    rows.push(BenchRow {
                        category: category.clone(),
                        method: method.name().to_string(),
                        report: None,
                        error: Some(e.message),
                    });
                }
            }
        }
    }
    let summary = BenchmarkSummary::new(rows);
    let out = c.out();
    let artifacts = summary.write(&out)?;
    manifest::write(&out, "bench", c, &artifacts)?;
    println!("{}", summary.averages_csv());
    let failed = summary.rows.iter().filter(|r| r.report.is_none()).count();
    if failed == summary.rows.len() {
        return Err(CliError::data(format!("all {failed} benchmark cells failed")));
    }
    if c.strict() && !problems.is_empty() {
        return Err(CliError::data(problems.join("; ")));
    }
    Ok(())
}
