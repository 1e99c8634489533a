//! Side-by-side comparison of the bounding procedures.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use log::error;
use rayon::prelude::*;
use serde_json::json;

use fracvrp::bounds::{run_cb, run_cg, run_da, run_dk, BoundReport, CbParams, CgParams, DaParams};
use fracvrp::ngpath::{default_ng_sets, NgStateSpace};
use fracvrp::Instance;

use crate::{emit, load_instances, ClassArgs, Format, OutputArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Procedure {
    Cb,
    Da,
    Cg,
    Dk,
}

const ALL: [Procedure; 4] = [Procedure::Cb, Procedure::Da, Procedure::Cg, Procedure::Dk];

impl Procedure {
    fn label(self) -> &'static str {
        match self {
            Procedure::Cb => "CB",
            Procedure::Da => "DA",
            Procedure::Cg => "CG",
            Procedure::Dk => "DK",
        }
    }
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Instance files (VRPFO or TSPLIB) or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    class: ClassArgs,
    /// Procedures to run; all of them by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    only: Vec<Procedure>,
    /// ng-neighbourhood size used by pricing.
    #[arg(long, default_value_t = 8)]
    delta_ng: usize,
    #[command(flatten)]
    output: OutputArgs,
}

struct Row {
    name: String,
    /// Best primal value found by any procedure, the reference for percentages.
    reference: Option<f64>,
    reports: Vec<Option<BoundReport>>,
}

impl Row {
    fn pct(&self, x: f64) -> Option<f64> {
        self.reference.filter(|z| *z != 0.0 && x.is_finite()).map(|z| 100.0 * x / z)
    }

    fn percent_bound(&self, k: usize) -> Option<f64> {
        self.reports[k].as_ref().and_then(|r| self.pct(r.dual_bound))
    }

    fn percent_primal(&self, k: usize) -> Option<f64> {
        self.reports[k].as_ref()?.primal.as_ref().and_then(|p| self.pct(p.value.to_f64()))
    }
}

fn run_one(inst: &Instance, which: &[Procedure], delta_ng: usize) -> Result<Row> {
    let space = NgStateSpace::forward(inst, &default_ng_sets(inst, delta_ng));
    let mut reports: Vec<Option<BoundReport>> = vec![None; ALL.len()];
    let mut upper = None;
    for (k, p) in ALL.iter().enumerate() {
        if !which.contains(p) {
            continue;
        }
        let report = match p {
            Procedure::Cb => run_cb(inst, &space, &CbParams::default())?,
            Procedure::Da => run_da(
                inst,
                &space,
                &DaParams {
                    upper_bound: upper,
                    ..DaParams::default()
                },
            )?,
            Procedure::Cg => run_cg(inst, &space, &CgParams::default())?,
            Procedure::Dk => run_dk(inst, &space, &CgParams::default())?,
        };
        if let Some(s) = &report.primal {
            if upper.is_none_or(|u| s.value < u) {
                upper = Some(s.value);
            }
        }
        reports[k] = Some(report);
    }
    Ok(Row {
        name: inst.name.clone(),
        reference: upper.map(|u| u.to_f64()),
        reports,
    })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.digits$}"))
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn table(rows: &[Row], sep: &str) -> String {
    let mut out = String::new();
    let mut head = vec!["instance".to_string(), "z_ref".to_string()];
    for p in ALL {
        for col in ["%B", "%PB", "cols", "iter", "Time"] {
            head.push(format!("{} {col}", p.label()));
        }
    }
    let _ = writeln!(out, "{}", head.join(sep));
    for row in rows {
        let mut cells = vec![row.name.clone(), cell(row.reference, 6)];
        for (k, r) in row.reports.iter().enumerate() {
            cells.push(cell(row.percent_bound(k), 2));
            cells.push(cell(row.percent_primal(k), 2));
            cells.push(r.as_ref().map_or(String::new(), |r| r.column_count.to_string()));
            cells.push(r.as_ref().map_or(String::new(), |r| r.iterations.to_string()));
            cells.push(cell(r.as_ref().map(|r| r.elapsed), 2));
        }
        let _ = writeln!(out, "{}", cells.join(sep));
    }
    if rows.len() > 1 {
        let mut cells = vec!["mean".to_string(), String::new()];
        for k in 0..ALL.len() {
            let present = |r: &Row| r.reports[k].as_ref().map(|x| (x.column_count as f64, x.iterations as f64, x.elapsed));
            cells.push(cell(mean(rows.iter().map(|r| r.percent_bound(k))), 2));
            cells.push(cell(mean(rows.iter().map(|r| r.percent_primal(k))), 2));
            cells.push(cell(mean(rows.iter().map(|r| present(r).map(|x| x.0))), 0));
            cells.push(cell(mean(rows.iter().map(|r| present(r).map(|x| x.1))), 1));
            cells.push(cell(mean(rows.iter().map(|r| present(r).map(|x| x.2))), 2));
        }
        let _ = writeln!(out, "{}", cells.join(sep));
    }
    out
}

fn to_json(rows: &[Row]) -> String {
    let items: Vec<_> = rows
        .iter()
        .map(|row| {
            let procs: serde_json::Map<String, serde_json::Value> = ALL
                .iter()
                .enumerate()
                .filter_map(|(k, p)| {
                    let r = row.reports[k].as_ref()?;
                    Some((
                        p.label().to_string(),
                        json!({
                            "dual_bound": r.dual_bound,
                            "primal": r.primal.as_ref().map(|s| s.value.to_string()),
                            "percent_bound": row.percent_bound(k),
                            "percent_primal": row.percent_primal(k),
                            "columns": r.column_count,
                            "iterations": r.iterations,
                            "vehicle_window": [r.m_min, r.m_max],
                            "elapsed": r.elapsed,
                        }),
                    ))
                })
                .collect();
            json!({ "instance": row.name, "z_ref": row.reference, "procedures": procs })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&items).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<ExitCode> {
    let instances = load_instances(&args.inputs, &args.class)?;
    if instances.is_empty() {
        bail!("no instances to bound");
    }
    let which: Vec<Procedure> = if args.only.is_empty() { ALL.to_vec() } else { args.only.clone() };
    let results: Vec<Option<Row>> = instances
        .par_iter()
        .map(|inst| match run_one(inst, &which, args.delta_ng) {
            Ok(row) => Some(row),
            Err(e) => {
                error!("{}: {e}", inst.name);
                None
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    let rows: Vec<Row> = results.into_iter().flatten().collect();
    let text = match args.output.format {
        Format::Csv => table(&rows, ","),
        Format::Text => table(&rows, "\t"),
        Format::Json => to_json(&rows),
    };
    emit(&args.output.out, &text)?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
