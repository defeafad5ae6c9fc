//! The `run` pipeline and its report file.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use hvz_core::problem::{ConfigOverrides, ProblemFile, TaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tasks::{self, Status};
use crate::{exit_code, Format};

pub const RUN_REPORT: &str = "run.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub index: usize,
    pub kind: String,
    pub spec: TaskSpec,
    pub status: Status,
    pub summary: String,
    /// File names relative to the report directory.
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub problem: String,
    pub seed: Option<u64>,
    pub config: ConfigOverrides,
    pub tasks: Vec<TaskRecord>,
    pub status: Status,
    pub exit_code: u8,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::write(dir.join(name), contents).map_err(|e| format!("{}: {e}", dir.join(name).display()))
}

/// Executes the tasks (in parallel, bounded by the global pool), then
/// writes artifacts and the report in declared order.
pub fn run(
    p: &ProblemFile,
    problem_path: &Path,
    out: &Path,
    format: Option<Format>,
    seed: Option<u64>,
) -> Result<RunReport, String> {
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let outcomes: Vec<(tasks::Outcome, f64)> = p
        .tasks
        .par_iter()
        .map(|t| {
            let start = Instant::now();
            let o = tasks::execute(p, t);
            (o, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut records = Vec::new();
    for (i, (t, (o, secs))) in p.tasks.iter().zip(outcomes).enumerate() {
        let stem = format!("{i:02}-{}", t.kind());
        let mut artifacts = Vec::new();
        if format != Some(Format::Json) {
            write(out, &format!("{stem}.csv"), &o.csv)?;
            artifacts.push(format!("{stem}.csv"));
        }
        if format != Some(Format::Csv) {
            let json = serde_json::to_string_pretty(&o.detail).expect("details serialize");
            write(out, &format!("{stem}.json"), &json)?;
            artifacts.push(format!("{stem}.json"));
        }
        println!("task {i} {}: {} ({})", t.kind(), o.status, o.summary);
        records.push(TaskRecord {
            index: i,
            kind: t.kind().to_string(),
            spec: t.clone(),
            status: o.status,
            summary: o.summary,
            artifacts,
            wall_clock_seconds: secs,
        });
    }
    let status = records.iter().map(|r| r.status).max().unwrap_or(Status::Pass);
    let report = RunReport {
        tool: "hvz".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        problem: problem_path.display().to_string(),
        seed,
        config: p.config.clone(),
        exit_code: exit_code(records.iter().map(|r| r.status)),
        tasks: records,
        status,
    };
    write(
        out,
        RUN_REPORT,
        &serde_json::to_string_pretty(&report).expect("reports serialize"),
    )?;
    println!("status: {status}; reports in {}", out.display());
    Ok(report)
}

/// Re-reads a run report, checks that every artifact parses, and prints
/// the report again.
pub fn report(path: &Path, format: Option<Format>) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let r: RunReport = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for t in &r.tasks {
        for a in &t.artifacts {
            let p = dir.join(a);
            let body = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            if a.ends_with(".json") {
                serde_json::from_str::<serde_json::Value>(&body)
                    .map_err(|e| format!("{}: {e}", p.display()))?;
            } else {
                let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes());
                for rec in rd.records() {
                    rec.map_err(|e| format!("{}: {e}", p.display()))?;
                }
            }
        }
    }
    match format.unwrap_or(Format::Json) {
        Format::Json => println!("{}", serde_json::to_string_pretty(&r).expect("reports serialize")),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["index", "kind", "status", "summary", "artifacts"])
                .map_err(|e| e.to_string())?;
            for t in &r.tasks {
                w.write_record([
                    t.index.to_string(),
                    t.kind.clone(),
                    t.status.to_string(),
                    t.summary.clone(),
                    t.artifacts.join(" "),
                ])
                .map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
