//! Output files: per-frame CSV, success-rate CSV and a summary record.
//! Every number is written with six decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{sr_curve, RunResult, SrCurve};

pub const FRAMES_FILE: &str = "frames.csv";
pub const SR_FILE: &str = "sr_curve.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

pub const FRAMES_HEADER: &str = "run,frame,e_al,x1,y1,x2,y2,x3,y3,x4,y4,iters,ms";
pub const SR_HEADER: &str = "t_p,sr";

/// Everything written for one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// `(key, value)` pairs that open the summary, e.g. the tracker description.
    pub header: Vec<(String, String)>,
    pub runs: Vec<RunResult>,
    pub reinits: Option<usize>,
    pub thresholds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub frames: PathBuf,
    pub sr_curve: PathBuf,
    pub summary: PathBuf,
}

pub fn frames_csv(runs: &[RunResult]) -> String {
    let mut s = String::from(FRAMES_HEADER);
    s.push('\n');
    for (k, run) in runs.iter().enumerate() {
        for r in &run.records {
            let _ = write!(s, "{k},{},{:.6}", r.frame, r.error);
            for v in r.corners.to_flat() {
                let _ = write!(s, ",{v:.6}");
            }
            let _ = writeln!(s, ",{},{:.6}", r.iterations, r.millis);
        }
    }
    s
}

pub fn sr_csv(curve: Option<&SrCurve>) -> String {
    let mut s = String::from(SR_HEADER);
    s.push('\n');
    if let Some(c) = curve {
        for (t, r) in c.thresholds.iter().zip(&c.rates) {
            let _ = writeln!(s, "{t:.6},{r:.6}");
        }
    }
    s
}

fn summary_text(report: &Report, curve: Option<&SrCurve>) -> String {
    let records: Vec<_> = report.runs.iter().flat_map(|r| &r.records).collect();
    let n = records.len();
    let mean_error = if n > 0 {
        records.iter().map(|r| r.error).sum::<f64>() / n as f64
    } else {
        0.0
    };
    let total_ms: f64 = records.iter().map(|r| r.millis).sum();
    let mean_fps = if total_ms > 0.0 {
        n as f64 / (total_ms / 1e3)
    } else {
        0.0
    };
    let flagged = records.iter().filter(|r| r.flags.any()).count();
    let mut s = String::new();
    for (k, v) in &report.header {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "runs = {}", report.runs.len());
    let _ = writeln!(s, "frames = {n}");
    let _ = writeln!(s, "auc = {:.6}", curve.map_or(0.0, |c| c.auc));
    let _ = writeln!(s, "mean_error = {mean_error:.6}");
    let _ = writeln!(s, "mean_fps = {mean_fps:.6}");
    let _ = writeln!(s, "reinits = {}", report.reinits.unwrap_or(0));
    let _ = writeln!(s, "flagged_frames = {flagged}");
    s
}

/// Writes the three files into `dir`, creating it if needed.
pub fn write_results(dir: &Path, report: &Report) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let errors: Vec<f64> = report.runs.iter().flat_map(|r| r.errors()).collect();
    let curve = if errors.is_empty() {
        None
    } else {
        Some(sr_curve(&errors, &report.thresholds)?)
    };
    let paths = OutputPaths {
        frames: dir.join(FRAMES_FILE),
        sr_curve: dir.join(SR_FILE),
        summary: dir.join(SUMMARY_FILE),
    };
    fs::write(&paths.frames, frames_csv(&report.runs))?;
    fs::write(&paths.sr_curve, sr_csv(curve.as_ref()))?;
    fs::write(&paths.summary, summary_text(report, curve.as_ref()))?;
    Ok(paths)
}

/// One parsed row of the per-frame CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRow {
    pub run: usize,
    pub frame: usize,
    pub error: f64,
    pub corners: [f64; 8],
    pub iterations: usize,
    pub millis: f64,
}

fn bad(path: &Path, line: usize, what: &str) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        message: format!("line {line}: {what}"),
    }
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<FrameRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(FRAMES_HEADER) {
        return Err(bad(path, 1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(bad(path, i + 2, "expected 13 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(path, i + 2, "bad number"));
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(path, i + 2, "bad integer"))
        };
        let mut corners = [0.0; 8];
        for (c, s) in corners.iter_mut().zip(&f[3..11]) {
            *c = num(s)?;
        }
        rows.push(FrameRow {
            run: int(f[0])?,
            frame: int(f[1])?,
            error: num(f[2])?,
            corners,
            iterations: int(f[11])?,
            millis: num(f[12])?,
        });
    }
    Ok(rows)
}

pub fn read_sr_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SR_HEADER) {
        return Err(bad(path, 1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let (a, b) = l
                .split_once(',')
                .ok_or_else(|| bad(path, i + 2, "expected 2 columns"))?;
            let a = a.parse().map_err(|_| bad(path, i + 2, "bad number"))?;
            let b = b.parse().map_err(|_| bad(path, i + 2, "bad number"))?;
            Ok((a, b))
        })
        .collect()
}
