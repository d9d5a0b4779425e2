//! Sequence ingestion, synthetic sequences, configuration, result files and
//! the command-line entry point.

pub mod config;
pub mod io;
pub mod results;
pub mod synthetic;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::Parser;

use crate::am::AmKind;
use crate::error::{Error, Result};
use crate::eval::{
    default_thresholds, run_multi_init, run_reinit, run_single, GroundTruth, RunOptions,
};
use crate::image::{gaussian_smooth, GrayImage};
use crate::sm::{build_tracker, SmKind};
use crate::ssm::SsmKind;

pub use config::{Protocol, RunConfig};
pub use io::{load_sequence, read_ground_truth, write_ground_truth};
pub use results::{write_results, OutputPaths, Report};
pub use synthetic::{generate_synthetic, texture, SyntheticScript, SyntheticSpec};

const AMS: [&str; 7] = ["ssd", "ncc", "zncc", "scv", "rscv", "ssim", "spss"];
const SSMS: [&str; 7] = [
    "translation",
    "isometry",
    "similitude",
    "affine",
    "homography",
    "sl3",
    "corners",
];
const SMS: [&str; 11] = [
    "iclk", "fclk", "falk", "ialk", "esm", "nn", "pf", "ransac", "nnic", "pffc", "rklt",
];

/// Track a sequence with a chosen appearance model, state-space model and
/// search method, and write per-frame errors, the success-rate curve and a
/// summary.
#[derive(Parser, Debug)]
#[command(name = "regtrack", version)]
struct Cli {
    #[arg(long, value_parser = PossibleValuesParser::new(AMS))]
    am: Option<String>,
    #[arg(long, value_parser = PossibleValuesParser::new(SSMS))]
    ssm: Option<String>,
    #[arg(long, value_parser = PossibleValuesParser::new(SMS))]
    sm: Option<String>,
    /// Frame directory or synthetic sequence script.
    #[arg(long, value_name = "DIR|FILE")]
    seq: Option<PathBuf>,
    /// Ground-truth file (defaults to groundtruth.txt in the frame directory).
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
    #[arg(long, value_parser = PossibleValuesParser::new(["single", "multi-init", "reinit"]))]
    protocol: Option<String>,
    /// Template sampling grid, e.g. 50x50.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    stop_norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the available components and exit.
    #[arg(long)]
    list_components: bool,
    /// Record per-frame wall time (makes outputs run-dependent).
    #[arg(long)]
    timing: bool,
    /// Skip Gaussian smoothing of the frames.
    #[arg(long)]
    no_smoothing: bool,
    #[arg(long)]
    max_corner_step: Option<f64>,
    #[arg(long)]
    nn_samples: Option<usize>,
    #[arg(long)]
    nn_sigma: Option<f64>,
    #[arg(long)]
    pf_particles: Option<usize>,
    #[arg(long)]
    pf_sigma: Option<f64>,
    #[arg(long)]
    pf_beta: Option<f64>,
    #[arg(long)]
    ransac_grid: Option<usize>,
    #[arg(long)]
    ransac_hypotheses: Option<usize>,
    #[arg(long)]
    ransac_threshold: Option<f64>,
    /// Sub-patch side as a fraction of the object box side.
    #[arg(long)]
    ransac_patch: Option<f64>,
    #[arg(long)]
    reinit_threshold: Option<f64>,
    #[arg(long)]
    reinit_skip: Option<usize>,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        put("am", self.am.clone());
        put("ssm", self.ssm.clone());
        put("sm", self.sm.clone());
        put("seq", path(&self.seq));
        put("gt", path(&self.gt));
        put("protocol", self.protocol.clone());
        put("resolution", self.resolution.clone());
        put("max-iters", self.max_iters.map(|x| x.to_string()));
        put("stop-norm", self.stop_norm.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("out", path(&self.out));
        put(
            "max-corner-step",
            self.max_corner_step.map(|x| x.to_string()),
        );
        put("nn-samples", self.nn_samples.map(|x| x.to_string()));
        put("nn-sigma", self.nn_sigma.map(|x| x.to_string()));
        put("pf-particles", self.pf_particles.map(|x| x.to_string()));
        put("pf-sigma", self.pf_sigma.map(|x| x.to_string()));
        put("pf-beta", self.pf_beta.map(|x| x.to_string()));
        put("ransac-grid", self.ransac_grid.map(|x| x.to_string()));
        put(
            "ransac-hypotheses",
            self.ransac_hypotheses.map(|x| x.to_string()),
        );
        put(
            "ransac-threshold",
            self.ransac_threshold.map(|x| x.to_string()),
        );
        put("ransac-patch", self.ransac_patch.map(|x| x.to_string()));
        put(
            "reinit-threshold",
            self.reinit_threshold.map(|x| x.to_string()),
        );
        put("reinit-skip", self.reinit_skip.map(|x| x.to_string()));
        if self.timing {
            put("timing", Some("true".into()));
        }
        if self.no_smoothing {
            put("smoothing", Some("false".into()));
        }
        v
    }
}

/// Frames and ground truth for `cfg.seq`, smoothed if configured.
pub fn load_source(cfg: &RunConfig) -> Result<(Vec<GrayImage>, GroundTruth)> {
    let seq = cfg
        .seq
        .as_ref()
        .ok_or_else(|| Error::Config("no sequence given (--seq)".into()))?;
    let (frames, gt) = if seq.is_dir() {
        let gt_path = cfg
            .gt
            .clone()
            .unwrap_or_else(|| seq.join("groundtruth.txt"));
        load_sequence(seq, &gt_path)?
    } else {
        let text = std::fs::read_to_string(seq).map_err(|e| Error::Ingestion {
            path: seq.clone(),
            message: e.to_string(),
        })?;
        if !SyntheticScript::is_script(&text) {
            return Err(Error::Ingestion {
                path: seq.clone(),
                message: "neither a directory nor a synthetic sequence script".into(),
            });
        }
        if cfg.gt.is_some() {
            return Err(Error::Config(
                "--gt cannot be combined with a synthetic sequence, which carries its own ground truth"
                    .into(),
            ));
        }
        SyntheticScript::parse(&text, seq.parent().unwrap_or(Path::new("")))?.generate()?
    };
    let frames = if cfg.smoothing {
        frames.iter().map(gaussian_smooth).collect()
    } else {
        frames
    };
    Ok((frames, gt))
}

/// Runs the configured protocol and writes the result files.
pub fn run(cfg: &RunConfig) -> Result<OutputPaths> {
    cfg.validate()?;
    let (frames, gt) = load_source(cfg)?;
    let factory = || build_tracker(cfg.am, cfg.ssm, cfg.sm, &cfg.tracker);
    let opts = RunOptions {
        projection: Some(cfg.ssm),
        timing: cfg.timing,
    };
    let (runs, reinits) = match cfg.protocol {
        Protocol::Single => (vec![run_single(&factory, &frames, &gt, 0, &opts)?], None),
        Protocol::MultiInit => (run_multi_init(&factory, &frames, &gt, &opts)?, None),
        Protocol::Reinit => {
            let r = run_reinit(
                &factory,
                &frames,
                &gt,
                cfg.reinit_threshold,
                cfg.reinit_skip,
                &opts,
            )?;
            (vec![r.run], Some(r.reinits))
        }
    };
    let report = Report {
        header: vec![
            ("am".into(), cfg.am.to_string()),
            ("ssm".into(), cfg.ssm.to_string()),
            ("sm".into(), cfg.sm.to_string()),
            ("protocol".into(), cfg.protocol.to_string()),
            ("seed".into(), cfg.tracker.seed.to_string()),
        ],
        runs,
        reinits,
        thresholds: default_thresholds(),
    };
    write_results(&cfg.out, &report)
}

fn list_components() -> String {
    let ams: Vec<&str> = AmKind::ALL.iter().map(|k| k.name()).collect();
    let ssms: Vec<&str> = SsmKind::ALL.iter().map(|k| k.name()).collect();
    let sms: Vec<&str> = SmKind::ALL.iter().map(|k| k.name()).collect();
    format!(
        "am: {}\nssm: {}\nsm: {}\n",
        ams.join(" "),
        ssms.join(" "),
        sms.join(" ")
    )
}

fn config_from(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in cli.overrides() {
        cfg.set(k, &v, Path::new(""))?;
    }
    Ok(cfg)
}

/// Parses `argv` (including the program name), runs and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if cli.list_components {
        print!("{}", list_components());
        return 0;
    }
    match config_from(&cli).and_then(|cfg| run(&cfg)) {
        Ok(paths) => {
            println!("{}", paths.frames.display());
            println!("{}", paths.sr_curve.display());
            println!("{}", paths.summary.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
