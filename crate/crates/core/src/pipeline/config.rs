//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags, each overriding the previous.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::am::AmKind;
use crate::error::{Error, Result};
use crate::eval::{REINIT_SKIP, REINIT_THRESHOLD};
use crate::sm::{SmKind, TrackerConfig};
use crate::ssm::SsmKind;

/// Splits `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Keys are normalized to lower case with `_` read as `-`.
pub fn key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Protocol {
    #[default]
    Single,
    MultiInit,
    Reinit,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Single => "single",
            Protocol::MultiInit => "multi-init",
            Protocol::Reinit => "reinit",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Protocol::Single),
            "multi-init" => Ok(Protocol::MultiInit),
            "reinit" => Ok(Protocol::Reinit),
            _ => Err(Error::Config(format!("unknown protocol '{s}'"))),
        }
    }
}

/// `"50x50"` to `(50, 50)`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("resolution must look like 50x50, got '{s}'")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad resolution '{s}'")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got '{v}'"
        ))),
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub am: AmKind,
    pub ssm: SsmKind,
    pub sm: SmKind,
    pub seq: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub protocol: Protocol,
    pub out: PathBuf,
    /// Smooth frames once at ingestion.
    pub smoothing: bool,
    /// Record wall time per frame. Off by default so outputs are reproducible.
    pub timing: bool,
    pub reinit_threshold: f64,
    pub reinit_skip: usize,
    pub tracker: TrackerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            am: AmKind::Ssim,
            ssm: SsmKind::Homography,
            sm: SmKind::Fclk,
            seq: None,
            gt: None,
            protocol: Protocol::Single,
            out: PathBuf::from("results"),
            smoothing: true,
            timing: false,
            reinit_threshold: REINIT_THRESHOLD,
            reinit_skip: REINIT_SKIP,
            tracker: TrackerConfig::default(),
        }
    }
}

impl RunConfig {
    /// Sets one option by its flag name (without the leading dashes).
    /// Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let t = &mut self.tracker;
        match key {
            "am" => self.am = parse_value(key, value)?,
            "ssm" => self.ssm = parse_value(key, value)?,
            "sm" => self.sm = parse_value(key, value)?,
            "seq" => self.seq = Some(base.join(value)),
            "gt" => self.gt = Some(base.join(value)),
            "protocol" => self.protocol = value.parse()?,
            "out" => self.out = base.join(value),
            "smoothing" => self.smoothing = parse_bool(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "reinit-threshold" => self.reinit_threshold = parse_value(key, value)?,
            "reinit-skip" => self.reinit_skip = parse_value(key, value)?,
            "resolution" => t.resolution = parse_resolution(value)?,
            "max-iters" => t.gd.max_iters = parse_value(key, value)?,
            "stop-norm" => t.gd.stop_norm = parse_value(key, value)?,
            "max-corner-step" => t.gd.max_corner_step = parse_value(key, value)?,
            "gauss-newton" => t.gd.gauss_newton = parse_bool(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "nn-samples" => t.nn.samples = parse_value(key, value)?,
            "nn-sigma" => t.nn.sigma_px = parse_value(key, value)?,
            "pf-particles" => t.pf.particles = parse_value(key, value)?,
            "pf-sigma" => t.pf.sigma_px = parse_value(key, value)?,
            "pf-beta" => t.pf.beta = parse_value(key, value)?,
            "ransac-grid" => t.ransac.grid = parse_value(key, value)?,
            "ransac-hypotheses" => t.ransac.hypotheses = parse_value(key, value)?,
            "ransac-threshold" => t.ransac.inlier_px = parse_value(key, value)?,
            "ransac-patch" => t.ransac.sub_patch_fraction = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown option '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (line, key, value) in key_values(&text)? {
            self.set(&key, &value, base)
                .map_err(|e| Error::Config(format!("{}:{line}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        if !(self.reinit_threshold > 0.0) {
            return Err(Error::Config("reinit threshold must be positive".into()));
        }
        Ok(())
    }
}
