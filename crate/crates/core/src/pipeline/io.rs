//! Frame and ground-truth ingestion.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::image::GrayImage;
use crate::ssm::CornersBox;

const FRAME_EXTENSIONS: [&str; 7] = ["png", "jpg", "jpeg", "bmp", "pgm", "ppm", "pnm"];

fn ingestion(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Decodes an image file to luma.
pub fn load_frame(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| ingestion(path, e.to_string()))?;
    let rgb = img.to_rgb8();
    GrayImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
        .map_err(|e| ingestion(path, e.to_string()))
}

/// Image files in `dir`, sorted by file name.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| ingestion(dir, e.to_string()))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| ingestion(dir, e.to_string()))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_frame {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// One box per line, `x1 y1 x2 y2 x3 y3 x4 y4` (top-left, top-right,
/// bottom-right, bottom-left). A first line starting with a non-numeric token
/// is a header and is skipped, as are blank lines.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<GroundTruth> {
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if boxes.is_empty() && i == 0 && tokens[0].parse::<f64>().is_err() {
            continue;
        }
        let values = tokens
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| ingestion(path, format!("line {}: non-numeric value", i + 1)))?;
        if values.len() != 8 {
            return Err(ingestion(
                path,
                format!("line {}: expected 8 numbers, found {}", i + 1, values.len()),
            ));
        }
        let b = CornersBox::from_flat(&values)
            .map_err(|e| ingestion(path, format!("line {}: {e}", i + 1)))?;
        boxes.push(b);
    }
    GroundTruth::new(boxes).map_err(|e| ingestion(path, e.to_string()))
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| ingestion(path, e.to_string()))?;
    parse_ground_truth(&text, path)
}

/// Writes boxes with the shortest representation that reads back exactly.
pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let mut out = String::new();
    for b in gt.boxes() {
        let line: Vec<String> = b.to_flat().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Frames of a directory sequence and its ground truth.
pub fn load_sequence(dir: &Path, gt_path: &Path) -> Result<(Vec<GrayImage>, GroundTruth)> {
    let paths = frame_paths(dir)?;
    if paths.len() < 2 {
        return Err(ingestion(
            dir,
            format!("a sequence needs at least 2 frames, found {}", paths.len()),
        ));
    }
    let gt = read_ground_truth(gt_path)?;
    if gt.len() != paths.len() {
        return Err(ingestion(
            gt_path,
            format!("{} boxes for {} frames", gt.len(), paths.len()),
        ));
    }
    let frames = paths
        .iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = frames
        .iter()
        .position(|f| f.width() != frames[0].width() || f.height() != frames[0].height())
    {
        return Err(ingestion(
            &paths[i],
            "frame size differs from the first frame",
        ));
    }
    Ok((frames, gt))
}
