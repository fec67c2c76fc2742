use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Detection};

/// Parses `frame_id x_min y_min x_max y_max confidence` lines. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_detections(text: &str) -> Result<BTreeMap<String, Vec<Detection>>> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| Error::Validation(format!("detection line {}: {msg}", lineno + 1));
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let mut nums = [0.0; 5];
        for (n, f) in nums.iter_mut().zip(&fields[1..]) {
            *n = f.parse().map_err(|_| bad(format!("not a number: {f:?}")))?;
        }
        let bbox = BoundingBox::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| bad(e.to_string()))?;
        let det = Detection::new(bbox, nums[4]).map_err(|e| bad(e.to_string()))?;
        out.entry(fields[0].to_string()).or_default().push(det);
    }
    Ok(out)
}

pub fn load_detections(path: &Path) -> Result<BTreeMap<String, Vec<Detection>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text).map_err(|e| Error::format(path, e))
}

pub fn format_detections<'a>(items: impl IntoIterator<Item = (&'a str, &'a [Detection])>) -> String {
    let mut out = String::new();
    for (frame, dets) in items {
        for d in dets {
            let b = d.bbox;
            let _ = writeln!(
                out,
                "{frame} {} {} {} {} {}",
                b.x_min, b.y_min, b.x_max, b.y_max, d.confidence
            );
        }
    }
    out
}
