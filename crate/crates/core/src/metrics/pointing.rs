use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Required first line of an annotation file.
pub const ANNOTATION_HEADER: &str = "image_id,class_label,x0,y0,x1,y1";

/// An axis-aligned box in pixel coordinates, half-open: `x0 ≤ x < x1`, `y0 ≤ y < y1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub image_id: String,
    pub class_label: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.x0..self.x1).contains(&col) && (self.y0..self.y1).contains(&row)
    }

    /// Checks the box lies within a `height × width` image.
    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.x1 <= width && self.y1 <= height
    }
}

/// A saliency map and the boxes of its target class, in the map's coordinates.
#[derive(Clone, Debug)]
pub struct PointingRecord {
    pub map: Grid,
    pub boxes: Vec<BBox>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    pub hits: usize,
    pub misses: usize,
    pub accuracy: f64,
}

impl PointingResult {
    pub fn from_counts(hits: usize, misses: usize) -> Self {
        let total = hits + misses;
        let accuracy = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
        PointingResult { hits, misses, accuracy }
    }
}

/// One point per map: its argmax (scan-order ties) is a hit if inside any box.
pub fn pointing_game(records: &[PointingRecord]) -> Result<PointingResult> {
    if records.is_empty() {
        return Err(Error::arg("pointing game needs at least one record"));
    }
    let mut hits = 0;
    for (i, rec) in records.iter().enumerate() {
        if rec.boxes.is_empty() {
            return Err(Error::arg(format!("record {i} has no bounding boxes")));
        }
        let (row, col) = rec.map.argmax();
        if rec.boxes.iter().any(|b| b.contains(row, col)) {
            hits += 1;
        }
    }
    Ok(PointingResult::from_counts(hits, records.len() - hits))
}

/// Parses `image_id,class_label,x0,y0,x1,y1` lines after the mandatory header.
/// Blank lines are skipped; errors report 1-based line numbers.
pub fn parse_annotations(text: &str) -> Result<Vec<BBox>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if normalize_header(header) == ANNOTATION_HEADER => {}
        Some((n, _)) => {
            return Err(Error::Parse { line: n + 1, message: format!("expected header `{ANNOTATION_HEADER}`") })
        }
        None => return Err(Error::Parse { line: 1, message: "empty annotation file".into() }),
    }
    lines.map(|(n, line)| parse_line(line).map_err(|message| Error::Parse { line: n + 1, message })).collect()
}

fn normalize_header(line: &str) -> String {
    line.split(',').map(str::trim).collect::<Vec<_>>().join(",")
}

fn parse_line(line: &str) -> std::result::Result<BBox, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 comma-separated fields, got {}", fields.len()));
    }
    if fields[0].is_empty() {
        return Err("empty image_id".into());
    }
    let num = |i: usize, name: &str| fields[i].parse::<usize>().map_err(|_| format!("{name} `{}` is not a nonnegative integer", fields[i]));
    let b = BBox {
        image_id: fields[0].to_owned(),
        class_label: num(1, "class_label")?,
        x0: num(2, "x0")?,
        y0: num(3, "y0")?,
        x1: num(4, "x1")?,
        y1: num(5, "y1")?,
    };
    if b.x0 >= b.x1 || b.y0 >= b.y1 {
        return Err(format!("degenerate box ({}, {}, {}, {})", b.x0, b.y0, b.x1, b.y1));
    }
    Ok(b)
}
