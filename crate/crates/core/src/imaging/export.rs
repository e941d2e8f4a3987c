//! Saliency map file formats.
//!
//! * CSV: one line per row, values comma-separated, fixed point with six decimals.
//! * Binary: `u32` height, `u32` width, then `height · width` `f32` values row-major,
//!   all little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn write_csv<W: Write>(map: &Grid, mut out: W) -> Result<()> {
    let mut line = String::new();
    for row in map.values().chunks(map.width()) {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.6}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn to_csv_string(map: &Grid) -> String {
    let mut buf = Vec::new();
    write_csv(map, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_csv(text: &str) -> Result<Grid> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse { line: n + 1, message: format!("expected {w} values, got {}", row.len()) })
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    Grid::new(height, width.unwrap_or(0), values)
}

pub fn write_binary<W: Write>(map: &Grid, mut out: W) -> Result<()> {
    out.write_all(&(map.height() as u32).to_le_bytes())?;
    out.write_all(&(map.width() as u32).to_le_bytes())?;
    for &v in map.values() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Grid> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let height = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let width = u32::from_le_bytes(word) as usize;
    let mut values = Vec::with_capacity(height * width);
    for _ in 0..height * width {
        input.read_exact(&mut word)?;
        values.push(f64::from(f32::from_le_bytes(word)));
    }
    Grid::new(height, width, values)
}
