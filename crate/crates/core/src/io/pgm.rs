//! Netpbm graymap (PGM) reading and writing, plain (P2) and raw (P5).

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Decoded grayscale samples, already mapped to `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn into_field(self) -> Result<ScalarField> {
        ScalarField::from_vec(self.width, self.height, self.data)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptFile {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_blank();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.corrupt(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptFile {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(Error::UnsupportedFormat("not a P2/P5 graymap".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.corrupt("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.corrupt(format!("maxval {maxval} outside 1..=65535")));
    }
    let scale = 255.0 / maxval as f64;
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if !cur
            .bytes
            .get(cur.pos)
            .is_some_and(|c| c.is_ascii_whitespace())
        {
            return Err(cur.corrupt("missing separator before raster"));
        }
        cur.pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = cur
            .bytes
            .get(cur.pos..cur.pos + need)
            .ok_or_else(|| cur.corrupt(format!("raster truncated: need {need} bytes")))?;
        for (n, chunk) in raster.chunks(if wide { 2 } else { 1 }).enumerate() {
            let v = if wide {
                u16::from_be_bytes([chunk[0], chunk[1]]) as u32
            } else {
                chunk[0] as u32
            };
            if v > maxval {
                return Err(Error::CorruptFile {
                    offset: cur.pos + n * chunk.len(),
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            data.push(v as f64 * scale);
        }
    } else {
        for _ in 0..count {
            cur.skip_blank();
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::CorruptFile {
                    offset: at,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            data.push(v as f64 * scale);
        }
    }
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

/// Rounds to the nearest integer in `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(field: &ScalarField, binary: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.len() * if binary { 1 } else { 4 } + 32);
    let magic = if binary { "P5" } else { "P2" };
    // writing to a Vec cannot fail
    let _ = write!(out, "{magic}\n{} {}\n255\n", field.width(), field.height());
    if binary {
        out.extend(field.data().iter().map(|&v| quantize(v)));
    } else {
        for row in field.data().chunks(field.width()) {
            let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_pgm(path: &std::path::Path, field: &ScalarField, binary: bool) -> Result<()> {
    std::fs::write(path, encode_pgm(field, binary)).map_err(|e| Error::io(path, e))
}
