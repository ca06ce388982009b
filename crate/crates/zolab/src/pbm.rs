//! Plain PBM (`P1`) images and description templates.
//!
//! `1` is black. The reader accepts any whitespace layout and `#` comments
//! anywhere between tokens; the writer emits one row per line. Description
//! templates are ordinary PBM files of odd side carrying a `# radius r`
//! comment.

use std::fmt::Write as _;

use thiserror::Error;
use zolab_core::image::Image;
use zolab_core::local::{ball_side, Description};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PbmError {
    #[error("malformed PBM at byte {position}: {message}")]
    Malformed { position: usize, message: String },
    #[error("PBM is {width}x{height}; only square images are supported")]
    NonSquare { width: usize, height: usize },
}

/// A decoded PBM raster with the comments found in its header and body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pbm {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels, `true` for black.
    pub pixels: Vec<bool>,
    pub comments: Vec<String>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    comments: Vec<String>,
}

impl Cursor<'_> {
    fn malformed<T>(&self, message: impl Into<String>) -> Result<T, PbmError> {
        Err(PbmError::Malformed { position: self.pos, message: message.into() })
    }

    fn skip_blank(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos + 1;
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
                let text = String::from_utf8_lossy(&self.bytes[start..self.pos]);
                self.comments.push(text.trim().to_string());
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PbmError> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.malformed(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        match text.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.malformed(format!("{what} out of range")),
        }
    }
}

/// Decodes a plain PBM raster of any shape.
pub fn decode(bytes: &[u8]) -> Result<Pbm, PbmError> {
    let mut c = Cursor { bytes, pos: 0, comments: Vec::new() };
    c.skip_blank();
    if !bytes[c.pos..].starts_with(b"P1") {
        return c.malformed("expected magic number P1");
    }
    c.pos += 2;
    if c.bytes.get(c.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        return c.malformed("expected whitespace after magic number");
    }
    let width = c.number("width")?;
    let height = c.number("height")?;
    let count = width.checked_mul(height).filter(|&k| k <= 1 << 32);
    let Some(count) = count else {
        return c.malformed("image dimensions too large");
    };
    let mut pixels = Vec::with_capacity(count);
    while pixels.len() < count {
        c.skip_blank();
        match c.bytes.get(c.pos) {
            Some(b'0') => pixels.push(false),
            Some(b'1') => pixels.push(true),
            Some(_) => return c.malformed("expected pixel value 0 or 1"),
            None => return c.malformed(format!("expected {count} pixels, found {}", pixels.len())),
        }
        c.pos += 1;
    }
    c.skip_blank();
    if c.pos < bytes.len() {
        return c.malformed("unexpected data after the last pixel");
    }
    Ok(Pbm { width, height, pixels, comments: c.comments })
}

/// Reads a square image.
pub fn read_pbm(bytes: &[u8]) -> Result<Image, PbmError> {
    Ok(read_pbm_with_comments(bytes)?.0)
}

/// Reads a square image and the comments it carries.
pub fn read_pbm_with_comments(bytes: &[u8]) -> Result<(Image, Vec<String>), PbmError> {
    let pbm = decode(bytes)?;
    if pbm.width != pbm.height {
        return Err(PbmError::NonSquare { width: pbm.width, height: pbm.height });
    }
    let img = Image::from_bits(pbm.width, &pbm.pixels)
        .map_err(|e| PbmError::Malformed { position: 0, message: e.to_string() })?;
    Ok((img, pbm.comments))
}

fn write_raster(out: &mut String, width: usize, height: usize, comments: &[String], cell: impl Fn(usize, usize) -> bool) {
    out.push_str("P1\n");
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "{width} {height}");
    for i in 0..height {
        for j in 0..width {
            if j > 0 {
                out.push(' ');
            }
            out.push(if cell(i, j) { '1' } else { '0' });
        }
        out.push('\n');
    }
}

/// Canonical encoding: magic, size, one row per line.
pub fn write_pbm(img: &Image) -> String {
    write_pbm_with_comments(img, &[])
}

/// Canonical encoding with `#` comment lines after the magic number.
pub fn write_pbm_with_comments(img: &Image, comments: &[String]) -> String {
    let n = img.n();
    let mut out = String::new();
    write_raster(&mut out, n, n, comments, |i, j| img.get_index(i * n + j));
    out
}

fn radius_comment(comments: &[String]) -> Option<&str> {
    comments.iter().find_map(|c| c.strip_prefix("radius").map(str::trim))
}

/// Reads a description template: an odd square raster whose optional
/// `# radius r` comment must agree with its side.
pub fn read_template(bytes: &[u8]) -> Result<Description, PbmError> {
    let pbm = decode(bytes)?;
    if pbm.width != pbm.height {
        return Err(PbmError::NonSquare { width: pbm.width, height: pbm.height });
    }
    let bad = |message: String| PbmError::Malformed { position: 0, message };
    if pbm.width % 2 == 0 {
        return Err(bad(format!("template side {} is not odd", pbm.width)));
    }
    let r = pbm.width / 2;
    if let Some(text) = radius_comment(&pbm.comments) {
        let stated: usize = text.parse().map_err(|_| bad(format!("bad radius comment `{text}`")))?;
        if stated != r {
            return Err(bad(format!("radius comment {stated} does not match side {}", pbm.width)));
        }
    }
    Description::new(r, &pbm.pixels).map_err(|e| bad(e.to_string()))
}

pub fn write_template(d: &Description) -> String {
    let side = ball_side(d.radius());
    let mut out = String::new();
    write_raster(&mut out, side, side, &[format!("radius {}", d.radius())], |i, j| d.cell_at(i, j));
    out
}
