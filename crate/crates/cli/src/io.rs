//! Raster and matrix I/O: 16-bit binary PGM and header-free CSV.

use std::io::Write;
use std::path::Path;

use cps_core::{Image, Shape};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

const PGM_MAXVAL: u16 = u16::MAX;

/// Affine map from stored PGM samples back to image values:
/// `value = offset + step · sample`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgmScale {
    pub offset: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pgm,
    Csv,
}

fn format_of(path: &Path) -> CliResult<Format> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pgm") => Ok(Format::Pgm),
        Some("csv") => Ok(Format::Csv),
        _ => Err(CliError::Usage(format!(
            "{}: unsupported image format (expected .pgm or .csv)",
            path.display()
        ))),
    }
}

pub fn read_image(path: &Path) -> CliResult<Image> {
    let format = format_of(path)?;
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    match format {
        Format::Pgm => parse_pgm(&bytes).map_err(|m| CliError::format(path, m)),
        Format::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| {
                CliError::format(
                    path,
                    format!("not UTF-8 at byte offset {}", e.valid_up_to()),
                )
            })?;
            parse_csv(text).map_err(|m| CliError::format(path, m))
        }
    }
}

/// Writes `img` atomically. Returns the PGM scale when values had to be
/// rescaled to fit the 16-bit range.
pub fn write_image(path: &Path, img: &Image) -> CliResult<Option<PgmScale>> {
    if !img.all_finite() {
        return Err(
            cps_core::Error::Input("cannot write an image with non-finite values".into()).into(),
        );
    }
    match format_of(path)? {
        Format::Pgm => {
            let (bytes, scale) = encode_pgm(img);
            atomic_write(path, &bytes)?;
            Ok(scale)
        }
        Format::Csv => {
            atomic_write(path, encode_csv(img).as_bytes())?;
            Ok(None)
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected {what} at byte offset {start}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("{what} out of range at byte offset {start}"))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Image, String> {
    if !bytes.starts_with(b"P5") {
        return Err("bad magic at byte offset 0: expected \"P5\"".into());
    }
    let mut h = HeaderReader { bytes, pos: 2 };
    let cols = h.number("width")?;
    let rows = h.number("height")?;
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if cols == 0 || rows == 0 {
        return Err(format!("empty {cols}x{rows} image in header"));
    }
    if !(1..=usize::from(PGM_MAXVAL)).contains(&maxval) {
        return Err(format!(
            "maxval {maxval} near byte offset {maxval_at} must lie in 1..=65535"
        ));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => {
            return Err(format!(
                "expected one whitespace byte after maxval at byte offset {}",
                h.pos
            ))
        }
    }
    let width = if maxval > 255 { 2 } else { 1 };
    let payload = &bytes[h.pos..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .ok_or("image dimensions overflow")?;
    if payload.len() != expected {
        let kind = if payload.len() < expected {
            "truncated"
        } else {
            "oversized"
        };
        return Err(format!(
            "{kind} payload starting at byte offset {}: expected {expected} bytes, found {}",
            h.pos,
            payload.len()
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in payload.chunks_exact(width).enumerate() {
        let v = if width == 2 {
            usize::from(u16::from_be_bytes([chunk[0], chunk[1]]))
        } else {
            usize::from(chunk[0])
        };
        if v > maxval {
            return Err(format!(
                "sample {v} exceeds maxval {maxval} at byte offset {}",
                h.pos + i * width
            ));
        }
        data.push(v as f64);
    }
    Ok(Image::from_vec(Shape::new(rows, cols), data))
}

/// Integer images inside `[0, 65535]` are stored verbatim; anything else is
/// min-max scaled to the full 16-bit range.
pub fn encode_pgm(img: &Image) -> (Vec<u8>, Option<PgmScale>) {
    let max = f64::from(PGM_MAXVAL);
    let verbatim = img
        .as_slice()
        .iter()
        .all(|&v| v.fract() == 0.0 && (0.0..=max).contains(&v));
    let scale = (!verbatim).then(|| {
        let (lo, hi) = (img.min(), img.max());
        PgmScale {
            offset: lo,
            step: (hi - lo) / max,
        }
    });
    let mut out = format!("P5\n{} {}\n{}\n", img.cols(), img.rows(), PGM_MAXVAL).into_bytes();
    out.reserve(2 * img.len());
    for &v in img.as_slice() {
        let sample = match scale {
            Some(s) if s.step > 0.0 => ((v - s.offset) / s.step).round().clamp(0.0, max),
            Some(_) => 0.0,
            None => v,
        };
        out.extend_from_slice(&(sample as u16).to_be_bytes());
    }
    (out, scale)
}

pub fn parse_csv(text: &str) -> Result<Image, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, field)| {
                field.trim().parse::<f64>().map_err(|_| {
                    format!(
                        "line {}, column {}: '{}' is not a number",
                        i + 1,
                        j + 1,
                        field.trim()
                    )
                })
            })
            .collect::<Result<Vec<f64>, String>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!(
                    "line {}: expected {} values, found {}",
                    i + 1,
                    first.len(),
                    row.len()
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(Image::from_rows(&rows))
}

/// One line per row; values use the shortest representation that parses
/// back to the same number.
pub fn encode_csv(img: &Image) -> String {
    let mut out = String::new();
    for r in 0..img.rows() {
        let line: Vec<String> = img.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_example() {
        let img = parse_csv("0,1\n2,3\n").unwrap();
        assert_eq!(img, Image::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]));
        assert_eq!(encode_csv(&img), "0,1\n2,3\n");
    }

    #[test]
    fn csv_errors_name_the_location() {
        assert!(parse_csv("1,2\n3\n").unwrap_err().contains("line 2"));
        assert!(parse_csv("1,x\n").unwrap_err().contains("column 2"));
        assert!(parse_csv("\n").is_err());
    }

    #[test]
    fn pgm_header_comments_and_eight_bit() {
        let mut bytes = b"P5\n# comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 200]);
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!(img.as_slice(), &[7.0, 200.0]);
    }

    #[test]
    fn pgm_errors() {
        assert!(parse_pgm(b"P2\n1 1\n255\n\x00")
            .unwrap_err()
            .contains("offset 0"));
        let err = parse_pgm(b"P5\n2 2\n65535\n\x00\x01\x00").unwrap_err();
        assert!(err.contains("expected 8 bytes, found 3"), "{err}");
        assert!(parse_pgm(b"P5\n1 1\n0\n\x00").is_err());
        assert!(parse_pgm(b"P5\n1 1\n9\n\x0a")
            .unwrap_err()
            .contains("exceeds maxval"));
    }

    #[test]
    fn floating_images_are_scaled() {
        let img = Image::from_rows(&[vec![-1.0, 0.5], vec![2.0, 0.0]]);
        let (bytes, scale) = encode_pgm(&img);
        let s = scale.unwrap();
        assert_eq!(s.offset, -1.0);
        let back = parse_pgm(&bytes).unwrap().map(|v| s.offset + s.step * v);
        for (a, b) in img.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= s.step / 2.0 + 1e-15);
        }
        let (_, flat) = encode_pgm(&Image::filled(Shape::new(2, 2), 0.25));
        assert_eq!(
            flat,
            Some(PgmScale {
                offset: 0.25,
                step: 0.0
            })
        );
    }
}
