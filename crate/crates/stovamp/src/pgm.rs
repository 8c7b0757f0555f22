//! Grayscale image I/O in the two PGM flavors: binary `P5` and ASCII `P2`,
//! with sample depths up to 16 bits. Pixels load as unit-interval real parts
//! of a complex signal vector; reconstructions export as 8-bit `P5`.
//!
//! Parse failures report the byte offset where the file stopped making
//! sense, so a truncated or hand-mangled image is diagnosable at a glance.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::message::ComplexVector;

/// Walks the ASCII header tokens of a PGM file, tracking the byte offset for
/// error reporting. `#` starts a comment running to the end of the line, and
/// comments may appear anywhere whitespace may.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8], path: &'a str) -> Self {
        Tokens { bytes, pos: 0, path }
    }

    fn fail(&self, offset: usize, what: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_string(),
            offset,
            what: what.into(),
        }
    }

    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    /// Next whitespace-delimited token, or an error naming `expect`.
    fn token(&mut self, expect: &str) -> Result<&'a str> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail(start, format!("expected {expect}, found end of file")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.fail(start, format!("expected {expect}, found non-ASCII bytes")))
    }

    /// Next token parsed as a decimal integer in `1..=max`.
    fn number(&mut self, expect: &str, max: u32) -> Result<u32> {
        let start_after_filler = {
            self.skip_filler();
            self.pos
        };
        let tok = self.token(expect)?;
        let value: u32 = tok
            .parse()
            .map_err(|_| self.fail(start_after_filler, format!("expected {expect}, got `{tok}`")))?;
        if value == 0 || value > max {
            return Err(self.fail(
                start_after_filler,
                format!("{expect} must lie in 1..={max}, got {value}"),
            ));
        }
        Ok(value)
    }
}

/// Loads a `P5` (binary) or `P2` (ASCII) PGM image with `maxval <= 65535`.
///
/// Pixels are scaled to `[0, 1]` and returned row-major as the real parts of
/// a complex vector (imaginary parts zero), together with `(height, width)`.
pub fn load_pgm(path: &Path) -> Result<(ComplexVector, (usize, usize))> {
    let path_str = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut t = Tokens::new(&bytes, &path_str);

    let magic = t.token("magic number")?;
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        other => return Err(t.fail(0, format!("expected magic P5 or P2, got `{other}`"))),
    };
    let width = t.number("width", 1 << 20)? as usize;
    let height = t.number("height", 1 << 20)? as usize;
    let maxval = t.number("maxval", 65535)?;
    let count = width * height;
    let scale = 1.0 / maxval as f64;

    let mut pixels: ComplexVector = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates maxval from the payload.
        if t.pos >= bytes.len() || !bytes[t.pos].is_ascii_whitespace() {
            return Err(t.fail(t.pos, "expected a whitespace byte before the P5 payload"));
        }
        t.pos += 1;
        let wide = maxval > 255;
        let per = if wide { 2 } else { 1 };
        let need = count * per;
        let have = bytes.len() - t.pos;
        if have < need {
            return Err(t.fail(
                bytes.len(),
                format!("payload truncated: need {need} bytes, have {have}"),
            ));
        }
        for i in 0..count {
            let at = t.pos + i * per;
            let value = if wide {
                // Two-byte samples are big-endian, most significant first.
                u32::from(bytes[at]) << 8 | u32::from(bytes[at + 1])
            } else {
                u32::from(bytes[at])
            };
            if value > maxval {
                return Err(t.fail(at, format!("sample {value} exceeds maxval {maxval}")));
            }
            pixels.push(Complex64::new(value as f64 * scale, 0.0));
        }
    } else {
        for _ in 0..count {
            let at = {
                t.skip_filler();
                t.pos
            };
            let tok = t.token("pixel value")?;
            let value: u32 = tok
                .parse()
                .map_err(|_| t.fail(at, format!("expected pixel value, got `{tok}`")))?;
            if value > maxval {
                return Err(t.fail(at, format!("sample {value} exceeds maxval {maxval}")));
            }
            pixels.push(Complex64::new(value as f64 * scale, 0.0));
        }
    }
    Ok((pixels, (height, width)))
}

/// Writes unit-interval intensities as an 8-bit binary PGM. Values are
/// clamped to `[0, 1]` before scaling to 0..=255, so slightly out-of-range
/// reconstructions export cleanly.
pub fn write_pgm(path: &Path, height: usize, width: usize, intensities: &[f64]) -> Result<()> {
    if intensities.len() != height * width {
        return Err(Error::Dimension {
            what: "pgm intensities",
            expected: height * width,
            got: intensities.len(),
        });
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(
        intensities
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_file(name: &str, contents: &[u8]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn p5_two_by_two_scales_to_unit_interval() {
        let (_dir, path) = temp_file("small.pgm", b"P5\n2 2\n255\n\x00\xff\x80\x40");
        let (pixels, (h, w)) = load_pgm(&path).unwrap();
        assert_eq!((h, w), (2, 2));
        let values: Vec<f64> = pixels.iter().map(|p| p.re).collect();
        assert_eq!(values[0], 0.0);
        assert_eq!(values[1], 1.0);
        assert!((values[2] - 128.0 / 255.0).abs() < 1e-12);
        assert!((values[3] - 64.0 / 255.0).abs() < 1e-12);
        assert!(pixels.iter().all(|p| p.im == 0.0));
    }

    #[test]
    fn p2_and_p5_agree_and_comments_are_skipped() {
        let (_d5, p5) = temp_file("bin.pgm", b"P5\n# a comment\n3 1\n255\n\x01\x02\x03");
        let (_d2, p2) = temp_file("asc.pgm", b"P2\n3 1 # trailing comment\n255\n1 2\n3\n");
        let (a, dims_a) = load_pgm(&p5).unwrap();
        let (b, dims_b) = load_pgm(&p2).unwrap();
        assert_eq!(dims_a, dims_b);
        assert_eq!(a, b);
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let (_dir, path) = temp_file("wide.pgm", b"P5\n2 1\n65535\n\xff\xff\x00\x01");
        let (pixels, _) = load_pgm(&path).unwrap();
        assert_eq!(pixels[0].re, 1.0);
        assert!((pixels[1].re - 1.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_reports_the_byte_offset() {
        let (_dir, path) = temp_file("short.pgm", b"P5\n2 2\n255\n\x00\xff");
        match load_pgm(&path).unwrap_err() {
            Error::Format { offset, what, .. } => {
                assert_eq!(offset, 13, "offset should be the end of the file");
                assert!(what.contains("truncated"), "{what}");
            }
            other => panic!("expected a format error, got {other}"),
        }
    }

    #[test]
    fn header_problems_are_format_errors() {
        for bad in [
            &b"P6\n2 2\n255\n\x00\x00\x00\x00"[..],
            &b"P5\n0 2\n255\n"[..],
            &b"P5\n2 2\n70000\n"[..],
            &b"P2\n2 1\n255\n12 999\n"[..],
            &b"P2\n2 1\n255\n12\n"[..],
        ] {
            let (_dir, path) = temp_file("bad.pgm", bad);
            assert!(matches!(load_pgm(&path).unwrap_err(), Error::Format { .. }));
        }
    }

    #[test]
    fn write_then_load_round_trips_at_8_bits() {
        let values = [0.0, 0.25, 0.5, 1.0, 1.7, -0.3];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("written.pgm");
        write_pgm(&path, 2, 3, &values).unwrap();
        let (pixels, (h, w)) = load_pgm(&path).unwrap();
        assert_eq!((h, w), (2, 3));
        for (loaded, original) in pixels.iter().zip(&values) {
            let clamped = original.clamp(0.0, 1.0);
            assert!((loaded.re - clamped).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
