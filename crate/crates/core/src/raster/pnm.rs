//! Netpbm graymap/pixmap codec (P2, P3, P5, P6) restricted to maxval <= 255.

use super::Raster;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmEncoding {
    /// ASCII samples (P2/P3).
    Plain,
    /// One byte per sample (P5/P6).
    Raw,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Next decimal token, or `None` at end of input.
    fn next_uint(&mut self) -> Result<Option<u64>> {
        self.skip_whitespace_and_comments();
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos
            || (self.pos < self.bytes.len()
                && !self.bytes[self.pos].is_ascii_whitespace()
                && self.bytes[self.pos] != b'#')
        {
            return Err(Error::format(start, "expected an unsigned decimal integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(Some)
            .ok_or_else(|| Error::format(start, "integer overflow"))
    }

    fn header_uint(&mut self, what: &str) -> Result<u64> {
        let at = self.pos;
        self.next_uint()?
            .ok_or_else(|| Error::format(at, format!("header ends before {what}")))
    }
}

/// Decode a PGM or PPM file. Samples are returned as stored, not rescaled.
pub fn read_pnm(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(0, "missing netpbm magic number"));
    }
    let (channels, encoding) = match bytes[1] {
        b'2' => (1, PnmEncoding::Plain),
        b'3' => (3, PnmEncoding::Plain),
        b'5' => (1, PnmEncoding::Raw),
        b'6' => (3, PnmEncoding::Raw),
        _ => return Err(Error::format(1, "unsupported netpbm magic number")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_uint("width")? as usize;
    let height = cur.header_uint("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            maxval_at,
            format!("unsupported max-value {maxval} (must be 1..=255)"),
        ));
    }
    let samples = width * height * channels;
    let mut values = Vec::with_capacity(samples);
    match encoding {
        PnmEncoding::Plain => {
            for _ in 0..samples {
                let at = cur.pos;
                let v = cur.next_uint()?.ok_or_else(|| {
                    Error::format(
                        at,
                        format!(
                            "truncated payload: expected {samples} samples, found {}",
                            values.len()
                        ),
                    )
                })?;
                if v > maxval {
                    return Err(Error::format(at, format!("sample {v} exceeds maxval {maxval}")));
                }
                values.push(v as f64);
            }
            let at = cur.pos;
            if cur.next_uint()?.is_some() {
                return Err(Error::format(at, "trailing samples after payload"));
            }
        }
        PnmEncoding::Raw => {
            // exactly one whitespace byte separates maxval from the payload
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(Error::format(cur.pos, "missing whitespace after maxval"));
            }
            let start = cur.pos + 1;
            let end = start + samples;
            if end > bytes.len() {
                return Err(Error::format(
                    bytes.len(),
                    format!(
                        "truncated payload: expected {samples} bytes, found {}",
                        bytes.len().saturating_sub(start)
                    ),
                ));
            }
            for (i, &b) in bytes[start..end].iter().enumerate() {
                if u64::from(b) > maxval {
                    return Err(Error::format(
                        start + i,
                        format!("sample {b} exceeds maxval {maxval}"),
                    ));
                }
                values.push(f64::from(b));
            }
        }
    }
    let bands = (0..channels)
        .map(|c| values.iter().skip(c).step_by(channels).copied().collect())
        .collect();
    Raster::new(width, height, bands)
}

/// Encode a 1-band raster as PGM or a 3-band raster as PPM with maxval 255.
pub fn write_pnm(raster: &Raster, encoding: PnmEncoding) -> Result<Vec<u8>> {
    let channels = raster.band_count();
    let format = match channels {
        1 => "PGM",
        3 => "PPM",
        n => {
            return Err(Error::validation(format!(
                "netpbm output needs 1 or 3 bands, raster has {n}"
            )))
        }
    };
    for (b, band) in raster.bands().iter().enumerate() {
        if let Some((i, &v)) = band
            .iter()
            .enumerate()
            .find(|(_, &v)| !(0.0..=255.0).contains(&v) || v.fract() != 0.0)
        {
            return Err(Error::Range {
                format,
                band: b,
                row: i / raster.width(),
                col: i % raster.width(),
                value: v,
            });
        }
    }
    let magic = match (channels, encoding) {
        (1, PnmEncoding::Plain) => "P2",
        (1, PnmEncoding::Raw) => "P5",
        (_, PnmEncoding::Plain) => "P3",
        (_, PnmEncoding::Raw) => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", raster.width(), raster.height()).into_bytes();
    let samples = (0..raster.pixel_count())
        .flat_map(|i| raster.bands().iter().map(move |band| band[i] as u8));
    match encoding {
        PnmEncoding::Raw => out.extend(samples),
        PnmEncoding::Plain => {
            let per_line = raster.width() * channels;
            let text: Vec<String> = samples.map(|s| s.to_string()).collect();
            for line in text.chunks(per_line) {
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_pgm() {
        let r = read_pnm(b"P2 2 2 255 0 1 2 3").unwrap();
        assert_eq!(r.extent(), (2, 2));
        assert_eq!(r.band(0), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let r = read_pnm(b"P2\n# made by hand\n2 1\n# max\n9\n7 9\n").unwrap();
        assert_eq!(r.band(0), &[7.0, 9.0]);
    }

    #[test]
    fn plain_pgm_truncated() {
        let err = read_pnm(b"P2 2 2 255 0 1 2").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn raw_pgm_truncated_reports_offset() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([1, 2, 3]);
        match read_pnm(&bytes).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, bytes.len());
                assert!(message.contains("truncated"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sixteen_bit_maxval_unsupported() {
        let err = read_pnm(b"P2 1 1 65535 7").unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 6),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ppm_splits_channels() {
        let r = read_pnm(b"P3 2 1 255 1 2 3 4 5 6").unwrap();
        assert_eq!(r.band_count(), 3);
        assert_eq!(r.band(0), &[1.0, 4.0]);
        assert_eq!(r.band(2), &[3.0, 6.0]);
    }

    #[test]
    fn plain_and_raw_agree() {
        let r = Raster::new(3, 2, vec![vec![0.0, 1.0, 2.0, 253.0, 254.0, 255.0]; 3]).unwrap();
        for enc in [PnmEncoding::Plain, PnmEncoding::Raw] {
            assert_eq!(read_pnm(&write_pnm(&r, enc).unwrap()).unwrap(), r);
        }
    }

    #[test]
    fn real_values_rejected() {
        let r = Raster::from_band(2, 1, vec![0.5, 1.0]).unwrap();
        let err = write_pnm(&r, PnmEncoding::Raw).unwrap_err();
        assert!(matches!(err, Error::Range { band: 0, row: 0, col: 0, .. }));
    }
}
