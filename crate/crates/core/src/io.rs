//! Image file formats: binary PGM (P5) and the lossless float-raw format.
//!
//! Float-raw layout: `b"AGF2"`, width (u32 LE), height (u32 LE), 4 zero
//! bytes, then `width*height` little-endian `f64` samples in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};

pub const FLOAT_RAW_MAGIC: &[u8; 4] = b"AGF2";

/// Reads either format, chosen by the file's magic bytes.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image2D> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<Image2D> {
    if bytes.starts_with(FLOAT_RAW_MAGIC) {
        decode_float_raw(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::Format("unrecognized image magic".into()))
    }
}

/// Writes `.pgm` files as 16-bit PGM (samples clamped to [0,1]); every
/// other extension gets the float-raw format.
pub fn write_image(img: &Image2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let bytes = if is_pgm {
        encode_pgm(img, 65535)?
    } else {
        encode_float_raw(img)
    };
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

/// Masks are written as 8-bit PGM with 0 / 255.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_pgm(&mask.to_image(), 255)?;
    fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn encode_float_raw(img: &Image2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * img.len());
    out.extend_from_slice(FLOAT_RAW_MAGIC);
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_float_raw(bytes: &[u8]) -> Result<Image2D> {
    if bytes.len() < 16 || &bytes[..4] != FLOAT_RAW_MAGIC {
        return Err(Error::Format("float-raw header missing".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes[12..16] != [0u8; 4] {
        return Err(Error::Format(
            "float-raw reserved bytes are not zero".into(),
        ));
    }
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let body = &bytes[16..];
    if body.len() != n {
        return Err(Error::Format(format!(
            "expected {n} data bytes for {width}x{height}, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image2D::from_vec(width, height, data).map_err(|e| Error::Format(e.to_string()))
}

/// Linear map of [0,1] to [0, maxval]; values outside are clamped.
pub fn encode_pgm(img: &Image2D, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidParameter(
            "PGM maxval must be positive".into(),
        ));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let m = f64::from(maxval);
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * m).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image2D> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let width = parse_usize(next_token(bytes, &mut pos)?)?;
    let height = parse_usize(next_token(bytes, &mut pos)?)?;
    let maxval = parse_usize(next_token(bytes, &mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("invalid PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated PGM header".into()));
    }
    pos += 1;
    let bpp = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bpp))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let body = &bytes[pos..];
    if body.len() < n {
        return Err(Error::Format(format!(
            "PGM raster truncated: need {n} bytes, have {}",
            body.len()
        )));
    }
    let m = maxval as f64;
    let data: Vec<f64> = if bpp == 1 {
        body[..n].iter().map(|&b| f64::from(b) / m).collect()
    } else {
        body[..n]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / m)
            .collect()
    };
    Image2D::from_vec(width, height, data).map_err(|e| Error::Format(e.to_string()))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_usize(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            Error::Format(format!(
                "bad PGM header field {:?}",
                String::from_utf8_lossy(tok)
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_8bit_levels() {
        let mut bytes = b"P5\n# comment\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0 / 255.0, 1.0]);
    }

    #[test]
    fn pgm_16bit_big_endian() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.get(0, 0), 1.0);
        assert!((img.get(1, 0) - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn pgm_truncated_is_error() {
        let bytes = b"P5\n4 4\n255\n\x00\x01".to_vec();
        assert!(matches!(decode_pgm(&bytes), Err(Error::Format(_))));
        assert!(decode_pgm(b"P5\n4").is_err());
    }

    #[test]
    fn float_raw_header_layout() {
        let img = Image2D::from_vec(2, 1, vec![1.5, -2.0]).unwrap();
        let b = encode_float_raw(&img);
        assert_eq!(&b[..4], b"AGF2");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &[0, 0, 0, 0]);
        assert_eq!(&b[16..24], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 32);
        assert_eq!(decode_float_raw(&b).unwrap(), img);
    }

    #[test]
    fn float_raw_rejects_overflow_and_short_body() {
        let mut b = Vec::new();
        b.extend_from_slice(b"AGF2");
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        b.extend_from_slice(&[0; 4]);
        assert!(decode_float_raw(&b).is_err());
        let img = Image2D::filled(3, 3, 0.25).unwrap();
        let mut enc = encode_float_raw(&img);
        enc.pop();
        assert!(decode_float_raw(&enc).is_err());
    }
}
