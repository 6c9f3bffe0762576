//! Binary PGM (`P5`) images.

use super::model::IMAGE_SIDE;
use super::{NnError, Tensor};

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], NnError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(NnError::Image("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<usize, NnError> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| NnError::Image(format!("bad header field {:?}", String::from_utf8_lossy(t))))
}

/// Decodes a P5 image to an `(h, w, 1)` tensor with values in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor, NnError> {
    let mut pos = 0;
    if token(bytes, &mut pos)? != b"P5" {
        return Err(NnError::Image("not a binary PGM (P5)".into()));
    }
    let w = number(bytes, &mut pos)?;
    let h = number(bytes, &mut pos)?;
    let maxval = number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(NnError::Image(format!("maxval {maxval} out of range")));
    }
    pos += 1;
    let width = if maxval < 256 { 1 } else { 2 };
    let need = w * h * width;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| NnError::Image("truncated raster".into()))?;
    let data = raster
        .chunks_exact(width)
        .map(|c| {
            let v = if width == 1 { c[0] as usize } else { (c[0] as usize) << 8 | c[1] as usize };
            v.min(maxval) as f64 / maxval as f64
        })
        .collect();
    Tensor::new(vec![h, w, 1], data)
}

/// Decodes a P5 image and checks it is 28×28.
pub fn read_image(path: impl AsRef<std::path::Path>) -> Result<Tensor, NnError> {
    let t = decode_pgm(&std::fs::read(path)?)?;
    if t.shape() != [IMAGE_SIDE, IMAGE_SIDE, 1] {
        return Err(NnError::Image(format!("expected 28x28, got {:?}", &t.shape()[..2])));
    }
    Ok(t)
}

/// Encodes an `(h, w, 1)` tensor in `[0, 1]` as an 8-bit P5 image.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>, NnError> {
    let (h, w, c) = image.hwc()?;
    if c != 1 {
        return Err(NnError::Image("PGM holds one channel".into()));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}
