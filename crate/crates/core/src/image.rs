//! Small raster types and the netpbm / PFM formats used for dataset frames.
//!
//! Pixel `(u, v)` is column `u`, row `v`, with row 0 at the top.

use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// RGB image with channels in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage { width, height, data: vec![[0.0; 3]; width * height] }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        RgbImage { width, height, data: vec![rgb; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let data = (0..height).flat_map(|v| (0..width).map(move |u| (u, v))).map(|(u, v)| f(u, v)).collect();
        RgbImage { width, height, data }
    }

    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, rgb: [f64; 3]) {
        self.data[v * self.width + u] = rgb;
    }

    pub fn same_shape(&self, other: &RgbImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Rounds every channel to the nearest 8-bit level, as a PPM round trip would.
    pub fn quantized(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| p.map(|c| to_u8(c) as f64 / 255.0)).collect(),
        }
    }
}

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    Ok(BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Binary PPM (P6, maxval 255).
pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let mut w = create(path)?;
    let mut buf = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    buf.extend(img.data.iter().flat_map(|p| p.map(to_u8)));
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Reads the whitespace/comment separated header tokens of a netpbm file.
fn header_tokens<R: BufRead>(r: &mut R, count: usize, path: &Path) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut byte = [0u8; 1];
    let mut comment = false;
    while tokens.len() < count {
        if r.read(&mut byte).map_err(|e| Error::io(path, e))? == 0 {
            return Err(Error::Format(format!("{}: truncated header", path.display())));
        }
        let c = byte[0] as char;
        if comment {
            comment = c != '\n';
            continue;
        }
        if c == '#' {
            comment = true;
        } else if c.is_ascii_whitespace() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(c);
        }
    }
    Ok(tokens)
}

fn parse_dim(tok: &str, path: &Path) -> Result<usize> {
    tok.parse().map_err(|_| Error::Format(format!("{}: bad header value {tok:?}", path.display())))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let mut r = open(path)?;
    let t = header_tokens(&mut r, 4, path)?;
    if t[0] != "P6" {
        return Err(Error::Format(format!("{}: expected P6, found {}", path.display(), t[0])));
    }
    let (w, h, max) = (parse_dim(&t[1], path)?, parse_dim(&t[2], path)?, parse_dim(&t[3], path)?);
    if max != 255 {
        return Err(Error::Format(format!("{}: only maxval 255 is supported", path.display())));
    }
    let mut raw = vec![0u8; w * h * 3];
    r.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let data = raw.chunks(3).map(|c| [0, 1, 2].map(|k| c[k] as f64 / 255.0)).collect();
    Ok(RgbImage { width: w, height: h, data })
}

/// Single-channel PFM (`Pf`, little-endian float32, rows stored bottom to top).
pub fn write_pfm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::SizeMismatch(values.len(), width * height));
    }
    let mut w = create(path)?;
    let mut buf = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for v in (0..height).rev() {
        for &x in &values[v * width..(v + 1) * width] {
            buf.extend((x as f32).to_le_bytes());
        }
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Returns (width, height, values in top-to-bottom row order).
pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = open(path)?;
    let t = header_tokens(&mut r, 4, path)?;
    if t[0] != "Pf" {
        return Err(Error::Format(format!("{}: expected Pf, found {}", path.display(), t[0])));
    }
    let (w, h) = (parse_dim(&t[1], path)?, parse_dim(&t[2], path)?);
    let scale: f64 = t[3].parse().map_err(|_| Error::Format(format!("{}: bad PFM scale", path.display())))?;
    let little = scale < 0.0;
    let mut raw = vec![0u8; w * h * 4];
    r.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let mut values = vec![0.0; w * h];
    for (k, c) in raw.chunks(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let x = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (h - 1 - k / w, k % w);
        values[row * w + col] = x as f64;
    }
    Ok((w, h, values))
}

/// Binary PBM (P4); `true` is written as a set bit (black).
pub fn write_pbm(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::SizeMismatch(mask.len(), width * height));
    }
    let mut w = create(path)?;
    let mut buf = format!("P4\n{width} {height}\n").into_bytes();
    let stride = width.div_ceil(8);
    for v in 0..height {
        let mut row = vec![0u8; stride];
        for u in 0..width {
            if mask[v * width + u] {
                row[u / 8] |= 0x80 >> (u % 8);
            }
        }
        buf.extend(row);
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_pbm(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let mut r = open(path)?;
    let t = header_tokens(&mut r, 3, path)?;
    if t[0] != "P4" {
        return Err(Error::Format(format!("{}: expected P4, found {}", path.display(), t[0])));
    }
    let (w, h) = (parse_dim(&t[1], path)?, parse_dim(&t[2], path)?);
    let stride = w.div_ceil(8);
    let mut raw = vec![0u8; stride * h];
    r.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;
    let mask = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| raw[v * stride + u / 8] & (0x80 >> (u % 8)) != 0)
        .collect();
    Ok((w, h, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_quantizes_to_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let img = RgbImage::from_fn(5, 3, |u, v| [u as f64 / 4.0, v as f64 / 2.0, 0.3]);
        write_ppm(&p, &img).unwrap();
        let back = read_ppm(&p).unwrap();
        assert_eq!(back, img.quantized());
        for (a, b) in back.data.iter().zip(&img.data) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn pfm_and_pbm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let p = dir.path().join("d.pfm");
        write_pfm(&p, 4, 3, &vals).unwrap();
        assert_eq!(read_pfm(&p).unwrap(), (4, 3, vals));
        let mask: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let q = dir.path().join("m.pbm");
        write_pbm(&q, 10, 3, &mask).unwrap();
        assert_eq!(read_pbm(&q).unwrap(), (10, 3, mask));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ppm");
        std::fs::write(&p, b"P3\n1 1\n255\n0 0 0\n").unwrap();
        assert!(matches!(read_ppm(&p), Err(Error::Format(_))));
    }
}
