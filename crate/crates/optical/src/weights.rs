//! `OPTW` weights files.
//!
//! Layout (little-endian): magic `OPTW`, version `u32`, layer count `u32`,
//! then per layer `(type id, in channels, out channels, kernel, stride)` as
//! `u32`s, then every parameter as `f32` in declaration order (each conv's
//! weights followed by its biases).

use crate::net::{LayerDesc, LayerKind, OpticalNet};
use crate::tensor::Scalar;
use crate::{OpticalError, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"OPTW";
pub const VERSION: u32 = 1;

pub fn write_weights<T: Scalar>(net: &OpticalNet<T>, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    let desc = net.descriptors();
    let mut header = vec![VERSION, desc.len() as u32];
    for d in &desc {
        header.extend([d.kind as u32, d.cin, d.cout, d.kernel, d.stride]);
    }
    let mut buf: Vec<u8> = header.iter().flat_map(|v| v.to_le_bytes()).collect();
    for p in net.params() {
        buf.extend(p.iter().flat_map(|v| (v.value() as f32).to_le_bytes()));
    }
    w.write_all(&buf)
}

pub fn read_weights<T: Scalar>(r: &mut impl Read) -> Result<OpticalNet<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| OpticalError::Format(e.to_string()))?;
    let mut cur = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(OpticalError::Format("weights file truncated".into()));
        }
        let (a, b) = cur.split_at(n);
        cur = b;
        Ok(a)
    };
    if take(4)? != MAGIC {
        return Err(OpticalError::Format("missing OPTW magic".into()));
    }
    let word = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let version = word(take(4)?);
    if version != VERSION {
        return Err(OpticalError::Format(format!("unsupported weights version {version}")));
    }
    let count = word(take(4)?) as usize;
    let mut desc = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let id = word(take(4)?);
        let kind = LayerKind::from_id(id).ok_or_else(|| OpticalError::Format(format!("unknown layer type {id}")))?;
        let (cin, cout, kernel, stride) = (word(take(4)?), word(take(4)?), word(take(4)?), word(take(4)?));
        desc.push(LayerDesc { kind, cin, cout, kernel, stride });
    }
    let mut net = OpticalNet::<T>::new(0);
    if desc != net.descriptors() {
        return Err(OpticalError::Format("layer table does not match the network architecture".into()));
    }
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v = T::lit(f32::from_le_bytes(take(4)?.try_into().unwrap()) as f64);
        }
    }
    if !cur.is_empty() {
        return Err(OpticalError::Format(format!("{} trailing bytes after parameters", cur.len())));
    }
    Ok(net)
}

pub fn save_weights<T: Scalar>(net: &OpticalNet<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| OpticalError::io(dir, e))?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| OpticalError::io(path, e))?);
    write_weights(net, &mut f).and_then(|_| f.flush()).map_err(|e| OpticalError::io(path, e))
}

pub fn load_weights<T: Scalar>(path: &Path) -> Result<OpticalNet<T>> {
    let mut f = std::fs::File::open(path).map_err(|e| OpticalError::io(path, e))?;
    read_weights(&mut f)
}
