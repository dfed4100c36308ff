//! Minimal NPY v1.0 reader/writer for dense H×W×C f32 test fixtures:
//! little-endian `<f4`, C order, exactly three dimensions.

use std::path::Path;

use anyhow::{bail, Context, Result};
use esda_core::frame::DenseTensor;

const MAGIC: &[u8; 6] = b"\x93NUMPY";

pub fn write_npy(path: &Path, tensor: &DenseTensor) -> Result<()> {
    std::fs::write(path, npy_bytes(tensor))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn npy_bytes(tensor: &DenseTensor) -> Vec<u8> {
    let dict = format!(
        "{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}, {}), }}",
        tensor.height, tensor.width, tensor.channels
    );
    // Header (magic + version + len + dict) padded to a multiple of 64,
    // terminated by a newline.
    let base = MAGIC.len() + 2 + 2;
    let unpadded = base + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = (dict.len() + padding + 1) as u16;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(1);
    out.push(0);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat(b' ').take(padding));
    out.push(b'\n');
    for v in &tensor.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_npy(path: &Path) -> Result<DenseTensor> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_npy(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_npy(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        bail!("not an NPY file");
    }
    if bytes[6] != 1 {
        bail!("unsupported NPY version {}.{}", bytes[6], bytes[7]);
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = std::str::from_utf8(&bytes[10..10 + header_len]).context("header not UTF-8")?;
    if !header.contains("'descr': '<f4'") {
        bail!("only '<f4' dtype is supported, header: {header}");
    }
    if !header.contains("'fortran_order': False") {
        bail!("fortran order is not supported");
    }
    let shape_start = header.find('(').context("missing shape")?;
    let shape_end = header[shape_start..].find(')').context("unclosed shape")? + shape_start;
    let dims: Vec<usize> = header[shape_start + 1..shape_end]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().context("bad shape entry"))
        .collect::<Result<_>>()?;
    let (h, w, c) = match dims[..] {
        [h, w, c] => (h, w, c),
        [h, w] => (h, w, 1),
        _ => bail!("expected a 2-d or 3-d shape, got {dims:?}"),
    };
    let body = &bytes[10 + header_len..];
    if body.len() != h * w * c * 4 {
        bail!("body is {} bytes, expected {}", body.len(), h * w * c * 4);
    }
    let mut tensor = DenseTensor::zeros(h, w, c);
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        tensor.data[i] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
    }
    Ok(tensor)
}
