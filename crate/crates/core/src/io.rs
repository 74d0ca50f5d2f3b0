//! File formats: binary PPM/PGM, packed epipolar mask bitsets, Plücker grid
//! blobs. Every writer goes through [`write_atomic`].

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::epipolar::EpipolarMaskSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::plucker::{PluckerGrid, PLUCKER_DIM};

pub const MASK_MAGIC: &[u8; 4] = b"EPIM";

/// Depth in world units is stored in 16-bit PGMs as `round(depth · DEPTH_SCALE)`;
/// background (no surface) is 0.
pub const DEPTH_SCALE: f64 = 10_000.0;

/// Writes to a temporary file in the destination directory and renames it
/// into place, so the target either holds the full contents or does not exist.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM (P6, maxval 255) from an RGB grid in `[0, 1]`.
pub fn encode_ppm(image: &Grid<f64>) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::shape(
            "3 channels",
            format!("{} channels", image.channels()),
        ));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_slice().iter().map(|v| to_u8(*v)));
    Ok(out)
}

/// 8-bit binary PGM (P5) from a single-channel grid in `[0, 1]`.
pub fn encode_pgm8(image: &Grid<f64>) -> Result<Vec<u8>> {
    if image.channels() != 1 {
        return Err(Error::shape(
            "1 channel",
            format!("{} channels", image.channels()),
        ));
    }
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_slice().iter().map(|v| to_u8(*v)));
    Ok(out)
}

/// 16-bit binary PGM (P5, big-endian samples) of a depth grid.
pub fn encode_depth_pgm(depth: &Grid<f64>) -> Result<Vec<u8>> {
    if depth.channels() != 1 {
        return Err(Error::shape(
            "1 channel",
            format!("{} channels", depth.channels()),
        ));
    }
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    for d in depth.as_slice() {
        let v = if d.is_finite() {
            (d * DEPTH_SCALE).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend(v.to_be_bytes());
    }
    Ok(out)
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8], path: &str) -> Result<Header> {
    let bad = |reason: &str| Error::Format {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 2 {
        return Err(bad("truncated header"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("non-numeric header field"))?;
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing whitespace after header"));
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_start: pos + 1,
    })
}

/// Decodes an 8-bit binary PPM into an RGB grid in `[0, 1]`.
pub fn decode_ppm(bytes: &[u8], path: &str) -> Result<Grid<f64>> {
    let h = parse_pnm_header(bytes, path)?;
    let bad = |reason: String| Error::Format {
        path: path.to_string(),
        reason,
    };
    if &h.magic != b"P6" || h.maxval != 255 {
        return Err(bad("expected binary 8-bit PPM (P6, maxval 255)".into()));
    }
    let n = h.width * h.height * 3;
    let data = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| bad(format!("expected {n} pixel bytes")))?;
    Grid::from_vec(
        h.height,
        h.width,
        3,
        data.iter().map(|b| f64::from(*b) / 255.0).collect(),
    )
}

pub fn read_ppm(path: &Path) -> Result<Grid<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, &path.display().to_string())
}

/// Decodes a binary PGM as raw sample values (8- or 16-bit).
pub fn decode_pgm(bytes: &[u8], path: &str) -> Result<(usize, usize, Vec<u16>)> {
    let h = parse_pnm_header(bytes, path)?;
    let bad = |reason: String| Error::Format {
        path: path.to_string(),
        reason,
    };
    if &h.magic != b"P5" || h.maxval == 0 || h.maxval > 65535 {
        return Err(bad("expected binary PGM (P5)".into()));
    }
    let width = if h.maxval > 255 { 2 } else { 1 };
    let n = h.width * h.height;
    let data = bytes
        .get(h.data_start..h.data_start + n * width)
        .ok_or_else(|| bad(format!("expected {} sample bytes", n * width)))?;
    let samples = if width == 2 {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data.iter().map(|b| u16::from(*b)).collect()
    };
    Ok((h.width, h.height, samples))
}

/// Packed masks: `EPIM`, little-endian `u32` view count, height and width,
/// then for each ordered pair `(i, j)`, `i != j`, in row-major order, the
/// `(h·w) × (h·w)` matrix row-major, one bit per entry, MSB first. The bit
/// stream runs continuously across pairs and is zero-padded to a whole byte.
pub fn encode_mask_bitset(masks: &EpipolarMaskSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MASK_MAGIC);
    for v in [masks.n_views(), masks.height(), masks.width()] {
        out.extend((v as u32).to_le_bytes());
    }
    let hw = masks.locations();
    let mut byte = 0u8;
    let mut filled = 0;
    for (i, j) in masks.ordered_pairs() {
        let m = masks.pair(i, j);
        for s in 0..hw {
            for t in 0..hw {
                byte = (byte << 1) | u8::from(m.get(s, t));
                filled += 1;
                if filled == 8 {
                    out.push(byte);
                    byte = 0;
                    filled = 0;
                }
            }
        }
    }
    if filled > 0 {
        out.push(byte << (8 - filled));
    }
    out
}

pub fn decode_mask_bitset(bytes: &[u8], path: &str) -> Result<EpipolarMaskSet> {
    let bad = |reason: String| Error::Format {
        path: path.to_string(),
        reason,
    };
    if bytes.len() < 16 || &bytes[..4] != MASK_MAGIC {
        return Err(bad("missing EPIM header".into()));
    }
    let word =
        |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (n, h, w) = (word(0), word(1), word(2));
    let hw = h * w;
    let bits = n * n.saturating_sub(1) * hw * hw;
    if bytes.len() != 16 + bits.div_ceil(8) {
        return Err(bad(format!("expected {} payload bytes", bits.div_ceil(8))));
    }
    let mut set = EpipolarMaskSet::blocked(n, h, w);
    let pairs: Vec<_> = set.ordered_pairs().collect();
    let mut k = 0usize;
    for (i, j) in pairs {
        let m = set.pair_mut(i, j);
        for s in 0..hw {
            for t in 0..hw {
                let b = bytes[16 + k / 8] >> (7 - k % 8) & 1;
                m.set(s, t, b == 1);
                k += 1;
            }
        }
    }
    Ok(set)
}

/// Mask of pair `(i, j)` as an 8-bit PGM with one row per source location.
pub fn encode_mask_pgm(masks: &EpipolarMaskSet, i: usize, j: usize) -> Vec<u8> {
    let hw = masks.locations();
    let m = masks.pair(i, j);
    let mut out = format!("P5\n{hw} {hw}\n255\n").into_bytes();
    for s in 0..hw {
        out.extend((0..hw).map(|t| if m.get(s, t) { 255u8 } else { 0 }));
    }
    out
}

/// Plücker grid blob: little-endian `u32` height, width and 6, then the
/// values as little-endian `f64`, row-major.
pub fn encode_plucker(grid: &PluckerGrid<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + grid.grid().as_slice().len() * 8);
    for v in [grid.height(), grid.width(), PLUCKER_DIM] {
        out.extend((v as u32).to_le_bytes());
    }
    for v in grid.grid().as_slice() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_plucker(bytes: &[u8], path: &str) -> Result<PluckerGrid<f64>> {
    let bad = |reason: String| Error::Format {
        path: path.to_string(),
        reason,
    };
    if bytes.len() < 12 {
        return Err(bad("truncated header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (word(0), word(1), word(2));
    if c != PLUCKER_DIM || bytes.len() != 12 + h * w * c * 8 {
        return Err(bad("header does not match payload".into()));
    }
    let values = bytes[12..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    PluckerGrid::from_grid(Grid::from_vec(h, w, c, values)?)
}
