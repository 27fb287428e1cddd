//! Bit-exact file formats: 16-bit binary PGM with a range sidecar, the
//! SSIF raw float stream, and CSV tables for shifts and weights.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::optics::ShiftVector;
use crate::registration::ShiftEstimate;
use crate::superres::SparseWeightMatrix;

/// Sidecar describing how PGM code values map back to intensities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgmMeta {
    /// Intensity mapped to code 0.
    pub lo: f64,
    /// Intensity mapped to code 65535.
    pub hi: f64,
    pub pixel_pitch_um: f64,
}

fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    path.with_file_name(name)
}

/// Write a 16-bit big-endian binary PGM plus its `.meta` sidecar. The
/// intensity range defaults to the image min/max; a degenerate (constant)
/// image stores `[lo, lo + 1]`. Returns the range used.
pub fn write_pgm16(path: &Path, img: &Image, range: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = range.unwrap_or((img.min_value(), img.max_value()));
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let scale = 65535.0 / (hi - lo);
    let mut bytes = Vec::with_capacity(32 + img.pixels().len() * 2);
    bytes.extend_from_slice(format!("P5\n{} {}\n65535\n", img.width(), img.height()).as_bytes());
    for &v in img.pixels() {
        let code = ((v - lo) * scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&code.to_be_bytes());
    }
    fs::write(path, bytes)?;

    let meta = PgmMeta { lo, hi, pixel_pitch_um: img.pixel_pitch_um() };
    let text = toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(meta_path(path), text)?;
    Ok((lo, hi))
}

/// Read a 16-bit PGM written by [`write_pgm16`], restoring intensities
/// through the sidecar.
pub fn read_pgm16(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and comment lines
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(&bytes)? != "P5" {
        return Err(Error::Format("not a binary PGM (P5) file".into()));
    }
    let width: usize = token(&bytes)?.parse().map_err(|_| Error::Format("bad width".into()))?;
    let height: usize = token(&bytes)?.parse().map_err(|_| Error::Format("bad height".into()))?;
    let maxval: usize = token(&bytes)?.parse().map_err(|_| Error::Format("bad maxval".into()))?;
    if maxval != 65535 {
        return Err(Error::Format(format!("expected 16-bit PGM (maxval 65535), got {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height * 2;
    if bytes.len() < pos + need {
        return Err(Error::Format("PGM pixel data truncated".into()));
    }

    let meta: PgmMeta = toml::from_str(
        &fs::read_to_string(meta_path(path))
            .map_err(|_| Error::Format(format!("missing sidecar {}", meta_path(path).display())))?,
    )
    .map_err(|e| Error::Format(format!("bad sidecar: {e}")))?;

    let span = meta.hi - meta.lo;
    let mut data = Vec::with_capacity(width * height);
    for chunk in bytes[pos..pos + need].chunks_exact(2) {
        let code = u16::from_be_bytes([chunk[0], chunk[1]]);
        data.push(meta.lo + code as f64 / 65535.0 * span);
    }
    Image::from_vec(width, height, meta.pixel_pitch_um, data)
}

const SSIF_MAGIC: &[u8; 4] = b"SSIF";

/// Write the raw float format: 16-byte header (magic "SSIF", u32 width,
/// u32 height, u32 reserved = 0, little-endian), then row-major f32
/// samples, little-endian.
pub fn write_ssif(path: &Path, img: &Image) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + img.pixels().len() * 4);
    bytes.extend_from_slice(SSIF_MAGIC);
    bytes.extend_from_slice(&(img.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(img.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    for &v in img.pixels() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_ssif(path: &Path) -> Result<Image> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header).map_err(|_| Error::Format("SSIF header truncated".into()))?;
    if &header[0..4] != SSIF_MAGIC {
        return Err(Error::Format("bad SSIF magic".into()));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let reserved = u32::from_le_bytes(header[12..16].try_into().unwrap());
    if reserved != 0 {
        return Err(Error::Format("SSIF reserved field must be zero".into()));
    }
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != width * height * 4 {
        return Err(Error::Format(format!(
            "SSIF payload has {} bytes, expected {}",
            payload.len(),
            width * height * 4
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::from_vec(width, height, 1.0, data)
}

/// Dispatch on extension: `.pgm` or `.ssif`.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_pgm16(path, img, None).map(|_| ()),
        Some("ssif") => write_ssif(path, img),
        other => Err(Error::Format(format!(
            "unsupported image extension {other:?}; use .pgm or .ssif"
        ))),
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm16(path),
        Some("ssif") => read_ssif(path),
        other => Err(Error::Format(format!(
            "unsupported image extension {other:?}; use .pgm or .ssif"
        ))),
    }
}

/// Shift table CSV: frame, dx, dy, iterations, converged.
pub fn write_shift_csv(path: &Path, estimates: &[ShiftEstimate]) -> Result<()> {
    let mut out = String::from("frame,dx,dy,iterations,converged\n");
    for (k, e) in estimates.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k, e.p.p1, e.p.p2, e.iterations, e.converged
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_shift_csv(path: &Path) -> Result<Vec<ShiftEstimate>> {
    use crate::registration::WarpParams;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("frame,dx,dy,iterations,converged") => {}
        _ => return Err(Error::Format("missing shift CSV header".into())),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!("shift CSV line {} malformed", n + 2)));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad float {s:?}")));
        rows.push(ShiftEstimate {
            p: WarpParams { p1: parse_f(fields[1])?, p2: parse_f(fields[2])? },
            iterations: fields[3].parse().map_err(|_| Error::Format("bad iteration count".into()))?,
            final_update_norm: 0.0,
            converged: fields[4] == "true",
            final_objective: 0.0,
        });
    }
    Ok(rows)
}

/// Ground-truth shift CSV for simulated stacks: frame, dx, dy.
pub fn write_true_shift_csv(path: &Path, shifts: &[ShiftVector]) -> Result<()> {
    let mut out = String::from("frame,dx,dy\n");
    for (k, s) in shifts.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", k, s.dx, s.dy));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Debug export of the weighting matrix as (row, col, weight) triplets;
/// weights are the effective row-normalized values.
pub fn write_weight_csv(path: &Path, p: &SparseWeightMatrix) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "row,col,weight")?;
    for row in 0..p.rows() {
        let sum = p.row_sum(row);
        for (col, w) in p.row_entries(row) {
            writeln!(file, "{},{},{}", row, col, w / sum)?;
        }
    }
    file.flush()?;
    Ok(())
}
