//! File formats: sinograms, reconstructed images and atomic writes.
//!
//! Sinogram file: one JSON header line `{"num_angles":A,"detector_cells":D}`
//! followed by `A·D` little-endian `f64` values in view-major order.
//!
//! Image export writes three files sharing a stem: a 16-bit big-endian PGM
//! (P5) windowed for display, a raw little-endian `f64` dump, and a JSON
//! sidecar describing both.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, Sinogram};

/// Writes `bytes` to a temporary sibling file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::file(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Serialize, Deserialize)]
struct SinogramHeader {
    num_angles: usize,
    detector_cells: usize,
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn f64_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect()
}

pub fn encode_sinogram(sinogram: &Sinogram) -> Vec<u8> {
    let header = SinogramHeader {
        num_angles: sinogram.num_angles(),
        detector_cells: sinogram.detector_cells(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend(f64_bytes(sinogram.values()));
    out
}

pub fn decode_sinogram(bytes: &[u8]) -> Result<Sinogram> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::invalid("sinogram file has no header line"))?;
    let header: SinogramHeader = serde_json::from_slice(&bytes[..newline])?;
    let body = &bytes[newline + 1..];
    let expected = header.num_angles * header.detector_cells * 8;
    if body.len() != expected {
        return Err(Error::shape(
            format!("{expected} payload bytes"),
            format!("{} payload bytes", body.len()),
        ));
    }
    Sinogram::from_vec(header.num_angles, header.detector_cells, f64_values(body))
}

pub fn write_sinogram(path: &Path, sinogram: &Sinogram) -> Result<()> {
    write_atomic(path, &encode_sinogram(sinogram))
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    decode_sinogram(&fs::read(path).map_err(|e| Error::file(path, e))?)
}

/// Maps `value` from `[lo, hi]` to `0..=65535`, clamping and rounding half up.
pub fn window_to_u16(value: f64, lo: f64, hi: f64) -> u16 {
    let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 65535.0 + 0.5).floor() as u16
}

/// 16-bit binary PGM of `image` windowed to `[lo, hi]`.
pub fn encode_pgm(image: &ImageGrid, window: (f64, f64)) -> Result<Vec<u8>> {
    let (lo, hi) = window;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("display window [{lo}, {hi}] is empty")));
    }
    let n = image.size();
    let mut out = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for &v in image.values() {
        out.extend(window_to_u16(v, lo, hi).to_be_bytes());
    }
    Ok(out)
}

/// Describes an exported image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub byte_order: String,
    pub raw_file: String,
    pub pgm_file: String,
    pub display_window: (f64, f64),
}

/// Writes `<stem>.pgm`, `<stem>.f64` and `<stem>.json` into `dir`.
pub fn export_image(dir: &Path, stem: &str, image: &ImageGrid, window: (f64, f64)) -> Result<ImageSidecar> {
    let sidecar = ImageSidecar {
        width: image.width(),
        height: image.height(),
        dtype: "f64".into(),
        byte_order: "little".into(),
        raw_file: format!("{stem}.f64"),
        pgm_file: format!("{stem}.pgm"),
        display_window: window,
    };
    write_atomic(&dir.join(&sidecar.pgm_file), &encode_pgm(image, window)?)?;
    write_atomic(&dir.join(&sidecar.raw_file), &f64_bytes(image.values()))?;
    write_json(&dir.join(format!("{stem}.json")), &sidecar)?;
    Ok(sidecar)
}

/// Reads back the raw dump written by [`export_image`] via its sidecar.
pub fn read_exported_image(sidecar_path: &Path) -> Result<ImageGrid> {
    let sidecar: ImageSidecar = read_json(sidecar_path)?;
    if sidecar.width != sidecar.height {
        return Err(Error::invalid("only square images are supported"));
    }
    let raw = sidecar_path.with_file_name(&sidecar.raw_file);
    let bytes = fs::read(&raw).map_err(|e| Error::file(&raw, e))?;
    if bytes.len() != sidecar.width * sidecar.height * 8 {
        return Err(Error::shape(
            format!("{} bytes", sidecar.width * sidecar.height * 8),
            format!("{} bytes", bytes.len()),
        ));
    }
    ImageGrid::from_vec(sidecar.width, f64_values(&bytes))
}
