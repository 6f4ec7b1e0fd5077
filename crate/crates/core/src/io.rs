//! Text formats for datasets, reconstructions and CSV exports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::homodyne::QuadratureDataset;
use crate::scalar::C;

pub const DATASET_FILE: &str = "dataset.tsv";
pub const VACUUM_FILE: &str = "vacuum.tsv";
/// Window index used for every line of the calibration file.
pub const VACUUM_INDEX: i64 = -1;

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// `# key=value` header followed by `window_index<TAB>value` lines.
pub fn format_samples(metadata: &BTreeMap<String, String>, rows: impl Iterator<Item = (i64, f64)>) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {}={}", k, v);
    }
    for (w, q) in rows {
        let _ = writeln!(out, "{}\t{}", w, q);
    }
    out
}

/// Parsed sample file: header metadata and `(window_index, value)` rows.
pub fn parse_samples(path: &Path, text: &str) -> Result<(BTreeMap<String, String>, Vec<(i64, f64)>)> {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if header.is_empty() {
                continue;
            }
            let (k, v) = header
                .split_once('=')
                .ok_or_else(|| parse_error(path, lineno, "header line must be '# key=value'"))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(w), Some(q), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_error(path, lineno, "expected 'window_index<TAB>value'"));
        };
        let w: i64 = w
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad window index '{}'", w)))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad sample value '{}'", q)))?;
        if !q.is_finite() {
            return Err(parse_error(path, lineno, "non-finite sample value"));
        }
        rows.push((w, q));
    }
    Ok((meta, rows))
}

/// Writes `dataset.tsv` and `vacuum.tsv` into `dir`.
pub fn write_dataset(dir: &Path, dataset: &QuadratureDataset) -> Result<()> {
    let signal = format_samples(
        &dataset.metadata,
        dataset
            .samples
            .iter()
            .enumerate()
            .flat_map(|(w, s)| s.iter().map(move |&q| (w as i64, q))),
    );
    write_file(&dir.join(DATASET_FILE), &signal)?;
    let mut vac_meta = BTreeMap::new();
    vac_meta.insert("samples".to_string(), dataset.vacuum_calibration.len().to_string());
    let vacuum = format_samples(&vac_meta, dataset.vacuum_calibration.iter().map(|&q| (VACUUM_INDEX, q)));
    write_file(&dir.join(VACUUM_FILE), &vacuum)
}

/// Reads the pair written by [`write_dataset`]. Window indices must form the
/// contiguous range `0..W`; lines may appear in any order.
pub fn read_dataset(dir: &Path) -> Result<QuadratureDataset> {
    let sig_path = dir.join(DATASET_FILE);
    let (metadata, rows) = parse_samples(&sig_path, &read_file(&sig_path)?)?;
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut windows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (line, &(w, q)) in rows.iter().enumerate() {
        if w < 0 {
            return Err(parse_error(&sig_path, line + 1 + metadata.len(), format!("negative window index {}", w)));
        }
        windows.entry(w).or_default().push(q);
    }
    for (expected, &w) in windows.keys().enumerate() {
        if w != expected as i64 {
            return Err(Error::Parse {
                path: sig_path.display().to_string(),
                line: 0,
                message: format!("window {} has no samples", expected),
            });
        }
    }
    let vac_path = dir.join(VACUUM_FILE);
    let (_, vac_rows) = parse_samples(&vac_path, &read_file(&vac_path)?)?;
    if let Some(pos) = vac_rows.iter().position(|&(w, _)| w != VACUUM_INDEX) {
        return Err(parse_error(&vac_path, pos + 2, format!("calibration lines must use window index {}", VACUUM_INDEX)));
    }
    Ok(QuadratureDataset {
        samples: windows.into_values().collect(),
        vacuum_calibration: vac_rows.into_iter().map(|(_, q)| q).collect(),
        metadata,
    })
}

/// `re+imj` / `re-imj`.
pub fn format_complex(z: C<f64>) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

pub fn parse_complex(s: &str) -> Option<C<f64>> {
    let body = s.trim().strip_suffix('j')?;
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    Some(C::new(re, im))
}

/// Header fields of a reconstruction file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionHeader {
    pub cutoff: usize,
    pub iterations: usize,
    pub final_loglik: f64,
}

pub fn format_reconstruction(rho: &DensityMatrix<f64>, header: &ReconstructionHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cutoff={}", header.cutoff);
    let _ = writeln!(out, "iterations={}", header.iterations);
    let _ = writeln!(out, "final_loglik={}", header.final_loglik);
    let d = rho.dim();
    for r in 0..d {
        let row: Vec<String> = (0..d).map(|c| format_complex(rho.get(r, c))).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Parses and validates a reconstruction file.
pub fn parse_reconstruction(path: &Path, text: &str) -> Result<(ReconstructionHeader, DensityMatrix<f64>)> {
    let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut rows: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if rows.is_empty() => {
                header.insert(k.trim(), (i + 1, v.trim()));
            }
            _ => rows.push((i + 1, line)),
        }
    }
    let field = |key: &str| -> Result<(usize, &str)> {
        header
            .get(key)
            .copied()
            .ok_or_else(|| parse_error(path, 0, format!("missing header '{}'", key)))
    };
    let (ln, v) = field("cutoff")?;
    let cutoff: usize = v.parse().map_err(|_| parse_error(path, ln, "bad cutoff"))?;
    let (ln, v) = field("iterations")?;
    let iterations: usize = v.parse().map_err(|_| parse_error(path, ln, "bad iterations"))?;
    let (ln, v) = field("final_loglik")?;
    let final_loglik: f64 = v.parse().map_err(|_| parse_error(path, ln, "bad final_loglik"))?;
    if rows.len() != cutoff {
        return Err(parse_error(
            path,
            rows.last().map(|r| r.0).unwrap_or(0),
            format!("expected {} matrix rows, found {}", cutoff, rows.len()),
        ));
    }
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for (r, (ln, line)) in rows.iter().enumerate() {
        let entries: Vec<&str> = line.split(',').collect();
        if entries.len() != cutoff {
            return Err(parse_error(path, *ln, format!("expected {} entries, found {}", cutoff, entries.len())));
        }
        for (c, e) in entries.iter().enumerate() {
            m[(r, c)] = parse_complex(e).ok_or_else(|| parse_error(path, *ln, format!("bad complex entry '{}'", e)))?;
        }
    }
    let rho = DensityMatrix::new(m)?;
    Ok((
        ReconstructionHeader {
            cutoff,
            iterations,
            final_loglik,
        },
        rho,
    ))
}

pub fn read_reconstruction(path: &Path) -> Result<(ReconstructionHeader, DensityMatrix<f64>)> {
    parse_reconstruction(path, &read_file(path)?)
}

/// `key=value` lines in the given order.
pub fn format_report(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{}={}", k, v);
    }
    out
}

pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Comma-separated table with a header row.
pub fn format_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
