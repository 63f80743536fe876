//! File formats: `t_s,value` series CSV, 16-bit interleaved IQ captures with
//! a JSON sidecar, IMF and peak exports, and optimizer traces as JSON lines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nrbo::TraceRecord;
use crate::signal_model::{IqCube, RadarConfig};
use crate::vmd::{ImfSet, VmdParams};

/// Relative spacing jitter tolerated in a series CSV time column.
const SPACING_TOLERANCE: f64 = 1e-6;

pub fn write_series_csv<W: Write>(w: W, values: &[f64], rate_hz: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t_s", "value"])?;
    for (i, v) in values.iter().enumerate() {
        wtr.write_record([format!("{}", i as f64 / rate_hz), format!("{v}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `t_s,value` series and infers its sampling rate from the time
/// column, which must be uniformly spaced.
pub fn read_series_csv<R: Read>(r: R) -> Result<(Vec<f64>, f64)> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "t_s" || &headers[1] != "value" {
        return Err(Error::Data(format!("expected header `t_s,value`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("row {}: `{s}` is not a finite number", line + 2)))
        };
        times.push(parse(&rec[0])?);
        values.push(parse(&rec[1])?);
    }
    if times.len() < 2 {
        return Err(Error::Data("series needs at least two rows to infer its rate".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Data("time column must be increasing".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > SPACING_TOLERANCE.max(1e-3 * dt) {
            return Err(Error::Data(format!("non-uniform sample spacing at row {}", i + 3)));
        }
    }
    Ok((values, 1.0 / dt))
}

pub fn write_series_csv_file(path: &Path, values: &[f64], rate_hz: f64) -> Result<()> {
    write_series_csv(BufWriter::new(File::create(path)?), values, rate_hz)
}

pub fn read_series_csv_file(path: &Path) -> Result<(Vec<f64>, f64)> {
    read_series_csv(BufReader::new(File::open(path)?))
}

/// Default sidecar location: the capture path with its extension replaced
/// by `.json`.
pub fn sidecar_path(bin_path: &Path) -> PathBuf {
    bin_path.with_extension("json")
}

pub fn write_radar_config(path: &Path, cfg: &RadarConfig) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, cfg)?;
    Ok(())
}

pub fn read_radar_config(path: &Path) -> Result<RadarConfig> {
    let cfg: RadarConfig = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes the cube as little-endian interleaved `i16` I/Q, chirp-major,
/// scaled so the largest component maps to 30000. Returns the scale factor.
pub fn write_iq<W: Write>(mut w: W, cube: &IqCube) -> Result<f64> {
    let peak = cube
        .data()
        .iter()
        .map(|c| c.re.abs().max(c.im.abs()))
        .fold(0.0, f64::max);
    let scale = if peak > 0.0 { 30000.0 / peak } else { 1.0 };
    let mut buf = Vec::with_capacity(cube.data().len() * 4);
    for c in cube.data().iter() {
        buf.extend_from_slice(&((c.re * scale).round() as i16).to_le_bytes());
        buf.extend_from_slice(&((c.im * scale).round() as i16).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(scale)
}

pub fn read_iq<R: Read>(mut r: R, config: RadarConfig) -> Result<IqCube> {
    config.validate()?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let per_chirp = config.fast_time_samples * 4;
    if bytes.len() % per_chirp != 0 {
        return Err(Error::Data(format!(
            "capture of {} bytes is not a whole number of {per_chirp}-byte chirps",
            bytes.len()
        )));
    }
    let chirps = bytes.len() / per_chirp;
    let samples: Vec<Complex64> = bytes
        .chunks_exact(4)
        .map(|b| {
            let i = i16::from_le_bytes([b[0], b[1]]);
            let q = i16::from_le_bytes([b[2], b[3]]);
            Complex64::new(i as f64, q as f64)
        })
        .collect();
    let data = Array2::from_shape_vec((chirps, config.fast_time_samples), samples)
        .map_err(|e| Error::Data(e.to_string()))?;
    IqCube::new(data, config)
}

pub fn write_iq_files(bin_path: &Path, sidecar: &Path, cube: &IqCube) -> Result<f64> {
    write_radar_config(sidecar, cube.config())?;
    write_iq(BufWriter::new(File::create(bin_path)?), cube)
}

pub fn read_iq_files(bin_path: &Path, sidecar: &Path) -> Result<IqCube> {
    let cfg = read_radar_config(sidecar)?;
    read_iq(BufReader::new(File::open(bin_path)?), cfg)
}

#[derive(Debug, Serialize)]
pub struct ImfHeader<'a> {
    pub center_freqs_hz: &'a [f64],
    pub params: &'a VmdParams,
    pub rate_hz: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Writes `t_s,mode_1..mode_K`.
pub fn write_imfs_csv<W: Write>(w: W, imfs: &ImfSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t_s".to_string()];
    header.extend((1..=imfs.k_modes()).map(|k| format!("mode_{k}")));
    wtr.write_record(&header)?;
    for i in 0..imfs.len() {
        let mut row = vec![format!("{}", i as f64 / imfs.rate_hz)];
        row.extend(imfs.modes.iter().map(|m| format!("{}", m[i])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_imf_header<W: Write>(w: W, imfs: &ImfSet, params: &VmdParams) -> Result<()> {
    let header = ImfHeader {
        center_freqs_hz: &imfs.center_freqs_hz,
        params,
        rate_hz: imfs.rate_hz,
        iterations_used: imfs.iterations_used,
        converged: imfs.converged,
    };
    serde_json::to_writer_pretty(w, &header)?;
    Ok(())
}

/// Writes `index,t_s,amplitude` for every peak.
pub fn write_peaks_csv<W: Write>(w: W, signal: &[f64], rate_hz: f64, peaks: &[usize]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "t_s", "amplitude"])?;
    for &p in peaks {
        let amp = signal.get(p).ok_or_else(|| Error::invalid(format!("peak index {p} out of range")))?;
        wtr.write_record([p.to_string(), format!("{}", p as f64 / rate_hz), format!("{amp}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One JSON object per line: `{iter, best_k, best_alpha, best_fitness}`.
pub fn write_trace_jsonl<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
