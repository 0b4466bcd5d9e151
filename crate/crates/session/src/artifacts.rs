//! On-disk artifacts: trace CSV, grayscale PNG renders with a scale
//! sidecar, and suite reports.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use freedrag_core::{Case, DragRecord, DragTrace, FeatureMap};
use freedrag_eval::metrics::{render, MetricReport};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SessionError};

/// One trace line, as written to `trace.csv` and sent in step deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub point_index: usize,
    pub hx: f64,
    pub hy: f64,
    #[serde(rename = "L_in")]
    pub l_in: f64,
    #[serde(rename = "L_en")]
    pub l_en: f64,
    pub lambda: f64,
    pub case: Case,
    pub loss: f64,
    pub substeps: usize,
}

impl From<&DragRecord<f64>> for TraceRow {
    fn from(r: &DragRecord<f64>) -> Self {
        TraceRow {
            k: r.k,
            point_index: r.point_index,
            hx: r.h.x,
            hy: r.h.y,
            l_in: r.l_in,
            l_en: r.l_en,
            lambda: r.lambda,
            case: r.case,
            loss: r.loss,
            substeps: r.substeps,
        }
    }
}

pub fn trace_rows(trace: &DragTrace<f64>) -> Vec<TraceRow> {
    trace.records.iter().map(TraceRow::from).collect()
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "k",
            "point_index",
            "hx",
            "hy",
            "L_in",
            "L_en",
            "lambda",
            "case",
            "loss",
            "substeps",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(SessionError::from))
        .collect()
}

/// How a render's gray levels map back to field values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderScale {
    pub width: usize,
    pub height: usize,
    /// Field value shown as gray level 0.
    pub min: f64,
    /// Field value shown as gray level 255.
    pub max: f64,
    pub projection: Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    ChannelMean,
}

/// Channel-mean render, min–max normalized to 8 bits. A flat frame maps
/// to zero.
pub fn gray_levels(f: &FeatureMap<f64>) -> (Vec<u8>, RenderScale) {
    let values = render(f);
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let span = max - min;
    let pixels = values
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    let scale = RenderScale {
        width: f.width(),
        height: f.height(),
        min,
        max,
        projection: Projection::ChannelMean,
    };
    (pixels, scale)
}

pub fn encode_png(pixels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(pixels)?;
    }
    Ok(buf)
}

pub fn render_png(f: &FeatureMap<f64>) -> Result<(Vec<u8>, RenderScale)> {
    let (pixels, scale) = gray_levels(f);
    Ok((encode_png(&pixels, scale.width, scale.height)?, scale))
}

/// Writes `<stem>.png` and its `<stem>.json` scale sidecar into `dir`.
pub fn write_render(dir: &Path, stem: &str, f: &FeatureMap<f64>) -> Result<PathBuf> {
    let (png, scale) = render_png(f)?;
    let path = dir.join(format!("{stem}.png"));
    fs::write(&path, png)?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&scale)?,
    )?;
    Ok(path)
}

/// Flat CSV view of a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub method: String,
    pub kernel: String,
    pub ccsd: Option<f64>,
    pub mean_distance: Option<f64>,
    pub steps_used: usize,
    pub forward_status: Option<String>,
    pub reverse_status: Option<String>,
    pub freeze_count: usize,
    pub fallback_count: usize,
    pub advance_count: usize,
    pub record_count: usize,
    pub mean_move: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl From<&MetricReport> for ReportRow {
    fn from(r: &MetricReport) -> Self {
        ReportRow {
            index: r.index,
            method: r.method.as_str().to_string(),
            kernel: r.kernel.clone(),
            ccsd: r.ccsd,
            mean_distance: r.mean_distance,
            steps_used: r.steps_used,
            forward_status: r.forward_status.map(|s| s.as_str().to_string()),
            reverse_status: r.reverse_status.map(|s| s.as_str().to_string()),
            freeze_count: r.freeze_count,
            fallback_count: r.fallback_count,
            advance_count: r.advance_count,
            record_count: r.record_count,
            mean_move: r.mean_move,
            wall_time: r.wall_time,
            error: r.error.clone(),
        }
    }
}

pub fn write_report_csv<W: Write>(out: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(ReportRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_reports(dir: &Path, reports: &[MetricReport]) -> Result<()> {
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(reports)?)?;
    write_report_csv(fs::File::create(dir.join("report.csv"))?, reports)
}
