//! Text artifacts: point CSVs, realization CSVs with JSON sidecars, curve CSVs and run configs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::check::CheckOptions;
use crate::error::{Error, Result};
use crate::estimation::FitConfig;
use crate::likelihood::ScParameters;
use crate::marks::{FeatureConfig, TrainConfig};
use crate::pattern::{MarkedPattern, MarkedPoint, Window};
use crate::simulation::{SimConfig, SimDiagnostics, SimEvent, SimRealization};
use crate::summaries::{EstimatorOptions, SummaryCurve};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const REALIZATION_SCHEMA_VERSION: u32 = 1;

/// Shortest text that parses back to the same value; `NA` for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Parses `x_min,x_max,y_min,y_max`.
pub fn parse_window(text: &str) -> Result<Window> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad window coordinate '{s}'"))))
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        return Err(Error::invalid("window needs four values: x_min,x_max,y_min,y_max"));
    }
    Window::new(v[0], v[1], v[2], v[3])
}

fn parse_cell(field: Option<&str>, column: &str, line: usize) -> Result<f64> {
    let text = field.unwrap_or("").trim();
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("column '{column}' holds '{text}', expected a finite number"),
        }),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Points from CSV text with header `x,y,size[,secondary]`.
///
/// Without an explicit window, `[0, ceil(max x)] x [0, ceil(max y)]` is used and a warning returned.
pub fn parse_pattern_csv(text: &str, window: Option<Window>) -> Result<(MarkedPattern, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(["x", "y", "size"]) {
        *slot = column(&headers, name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })?;
    }
    let secondary = column(&headers, "secondary");
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let x = parse_cell(record.get(idx[0]), "x", line)?;
        let y = parse_cell(record.get(idx[1]), "y", line)?;
        let size = parse_cell(record.get(idx[2]), "size", line)?;
        let mut p = MarkedPoint::new(x, y, size);
        if let Some(j) = secondary {
            if record.get(j).is_some_and(|s| !s.trim().is_empty()) {
                p.secondary = Some(parse_cell(record.get(j), "secondary", line)?);
            }
        }
        points.push(p);
    }
    let mut warnings = Vec::new();
    let window = match window {
        Some(w) => w,
        None => {
            let mx = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil();
            let my = points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil();
            let w = Window::new(0.0, mx, 0.0, my)
                .map_err(|_| Error::invalid("cannot infer a window from the points; pass one explicitly"))?;
            warnings.push(format!("window inferred as [0, {mx}] x [0, {my}]"));
            w
        }
    };
    Ok((MarkedPattern::new(window, points)?, warnings))
}

pub fn read_pattern_csv(path: &Path, window: Option<Window>) -> Result<(MarkedPattern, Vec<String>)> {
    parse_pattern_csv(&read_text(path)?, window)
}

pub fn pattern_to_csv(pattern: &MarkedPattern) -> String {
    let with_secondary = pattern.points.iter().any(|p| p.secondary.is_some());
    let mut out = String::from(if with_secondary { "x,y,size,secondary\n" } else { "x,y,size\n" });
    for p in &pattern.points {
        let _ = write!(out, "{},{},{}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.size));
        if with_secondary {
            let _ = write!(out, ",{}", p.secondary.map(fmt_f64).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

pub fn realization_to_csv(real: &SimRealization) -> String {
    let mut out = String::from("t,x,y,mark\n");
    for e in &real.events {
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(e.t), fmt_f64(e.x), fmt_f64(e.y), fmt_f64(e.mark));
    }
    out
}

pub fn parse_realization_csv(text: &str) -> Result<Vec<SimEvent>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(["t", "x", "y", "mark"]) {
        *slot = column(&headers, name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })?;
    }
    reader
        .records()
        .map(|record| {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            Ok(SimEvent {
                t: parse_cell(record.get(idx[0]), "t", line)?,
                x: parse_cell(record.get(idx[1]), "x", line)?,
                y: parse_cell(record.get(idx[2]), "y", line)?,
                mark: parse_cell(record.get(idx[3]), "mark", line)?,
            })
        })
        .collect()
}

/// Everything about a realization except its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSidecar {
    pub schema_version: u32,
    pub n_events: usize,
    pub window: Window,
    pub parameters: ScParameters,
    pub config: SimConfig,
    pub diagnostics: SimDiagnostics,
}

impl RealizationSidecar {
    pub fn of(real: &SimRealization) -> Self {
        RealizationSidecar {
            schema_version: REALIZATION_SCHEMA_VERSION,
            n_events: real.events.len(),
            window: real.window,
            parameters: real.parameters,
            config: real.config.clone(),
            diagnostics: real.diagnostics,
        }
    }
}

/// Sidecar path next to a realization CSV: same stem, `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_realization(real: &SimRealization, csv: &Path) -> Result<PathBuf> {
    write_text(csv, &realization_to_csv(real))?;
    let side = sidecar_path(csv);
    write_json(&side, &RealizationSidecar::of(real))?;
    Ok(side)
}

pub fn read_realization(csv: &Path) -> Result<SimRealization> {
    let events = parse_realization_csv(&read_text(csv)?)?;
    let side: RealizationSidecar = read_json(&sidecar_path(csv))?;
    Ok(SimRealization {
        events,
        diagnostics: side.diagnostics,
        config: side.config,
        window: side.window,
        parameters: side.parameters,
    })
}

/// Long-format curves: `kind,r,value,theoretical`.
pub fn curves_to_csv(curves: &[SummaryCurve]) -> String {
    let mut out = String::from("kind,r,value,theoretical\n");
    for c in curves {
        for k in 0..c.r.len() {
            let _ = writeln!(out, "{},{},{},{}", c.kind.label(), fmt_f64(c.r[k]), fmt_f64(c.value[k]), fmt_f64(c.theoretical[k]));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMarkBlock {
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Parameter blocks for every subcommand; command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rasters: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_mark: Option<TrainMarkBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summaries: Option<EstimatorOptions>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "config schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        for path in [&mut cfg.data, &mut cfg.rasters].into_iter().flatten() {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        Ok(cfg)
    }

    /// Reads a config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&read_text(path)?, base)
    }
}
