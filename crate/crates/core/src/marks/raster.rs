//! ESRI ASCII grids, standardisation and nearest-cell extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f64 = -9999.0;

/// Row-major raster; row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub name: String,
    pub ncols: usize,
    pub nrows: usize,
    pub x_ll: f64,
    pub y_ll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(name: impl Into<String>, ncols: usize, nrows: usize, origin: (f64, f64), cellsize: f64, values: Vec<f64>) -> Result<Self> {
        let r = RasterGrid {
            name: name.into(),
            ncols,
            nrows,
            x_ll: origin.0,
            y_ll: origin.1,
            cellsize,
            nodata: DEFAULT_NODATA,
            values,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::invalid(format!("raster {} has no cells", self.name)));
        }
        if !(self.cellsize > 0.0 && self.cellsize.is_finite()) {
            return Err(Error::invalid(format!("raster {} needs a positive cellsize", self.name)));
        }
        if self.values.len() != self.ncols * self.nrows {
            return Err(Error::invalid(format!(
                "raster {} has {} values for {}x{} cells",
                self.name,
                self.values.len(),
                self.ncols,
                self.nrows
            )));
        }
        Ok(())
    }

    pub fn x_max(&self) -> f64 {
        self.x_ll + self.cellsize * self.ncols as f64
    }

    pub fn y_max(&self) -> f64 {
        self.y_ll + self.cellsize * self.nrows as f64
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        !v.is_finite() || v == self.nodata
    }

    /// Cell containing `(x, y)` as `(row, col)`, using the floor of the
    /// offset from the lower-left corner, clamped so the far edges belong
    /// to the last cells.
    pub fn cell_of(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !(x >= self.x_ll && x <= self.x_max() && y >= self.y_ll && y <= self.y_max()) {
            return Err(Error::Range(format!("point ({x}, {y}) lies outside raster {}", self.name)));
        }
        let col = (((x - self.x_ll) / self.cellsize).floor() as usize).min(self.ncols - 1);
        let from_bottom = (((y - self.y_ll) / self.cellsize).floor() as usize).min(self.nrows - 1);
        Ok((self.nrows - 1 - from_bottom, col))
    }

    pub fn value_at(&self, x: f64, y: f64) -> Result<f64> {
        let (row, col) = self.cell_of(x, y)?;
        let v = self.get(row, col);
        if self.is_nodata(v) {
            return Err(Error::invalid(format!("raster {} has no data at ({x}, {y})", self.name)));
        }
        Ok(v)
    }

    pub fn to_ascii_grid(&self) -> String {
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            self.ncols, self.nrows, self.x_ll, self.y_ll, self.cellsize, self.nodata
        );
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row
                .iter()
                .map(|&v| if self.is_nodata(v) { self.nodata.to_string() } else { v.to_string() })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn parse_ascii_grid(text: &str, name: &str) -> Result<RasterGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let (mut ncols, mut nrows, mut x_ll, mut y_ll, mut cellsize, mut nodata) = (None, None, None, None, None, None);
    let mut centre = (false, false);
    while let Some(&(idx, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default().to_ascii_lowercase();
        if key.parse::<f64>().is_ok() {
            break;
        }
        let line_no = idx + 1;
        let value = parts.next().ok_or_else(|| Error::Parse { line: line_no, message: format!("header field {key} has no value") })?;
        let number = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Parse { line: line_no, message: format!("header field {key} is not numeric: {v}") })
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Parse { line: line_no, message: format!("header field {key} is not a count: {v}") })
        };
        match key.as_str() {
            "ncols" => ncols = Some(count(value)?),
            "nrows" => nrows = Some(count(value)?),
            "xllcorner" => x_ll = Some(number(value)?),
            "yllcorner" => y_ll = Some(number(value)?),
            "xllcenter" => {
                x_ll = Some(number(value)?);
                centre.0 = true;
            }
            "yllcenter" => {
                y_ll = Some(number(value)?);
                centre.1 = true;
            }
            "cellsize" => cellsize = Some(number(value)?),
            "nodata_value" => nodata = Some(number(value)?),
            _ => return Err(Error::Parse { line: line_no, message: format!("unknown header field {key}") }),
        }
        lines.next();
    }
    let header_end = lines.peek().map_or(text.lines().count() + 1, |(i, _)| i + 1);
    let missing = |field: &str| Error::Parse { line: header_end, message: format!("missing header field {field}") };
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let mut x_ll = x_ll.ok_or_else(|| missing("xllcorner"))?;
    let mut y_ll = y_ll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    if !(cellsize > 0.0) {
        return Err(Error::Parse { line: header_end, message: "cellsize must be positive".into() });
    }
    if centre.0 {
        x_ll -= cellsize / 2.0;
    }
    if centre.1 {
        y_ll -= cellsize / 2.0;
    }

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut rows = 0;
    for (idx, line) in lines {
        rows += 1;
        if rows > nrows {
            return Err(Error::Parse { line: idx + 1, message: format!("more than {nrows} data rows") });
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: idx + 1, message: format!("non-numeric cell value {tok}") })?;
            values.push(v);
        }
        if values.len() - before != ncols {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {ncols} values, found {}", values.len() - before),
            });
        }
    }
    if rows != nrows {
        return Err(Error::Parse { line: text.lines().count(), message: format!("expected {nrows} data rows, found {rows}") });
    }
    let grid = RasterGrid {
        name: name.to_string(),
        ncols,
        nrows,
        x_ll,
        y_ll,
        cellsize,
        nodata: nodata.unwrap_or(DEFAULT_NODATA),
        values,
    };
    grid.validate()?;
    Ok(grid)
}

/// Reads a grid file; the raster is named after the file stem.
pub fn read_ascii_grid(path: &Path) -> Result<RasterGrid> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("raster");
    parse_ascii_grid(&text, name)
}

/// All `.asc` files of a directory, sorted by name.
pub fn read_raster_dir(dir: &Path) -> Result<Vec<RasterGrid>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        context: format!("listing {}", dir.display()),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("asc")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_ascii_grid(p)).collect()
}

/// Standardises every raster to mean 0 and sample standard deviation 1 over its valid cells.
pub fn scale_rasters(rasters: &[RasterGrid]) -> Result<Vec<RasterGrid>> {
    if rasters.is_empty() {
        return Err(Error::invalid("no rasters to scale"));
    }
    rasters
        .iter()
        .map(|r| {
            let valid: Vec<f64> = r.values.iter().copied().filter(|&v| !r.is_nodata(v)).collect();
            if valid.len() < 2 {
                return Err(Error::invalid(format!("raster {} has fewer than 2 valid cells", r.name)));
            }
            let n = valid.len() as f64;
            let mean = valid.iter().sum::<f64>() / n;
            let sd = (valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let mut out = r.clone();
            for v in out.values.iter_mut().filter(|v| !r.is_nodata(**v)) {
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
            Ok(out)
        })
        .collect()
}

/// Covariate matrix with one row per point and one column per raster.
pub fn extract_covariates(rasters: &[RasterGrid], points: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            rasters
                .iter()
                .map(|r| r.value_at(x, y).map_err(|e| Error::invalid(format!("point {i}: {e}"))))
                .collect()
        })
        .collect()
}
