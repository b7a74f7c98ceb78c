//! Scalar light fields over the 30 x 30 m arena.
//!
//! A field is a regular grid of values in `[0, 255]`. Lookups are piecewise
//! constant: a position returns the value of the cell containing it, and
//! anything outside the grid reads as 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of every built-in arena, in meters.
pub const ARENA_SIZE: f64 = 30.0;
/// Peak value of every built-in arena.
pub const G_MAX: f64 = 255.0;
/// Grid resolution used when nothing else is requested.
pub const DEFAULT_CELLS_PER_METER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArenaKind {
    Center,
    BiModal,
    Linear,
    Banana,
}

impl ArenaKind {
    pub const ALL: [ArenaKind; 4] = [
        ArenaKind::Center,
        ArenaKind::BiModal,
        ArenaKind::Linear,
        ArenaKind::Banana,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArenaKind::Center => "center",
            ArenaKind::BiModal => "bimodal",
            ArenaKind::Linear => "linear",
            ArenaKind::Banana => "banana",
        }
    }

    /// Analytic light value at a world position, before grid quantization.
    pub fn analytic(self, x: f64, y: f64) -> f64 {
        match self {
            ArenaKind::Center => radial_ramp(x, y, 15.0, 15.0, 15.0),
            ArenaKind::BiModal => {
                radial_ramp(x, y, 9.0, 15.0, 9.0).max(radial_ramp(x, y, 21.0, 15.0, 9.0))
            }
            ArenaKind::Linear => G_MAX * (x / ARENA_SIZE).clamp(0.0, 1.0),
            ArenaKind::Banana => {
                // [0,30]^2 -> [-2,2] x [-1,3]
                let a = -2.0 + 4.0 * x / ARENA_SIZE;
                let b = -1.0 + 4.0 * y / ARENA_SIZE;
                let r = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                G_MAX * (-r / 10.0).exp()
            }
        }
    }
}

fn radial_ramp(x: f64, y: f64, cx: f64, cy: f64, radius: f64) -> f64 {
    let d = (x - cx).hypot(y - cy);
    G_MAX * (1.0 - d / radius).max(0.0)
}

impl fmt::Display for ArenaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArenaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "center" => Ok(ArenaKind::Center),
            "bimodal" => Ok(ArenaKind::BiModal),
            "linear" => Ok(ArenaKind::Linear),
            "banana" => Ok(ArenaKind::Banana),
            other => Err(Error::Config(format!("unknown arena `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width_cells: usize,
    height_cells: usize,
    cell_size: f64,
    origin: [f64; 2],
    /// Row-major, `values[j * width + i]` is column `i`, row `j` (row 0 at `origin.y`).
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(
        width_cells: usize,
        height_cells: usize,
        cell_size: f64,
        origin: [f64; 2],
        values: Vec<f64>,
    ) -> Result<Self> {
        if width_cells == 0 || height_cells == 0 {
            return Err(Error::Config("field dimensions must be positive".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Config(format!("invalid cell size {cell_size}")));
        }
        if values.len() != width_cells * height_cells {
            return Err(Error::Config(format!(
                "field has {} values, expected {}",
                values.len(),
                width_cells * height_cells
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=G_MAX).contains(*v)) {
            return Err(Error::Config(format!("field value {v} outside [0, 255]")));
        }
        Ok(Self {
            width_cells,
            height_cells,
            cell_size,
            origin,
            values,
        })
    }

    pub fn width_cells(&self) -> usize {
        self.width_cells
    }

    pub fn height_cells(&self) -> usize {
        self.height_cells
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width_cells + i]
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the cell containing a world position, if inside the grid.
    pub fn cell_index(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin[0]) / self.cell_size).floor();
        let fy = ((y - self.origin[1]) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width_cells as f64 || fy >= self.height_cells as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Value of the cell containing `(x, y)`; 0 outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        match self.cell_index(x, y) {
            Some((i, j)) => self.cell(i, j),
            None => 0.0,
        }
    }

    /// Writes the text grid: a `width height cell_size origin_x origin_y`
    /// header, then one line of space separated values per row.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.width_cells, self.height_cells, self.cell_size, self.origin[0], self.origin[1]
        );
        for row in self.values.chunks(self.width_cells) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            line: line + 1,
            msg,
        };
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 5 {
            return Err(parse_err(hline, "header needs 5 fields".into()));
        }
        let width: usize = head[0]
            .parse()
            .map_err(|e| parse_err(hline, format!("width: {e}")))?;
        let height: usize = head[1]
            .parse()
            .map_err(|e| parse_err(hline, format!("height: {e}")))?;
        let mut nums = [0.0; 3];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = head[2 + k]
                .parse()
                .map_err(|e| parse_err(hline, format!("{e}")))?;
        }
        let mut values = Vec::with_capacity(width * height);
        for (ln, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("{e}")))?;
            if row.len() != width {
                return Err(parse_err(
                    ln,
                    format!("row has {} values, expected {width}", row.len()),
                ));
            }
            values.extend(row);
        }
        Self::new(width, height, nums[0], [nums[1], nums[2]], values)
    }
}

/// Builds one of the built-in 30 x 30 m arenas.
///
/// The analytic form is evaluated at every cell center and the grid is then
/// rescaled so its minimum is 0 and its maximum is exactly 255.
pub fn build_arena(kind: ArenaKind, cells_per_meter: usize) -> ScalarField {
    let cpm = cells_per_meter.max(1);
    let n = (ARENA_SIZE as usize) * cpm;
    let cell = 1.0 / cpm as f64;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = (j as f64 + 0.5) * cell;
        for i in 0..n {
            let x = (i as f64 + 0.5) * cell;
            values.push(kind.analytic(x, y));
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut values {
        *v = (G_MAX * (*v - lo) / span).clamp(0.0, G_MAX);
    }
    // the peak cell(s) hit 255 only up to rounding
    for v in &mut values {
        if G_MAX - *v < 1e-9 {
            *v = G_MAX;
        }
    }
    ScalarField {
        width_cells: n,
        height_cells: n,
        cell_size: cell,
        origin: [0.0, 0.0],
        values,
    }
}
