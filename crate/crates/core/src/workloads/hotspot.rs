//! Explicit diffusion-plus-power stencil on a 2-D or 3-D temperature grid.
//!
//! ```text
//! T'[x] = T[x] + D * (sum of neighbours - 2 * dims * T[x]) + P[x]
//! ```
//!
//! Out-of-grid neighbours take the cell's own value (adiabatic walls).
//! Neighbour sums are grouped per axis, `((x- + x+) + (y- + y+)) + (z- + z+)`,
//! so mirrored grids produce mirrored results bit for bit.

use rayon::prelude::*;

use super::Parallelism;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotWorkload {
    temperature: Vec<f64>,
    power: Vec<f64>,
    diffusion_coefficient: f64,
    rows: usize,
    cols: usize,
    layers: usize,
    scratch: Vec<f64>,
}

impl HotspotWorkload {
    /// Grids are stored layer-major, then row-major. `layers == 1` is the
    /// 2-D case.
    pub fn new(
        temperature: Vec<f64>,
        power: Vec<f64>,
        diffusion_coefficient: f64,
        rows: usize,
        cols: usize,
        layers: usize,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || layers == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
        }
        let cells = rows * cols * layers;
        if temperature.len() != cells || power.len() != cells {
            return Err(Error::InvalidParameter(format!(
                "grid of {rows}x{cols}x{layers} needs {cells} cells, got temperature {} and power {}",
                temperature.len(),
                power.len()
            )));
        }
        let dims = if layers == 1 { 2 } else { 3 };
        let limit = 1.0 / (2.0 * dims as f64);
        if !(diffusion_coefficient >= 0.0 && diffusion_coefficient <= limit) {
            return Err(Error::InvalidParameter(format!(
                "diffusion coefficient {diffusion_coefficient} outside stable range [0, {limit}]"
            )));
        }
        Ok(Self {
            temperature,
            power,
            diffusion_coefficient,
            rows,
            cols,
            layers,
            scratch: vec![0.0; cells],
        })
    }

    /// Deterministic start: a repeating temperature pattern above 1.0 and two
    /// small heat sources.
    pub fn demo(rows: usize, cols: usize, layers: usize) -> Result<Self> {
        let cells = rows * cols * layers;
        let mut temperature = Vec::with_capacity(cells);
        let mut power = vec![0.0; cells];
        for l in 0..layers {
            for r in 0..rows {
                for c in 0..cols {
                    let phase = (r * 7 + c * 3 + l * 5) % 11;
                    temperature.push(1.0 + 0.1 * phase as f64);
                }
            }
        }
        if cells > 0 {
            power[0] = 1e-3;
            power[cells / 3] = 2e-3;
        }
        let d = if layers == 1 { 0.2 } else { 0.15 };
        Self::new(temperature, power, d, rows, cols, layers)
    }

    pub fn temperature(&self) -> &[f64] {
        &self.temperature
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn diffusion_coefficient(&self) -> f64 {
        self.diffusion_coefficient
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.layers)
    }

    pub fn dims(&self) -> usize {
        if self.layers == 1 {
            2
        } else {
            3
        }
    }

    pub fn index(&self, layer: usize, row: usize, col: usize) -> usize {
        (layer * self.rows + row) * self.cols + col
    }

    pub fn step(&mut self, par: Parallelism) {
        let (rows, cols, layers) = (self.rows, self.cols, self.layers);
        let old = &self.temperature;
        let power = &self.power;
        let d = self.diffusion_coefficient;
        let centre_weight = 2.0 * self.dims() as f64;
        let three_d = layers > 1;

        let update_row = |row_id: usize, out: &mut [f64]| {
            let l = row_id / rows;
            let r = row_id % rows;
            let base = row_id * cols;
            for (c, slot) in out.iter_mut().enumerate() {
                let at = base + c;
                let t = old[at];
                let west = if c > 0 { old[at - 1] } else { t };
                let east = if c + 1 < cols { old[at + 1] } else { t };
                let north = if r > 0 { old[at - cols] } else { t };
                let south = if r + 1 < rows { old[at + cols] } else { t };
                let mut sum = (west + east) + (north + south);
                if three_d {
                    let plane = rows * cols;
                    let below = if l > 0 { old[at - plane] } else { t };
                    let above = if l + 1 < layers { old[at + plane] } else { t };
                    sum += below + above;
                }
                *slot = t + d * (sum - centre_weight * t) + power[at];
            }
        };

        match par {
            Parallelism::Serial => self
                .scratch
                .chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| update_row(i, row)),
            Parallelism::Rayon => self
                .scratch
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| update_row(i, row)),
        }
        std::mem::swap(&mut self.temperature, &mut self.scratch);
    }

    pub(crate) fn arrays(&self) -> [&[f64]; 2] {
        [&self.temperature, &self.power]
    }
}

pub fn hotspot_step(mut w: HotspotWorkload) -> HotspotWorkload {
    w.step(Parallelism::Serial);
    w
}
