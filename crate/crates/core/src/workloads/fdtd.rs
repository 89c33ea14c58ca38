//! Yee-grid FDTD solver for a vacuum-filled perfect-electric-conductor box.
//!
//! The cavity spans `nx * ny * nz` cubic cells. Components sit on the usual
//! staggered positions:
//!
//! | field | shape                  | position            |
//! |-------|------------------------|---------------------|
//! | Ex    | nx × (ny+1) × (nz+1)   | (i+½, j, k)         |
//! | Ey    | (nx+1) × ny × (nz+1)   | (i, j+½, k)         |
//! | Ez    | (nx+1) × (ny+1) × nz   | (i, j, k+½)         |
//! | Hx    | (nx+1) × ny × nz       | (i, j+½, k+½)       |
//! | Hy    | nx × (ny+1) × nz       | (i+½, j, k+½)       |
//! | Hz    | nx × ny × (nz+1)       | (i+½, j+½, k)       |
//!
//! Tangential E on the walls is held at zero. Each update reads only the
//! other field, so every output cell is independent of evaluation order.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;

use super::Parallelism;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
pub const VACUUM_PERMITTIVITY: f64 =
    1.0 / (VACUUM_PERMEABILITY * SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// Dense 3-D array, `k` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let at = self.idx(i, j, k);
        self.data[at] = v;
    }

    /// Rewrites every cell in the `j` and `k` ranges of each `i` slab in
    /// `i_range` with `f(i, j, k, old)`.
    fn update<F>(&mut self, par: Parallelism, ranges: [Range<usize>; 3], f: F)
    where
        F: Fn(usize, usize, usize, f64) -> f64 + Sync,
    {
        let [ir, jr, kr] = ranges;
        let slab = self.shape[1] * self.shape[2];
        let nk = self.shape[2];
        let body = |(i, chunk): (usize, &mut [f64])| {
            if !ir.contains(&i) {
                return;
            }
            for j in jr.clone() {
                for k in kr.clone() {
                    let at = j * nk + k;
                    chunk[at] = f(i, j, k, chunk[at]);
                }
            }
        };
        match par {
            Parallelism::Serial => self.data.chunks_mut(slab).enumerate().for_each(body),
            Parallelism::Rayon => self.data.par_chunks_mut(slab).enumerate().for_each(body),
        }
    }

    fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdtdWorkload {
    pub ex: Field3,
    pub ey: Field3,
    pub ez: Field3,
    pub hx: Field3,
    pub hy: Field3,
    pub hz: Field3,
    dims: (usize, usize, usize),
    cell_size: f64,
    time_step: f64,
}

/// Largest stable time step for cubic cells of edge `cell_size`.
pub fn cfl_limit(cell_size: f64) -> f64 {
    cell_size / (SPEED_OF_LIGHT * 3f64.sqrt())
}

impl FdtdWorkload {
    /// Zero fields in an `nx * ny * nz` cavity.
    pub fn new(dims: (usize, usize, usize), cell_size: f64, time_step: f64) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidParameter("cavity dimensions must be positive".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size {cell_size} must be positive")));
        }
        let limit = cfl_limit(cell_size);
        if !(time_step > 0.0 && time_step <= limit) {
            return Err(Error::InvalidParameter(format!(
                "time step {time_step} violates the CFL limit {limit}"
            )));
        }
        Ok(Self {
            ex: Field3::zeros([nx, ny + 1, nz + 1]),
            ey: Field3::zeros([nx + 1, ny, nz + 1]),
            ez: Field3::zeros([nx + 1, ny + 1, nz]),
            hx: Field3::zeros([nx + 1, ny, nz]),
            hy: Field3::zeros([nx, ny + 1, nz]),
            hz: Field3::zeros([nx, ny, nz + 1]),
            dims,
            cell_size,
            time_step,
        })
    }

    /// Time step set to `courant_fraction` of the CFL limit.
    pub fn with_courant(
        dims: (usize, usize, usize),
        cell_size: f64,
        courant_fraction: f64,
    ) -> Result<Self> {
        Self::new(dims, cell_size, courant_fraction * cfl_limit(cell_size))
    }

    /// Cavity excited in its TE101 mode: `Ey = sin(pi x / Lx) sin(pi z / Lz)`,
    /// H zero.
    pub fn te101(
        dims: (usize, usize, usize),
        cell_size: f64,
        courant_fraction: f64,
    ) -> Result<Self> {
        let mut w = Self::with_courant(dims, cell_size, courant_fraction)?;
        let (nx, ny, nz) = dims;
        for i in 1..nx {
            let sx = (PI * i as f64 / nx as f64).sin();
            for j in 0..ny {
                for k in 1..nz {
                    let sz = (PI * k as f64 / nz as f64).sin();
                    w.ey.set(i, j, k, sx * sz);
                }
            }
        }
        Ok(w)
    }

    /// Analytic TE101 resonance `c / 2 * sqrt(1 / Lx^2 + 1 / Lz^2)` in Hz.
    pub fn te101_frequency(&self) -> f64 {
        let lx = self.dims.0 as f64 * self.cell_size;
        let lz = self.dims.2 as f64 * self.cell_size;
        0.5 * SPEED_OF_LIGHT * (1.0 / (lx * lx) + 1.0 / (lz * lz)).sqrt()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    /// H <- H - (dt / mu0) curl E.
    pub fn h_step(&mut self, par: Parallelism) {
        let (nx, ny, nz) = self.dims;
        let ch = self.time_step / (VACUUM_PERMEABILITY * self.cell_size);
        let (ex, ey, ez) = (&self.ex, &self.ey, &self.ez);

        self.hx.update(par, [0..nx + 1, 0..ny, 0..nz], |i, j, k, h| {
            let curl = (ez.get(i, j + 1, k) - ez.get(i, j, k)) - (ey.get(i, j, k + 1) - ey.get(i, j, k));
            h - ch * curl
        });
        self.hy.update(par, [0..nx, 0..ny + 1, 0..nz], |i, j, k, h| {
            let curl = (ex.get(i, j, k + 1) - ex.get(i, j, k)) - (ez.get(i + 1, j, k) - ez.get(i, j, k));
            h - ch * curl
        });
        self.hz.update(par, [0..nx, 0..ny, 0..nz + 1], |i, j, k, h| {
            let curl = (ey.get(i + 1, j, k) - ey.get(i, j, k)) - (ex.get(i, j + 1, k) - ex.get(i, j, k));
            h - ch * curl
        });
    }

    /// E <- E + (dt / eps0) curl H on interior components, then tangential
    /// E on the walls is zeroed.
    pub fn e_step(&mut self, par: Parallelism) {
        let (nx, ny, nz) = self.dims;
        let ce = self.time_step / (VACUUM_PERMITTIVITY * self.cell_size);
        let (hx, hy, hz) = (&self.hx, &self.hy, &self.hz);

        self.ex.update(par, [0..nx, 1..ny, 1..nz], |i, j, k, e| {
            let curl = (hz.get(i, j, k) - hz.get(i, j - 1, k)) - (hy.get(i, j, k) - hy.get(i, j, k - 1));
            e + ce * curl
        });
        self.ey.update(par, [1..nx, 0..ny, 1..nz], |i, j, k, e| {
            let curl = (hx.get(i, j, k) - hx.get(i, j, k - 1)) - (hz.get(i, j, k) - hz.get(i - 1, j, k));
            e + ce * curl
        });
        self.ez.update(par, [1..nx, 1..ny, 0..nz], |i, j, k, e| {
            let curl = (hy.get(i, j, k) - hy.get(i - 1, j, k)) - (hx.get(i, j, k) - hx.get(i, j - 1, k));
            e + ce * curl
        });
        self.enforce_pec();
    }

    fn enforce_pec(&mut self) {
        let (nx, ny, nz) = self.dims;
        for i in 0..nx {
            for j in 0..=ny {
                for k in 0..=nz {
                    if j == 0 || j == ny || k == 0 || k == nz {
                        self.ex.set(i, j, k, 0.0);
                    }
                }
            }
        }
        for i in 0..=nx {
            for j in 0..ny {
                for k in 0..=nz {
                    if i == 0 || i == nx || k == 0 || k == nz {
                        self.ey.set(i, j, k, 0.0);
                    }
                }
            }
        }
        for i in 0..=nx {
            for j in 0..=ny {
                for k in 0..nz {
                    if i == 0 || i == nx || j == 0 || j == ny {
                        self.ez.set(i, j, k, 0.0);
                    }
                }
            }
        }
    }

    /// Largest magnitude of any tangential E component on the walls.
    pub fn max_wall_tangential_e(&self) -> f64 {
        let (nx, ny, nz) = self.dims;
        let mut worst = 0.0f64;
        for i in 0..=nx {
            for j in 0..=ny {
                for k in 0..=nz {
                    if i < nx && (j == 0 || j == ny || k == 0 || k == nz) {
                        worst = worst.max(self.ex.get(i, j, k).abs());
                    }
                    if j < ny && (i == 0 || i == nx || k == 0 || k == nz) {
                        worst = worst.max(self.ey.get(i, j, k).abs());
                    }
                    if k < nz && (i == 0 || i == nx || j == 0 || j == ny) {
                        worst = worst.max(self.ez.get(i, j, k).abs());
                    }
                }
            }
        }
        worst
    }

    /// `½ eps0 |E|^2 dV` summed over all E components, joules.
    pub fn electric_energy(&self) -> f64 {
        let dv = self.cell_size.powi(3);
        0.5 * VACUUM_PERMITTIVITY
            * dv
            * (self.ex.sum_of_squares() + self.ey.sum_of_squares() + self.ez.sum_of_squares())
    }

    /// `½ mu0 |H|^2 dV` at the current H half step, joules.
    pub fn magnetic_energy(&self) -> f64 {
        let dv = self.cell_size.powi(3);
        0.5 * VACUUM_PERMEABILITY
            * dv
            * (self.hx.sum_of_squares() + self.hy.sum_of_squares() + self.hz.sum_of_squares())
    }

    pub(crate) fn arrays(&self) -> [&[f64]; 6] {
        [
            self.ex.data(),
            self.ey.data(),
            self.ez.data(),
            self.hx.data(),
            self.hy.data(),
            self.hz.data(),
        ]
    }
}

pub fn fdtd_h_step(mut w: FdtdWorkload) -> FdtdWorkload {
    w.h_step(Parallelism::Serial);
    w
}

pub fn fdtd_e_step(mut w: FdtdWorkload) -> FdtdWorkload {
    w.e_step(Parallelism::Serial);
    w
}
