//! Periodic computational domain `[0, L_1) x ... x [0, L_d)` and its
//! Fourier lattice.
//!
//! Spectral arrays use FFT ordering along every axis (index `j` carries the
//! integer wavenumber `j` for `j < N/2` and `j - N` otherwise) and row-major
//! layout with the last axis contiguous. Forward transforms are normalised
//! so that spectral coefficients are Fourier-series coefficients:
//! `f(x) = sum_k c_k exp(i xi_k . x)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

pub struct FourierGrid {
    dims: Vec<usize>,
    lengths: Vec<f64>,
    total: usize,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    /// Wavevector components, one array per axis, indexed by flat mode index.
    xi: Vec<Vec<f64>>,
    xi_sq: Vec<f64>,
    dealias: Vec<bool>,
    nyquist: Vec<bool>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("dims", &self.dims)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.lengths == other.lengths
    }
}

fn axis_wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl FourierGrid {
    pub fn new(dims: &[usize], lengths: &[f64]) -> Result<Arc<Self>> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {}",
                dims.len()
            )));
        }
        if dims.len() != lengths.len() {
            return Err(Error::InvalidGrid("dims and lengths differ in rank".into()));
        }
        for &n in dims {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be a power of two >= 8, got {n}"
                )));
            }
        }
        for &l in lengths {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidGrid(format!("axis length must be positive, got {l}")));
            }
        }

        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();

        let total: usize = dims.iter().product();
        let d = dims.len();
        let mut xi = vec![vec![0.0; total]; d];
        let mut xi_sq = vec![0.0; total];
        let mut dealias = vec![true; total];
        let mut nyquist = vec![false; total];
        let mut idx = [0usize; MAX_DIM];
        for flat in 0..total {
            let mut rem = flat;
            for a in (0..d).rev() {
                idx[a] = rem % dims[a];
                rem /= dims[a];
            }
            for a in 0..d {
                let k = axis_wavenumber(idx[a], dims[a]);
                let x = 2.0 * std::f64::consts::PI * k as f64 / lengths[a];
                xi[a][flat] = x;
                xi_sq[flat] += x * x;
                if 3 * k.unsigned_abs() as usize >= dims[a] {
                    dealias[flat] = false;
                }
                if idx[a] == dims[a] / 2 {
                    nyquist[flat] = true;
                }
            }
        }

        Ok(Arc::new(Self {
            dims: dims.to_vec(),
            lengths: lengths.to_vec(),
            total,
            fwd,
            inv,
            xi,
            xi_sq,
            dealias,
            nyquist,
        }))
    }

    /// Cubic grid with the same resolution and length on every axis.
    pub fn uniform(d: usize, n: usize, length: f64) -> Result<Arc<Self>> {
        Self::new(&vec![n; d], &vec![length; d])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total as f64
    }

    /// Wavevector component along `axis` for the flat mode index.
    #[inline]
    pub fn xi(&self, axis: usize, mode: usize) -> f64 {
        self.xi[axis][mode]
    }

    pub fn xi_axis(&self, axis: usize) -> &[f64] {
        &self.xi[axis]
    }

    #[inline]
    pub fn xi_sq(&self, mode: usize) -> f64 {
        self.xi_sq[mode]
    }

    pub fn xi_sq_all(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Largest `|xi|` on the lattice.
    pub fn xi_max(&self) -> f64 {
        self.xi_sq.iter().cloned().fold(0.0, f64::max).sqrt()
    }

    /// Largest `|xi|` retained by the 2/3 truncation.
    pub fn xi_max_dealiased(&self) -> f64 {
        self.xi_sq
            .iter()
            .zip(&self.dealias)
            .filter(|(_, &keep)| keep)
            .map(|(s, _)| *s)
            .fold(0.0, f64::max)
            .sqrt()
    }

    #[inline]
    pub fn is_nyquist(&self, mode: usize) -> bool {
        self.nyquist[mode]
    }

    #[inline]
    pub fn keeps(&self, mode: usize) -> bool {
        self.dealias[mode]
    }

    /// Integer wavenumber vector of a flat mode index.
    pub fn mode_wavenumbers(&self, mode: usize) -> Vec<i64> {
        self.unflatten(mode)
            .iter()
            .zip(&self.dims)
            .map(|(&j, &n)| axis_wavenumber(j, n))
            .collect()
    }

    /// Flat index of the mode `-k` (the lattice is closed under negation modulo N).
    pub fn negated_mode(&self, mode: usize) -> usize {
        let idx = self.unflatten(mode);
        let neg: Vec<usize> = idx
            .iter()
            .zip(&self.dims)
            .map(|(&j, &n)| (n - j) % n)
            .collect();
        self.flatten(&neg)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&j, &n)| acc * n + j)
    }

    /// Physical coordinate of a grid point along every axis.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(self.dims.iter().zip(&self.lengths))
            .map(|(&j, (&n, &l))| j as f64 * l / n as f64)
            .collect()
    }

    /// Domain midpoint.
    pub fn center(&self) -> Vec<f64> {
        self.lengths.iter().map(|l| 0.5 * l).collect()
    }

    /// Flat index of the grid point sitting at the domain midpoint.
    pub fn center_index(&self) -> usize {
        let idx: Vec<usize> = self.dims.iter().map(|n| n / 2).collect();
        self.flatten(&idx)
    }

    /// Forward transform: physical samples to Fourier-series coefficients.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let scale = 1.0 / self.total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Inverse transform: Fourier-series coefficients to physical samples.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Zero every mode outside the 2/3 band.
    pub fn dealias(&self, spec: &mut [Complex64]) {
        for (v, &keep) in spec.iter_mut().zip(&self.dealias) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.total, "buffer does not match grid");
        let d = self.dim();
        for axis in 0..d {
            let plan = if inverse { &self.inv[axis] } else { &self.fwd[axis] };
            let n = self.dims[axis];
            let stride: usize = self.dims[axis + 1..].iter().product();
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            // Transpose each (n x stride) block so the axis becomes contiguous.
            let block = n * stride;
            let mut tmp = vec![Complex64::new(0.0, 0.0); block];
            for chunk in data.chunks_exact_mut(block) {
                for j in 0..n {
                    for s in 0..stride {
                        tmp[s * n + j] = chunk[j * stride + s];
                    }
                }
                plan.process_with_scratch(&mut tmp, &mut scratch);
                for j in 0..n {
                    for s in 0..stride {
                        chunk[j * stride + s] = tmp[s * n + j];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(FourierGrid::new(&[6], &[1.0]).is_err());
        assert!(FourierGrid::new(&[12], &[1.0]).is_err());
        assert!(FourierGrid::new(&[16], &[0.0]).is_err());
        assert!(FourierGrid::new(&[16, 16], &[1.0]).is_err());
        assert!(FourierGrid::new(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        assert!(FourierGrid::new(&[8, 16], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn lattice_closed_under_negation() {
        let g = FourierGrid::new(&[8, 16], &[1.0, 3.0]).unwrap();
        for m in 0..g.len() {
            let nm = g.negated_mode(m);
            assert_eq!(g.negated_mode(nm), m);
            let k = g.mode_wavenumbers(m);
            let nk = g.mode_wavenumbers(nm);
            for ((a, b), n) in k.iter().zip(&nk).zip(g.dims()) {
                assert_eq!((a + b).rem_euclid(*n as i64), 0);
            }
        }
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = FourierGrid::new(&[8], &[2.0 * std::f64::consts::PI]).unwrap();
        let ks: Vec<f64> = (0..8).map(|m| g.xi(0, m)).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        assert!(g.is_nyquist(4));
        assert!(!g.keeps(3));
        assert!(g.keeps(2));
    }

    #[test]
    fn single_mode_lands_on_its_coefficient() {
        let g = FourierGrid::new(&[16, 8], &[4.0, 2.0]).unwrap();
        let (k0, k1) = (3i64, -2i64);
        let mut buf: Vec<Complex64> = (0..g.len())
            .map(|p| {
                let x = g.point(p);
                let ph = 2.0 * std::f64::consts::PI * (k0 as f64 * x[0] / 4.0 + k1 as f64 * x[1] / 2.0);
                Complex64::from_polar(1.0, ph)
            })
            .collect();
        g.forward(&mut buf);
        for (m, c) in buf.iter().enumerate() {
            let k = g.mode_wavenumbers(m);
            let expect = if k == vec![k0, k1] { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-13, "mode {k:?}");
        }
    }
}
