//! Scalar and vector fields sampled on a [`FourierGrid`].

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FourierGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Real,
    Complex,
}

/// Immutable field value: physical samples per component plus a lazily
/// computed spectral representation.
///
/// Real fields store their samples with exactly zero imaginary parts.
#[derive(Debug)]
pub struct Field {
    grid: Arc<FourierGrid>,
    kind: ValueKind,
    physical: Vec<Vec<Complex64>>,
    spectral: OnceLock<Vec<Vec<Complex64>>>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        let spectral = OnceLock::new();
        if let Some(s) = self.spectral.get() {
            let _ = spectral.set(s.clone());
        }
        Self {
            grid: self.grid.clone(),
            kind: self.kind,
            physical: self.physical.clone(),
            spectral,
        }
    }
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

impl Field {
    pub fn zeros(grid: &Arc<FourierGrid>, components: usize, kind: ValueKind) -> Self {
        Self::from_parts(grid, kind, vec![vec![Complex64::new(0.0, 0.0); grid.len()]; components])
    }

    /// Constant real scalar.
    pub fn constant(grid: &Arc<FourierGrid>, value: f64) -> Self {
        Self::real_scalar(grid, vec![value; grid.len()])
    }

    pub fn real_scalar(grid: &Arc<FourierGrid>, samples: Vec<f64>) -> Self {
        Self::real_vector(grid, vec![samples])
    }

    pub fn real_vector(grid: &Arc<FourierGrid>, components: Vec<Vec<f64>>) -> Self {
        let phys = components.iter().map(|c| to_complex(c)).collect();
        Self::from_parts(grid, ValueKind::Real, phys)
    }

    pub fn complex(grid: &Arc<FourierGrid>, components: Vec<Vec<Complex64>>) -> Self {
        Self::from_parts(grid, ValueKind::Complex, components)
    }

    /// Real scalar field from a closure of the point coordinates.
    pub fn scalar_fn(grid: &Arc<FourierGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let samples = (0..grid.len()).map(|p| f(&grid.point(p))).collect();
        Self::real_scalar(grid, samples)
    }

    /// Real field from a closure of the point coordinates, one value per component.
    pub fn from_fn(
        grid: &Arc<FourierGrid>,
        components: usize,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Self {
        let mut comps = vec![Vec::with_capacity(grid.len()); components];
        for p in 0..grid.len() {
            let vals = f(&grid.point(p));
            for (c, v) in comps.iter_mut().zip(vals) {
                c.push(v);
            }
        }
        Self::real_vector(grid, comps)
    }

    /// Complex scalar field from a closure of the point coordinates.
    pub fn from_fn_complex(grid: &Arc<FourierGrid>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|p| f(&grid.point(p))).collect();
        Self::complex(grid, vec![samples])
    }

    /// Build from Fourier-series coefficients. For `Real` kind the inverse
    /// transform's round-off imaginary part is discarded.
    pub fn from_spectral(
        grid: &Arc<FourierGrid>,
        kind: ValueKind,
        spectral: Vec<Vec<Complex64>>,
    ) -> Self {
        let physical = spectral
            .iter()
            .map(|s| {
                let mut buf = s.clone();
                grid.inverse(&mut buf);
                if kind == ValueKind::Real {
                    for v in buf.iter_mut() {
                        v.im = 0.0;
                    }
                }
                buf
            })
            .collect();
        let cache = OnceLock::new();
        let _ = cache.set(spectral);
        Self { grid: grid.clone(), kind, physical, spectral: cache }
    }

    fn from_parts(grid: &Arc<FourierGrid>, kind: ValueKind, mut physical: Vec<Vec<Complex64>>) -> Self {
        for c in &physical {
            assert_eq!(c.len(), grid.len(), "component length does not match grid");
        }
        if kind == ValueKind::Real {
            for c in physical.iter_mut() {
                for v in c.iter_mut() {
                    v.im = 0.0;
                }
            }
        }
        Self { grid: grid.clone(), kind, physical, spectral: OnceLock::new() }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn is_real(&self) -> bool {
        self.kind == ValueKind::Real
    }

    pub fn n_components(&self) -> usize {
        self.physical.len()
    }

    pub fn physical(&self) -> &[Vec<Complex64>] {
        &self.physical
    }

    pub fn component_samples(&self, i: usize) -> &[Complex64] {
        &self.physical[i]
    }

    /// Real parts of component `i`.
    pub fn real(&self, i: usize) -> Vec<f64> {
        self.physical[i].iter().map(|v| v.re).collect()
    }

    pub fn imag(&self, i: usize) -> Vec<f64> {
        self.physical[i].iter().map(|v| v.im).collect()
    }

    pub fn spectral(&self) -> &[Vec<Complex64>] {
        self.spectral.get_or_init(|| {
            self.physical
                .iter()
                .map(|c| {
                    let mut buf = c.clone();
                    self.grid.forward(&mut buf);
                    buf
                })
                .collect()
        })
    }

    pub fn component(&self, i: usize) -> Field {
        Self::from_parts(&self.grid, self.kind, vec![self.physical[i].clone()])
    }

    /// Stack scalar/vector fields on the same grid into one field.
    pub fn stack(parts: &[&Field]) -> Result<Field> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("empty stack".into()))?;
        let mut comps = Vec::new();
        let mut kind = ValueKind::Real;
        for p in parts {
            if !p.same_grid(first) {
                return Err(Error::GridMismatch);
            }
            if p.kind == ValueKind::Complex {
                kind = ValueKind::Complex;
            }
            comps.extend(p.physical.iter().cloned());
        }
        Ok(Self::from_parts(&first.grid, kind, comps))
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        if self.n_components() != other.n_components() {
            return Err(Error::ComponentMismatch {
                expected: self.n_components(),
                found: other.n_components(),
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.check_compatible(other)?;
        let phys = self
            .physical
            .iter()
            .zip(&other.physical)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        let kind = if self.is_real() && other.is_real() { ValueKind::Real } else { ValueKind::Complex };
        Ok(Self::from_parts(&self.grid, kind, phys))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    /// Multiply by a complex constant; the result is complex.
    pub fn scale_complex(&self, s: Complex64) -> Field {
        let phys = self.physical.iter().map(|c| c.iter().map(|&v| v * s).collect()).collect();
        Self::from_parts(&self.grid, ValueKind::Complex, phys)
    }

    /// Apply a pointwise map preserving the value kind.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        let phys = self.physical.iter().map(|c| c.iter().map(|&v| f(v)).collect()).collect();
        Self::from_parts(&self.grid, self.kind, phys)
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn as_complex(&self) -> Field {
        Self::from_parts(&self.grid, ValueKind::Complex, self.physical.clone())
    }

    /// Real part as a real field.
    pub fn re(&self) -> Field {
        Self::from_parts(&self.grid, ValueKind::Real, self.physical.clone())
    }

    /// Imaginary part as a real field.
    pub fn im(&self) -> Field {
        let phys = self
            .physical
            .iter()
            .map(|c| c.iter().map(|v| Complex64::new(v.im, 0.0)).collect())
            .collect();
        Self::from_parts(&self.grid, ValueKind::Real, phys)
    }

    /// `re + i im` from two real fields.
    pub fn from_re_im(re: &Field, im: &Field) -> Result<Field> {
        re.check_compatible(im)?;
        let phys = re
            .physical
            .iter()
            .zip(&im.physical)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| Complex64::new(x.re, y.re)).collect())
            .collect();
        Ok(Self::from_parts(&re.grid, ValueKind::Complex, phys))
    }

    /// Pointwise dot product over components (no conjugation).
    pub fn dot(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (a, b) in self.physical.iter().zip(&other.physical) {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        let kind = if self.is_real() && other.is_real() { ValueKind::Real } else { ValueKind::Complex };
        Ok(Self::from_parts(&self.grid, kind, vec![out]))
    }

    /// Pointwise product of every component with a scalar field.
    pub fn mul_scalar_field(&self, s: &Field) -> Result<Field> {
        if !self.same_grid(s) {
            return Err(Error::GridMismatch);
        }
        if s.n_components() != 1 {
            return Err(Error::ComponentMismatch { expected: 1, found: s.n_components() });
        }
        let sv = &s.physical[0];
        let phys = self
            .physical
            .iter()
            .map(|c| c.iter().zip(sv).map(|(x, y)| x * y).collect())
            .collect();
        let kind = if self.is_real() && s.is_real() { ValueKind::Real } else { ValueKind::Complex };
        Ok(Self::from_parts(&self.grid, kind, phys))
    }

    /// Pointwise squared modulus summed over components.
    pub fn abs_sq(&self) -> Field {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.physical {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v.norm_sqr();
            }
        }
        Self::real_scalar(&self.grid, out)
    }

    /// Discrete `L^2` norm `(sum |f|^2 dV)^(1/2)` over all components.
    pub fn norm_l2(&self) -> f64 {
        let dv = self.grid.cell_volume();
        let s: f64 = self.physical.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum();
        (s * dv).sqrt()
    }

    /// Largest pointwise modulus (Euclidean over components).
    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| self.physical.iter().map(|c| c[p].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Spatial mean of each component.
    pub fn mean(&self) -> Vec<Complex64> {
        let n = self.grid.len() as f64;
        self.physical.iter().map(|c| c.iter().sum::<Complex64>() / n).collect()
    }

    /// Integral of the real part of a scalar field.
    pub fn integral(&self) -> f64 {
        self.physical[0].iter().map(|v| v.re).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.physical.iter().flat_map(|c| c.iter()).all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// 2/3-rule truncation.
    pub fn dealiased(&self) -> Field {
        let spec = self
            .spectral()
            .iter()
            .map(|s| {
                let mut b = s.clone();
                self.grid.dealias(&mut b);
                b
            })
            .collect();
        Self::from_spectral(&self.grid, self.kind, spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2() -> Arc<FourierGrid> {
        FourierGrid::new(&[16, 8], &[3.0, 5.0]).unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_preserves_samples(vals in proptest::collection::vec(-10.0f64..10.0, 256)) {
            let g = grid2();
            let re = Field::real_vector(&g, vec![vals[..128].to_vec(), vals[128..].to_vec()]);
            let back = Field::from_spectral(&g, ValueKind::Real, re.spectral().to_vec());
            let err = back.sub(&re).unwrap().norm_l2();
            prop_assert!(err <= 1e-12 * re.norm_l2().max(1e-300));

            let cx: Vec<Complex64> = vals[..128].iter().zip(&vals[128..]).map(|(&a, &b)| Complex64::new(a, b)).collect();
            let c = Field::complex(&g, vec![cx]);
            let back = Field::from_spectral(&g, ValueKind::Complex, c.spectral().to_vec());
            prop_assert!(back.sub(&c).unwrap().norm_l2() <= 1e-12 * c.norm_l2().max(1e-300));
        }

        #[test]
        fn parseval(vals in proptest::collection::vec(-3.0f64..3.0, 128)) {
            let g = grid2();
            let f = Field::real_scalar(&g, vals);
            let spec: f64 = f.spectral()[0].iter().map(|c| c.norm_sqr()).sum();
            let phys = f.norm_l2();
            prop_assert!((phys - (spec * g.volume()).sqrt()).abs() <= 1e-12 * phys.max(1e-300));
        }
    }

    #[test]
    fn real_fields_have_hermitian_spectra() {
        let g = grid2();
        let f = Field::scalar_fn(&g, |x| (x[0] * 1.3).sin() * (x[1] - 0.2).cos().exp());
        let s = &f.spectral()[0];
        for m in 0..g.len() {
            let n = g.negated_mode(m);
            assert!((s[m] - s[n].conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn component_mismatch_is_reported() {
        let g = grid2();
        let a = Field::zeros(&g, 2, ValueKind::Real);
        let b = Field::zeros(&g, 1, ValueKind::Real);
        assert!(matches!(a.add(&b), Err(Error::ComponentMismatch { .. })));
    }
}
