//! Seeded, band-limited initial data.
//!
//! Every random draw comes from a ChaCha stream keyed by the seed and a
//! per-field stream id, visiting modes in flat FFT order, so a given seed
//! yields bit-identical data on every platform.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use korteweg_core::diagnostics::{norm, NormSpec};
use korteweg_core::multiplier::{apply_multiplier, MultiplierSymbol};
use korteweg_core::{EKState, Error, Field, FourierGrid, Result, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Random phases under a smooth band-limited envelope.
    Random,
    /// Centred Gaussian bumps, truncated to the band.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialDataSpec {
    pub shape: Shape,
    /// Size of the irrotational part: `sup |rho - 1|` and `sup |grad chi|`.
    pub epsilon: f64,
    /// Size of the solenoidal part, measured by `transport_norm`.
    pub delta: f64,
    /// Spectral cutoff `xi_c`.
    pub band_limit: f64,
    /// Width of the Gaussian bumps.
    pub width: f64,
    pub seed: u64,
    pub transport_norm: NormSpec,
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Random,
            epsilon: 0.05,
            delta: 0.0,
            band_limit: 1.0,
            width: 2.0,
            seed: 0,
            transport_norm: NormSpec { k: 1, p: 4.0, homogeneous: false },
        }
    }
}

const STREAM_DENSITY: u64 = 1;
const STREAM_POTENTIAL: u64 = 2;
const STREAM_SOLENOIDAL: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn envelope(xi: f64, cut: f64) -> f64 {
    if xi == 0.0 || xi > cut {
        0.0
    } else {
        let s = xi / cut;
        (1.0 - s * s).powi(2)
    }
}

/// Real, mean-free random field with cutoff `cut`.
fn random_real(grid: &Arc<FourierGrid>, cut: f64, rng: &mut ChaCha20Rng) -> Vec<Complex64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    for m in 0..grid.len() {
        let n = grid.negated_mode(m);
        // draw for every mode so the stream position does not depend on the cutoff
        let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let amp: f64 = 0.5 + rng.random::<f64>();
        if m >= n || grid.is_nyquist(m) {
            continue;
        }
        let e = envelope(grid.xi_sq(m).sqrt(), cut);
        if e == 0.0 {
            continue;
        }
        let c = Complex64::from_polar(amp * e, phase);
        spec[m] = c;
        spec[n] = c.conj();
    }
    spec
}

/// Centred Gaussian of width `w`, truncated to the band, mean removed.
fn gaussian(grid: &Arc<FourierGrid>, cut: f64, w: f64) -> Vec<Complex64> {
    let c = grid.center();
    let f = Field::scalar_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
    });
    let mut spec = f.spectral()[0].clone();
    for (m, v) in spec.iter_mut().enumerate() {
        let xi = grid.xi_sq(m).sqrt();
        if m == 0 || xi > cut || grid.is_nyquist(m) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    spec
}

fn scalar(grid: &Arc<FourierGrid>, spec: Vec<Complex64>) -> Field {
    Field::from_spectral(grid, ValueKind::Real, vec![spec])
}

fn check(spec: &InitialDataSpec, grid: &Arc<FourierGrid>) -> Result<()> {
    if !(spec.epsilon >= 0.0 && spec.delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("amplitudes must be non-negative: eps = {}, delta = {}", spec.epsilon, spec.delta)));
    }
    if spec.delta > 0.0 && grid.dim() == 1 {
        return Err(Error::InvalidArgument("no solenoidal fields exist in one dimension".into()));
    }
    let cut = grid.xi_max_dealiased();
    if !(spec.band_limit > 0.0 && spec.band_limit <= cut) {
        return Err(Error::InvalidArgument(format!("band limit {} outside (0, {cut}]", spec.band_limit)));
    }
    Ok(())
}

/// `rho = 1 + eps b`, `u = eps grad chi + delta-scaled P v`.
pub fn generate_initial_data(spec: &InitialDataSpec, grid: &Arc<FourierGrid>) -> Result<EKState> {
    check(spec, grid)?;
    let d = grid.dim();
    let cut = spec.band_limit;
    let (b, chi) = match spec.shape {
        Shape::Random => (
            scalar(grid, random_real(grid, cut, &mut rng(spec.seed, STREAM_DENSITY))),
            scalar(grid, random_real(grid, cut, &mut rng(spec.seed, STREAM_POTENTIAL))),
        ),
        Shape::Gaussian => {
            let g = gaussian(grid, cut, spec.width);
            // offset phase so that rho and u are not in phase
            let shifted: Vec<Complex64> = g
                .iter()
                .enumerate()
                .map(|(m, v)| v * Complex64::from_polar(1.0, grid.xi(0, m) * 0.5 * spec.width))
                .collect();
            (scalar(grid, g), scalar(grid, shifted))
        }
    };
    let bmax = b.max_abs();
    let rho = if bmax > 0.0 {
        Field::real_scalar(grid, b.real(0).iter().map(|v| 1.0 + spec.epsilon * v / bmax).collect())
    } else {
        Field::constant(grid, 1.0)
    };
    let gchi = apply_multiplier(&chi, &MultiplierSymbol::Grad)?;
    let gmax = gchi.max_abs();
    let mut u = if gmax > 0.0 { gchi.scale(spec.epsilon / gmax) } else { Field::zeros(grid, d, ValueKind::Real) };
    if spec.delta > 0.0 {
        let mut r = rng(spec.seed, STREAM_SOLENOIDAL);
        let comps: Vec<Vec<Complex64>> = (0..d).map(|_| random_real(grid, cut, &mut r)).collect();
        let v = Field::from_spectral(grid, ValueKind::Real, comps);
        let pv = apply_multiplier(&v, &MultiplierSymbol::P)?;
        let size = norm(&pv, &spec.transport_norm)?;
        if !(size > 0.0) {
            return Err(Error::InvalidArgument("solenoidal draw vanished inside the band".into()));
        }
        u = u.add(&pv.scale(spec.delta / size))?;
    }
    EKState::new(rho, u, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> Arc<FourierGrid> {
        FourierGrid::uniform(2, 32, 8.0 * PI).unwrap()
    }

    #[test]
    fn irrotational_when_delta_vanishes() {
        let g = grid2();
        let s = generate_initial_data(&InitialDataSpec::default(), &g).unwrap();
        let pu = apply_multiplier(&s.u, &MultiplierSymbol::P).unwrap();
        assert!(pu.norm_l2() <= 1e-12);
        assert!((s.rho.max_abs() - 1.0).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn solenoidal_norm_is_exact() {
        let g = grid2();
        let spec = InitialDataSpec { delta: 0.03, ..Default::default() };
        let s = generate_initial_data(&spec, &g).unwrap();
        let pu = apply_multiplier(&s.u, &MultiplierSymbol::P).unwrap();
        let got = norm(&pu, &spec.transport_norm).unwrap();
        assert!((got - 0.03).abs() <= 1e-10);
    }

    #[test]
    fn deterministic_in_seed() {
        let g = grid2();
        let spec = InitialDataSpec { delta: 0.01, seed: 7, ..Default::default() };
        let a = generate_initial_data(&spec, &g).unwrap();
        let b = generate_initial_data(&spec, &g).unwrap();
        assert_eq!(a.rho.real(0), b.rho.real(0));
        assert_eq!(a.u.real(1), b.u.real(1));
        let c = generate_initial_data(&InitialDataSpec { seed: 8, ..spec }, &g).unwrap();
        assert_ne!(a.rho.real(0), c.rho.real(0));
    }

    #[test]
    fn solenoidal_request_rejected_in_one_dimension() {
        let g = FourierGrid::uniform(1, 64, 20.0).unwrap();
        let spec = InitialDataSpec { delta: 0.01, ..Default::default() };
        assert!(generate_initial_data(&spec, &g).is_err());
    }

    #[test]
    fn band_limit_must_fit_the_grid() {
        let g = FourierGrid::uniform(1, 64, 2.0 * PI).unwrap();
        let spec = InitialDataSpec { band_limit: 30.0, ..Default::default() };
        assert!(generate_initial_data(&spec, &g).is_err());
    }
}
