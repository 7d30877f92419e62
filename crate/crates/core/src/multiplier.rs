//! Linear Fourier multipliers.
//!
//! Conventions on the mean mode: `P` and `Q` map it to zero, `Uinv`
//! refuses inputs whose mean is not zero. Odd symbols (`Grad`, `Div`)
//! vanish on Nyquist modes so that real fields stay real.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, ValueKind};
use crate::grid::FourierGrid;

/// `H(r) = r sqrt(2 + r^2)` for `r = |xi|`.
#[inline]
pub fn h_symbol(r: f64) -> f64 {
    r * (2.0 + r * r).sqrt()
}

/// `U(r) = r / sqrt(2 + r^2)`.
#[inline]
pub fn u_symbol(r: f64) -> f64 {
    r / (2.0 + r * r).sqrt()
}

/// Group velocity `H'(r) = (2 + 2 r^2) / sqrt(2 + r^2)`.
#[inline]
pub fn h_prime(r: f64) -> f64 {
    (2.0 + 2.0 * r * r) / (2.0 + r * r).sqrt()
}

/// Matrix-valued symbol `xi -> M(xi)`, row-major `out x input`.
pub type SymbolFn = dyn Fn(&[f64]) -> Vec<Complex64> + Send + Sync;

#[derive(Clone)]
pub enum MultiplierSymbol {
    H,
    U,
    Uinv,
    /// Solenoidal projector.
    P,
    /// Potential projector `Delta^{-1} grad div`.
    Q,
    Grad,
    Div,
    Laplacian,
    /// The unitary group `exp(i t H)`.
    Semigroup(f64),
    Custom {
        outputs: usize,
        inputs: usize,
        /// Whether `M(-xi) = conj(M(xi))`, i.e. real fields map to real fields.
        real_preserving: bool,
        symbol: Arc<SymbolFn>,
    },
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::H => write!(f, "H"),
            Self::U => write!(f, "U"),
            Self::Uinv => write!(f, "Uinv"),
            Self::P => write!(f, "P"),
            Self::Q => write!(f, "Q"),
            Self::Grad => write!(f, "Grad"),
            Self::Div => write!(f, "Div"),
            Self::Laplacian => write!(f, "Laplacian"),
            Self::Semigroup(t) => write!(f, "Semigroup({t})"),
            Self::Custom { outputs, inputs, .. } => write!(f, "Custom({outputs}x{inputs})"),
        }
    }
}

/// Relative size of the mean mode above which `Uinv` refuses to act.
const MEAN_MODE_TOL: f64 = 1e-12;

pub fn apply_multiplier(f: &Field, m: &MultiplierSymbol) -> Result<Field> {
    let grid = f.grid().clone();
    let spec = f.spectral();
    let d = grid.dim();
    let nc = f.n_components();
    let out_kind = |preserving: bool| {
        if preserving && f.is_real() {
            ValueKind::Real
        } else {
            ValueKind::Complex
        }
    };

    match m {
        MultiplierSymbol::H | MultiplierSymbol::U | MultiplierSymbol::Laplacian => {
            let sym: fn(f64) -> f64 = match m {
                MultiplierSymbol::H => |s| h_symbol(s.sqrt()),
                MultiplierSymbol::U => |s| u_symbol(s.sqrt()),
                _ => |s| -s,
            };
            let out = spec
                .iter()
                .map(|c| c.iter().enumerate().map(|(k, v)| v * sym(grid.xi_sq(k))).collect())
                .collect();
            Ok(Field::from_spectral(&grid, out_kind(true), out))
        }
        MultiplierSymbol::Uinv => {
            check_mean_free(spec)?;
            let out = spec
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .map(|(k, v)| {
                            let s = grid.xi_sq(k);
                            if s == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                v * ((2.0 + s) / s).sqrt()
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(Field::from_spectral(&grid, out_kind(true), out))
        }
        MultiplierSymbol::Semigroup(t) => {
            let out = spec
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .map(|(k, v)| v * Complex64::from_polar(1.0, t * h_symbol(grid.xi_sq(k).sqrt())))
                        .collect()
                })
                .collect();
            Ok(Field::from_spectral(&grid, ValueKind::Complex, out))
        }
        MultiplierSymbol::P | MultiplierSymbol::Q => {
            require_components(nc, d)?;
            let potential = matches!(m, MultiplierSymbol::Q);
            let out = project(&grid, spec, potential);
            Ok(Field::from_spectral(&grid, out_kind(true), out))
        }
        MultiplierSymbol::Grad => {
            require_components(nc, 1)?;
            let out = grad_spectral(&grid, &spec[0]);
            Ok(Field::from_spectral(&grid, out_kind(true), out))
        }
        MultiplierSymbol::Div => {
            require_components(nc, d)?;
            let out = div_spectral(&grid, spec);
            Ok(Field::from_spectral(&grid, out_kind(true), vec![out]))
        }
        MultiplierSymbol::Custom { outputs, inputs, real_preserving, symbol } => {
            require_components(nc, *inputs)?;
            let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; *outputs];
            let mut xi = vec![0.0; d];
            for k in 0..grid.len() {
                for (a, x) in xi.iter_mut().enumerate() {
                    *x = grid.xi(a, k);
                }
                let mat = symbol(&xi);
                debug_assert_eq!(mat.len(), outputs * inputs);
                for (o, row) in out.iter_mut().enumerate() {
                    row[k] = (0..*inputs).map(|i| mat[o * inputs + i] * spec[i][k]).sum();
                }
            }
            Ok(Field::from_spectral(&grid, out_kind(*real_preserving), out))
        }
    }
}

fn require_components(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::ComponentMismatch { expected, found });
    }
    Ok(())
}

fn check_mean_free(spec: &[Vec<Complex64>]) -> Result<()> {
    for c in spec {
        let scale = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mean = c[0].norm();
        if mean > MEAN_MODE_TOL * scale.max(1.0) {
            return Err(Error::NonZeroMeanMode(mean));
        }
    }
    Ok(())
}

/// Potential (`potential = true`) or solenoidal projection of a spectral vector field.
pub(crate) fn project(grid: &FourierGrid, spec: &[Vec<Complex64>], potential: bool) -> Vec<Vec<Complex64>> {
    let d = grid.dim();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; d];
    for k in 0..grid.len() {
        let s = grid.xi_sq(k);
        if s == 0.0 {
            continue;
        }
        let mut xdot = Complex64::new(0.0, 0.0);
        for a in 0..d {
            xdot += spec[a][k] * grid.xi(a, k);
        }
        for a in 0..d {
            let q = xdot * (grid.xi(a, k) / s);
            out[a][k] = if potential { q } else { spec[a][k] - q };
        }
    }
    out
}

pub(crate) fn grad_spectral(grid: &FourierGrid, s: &[Complex64]) -> Vec<Vec<Complex64>> {
    (0..grid.dim())
        .map(|a| {
            s.iter()
                .enumerate()
                .map(|(k, v)| {
                    if grid.is_nyquist(k) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        v * Complex64::new(0.0, grid.xi(a, k))
                    }
                })
                .collect()
        })
        .collect()
}

pub(crate) fn div_spectral(grid: &FourierGrid, spec: &[Vec<Complex64>]) -> Vec<Complex64> {
    (0..grid.len())
        .map(|k| {
            if grid.is_nyquist(k) {
                return Complex64::new(0.0, 0.0);
            }
            (0..grid.dim()).map(|a| spec[a][k] * Complex64::new(0.0, grid.xi(a, k))).sum()
        })
        .collect()
}

/// Split a vector field into `(P u, Q u)`.
pub fn helmholtz_split(u: &Field) -> Result<(Field, Field)> {
    require_components(u.n_components(), u.grid().dim())?;
    let sol = apply_multiplier(u, &MultiplierSymbol::P)?;
    let pot = apply_multiplier(u, &MultiplierSymbol::Q)?;
    Ok((sol, pot))
}

/// `exp(i t H) f`.
pub fn semigroup(f: &Field, t: f64) -> Field {
    apply_multiplier(f, &MultiplierSymbol::Semigroup(t)).expect("semigroup acts on any field")
}

pub fn grad(f: &Field) -> Result<Field> {
    apply_multiplier(f, &MultiplierSymbol::Grad)
}

pub fn div(f: &Field) -> Result<Field> {
    apply_multiplier(f, &MultiplierSymbol::Div)
}

pub fn laplacian(f: &Field) -> Field {
    apply_multiplier(f, &MultiplierSymbol::Laplacian).expect("laplacian acts on any field")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().norm_l2() / b.norm_l2().max(1e-300)
    }

    fn random_vector(grid: &Arc<FourierGrid>, seed: u64) -> Field {
        // band-limited smooth pseudo-random vector field
        let d = grid.dim();
        Field::from_fn(grid, d, |x| {
            (0..d)
                .map(|a| {
                    let s = seed as f64 + a as f64;
                    (0..d)
                        .map(|b| {
                            let k = 2.0 * PI * x[b] / grid.lengths()[b];
                            (k * (1.0 + a as f64) + s).sin() + 0.5 * (2.0 * k - 0.3 * s).cos()
                        })
                        .sum::<f64>()
                        + 0.3
                })
                .collect()
        })
    }

    #[test]
    fn h_of_zero_field_is_zero() {
        let g = FourierGrid::uniform(2, 16, 2.0 * PI).unwrap();
        let z = Field::zeros(&g, 1, ValueKind::Real);
        assert_eq!(apply_multiplier(&z, &MultiplierSymbol::H).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn u_scales_sqrt2_mode_by_inverse_sqrt2() {
        // xi0 = (1, 1), |xi0| = sqrt 2
        let g = FourierGrid::uniform(2, 16, 2.0 * PI).unwrap();
        let f = Field::from_fn_complex(&g, |x| Complex64::from_polar(1.0, x[0] + x[1]));
        let out = apply_multiplier(&f, &MultiplierSymbol::U).unwrap();
        let expect = f.scale(1.0 / 2f64.sqrt());
        assert!(rel(&out, &expect) < 1e-13);
    }

    #[test]
    fn q_fixes_gradients_and_p_kills_them() {
        let g = FourierGrid::new(&[16, 32], &[2.0 * PI, 3.0]).unwrap();
        let f = Field::scalar_fn(&g, |x| (x[0]).sin() * (2.0 * PI * x[1] / 3.0).cos());
        let gf = grad(&f).unwrap();
        let (p, q) = helmholtz_split(&gf).unwrap();
        assert!(rel(&q, &gf) < 1e-13);
        assert!(p.norm_l2() < 1e-13 * gf.norm_l2());
    }

    #[test]
    fn perpendicular_gradient_is_solenoidal() {
        let g = FourierGrid::uniform(2, 32, 2.0 * PI).unwrap();
        let f = Field::scalar_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + (3.0 * x[0]).cos());
        let gf = grad(&f).unwrap();
        let perp = Field::stack(&[&gf.component(1).scale(-1.0), &gf.component(0)]).unwrap();
        let (p, q) = helmholtz_split(&perp).unwrap();
        assert!(rel(&p, &perp) < 1e-13);
        assert!(q.norm_l2() < 1e-13 * perp.norm_l2());
        assert!(div(&p).unwrap().norm_l2() < 1e-12 * perp.norm_l2());
    }

    #[test]
    fn projector_algebra() {
        let g = FourierGrid::new(&[16, 16, 8], &[2.0, 3.0, 4.0]).unwrap();
        let u = random_vector(&g, 7);
        let scale = u.norm_l2();
        let (p, q) = helmholtz_split(&u).unwrap();
        let pp = apply_multiplier(&p, &MultiplierSymbol::P).unwrap();
        let qq = apply_multiplier(&q, &MultiplierSymbol::Q).unwrap();
        assert!(pp.sub(&p).unwrap().norm_l2() <= 1e-12 * scale);
        assert!(qq.sub(&q).unwrap().norm_l2() <= 1e-12 * scale);
        assert!(apply_multiplier(&p, &MultiplierSymbol::Q).unwrap().norm_l2() <= 1e-12 * scale);
        assert!(apply_multiplier(&q, &MultiplierSymbol::P).unwrap().norm_l2() <= 1e-12 * scale);
        // completeness on the mean-free part
        let mean = u.mean();
        let u0 = u.map(|v| v); // copy
        let mf: Vec<Vec<f64>> = (0..3).map(|a| u0.real(a).iter().map(|v| v - mean[a].re).collect()).collect();
        let mf = Field::real_vector(&g, mf);
        let sum = p.add(&q).unwrap();
        assert!(sum.sub(&mf).unwrap().norm_l2() <= 1e-12 * scale);
        // curl of Qu vanishes spectrally
        let qs = q.spectral();
        for k in 0..g.len() {
            for a in 0..3 {
                for b in 0..3 {
                    let c = qs[b][k] * g.xi(a, k) - qs[a][k] * g.xi(b, k);
                    assert!(c.norm() < 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn uinv_inverts_u_on_mean_free_fields_and_rejects_means() {
        let g = FourierGrid::uniform(1, 64, 10.0).unwrap();
        let f = Field::scalar_fn(&g, |x| (2.0 * PI * x[0] / 10.0).sin() + (6.0 * PI * x[0] / 10.0).cos());
        let uf = apply_multiplier(&f, &MultiplierSymbol::U).unwrap();
        let back = apply_multiplier(&uf, &MultiplierSymbol::Uinv).unwrap();
        assert!(rel(&back, &f) < 1e-12);
        let shifted = f.map(|v| v + 0.1);
        assert!(matches!(
            apply_multiplier(&shifted, &MultiplierSymbol::Uinv),
            Err(Error::NonZeroMeanMode(_))
        ));
    }

    #[test]
    fn semigroup_phase_unitarity_and_group_law() {
        let g = FourierGrid::uniform(1, 64, 2.0 * PI).unwrap();
        // |xi0| = 1: phase e^{i sqrt 3}
        let f = Field::from_fn_complex(&g, |x| Complex64::from_polar(1.0, x[0]));
        let out = semigroup(&f, 1.0);
        let expect = f.scale_complex(Complex64::from_polar(1.0, 3f64.sqrt()));
        assert!(rel(&out, &expect) < 1e-13);

        let r = Field::scalar_fn(&g, |x| (-(x[0] - PI).powi(2)).exp());
        assert!(rel(&semigroup(&r, 0.0), &r.as_complex()) < 1e-15);
        for t in [0.3, 2.0, 17.5] {
            let e = semigroup(&r, t);
            assert!((e.norm_l2() - r.norm_l2()).abs() <= 1e-12 * r.norm_l2());
        }
        let a = semigroup(&semigroup(&r, 0.7), 1.9);
        let b = semigroup(&r, 2.6);
        assert!(rel(&a, &b) < 1e-12);
    }

    #[test]
    fn component_checks() {
        let g = FourierGrid::uniform(2, 8, 1.0).unwrap();
        let s = Field::zeros(&g, 1, ValueKind::Real);
        assert!(matches!(
            apply_multiplier(&s, &MultiplierSymbol::P),
            Err(Error::ComponentMismatch { .. })
        ));
        let v = Field::zeros(&g, 2, ValueKind::Real);
        assert!(grad(&v).is_err());
        assert!(div(&s).is_err());
    }

    #[test]
    fn custom_symbol_matches_builtin() {
        let g = FourierGrid::uniform(2, 16, 5.0).unwrap();
        let f = Field::scalar_fn(&g, |x| (x[0] * 2.0 * PI / 5.0).sin() * (x[1] * 4.0 * PI / 5.0).cos());
        let lap = MultiplierSymbol::Custom {
            outputs: 1,
            inputs: 1,
            real_preserving: true,
            symbol: Arc::new(|xi: &[f64]| vec![Complex64::new(-(xi[0] * xi[0] + xi[1] * xi[1]), 0.0)]),
        };
        let a = apply_multiplier(&f, &lap).unwrap();
        assert!(a.is_real());
        assert!(rel(&a, &laplacian(&f)) < 1e-14);
    }
}
