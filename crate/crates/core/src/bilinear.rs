//! The bilinear pseudo-product with symbol
//! `strength / (2 (2 + |eta|^2 + |zeta|^2))`.
//!
//! The symbol is not separable, so it is evaluated through the heat-kernel
//! representation
//!
//! ```text
//! B[f, g] = (strength / 2) * int_0^inf exp(-2 s) (e^{s Delta} f)(e^{s Delta} g) ds
//! ```
//!
//! With `s = exp(t)` the integrand decays exponentially as `t -> -inf` and
//! double-exponentially as `t -> +inf`, so the trapezoidal rule in `t`
//! converges geometrically and uniformly in the decay rate
//! `2 + |eta|^2 + |zeta|^2`. Node sets are nested: halving the step reuses
//! every previous node.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, ValueKind};

/// Successive-refinement agreement required for acceptance.
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Hard cap on the number of quadrature nodes.
pub const MAX_NODES: usize = 256;

const INITIAL_STEP: f64 = 0.8;
/// Relative mass dropped on the `t -> -inf` side.
const TAIL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureInfo {
    pub nodes: usize,
    pub step: f64,
    pub last_change: f64,
}

/// `B[f, g]` for scalar or vector arguments (vectors are contracted
/// component-wise). The result is 2/3-dealiased.
pub fn bilinear_b(f: &Field, g: &Field, strength: f64) -> Result<Field> {
    bilinear_b_with_info(f, g, strength).map(|(b, _)| b)
}

pub fn bilinear_b_with_info(f: &Field, g: &Field, strength: f64) -> Result<(Field, QuadratureInfo)> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    if f.n_components() != g.n_components() {
        return Err(Error::ComponentMismatch { expected: f.n_components(), found: g.n_components() });
    }
    let grid = f.grid().clone();
    let kind = if f.is_real() && g.is_real() { ValueKind::Real } else { ValueKind::Complex };
    let n = grid.len();
    if strength == 0.0 {
        return Ok((
            Field::zeros(&grid, 1, kind),
            QuadratureInfo { nodes: 0, step: 0.0, last_change: 0.0 },
        ));
    }

    let fs = f.spectral();
    let gs = g.spectral();
    let same = std::ptr::eq(f, g);

    let xi_sq_max = grid.xi_sq_all().iter().cloned().fold(0.0, f64::max);
    let lambda_max = 2.0 + 2.0 * xi_sq_max;
    let t_lo = (TAIL_TOL / lambda_max).ln();
    // exp(-2 e^t) < 1e-16 beyond this point
    let t_hi = 18f64.ln();
    let base_intervals = ((t_hi - t_lo) / INITIAL_STEP).ceil() as usize;

    let mut heat_f = vec![Complex64::new(0.0, 0.0); n];
    let mut heat_g = vec![Complex64::new(0.0, 0.0); n];
    // sum over evaluated nodes of weight(t) * product(t), without the step factor
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut eval_node = |t: f64, acc: &mut [Complex64]| {
        let s = t.exp();
        let weight = s * (-2.0 * s).exp();
        if weight == 0.0 {
            return;
        }
        for c in 0..fs.len() {
            for k in 0..n {
                heat_f[k] = fs[c][k] * (-s * grid.xi_sq(k)).exp();
            }
            grid.inverse(&mut heat_f);
            if !same {
                for k in 0..n {
                    heat_g[k] = gs[c][k] * (-s * grid.xi_sq(k)).exp();
                }
                grid.inverse(&mut heat_g);
            }
            let other = if same { &heat_f } else { &heat_g };
            for k in 0..n {
                acc[k] += weight * heat_f[k] * other[k];
            }
        }
    };

    let mut step = INITIAL_STEP;
    let mut nodes = base_intervals + 1;
    for j in 0..=base_intervals {
        eval_node(t_lo + j as f64 * step, &mut acc);
    }
    let mut prev: Vec<Complex64> = acc.iter().map(|v| v * step).collect();
    let mut last_change = f64::INFINITY;
    loop {
        let intervals = ((t_hi - t_lo) / step).ceil() as usize;
        if nodes + intervals > MAX_NODES {
            return Err(Error::QuadratureNonConvergence { change: last_change, nodes });
        }
        // midpoints of the current level
        for j in 0..intervals {
            eval_node(t_lo + (j as f64 + 0.5) * step, &mut acc);
        }
        nodes += intervals;
        step *= 0.5;
        let cur: Vec<Complex64> = acc.iter().map(|v| v * step).collect();
        let diff: f64 = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = cur.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        last_change = if size > 0.0 { diff / size } else { 0.0 };
        prev = cur;
        if last_change <= QUADRATURE_TOL {
            break;
        }
    }

    let half = 0.5 * strength;
    for v in prev.iter_mut() {
        *v *= half;
        if kind == ValueKind::Real {
            v.im = 0.0;
        }
    }
    grid.forward(&mut prev);
    grid.dealias(&mut prev);
    let out = Field::from_spectral(&grid, kind, vec![prev]);
    Ok((out, QuadratureInfo { nodes, step, last_change }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FourierGrid;
    use crate::multiplier::laplacian;
    use std::f64::consts::PI;

    /// Direct O(N^2) evaluation of the aliased, dealiased pseudo-product.
    fn brute_force(f: &Field, g: &Field, strength: f64) -> Field {
        let grid = f.grid().clone();
        let n = grid.dims()[0];
        let (fs, gs) = (&f.spectral()[0], &g.spectral()[0]);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..n {
            for b in 0..n {
                let sym = strength / (2.0 * (2.0 + grid.xi_sq(a) + grid.xi_sq(b)));
                out[(a + b) % n] += sym * fs[a] * gs[b];
            }
        }
        grid.dealias(&mut out);
        Field::from_spectral(&grid, ValueKind::Real, vec![out])
    }

    fn sample(grid: &std::sync::Arc<FourierGrid>, shift: f64) -> Field {
        let l = grid.lengths()[0];
        Field::scalar_fn(grid, |x| {
            let y = 2.0 * PI * x[0] / l;
            (y + shift).sin() + 0.5 * (2.0 * y - shift).cos() + 0.25 * (3.0 * y).sin() + 0.1
        })
    }

    #[test]
    fn zero_strength_gives_zero() {
        let g = FourierGrid::uniform(1, 16, 2.0 * PI).unwrap();
        let f = sample(&g, 0.2);
        assert_eq!(bilinear_b(&f, &f, 0.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn matches_double_sum_small_grids() {
        for &len in &[2.0 * PI, 16.0 * PI] {
            let g = FourierGrid::uniform(1, 16, len).unwrap();
            let f = sample(&g, 0.3);
            let h = sample(&g, 1.1);
            let (q, info) = bilinear_b_with_info(&f, &h, -0.7).unwrap();
            let exact = brute_force(&f, &h, -0.7);
            let err = q.sub(&exact).unwrap().norm_l2() / exact.norm_l2();
            assert!(err <= 1e-8, "L = {len}: rel err {err:e}, {info:?}");
            assert!(info.nodes <= MAX_NODES);
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let g = FourierGrid::uniform(2, 16, 8.0).unwrap();
        let f = Field::from_fn(&g, 2, |x| vec![(x[0]).sin(), (x[1] * 0.7).cos()]);
        let h = Field::from_fn(&g, 2, |x| vec![(x[1] * 1.5).cos() * 0.3, (x[0] * 0.7 + 1.0).sin()]);
        let a = bilinear_b(&f, &h, 0.5).unwrap();
        let b = bilinear_b(&h, &f, 0.5).unwrap();
        assert!(a.sub(&b).unwrap().norm_l2() <= 1e-8 * a.norm_l2());
    }

    #[test]
    fn cancellation_identity() {
        // 2 B[f, Lap g] + 2 B[(Lap - 2) f, g] = -strength * f g
        let g = FourierGrid::uniform(1, 64, 8.0 * PI).unwrap();
        let f = Field::scalar_fn(&g, |x| (-(x[0] - 4.0 * PI).powi(2) / 4.0).exp());
        let h = Field::scalar_fn(&g, |x| (x[0] / 4.0).sin() * (-(x[0] - 12.0).powi(2) / 8.0).exp());
        let strength = -0.5;
        let lhs1 = bilinear_b(&f, &laplacian(&h), strength).unwrap().scale(2.0);
        let lf = laplacian(&f).sub(&f.scale(2.0)).unwrap();
        let lhs2 = bilinear_b(&lf, &h, strength).unwrap().scale(2.0);
        let lhs = lhs1.add(&lhs2).unwrap();
        let rhs = f.dot(&h).unwrap().dealiased().scale(-strength);
        let err = lhs.sub(&rhs).unwrap().max_abs();
        assert!(err <= 1e-8 * rhs.max_abs(), "err {err:e}");
    }
}
