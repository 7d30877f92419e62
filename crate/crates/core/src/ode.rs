//! The model system `x' = -x + x^2 + y^2`, `y' = y (x + y)`, with `x`
//! standing for the dispersive part and `y` for the vortical part, plus
//! the comparison equation `y' = y^2`.
//!
//! Integration uses the Dormand-Prince 5(4) pair with standard step
//! control. States are complex so that the complexified variant shares the
//! same code; real data stay real.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub t: f64,
    pub x: Complex64,
    pub y: Complex64,
}

impl OdeState {
    pub fn real(t: f64, x: f64, y: f64) -> Self {
        Self { t, x: Complex64::new(x, 0.0), y: Complex64::new(y, 0.0) }
    }

    pub fn size(&self) -> f64 {
        self.x.norm() + self.y.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeSystem {
    /// `x' = -x + x^2 + y^2`, `y' = y (x + y)`.
    Full,
    /// `y' = y^2` with `x` frozen.
    Comparison,
}

pub fn ode_rhs(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    (-x + x * x + y * y, y * (x + y))
}

fn rhs(system: OdeSystem, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    match system {
        OdeSystem::Full => ode_rhs(x, y),
        OdeSystem::Comparison => (Complex64::new(0.0, 0.0), y * y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeStop {
    ReachedEnd,
    BlowCap,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    /// Accepted states, starting with the initial one.
    pub states: Vec<OdeState>,
    pub stop: OdeStop,
}

impl OdeTrajectory {
    pub fn last(&self) -> &OdeState {
        self.states.last().expect("non-empty")
    }
}

pub const DEFAULT_BLOW_CAP: f64 = 1e6;

// Dormand-Prince tableau, autonomous form
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Attempt {
    next: OdeState,
    err: f64,
}

fn dopri_step(system: OdeSystem, s: &OdeState, h: f64, tol: f64) -> Attempt {
    let mut kx = [Complex64::new(0.0, 0.0); 7];
    let mut ky = [Complex64::new(0.0, 0.0); 7];
    for i in 0..7 {
        let mut x = s.x;
        let mut y = s.y;
        for j in 0..i {
            x += h * A[i][j] * kx[j];
            y += h * A[i][j] * ky[j];
        }
        let (dx, dy) = rhs(system, x, y);
        kx[i] = dx;
        ky[i] = dy;
    }
    let mut x5 = s.x;
    let mut y5 = s.y;
    let mut ex = Complex64::new(0.0, 0.0);
    let mut ey = Complex64::new(0.0, 0.0);
    for i in 0..7 {
        x5 += h * B5[i] * kx[i];
        y5 += h * B5[i] * ky[i];
        ex += h * (B5[i] - B4[i]) * kx[i];
        ey += h * (B5[i] - B4[i]) * ky[i];
    }
    let sx = tol * (1.0 + s.x.norm().max(x5.norm()));
    let sy = tol * (1.0 + s.y.norm().max(y5.norm()));
    let err = ((ex.norm() / sx).powi(2) + (ey.norm() / sy).powi(2)).sqrt() / std::f64::consts::SQRT_2;
    Attempt { next: OdeState { t: s.t + h, x: x5, y: y5 }, err }
}

/// Adaptive integration on `[s0.t, t_end]`, stopping early once
/// `|x| + |y| >= blow_cap`. The crossing step is refined by bisection so
/// that the last state sits just past the cap.
pub fn integrate_system(system: OdeSystem, s0: OdeState, t_end: f64, tol: f64, blow_cap: f64) -> Result<OdeTrajectory> {
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::InvalidArgument(format!("tolerance {tol:e} outside [1e-12, 1e-6]")));
    }
    let mut states = vec![s0];
    let mut s = s0;
    let mut h = (1e-3 * (t_end - s0.t)).min(1e-2).max(1e-8);
    loop {
        if s.t >= t_end {
            return Ok(OdeTrajectory { states, stop: OdeStop::ReachedEnd });
        }
        h = h.min(t_end - s.t);
        if h < 1e-14 * s.t.abs().max(1.0) {
            return Ok(OdeTrajectory { states, stop: OdeStop::StepUnderflow });
        }
        let at = dopri_step(system, &s, h, tol);
        let finite = at.err.is_finite() && at.next.x.norm().is_finite() && at.next.y.norm().is_finite();
        if !finite || at.err > 1.0 {
            let fac = if finite { (0.9 * at.err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            continue;
        }
        if at.next.size() >= blow_cap {
            // bisect the step until the crossing is located to relative precision
            if h > 1e-12 * at.next.t.abs().max(1.0) {
                h *= 0.5;
                continue;
            }
            states.push(at.next);
            return Ok(OdeTrajectory { states, stop: OdeStop::BlowCap });
        }
        s = at.next;
        states.push(s);
        let fac = if at.err == 0.0 { 5.0 } else { (0.9 * at.err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
}

/// Full system from real data.
pub fn integrate(x0: f64, y0: f64, t_end: f64, tol: f64) -> Result<OdeTrajectory> {
    integrate_system(OdeSystem::Full, OdeState::real(0.0, x0, y0), t_end, tol, DEFAULT_BLOW_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeLifespan {
    pub t_obs: f64,
    pub censored: bool,
    pub stop: OdeStop,
}

pub const LIFESPAN_TOL: f64 = 1e-10;

pub fn lifespan(system: OdeSystem, x0: Complex64, y0: Complex64, blow_cap: f64, t_max: f64) -> Result<OdeLifespan> {
    if !(blow_cap >= 10.0) {
        return Err(Error::InvalidArgument(format!("blow cap {blow_cap} below 10")));
    }
    let tr = integrate_system(system, OdeState { t: 0.0, x: x0, y: y0 }, t_max, LIFESPAN_TOL, blow_cap)?;
    let last = tr.last();
    Ok(OdeLifespan { t_obs: last.t.min(t_max), censored: tr.stop == OdeStop::ReachedEnd, stop: tr.stop })
}

/// Whether `|x| <= delta + 2 eps e^{-t}` and `|y| <= 2 delta` hold at every
/// accepted step on `[0, 1/(12 delta)]`, starting from `(eps, delta)`.
pub fn ansatz_holds(eps: f64, delta: f64, tol: f64) -> Result<bool> {
    let t_end = 1.0 / (12.0 * delta);
    let tr = integrate_system(OdeSystem::Full, OdeState::real(0.0, eps, delta), t_end, tol, DEFAULT_BLOW_CAP)?;
    Ok(tr.stop == OdeStop::ReachedEnd
        && tr
            .states
            .iter()
            .all(|s| s.x.norm() <= delta + 2.0 * eps * (-s.t).exp() && s.y.norm() <= 2.0 * delta))
}

/// Least-squares slope of `ln y` against `ln x` with its standard error.
pub fn log_log_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = if points.len() > 2 { (resid / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn rhs_values() {
        assert_eq!(ode_rhs(c(0.0), c(0.0)), (c(0.0), c(0.0)));
        assert_eq!(ode_rhs(c(1.0), c(0.0)), (c(0.0), c(0.0)));
        assert_eq!(ode_rhs(c(0.0), c(1.0)), (c(1.0), c(1.0)));
    }

    #[test]
    fn axis_is_invariant_and_small_x_decays() {
        let tr = integrate(0.01, 0.0, 20.0, 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| s.y == c(0.0)));
        assert!(tr.states.windows(2).all(|w| w[1].x.re < w[0].x.re));
        assert!(tr.last().x.re < 1e-9);
    }

    #[test]
    fn equilibrium_is_preserved() {
        let tr = integrate(0.0, 0.0, 5.0, 1e-10).unwrap();
        assert!(tr.states.iter().all(|s| s.x == c(0.0) && s.y == c(0.0)));
        let ls = lifespan(OdeSystem::Full, c(0.0), c(0.0), 1e6, 50.0).unwrap();
        assert!(ls.censored);
        assert_eq!(ls.t_obs, 50.0);
    }

    #[test]
    fn comparison_lifespan_is_inverse_datum() {
        let ls = lifespan(OdeSystem::Comparison, c(0.0), c(0.1), 1e6, 100.0).unwrap();
        assert_eq!(ls.stop, OdeStop::BlowCap);
        // exact crossing time 1/y0 - 1/cap
        assert!((ls.t_obs - (10.0 - 1e-6)).abs() < 1e-6, "{}", ls.t_obs);
    }

    #[test]
    fn accuracy_against_logistic_solution() {
        // on y = 0, x' = -x + x^2 has x(t) = x0 / (x0 + (1 - x0) e^t)
        let x0 = 0.3;
        let tr = integrate(x0, 0.0, 4.0, 1e-12).unwrap();
        let s = tr.last();
        let exact = x0 / (x0 + (1.0 - x0) * 4f64.exp());
        assert!((s.x.re - exact).abs() < 1e-11);
    }

    #[test]
    fn tolerance_range_is_enforced() {
        assert!(integrate(0.1, 0.1, 1.0, 1e-3).is_err());
        assert!(integrate(0.1, 0.1, 1.0, 1e-13).is_err());
    }

    #[test]
    fn complex_variant_matches_real_on_real_data() {
        let a = lifespan(OdeSystem::Full, c(0.05), c(0.1), 1e6, 200.0).unwrap();
        let b = lifespan(OdeSystem::Full, Complex64::new(0.05, 1e-30), c(0.1), 1e6, 200.0).unwrap();
        assert!((a.t_obs - b.t_obs).abs() < 1e-8);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 7.0 * (i as f64).powf(-1.5))).collect();
        let (s, e) = log_log_slope(&pts);
        assert!((s + 1.5).abs() < 1e-12 && e < 1e-12);
    }
}
