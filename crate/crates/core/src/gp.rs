//! Gross-Pitaevskii equation `i psi_t + Lap psi = g(|psi|^2) psi / 2`,
//! the Madelung transforms linking it to the quantum Euler-Korteweg
//! system, and the vacuum-formation construction by time reversal.
//!
//! With this normalisation the fluid velocity is
//! `u = 2 Im(conj(psi) grad psi) / |psi|^2 = 2 grad(arg psi)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::FourierGrid;
use crate::laws::ConstitutiveLaws;
use crate::model::EKState;

pub const VACUUM_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct WaveFunction {
    pub psi: Field,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(psi: Field, time: f64) -> Result<Self> {
        if psi.n_components() != 1 {
            return Err(Error::ComponentMismatch { expected: 1, found: psi.n_components() });
        }
        Ok(Self { psi: psi.as_complex(), time })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.psi.grid()
    }

    /// `int (|psi|^2 - 1)`.
    pub fn renormalized_mass(&self) -> f64 {
        self.psi.abs_sq().real(0).iter().map(|r| r - 1.0).sum::<f64>() * self.grid().cell_volume()
    }

    pub fn min_density(&self) -> f64 {
        self.psi.abs_sq().real(0).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn conj(&self) -> Self {
        Self { psi: self.psi.conj(), time: self.time }
    }
}

/// Split-step propagator reusing its buffers.
pub struct GpStepper {
    grid: Arc<FourierGrid>,
    laws: ConstitutiveLaws,
    dt: f64,
    kinetic: Vec<Complex64>,
}

impl GpStepper {
    pub fn new(grid: &Arc<FourierGrid>, laws: &ConstitutiveLaws, dt: f64) -> Self {
        let kinetic = grid.xi_sq_all().iter().map(|&s| Complex64::from_polar(1.0, -dt * s)).collect();
        Self { grid: grid.clone(), laws: laws.clone(), dt, kinetic }
    }

    fn phase(&self, psi: &mut [Complex64], tau: f64) {
        for v in psi.iter_mut() {
            let g = self.laws.g(v.norm_sqr());
            *v *= Complex64::from_polar(1.0, -g * tau / 2.0);
        }
    }

    /// One Strang step on physical samples.
    pub fn advance(&self, psi: &mut [Complex64]) -> Result<()> {
        self.phase(psi, 0.5 * self.dt);
        self.grid.forward(psi);
        for (v, k) in psi.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.grid.inverse(psi);
        self.phase(psi, 0.5 * self.dt);
        if psi.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("in GP step".into()));
        }
        Ok(())
    }
}

pub fn gp_step(psi: &WaveFunction, dt: f64, laws: &ConstitutiveLaws) -> Result<WaveFunction> {
    let stepper = GpStepper::new(psi.grid(), laws, dt);
    let mut buf = psi.psi.component_samples(0).to_vec();
    stepper.advance(&mut buf)?;
    Ok(WaveFunction { psi: Field::complex(psi.grid(), vec![buf]), time: psi.time + dt })
}

/// Evolve to `t_end` with steps of size `dt` (the last step is shortened to land on `t_end`).
pub fn gp_evolve(psi: &WaveFunction, dt: f64, t_end: f64, laws: &ConstitutiveLaws) -> Result<WaveFunction> {
    gp_evolve_with(psi, dt, t_end, laws, |_, _| Ok(()))
}

/// As [`gp_evolve`], calling `observe(t, samples)` after every step.
pub fn gp_evolve_with(
    psi: &WaveFunction,
    dt: f64,
    t_end: f64,
    laws: &ConstitutiveLaws,
    mut observe: impl FnMut(f64, &[Complex64]) -> Result<()>,
) -> Result<WaveFunction> {
    let span = t_end - psi.time;
    if dt == 0.0 || span == 0.0 {
        return Ok(psi.clone());
    }
    let dt = dt.abs() * span.signum();
    let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
    let main = GpStepper::new(psi.grid(), laws, dt);
    let mut buf = psi.psi.component_samples(0).to_vec();
    let mut t = psi.time;
    for i in 1..=n {
        if i == n {
            let last = t_end - t;
            if (last - dt).abs() > 1e-15 * dt.abs() {
                GpStepper::new(psi.grid(), laws, last).advance(&mut buf)?;
            } else {
                main.advance(&mut buf)?;
            }
            t = t_end;
        } else {
            main.advance(&mut buf)?;
            t = psi.time + i as f64 * dt;
        }
        observe(t, &buf)?;
    }
    Ok(WaveFunction { psi: Field::complex(psi.grid(), vec![buf]), time: t })
}

/// `psi = sqrt(rho) exp(i phase)`; the matching velocity is `2 grad(phase)`.
pub fn madelung(rho: &Field, phase: &Field, time: f64) -> Result<WaveFunction> {
    if !rho.same_grid(phase) {
        return Err(Error::GridMismatch);
    }
    let r = rho.real(0);
    if let Some(&bad) = r.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative density {bad}")));
    }
    let samples = r.iter().zip(phase.real(0)).map(|(r, p)| Complex64::from_polar(r.sqrt(), p)).collect();
    Ok(WaveFunction { psi: Field::complex(rho.grid(), vec![samples]), time })
}

/// `(rho, u) = (|psi|^2, 2 Im(conj(psi) grad psi) / |psi|^2)`.
pub fn inverse_madelung(psi: &WaveFunction, threshold: f64) -> Result<EKState> {
    let grid = psi.grid().clone();
    let rho = psi.psi.abs_sq();
    let min = psi.min_density();
    if !(min > threshold) {
        return Err(Error::Vacuum { min, floor: threshold });
    }
    let gpsi = crate::multiplier::grad(&psi.psi)?;
    let p = psi.psi.component_samples(0);
    let r = rho.real(0);
    let comps = (0..grid.dim())
        .map(|a| {
            let ga = gpsi.component_samples(a);
            (0..grid.len()).map(|i| 2.0 * (p[i].conj() * ga[i]).im / r[i]).collect()
        })
        .collect();
    EKState::new(rho, Field::real_vector(&grid, comps), psi.time)
}

/// Evaluate a Fourier series and its first two derivatives at a point (one dimension).
fn interpolate_1d(grid: &FourierGrid, spec: &[Complex64], x: f64) -> [Complex64; 3] {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (k, c) in spec.iter().enumerate() {
        if grid.is_nyquist(k) {
            continue;
        }
        let xi = grid.xi(0, k);
        let e = c * Complex64::from_polar(1.0, xi * x);
        out[0] += e;
        out[1] += e * Complex64::new(0.0, xi);
        out[2] -= e * xi * xi;
    }
    out
}

/// Pointwise `u` and `u_x` from `psi`, `psi_x`, `psi_xx`.
fn velocity_and_gradient(p: Complex64, px: Complex64, pxx: Complex64) -> (f64, f64, f64) {
    let rho = p.norm_sqr();
    let j = (p.conj() * px).im;
    let u = 2.0 * j / rho;
    let ux = 2.0 * ((p.conj() * pxx).im * rho - j * 2.0 * (p.conj() * px).re) / (rho * rho);
    (rho, u, ux)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    pub n: usize,
    pub length: f64,
    /// Width of the notch `1 - exp(-|x - x_c|^2 / (2 width^2))`.
    pub width: f64,
    pub dt: f64,
    /// Forward run length `T`.
    pub t_forward: f64,
    /// Finite-difference step for the second time derivative.
    pub fd_step: f64,
    pub fit_window: (f64, f64),
    pub vacuum_threshold: f64,
    /// Offsets from the centre of the tracked particles.
    pub particles: Vec<f64>,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            length: 64.0,
            width: 1.0,
            dt: 1e-4,
            t_forward: 1.0,
            fd_step: 1e-3,
            fit_window: (0.005, 0.05),
            vacuum_threshold: VACUUM_THRESHOLD,
            particles: vec![0.0, 0.3, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// `sup_x |d/dt |psi|^2|` at `t = 0`.
    pub first_derivative_sup: f64,
    pub second_derivative: f64,
    /// `2 |Lap psi_0(x_c)|^2`.
    pub second_derivative_predicted: f64,
    pub second_derivative_rel_err: f64,
    /// `|psi(x_c, t)|^2 ~ beta t^2` least-squares coefficient on the fit window.
    pub beta: f64,
    /// `min over the window of |psi(x_c, t)|^2 / (alpha t^2 / 2)`, `alpha` the measured second derivative.
    pub growth_ratio_center: f64,
    /// Same with `min_x |psi(x, t)|^2`.
    pub growth_ratio_global: f64,
    pub t_forward: f64,
    /// First time on the conjugated run with `min |psi|^2 <= threshold`.
    pub t_star: Option<f64>,
    pub t_star_rel_err: Option<f64>,
    pub min_density_at_end: f64,
    /// Forward-conjugate-forward-conjugate error in relative `L^2`.
    pub reversal_error: f64,
    /// `(t, ||u_x||_inf)` on the admissible part of the conjugated run.
    pub grad_u_history: Vec<(f64, f64)>,
    /// Whether `||u_x||_inf` increases over samples with `T - t` in the last decade before vacuum.
    pub grad_u_monotone_last_decade: bool,
    /// Samples in that decade.
    pub last_decade_samples: usize,
    /// Largest relative mismatch in `rho(t, X(t)) = rho_0(X(0)) exp(-int div u)`.
    pub characteristic_residual: f64,
}

/// Notch datum `1 - exp(-|x - x_c|^2 / (2 w^2))`.
pub fn notch(grid: &Arc<FourierGrid>, width: f64) -> WaveFunction {
    let c = grid.center();
    let f = Field::scalar_fn(grid, |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - (-r2 / (2.0 * width * width)).exp()
    });
    WaveFunction { psi: f.as_complex(), time: 0.0 }
}

/// `d/dt |psi|^2 = 2 Re(conj(psi) psi_t)` with `psi_t = i (Lap psi - g psi / 2)`.
pub fn density_rate(psi: &WaveFunction, laws: &ConstitutiveLaws) -> Field {
    let lap = crate::multiplier::laplacian(&psi.psi);
    let p = psi.psi.component_samples(0);
    let l = lap.component_samples(0);
    let out = p
        .iter()
        .zip(l)
        .map(|(v, lv)| {
            let rhs = Complex64::new(0.0, 1.0) * (lv - v * laws.g(v.norm_sqr()) / 2.0);
            2.0 * (v.conj() * rhs).re
        })
        .collect();
    Field::real_scalar(psi.grid(), out)
}

pub fn blowup_experiment(cfg: &BlowupConfig, laws: &ConstitutiveLaws) -> Result<BlowupReport> {
    let grid = FourierGrid::uniform(1, cfg.n, cfg.length)?;
    let psi0 = notch(&grid, cfg.width);
    let ci = grid.center_index();
    let xc = grid.center()[0];

    if psi0.psi.component_samples(0)[ci].norm() > 1e-14 {
        return Err(Error::InvalidArgument("datum must vanish at the centre".into()));
    }
    let lap0 = crate::multiplier::laplacian(&psi0.psi).component_samples(0)[ci];
    if lap0.norm() < 1e-8 {
        return Err(Error::InvalidArgument("datum needs a non-zero Laplacian at the centre".into()));
    }
    let predicted = 2.0 * lap0.norm_sqr();
    let first_derivative_sup = density_rate(&psi0, laws).max_abs();

    // second derivative at t = 0 by a five-point stencil plus one Richardson step
    let h = cfg.fd_step;
    let sub = h / 10.0;
    let density_at = |t: f64| -> Result<f64> {
        let out = gp_evolve(&psi0, sub, t, laws)?;
        Ok(out.psi.component_samples(0)[ci].norm_sqr())
    };
    let f0 = psi0.psi.component_samples(0)[ci].norm_sqr();
    let mut fp = [0.0; 4];
    let mut fm = [0.0; 4];
    for (j, m) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        if j == 2 {
            continue;
        }
        fp[j] = density_at(m * h)?;
        fm[j] = density_at(-m * h)?;
    }
    let stencil = |s: f64, f1p: f64, f1m: f64, f2p: f64, f2m: f64| {
        (-f2p + 16.0 * f1p - 30.0 * f0 + 16.0 * f1m - f2m) / (12.0 * s * s)
    };
    let d_h = stencil(h, fp[0], fm[0], fp[1], fm[1]);
    let d_2h = stencil(2.0 * h, fp[1], fm[1], fp[3], fm[3]);
    let alpha = (16.0 * d_h - d_2h) / 15.0;

    // forward run: quadratic growth near t = 0 and positivity up to T
    let (w0, w1) = cfg.fit_window;
    let mut fit = Vec::new();
    let mut growth_center = f64::INFINITY;
    let mut growth_global = f64::INFINITY;
    let positivity_from = 10.0 * cfg.vacuum_threshold.sqrt();
    let forward = gp_evolve_with(&psi0, cfg.dt, cfg.t_forward, laws, |t, buf| {
        let center = buf[ci].norm_sqr();
        let global = buf.iter().map(|v| v.norm_sqr()).fold(f64::INFINITY, f64::min);
        if t >= w0 && t <= w1 {
            fit.push((t, center));
            let bound = 0.5 * alpha * t * t;
            growth_center = growth_center.min(center / bound);
            growth_global = growth_global.min(global / bound);
        }
        if t >= positivity_from && global <= cfg.vacuum_threshold {
            return Err(Error::Vacuum { min: global, floor: cfg.vacuum_threshold });
        }
        Ok(())
    })?;
    let beta = {
        let num: f64 = fit.iter().map(|(t, f)| f * t * t).sum();
        let den: f64 = fit.iter().map(|(t, _)| t.powi(4)).sum();
        num / den
    };

    // conjugated run towards vacuum
    let back0 = WaveFunction { psi: forward.psi.conj(), time: 0.0 };
    let mut t_star = None;
    let mut grad_u_history = Vec::new();
    let mut particles: Vec<(f64, f64, f64, f64)> = Vec::new(); // (X, rho_0(X_0), int div u, last div u)
    let mut residual: f64 = 0.0;
    {
        let spec0 = back0.psi.spectral()[0].clone();
        for &off in &cfg.particles {
            let x = xc + off;
            let [p, px, pxx] = interpolate_1d(&grid, &spec0, x);
            let (rho, _, ux) = velocity_and_gradient(p, px, pxx);
            particles.push((x, rho, 0.0, ux));
        }
    }
    let mut prev_t = 0.0;
    let mut prev_spec = back0.psi.spectral()[0].clone();
    let stepper_grid = grid.clone();
    let back = gp_evolve_with(&back0, cfg.dt, cfg.t_forward, laws, |t, buf| {
        let min = buf.iter().map(|v| v.norm_sqr()).fold(f64::INFINITY, f64::min);
        if t_star.is_some() {
            return Ok(());
        }
        if min <= cfg.vacuum_threshold {
            t_star = Some(t);
            return Ok(());
        }
        let mut spec = buf.to_vec();
        stepper_grid.forward(&mut spec);
        // u_x on the grid from spectral psi derivatives
        let mut d1: Vec<Complex64> = spec.iter().enumerate().map(|(k, c)| c * Complex64::new(0.0, stepper_grid.xi(0, k))).collect();
        let mut d2: Vec<Complex64> = spec.iter().enumerate().map(|(k, c)| -c * stepper_grid.xi_sq(k)).collect();
        d1[stepper_grid.dims()[0] / 2] = Complex64::new(0.0, 0.0);
        stepper_grid.inverse(&mut d1);
        stepper_grid.inverse(&mut d2);
        let gu = (0..buf.len())
            .map(|i| velocity_and_gradient(buf[i], d1[i], d2[i]).2.abs())
            .fold(0.0, f64::max);
        grad_u_history.push((t, gu));
        // particles: Heun step for X, trapezoid for the divergence integral
        let dt = t - prev_t;
        for pt in particles.iter_mut() {
            let [p0, p0x, p0xx] = interpolate_1d(&stepper_grid, &prev_spec, pt.0);
            let (_, u0, _) = velocity_and_gradient(p0, p0x, p0xx);
            let guess = pt.0 + dt * u0;
            let [p1, p1x, p1xx] = interpolate_1d(&stepper_grid, &spec, guess);
            let (_, u1, _) = velocity_and_gradient(p1, p1x, p1xx);
            let x_new = pt.0 + 0.5 * dt * (u0 + u1);
            let [q, qx, qxx] = interpolate_1d(&stepper_grid, &spec, x_new);
            let (rho, _, ux) = velocity_and_gradient(q, qx, qxx);
            pt.2 += 0.5 * dt * (pt.3 + ux);
            pt.3 = ux;
            pt.0 = x_new;
            let predicted = pt.1 * (-pt.2).exp();
            residual = residual.max((rho - predicted).abs() / rho);
        }
        prev_t = t;
        prev_spec = spec;
        Ok(())
    })?;
    let min_density_at_end = back.min_density();

    // time-reversal round trip
    let again = gp_evolve(&WaveFunction { psi: forward.psi.conj(), time: 0.0 }, cfg.dt, cfg.t_forward, laws)?.conj();
    let reversal_error = again.psi.sub(&psi0.psi)?.norm_l2() / psi0.psi.norm_l2();

    // monotone growth over the last decade of T - t before vacuum
    let (monotone, decade_samples) = match grad_u_history.last() {
        Some(&(t_last, _)) => {
            let tau_last = cfg.t_forward - t_last;
            let window: Vec<f64> = grad_u_history
                .iter()
                .filter(|(t, _)| cfg.t_forward - t <= 10.0 * tau_last)
                .map(|(_, g)| *g)
                .collect();
            (window.len() >= 2 && window.windows(2).all(|p| p[1] > p[0]), window.len())
        }
        None => (false, 0),
    };

    Ok(BlowupReport {
        first_derivative_sup,
        second_derivative: alpha,
        second_derivative_predicted: predicted,
        second_derivative_rel_err: (alpha - predicted).abs() / predicted,
        beta,
        growth_ratio_center: growth_center,
        growth_ratio_global: growth_global,
        t_forward: cfg.t_forward,
        t_star,
        t_star_rel_err: t_star.map(|t| (t - cfg.t_forward).abs() / cfg.t_forward),
        min_density_at_end,
        reversal_error,
        grad_u_history,
        grad_u_monotone_last_decade: monotone,
        last_decade_samples: decade_samples,
        characteristic_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_constant_is_stationary() {
        let g = FourierGrid::uniform(2, 16, 10.0).unwrap();
        let psi = WaveFunction::new(Field::constant(&g, 1.0), 0.0).unwrap();
        let out = gp_evolve(&psi, 0.01, 1.0, &ConstitutiveLaws::quantum()).unwrap();
        assert!(out.psi.sub(&psi.psi).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn madelung_of_constant_and_plane_wave() {
        let g = FourierGrid::uniform(1, 32, 2.0 * PI).unwrap();
        let psi = WaveFunction::new(Field::constant(&g, 1.0), 0.0).unwrap();
        let s = inverse_madelung(&psi, VACUUM_THRESHOLD).unwrap();
        assert!(s.rho.sub(&Field::constant(&g, 1.0)).unwrap().max_abs() < 1e-15);
        assert!(s.u.max_abs() < 1e-15);
        let k = 3.0;
        let wave = WaveFunction::new(Field::from_fn_complex(&g, |x| Complex64::from_polar(1.0, k * x[0])), 0.0).unwrap();
        let s = inverse_madelung(&wave, VACUUM_THRESHOLD).unwrap();
        assert!(s.u.real(0).iter().all(|u| (u - 2.0 * k).abs() < 1e-12));
    }

    #[test]
    fn vacuum_is_reported_by_inverse_madelung() {
        let g = FourierGrid::uniform(1, 64, 20.0).unwrap();
        assert!(matches!(inverse_madelung(&notch(&g, 1.0), VACUUM_THRESHOLD), Err(Error::Vacuum { .. })));
    }

    #[test]
    fn madelung_round_trip_up_to_phase() {
        let g = FourierGrid::uniform(1, 64, 4.0 * PI).unwrap();
        let rho = Field::scalar_fn(&g, |x| 1.0 + 0.3 * (x[0] / 2.0).sin());
        let phase = Field::scalar_fn(&g, |x| 0.2 * (x[0] / 2.0).cos() + 0.7);
        let psi = madelung(&rho, &phase, 0.0).unwrap();
        let s = inverse_madelung(&psi, VACUUM_THRESHOLD).unwrap();
        assert!(s.rho.sub(&rho).unwrap().max_abs() < 1e-13);
        let u_expect = crate::multiplier::grad(&phase).unwrap().scale(2.0);
        assert!(s.u.sub(&u_expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn renormalized_mass_is_conserved() {
        let g = FourierGrid::uniform(1, 256, 40.0).unwrap();
        let laws = ConstitutiveLaws::quantum();
        let psi = notch(&g, 1.5);
        let m0 = psi.renormalized_mass();
        let out = gp_evolve(&psi, 1e-3, 1.0, &laws).unwrap();
        assert!((out.renormalized_mass() - m0).abs() <= 1e-10);
    }

    #[test]
    fn conjugation_reverses_time() {
        let g = FourierGrid::uniform(1, 128, 30.0).unwrap();
        let laws = ConstitutiveLaws::quantum();
        let psi0 = WaveFunction::new(
            Field::from_fn_complex(&g, |x| Complex64::new(1.0 - 0.5 * (-(x[0] - 15.0).powi(2)).exp(), 0.2 * (x[0] * 2.0 * PI / 30.0).sin())),
            0.0,
        )
        .unwrap();
        let fwd = gp_evolve(&psi0, 1e-3, 0.5, &laws).unwrap();
        let back = gp_evolve(&WaveFunction { psi: fwd.psi.conj(), time: 0.0 }, 1e-3, 0.5, &laws).unwrap().conj();
        assert!(back.psi.sub(&psi0.psi).unwrap().norm_l2() <= 1e-12 * psi0.psi.norm_l2());
    }

    #[test]
    fn strang_gp_is_second_order() {
        let g = FourierGrid::uniform(1, 128, 30.0).unwrap();
        let laws = ConstitutiveLaws::quantum();
        let psi0 = notch(&g, 1.5);
        let run = |dt| gp_evolve(&psi0, dt, 0.5, &laws).unwrap();
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let e1 = a.psi.sub(&b.psi).unwrap().norm_l2();
        let e2 = b.psi.sub(&c.psi).unwrap().norm_l2();
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn real_datum_has_zero_initial_density_rate() {
        let g = FourierGrid::uniform(1, 256, 40.0).unwrap();
        let rate = density_rate(&notch(&g, 1.0), &ConstitutiveLaws::quantum());
        assert!(rate.max_abs() < 1e-12, "{:e}", rate.max_abs());
    }
}
