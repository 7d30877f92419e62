//! Time integration of the extended system `(l, u)` with `w = grad l`.
//!
//! The state is held as Fourier coefficients. Strang steps rotate
//! `psi = Q u + i U^{-1} w` exactly by `exp(i tau H)` and advance the
//! remaining (nonlinear and transport) terms with classical RK4. After
//! every step the mean of `l` is reset so that the total mass equals its
//! initial value.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, ValueKind};
use crate::grid::FourierGrid;
use crate::laws::ConstitutiveLaws;
use crate::model::{to_extended, EKState, ExtendedState};
use crate::multiplier::{div_spectral, grad_spectral, h_symbol, project, u_symbol};

type Spectrum = Vec<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Strang,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub dealias: bool,
    pub rho_min_stop: f64,
    /// Cap on `int_0^t ||Lap rho||_inf + ||grad u||_inf ds`.
    pub criterion_cap: f64,
    /// Cap on `max(||u||_inf, ||rho||_inf)`.
    pub norm_cap: f64,
    /// Keep every `snapshot_stride`-th state (0 keeps only the first and last).
    pub snapshot_stride: usize,
    pub check_stability: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::Strang,
            t_end: 1.0,
            dealias: true,
            rho_min_stop: 1e-3,
            criterion_cap: 1e3,
            norm_cap: 1e6,
            snapshot_stride: 0,
            check_stability: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    Vacuum { min_rho: f64 },
    CriterionCap { integral: f64 },
    NormCap { value: f64 },
    NonFinite { detail: String },
    /// Stopped by an observer (for instance a bootstrap envelope).
    Observer { detail: String },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Self::ReachedEnd => "reached_end",
            Self::Vacuum { .. } => "vacuum",
            Self::CriterionCap { .. } => "criterion_cap",
            Self::NormCap { .. } => "norm_cap",
            Self::NonFinite { .. } => "non_finite",
            Self::Observer { .. } => "observer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub time: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_u: f64,
    pub lap_rho_inf: f64,
    pub grad_u_inf: f64,
    /// Running integral of `||Lap rho||_inf + ||grad u||_inf`.
    pub criterion: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<ExtendedState>,
    pub monitor: Vec<MonitorSample>,
    pub termination: Termination,
    /// Time at which the run ended.
    pub end_time: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &ExtendedState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Tendencies of the extended system.
#[derive(Debug, Clone)]
pub struct Tendencies {
    pub dl: Field,
    pub dw: Field,
    pub du: Field,
}

#[derive(Clone, Debug)]
pub(crate) struct SpecState {
    pub l: Spectrum,
    pub u: Vec<Spectrum>,
}

impl SpecState {
    fn axpy(&self, h: f64, k: &SpecState) -> SpecState {
        let comb = |a: &Spectrum, b: &Spectrum| a.iter().zip(b).map(|(x, y)| x + y * h).collect();
        SpecState { l: comb(&self.l, &k.l), u: self.u.iter().zip(&k.u).map(|(a, b)| comb(a, b)).collect() }
    }

    fn is_finite(&self) -> bool {
        self.l.iter().chain(self.u.iter().flatten()).all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Reusable integrator bound to one grid and one set of laws.
pub(crate) struct Engine {
    grid: Arc<FourierGrid>,
    laws: ConstitutiveLaws,
    dealias: bool,
}

struct Physical {
    a: Vec<f64>,
    /// `dg/dl`.
    gp: Vec<f64>,
    u: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl Engine {
    pub fn new(grid: &Arc<FourierGrid>, laws: &ConstitutiveLaws, dealias: bool) -> Self {
        Self { grid: grid.clone(), laws: laws.clone(), dealias }
    }

    pub fn load(&self, s: &ExtendedState) -> SpecState {
        let l = s.l.spectral()[0].clone();
        let u = s.u.spectral().to_vec();
        let mut st = SpecState { l, u };
        if self.dealias {
            self.grid.dealias(&mut st.l);
            for c in st.u.iter_mut() {
                self.grid.dealias(c);
            }
        }
        st
    }

    pub fn unload(&self, st: &SpecState, time: f64) -> ExtendedState {
        let g = &self.grid;
        let l = Field::from_spectral(g, ValueKind::Real, vec![st.l.clone()]);
        let w = Field::from_spectral(g, ValueKind::Real, grad_spectral(g, &st.l));
        let u = Field::from_spectral(g, ValueKind::Real, st.u.clone());
        ExtendedState { l, w, u, time }
    }

    fn to_phys(&self, s: &[Complex64]) -> Vec<f64> {
        let mut buf = s.to_vec();
        self.grid.inverse(&mut buf);
        buf.into_iter().map(|v| v.re).collect()
    }

    fn to_spec(&self, v: &[f64]) -> Spectrum {
        let mut buf: Spectrum = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.grid.forward(&mut buf);
        if self.dealias {
            self.grid.dealias(&mut buf);
        }
        buf
    }

    fn deriv(&self, s: &[Complex64], axis: usize) -> Spectrum {
        let g = &self.grid;
        s.iter()
            .enumerate()
            .map(|(k, v)| if g.is_nyquist(k) { ZERO } else { v * Complex64::new(0.0, g.xi(axis, k)) })
            .collect()
    }

    fn density(&self, l: &[f64]) -> Result<Vec<f64>> {
        l.iter().map(|&v| self.laws.rho_from_l(v)).collect()
    }

    fn physical(&self, y: &SpecState) -> Result<Physical> {
        let d = self.grid.dim();
        let rho = self.density(&self.to_phys(&y.l))?;
        let a = rho.iter().map(|&r| self.laws.a(r)).collect();
        let gp = rho.iter().map(|&r| self.laws.g_prime_l(r)).collect();
        let u = (0..d).map(|ax| self.to_phys(&y.u[ax])).collect();
        let w = (0..d).map(|ax| self.to_phys(&self.deriv(&y.l, ax))).collect();
        Ok(Physical { a, gp, u, w })
    }

    /// Full tendencies (`full = true`) or the part left after removing the
    /// linear flow `d/dt psi = i H psi`.
    pub fn tendencies(&self, y: &SpecState, full: bool) -> Result<SpecState> {
        let g = &*self.grid;
        let d = g.dim();
        let n = g.len();
        let ph = self.physical(y)?;

        let qu_spec = project(g, &y.u, true);
        let qu: Vec<Vec<f64>> = qu_spec.iter().map(|c| self.to_phys(c)).collect();
        let mean: Vec<f64> = y.u.iter().map(|c| c[0].re).collect();
        let pu_spec: Vec<Spectrum> = (0..d)
            .map(|a| (0..n).map(|k| if k == 0 { ZERO } else { y.u[a][k] - qu_spec[a][k] }).collect())
            .collect();
        let has_pu = d > 1 && pu_spec.iter().flatten().any(|v| *v != ZERO);
        let has_mean = mean.iter().any(|&m| m != 0.0);

        let divu = self.to_phys(&div_spectral(g, &y.u));
        let lap_l: Spectrum = (0..n).map(|k| if g.is_nyquist(k) { ZERO } else { -y.l[k] * g.xi_sq(k) }).collect();
        let divw = self.to_phys(&lap_l);

        // T = u . grad(Pu) + (mean + Pu) . grad(Qu)
        let mut t = vec![vec![0.0; n]; d];
        if has_pu || has_mean {
            let adv: Vec<Vec<f64>> = (0..d)
                .map(|b| (0..n).map(|i| ph.u[b][i] - qu[b][i]).collect())
                .collect();
            for a in 0..d {
                for b in 0..d {
                    let dq = self.to_phys(&self.deriv(&qu_spec[a], b));
                    for i in 0..n {
                        t[a][i] += adv[b][i] * dq[i];
                    }
                    if has_pu {
                        let dp = self.to_phys(&self.deriv(&pu_spec[a], b));
                        for i in 0..n {
                            t[a][i] += ph.u[b][i] * dp[i];
                        }
                    }
                }
            }
        }

        let mut dl = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut v = vec![vec![0.0; n]; d];
        let (a_shift, g_shift) = if full { (0.0, 0.0) } else { (1.0, 2.0) };
        for i in 0..n {
            let mut uw = 0.0;
            let mut qq = 0.0;
            let mut ww = 0.0;
            for c in 0..d {
                uw += ph.u[c][i] * ph.w[c][i];
                qq += qu[c][i] * qu[c][i];
                ww += ph.w[c][i] * ph.w[c][i];
            }
            let ai = ph.a[i] - a_shift;
            dl[i] = -uw - ai * divu[i];
            s[i] = -0.5 * (qq - ww) + ai * divw[i];
            for c in 0..d {
                v[c][i] = (ph.gp[i] - g_shift) * ph.w[c][i];
            }
        }

        let dl_spec = self.to_spec(&dl);
        let s_spec = self.to_spec(&s);
        let v_spec: Vec<Spectrum> = v.iter().map(|c| self.to_spec(c)).collect();
        let qv = project(g, &v_spec, true);
        let t_spec: Vec<Spectrum> = if has_pu || has_mean {
            t.iter().map(|c| self.to_spec(c)).collect()
        } else {
            vec![vec![ZERO; n]; d]
        };
        let grad_s = grad_spectral(g, &s_spec);
        let du = (0..d)
            .map(|a| (0..n).map(|k| -t_spec[a][k] + grad_s[a][k] - qv[a][k]).collect())
            .collect();
        Ok(SpecState { l: dl_spec, u: du })
    }

    /// Exact flow of `d/dt psi = i H psi` for a time `tau`.
    pub fn linear_flow(&self, y: &mut SpecState, tau: f64) {
        if tau == 0.0 {
            return;
        }
        let g = &*self.grid;
        let d = g.dim();
        for k in 1..g.len() {
            if g.is_nyquist(k) {
                continue;
            }
            let s = g.xi_sq(k);
            let r = s.sqrt();
            let theta = tau * h_symbol(r);
            let (sn, cs) = theta.sin_cos();
            let uu = u_symbol(r);
            // scalar potential component q = xi . u / |xi|
            let q: Complex64 = (0..d).map(|a| y.u[a][k] * g.xi(a, k)).sum::<Complex64>() / r;
            let l = y.l[k];
            let i = Complex64::new(0.0, 1.0);
            let q_new = q * cs - i * r * l * sn / uu;
            let l_new = l * cs - i * uu * sn * q / r;
            for a in 0..d {
                y.u[a][k] += (q_new - q) * (g.xi(a, k) / r);
            }
            y.l[k] = l_new;
        }
    }

    fn rk4(&self, y: &SpecState, h: f64, full: bool) -> Result<SpecState> {
        let k1 = self.tendencies(y, full)?;
        let k2 = self.tendencies(&y.axpy(0.5 * h, &k1), full)?;
        let k3 = self.tendencies(&y.axpy(0.5 * h, &k2), full)?;
        let k4 = self.tendencies(&y.axpy(h, &k3), full)?;
        let mut out = y.clone();
        let w = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
        for (kk, wk) in [&k1, &k2, &k3, &k4].into_iter().zip(w) {
            out = out.axpy(wk, kk);
        }
        Ok(out)
    }

    pub fn mass(&self, y: &SpecState) -> Result<f64> {
        let rho = self.density(&self.to_phys(&y.l))?;
        Ok(rho.iter().sum::<f64>() * self.grid.cell_volume())
    }

    /// Shift the mean of `l` so that `int rho = mass`.
    pub fn project_mass(&self, y: &mut SpecState, mass: f64) -> Result<()> {
        let l = self.to_phys(&y.l);
        let target = mass / self.grid.cell_volume();
        let mut c = 0.0;
        for _ in 0..50 {
            let mut f = -target;
            let mut df = 0.0;
            for &li in &l {
                let r = self.laws.rho_from_l(li + c)?;
                f += r;
                df += 1.0 / self.laws.dl_drho(r);
            }
            let dc = f / df;
            c -= dc;
            if dc.abs() <= 1e-15 * (1.0 + c.abs()) {
                break;
            }
        }
        y.l[0] += c;
        Ok(())
    }

    pub fn step(&self, y: &SpecState, dt: f64, scheme: Scheme, mass: f64) -> Result<SpecState> {
        if dt == 0.0 {
            return Ok(y.clone());
        }
        let mut out = match scheme {
            Scheme::Strang => {
                let mut z = y.clone();
                self.linear_flow(&mut z, 0.5 * dt);
                let mut z = self.rk4(&z, dt, false)?;
                self.linear_flow(&mut z, 0.5 * dt);
                z
            }
            Scheme::Rk4 => self.rk4(y, dt, true)?,
        };
        if !out.is_finite() {
            return Err(Error::NonFinite("after step".into()));
        }
        self.project_mass(&mut out, mass)?;
        Ok(out)
    }

    pub fn stability_bound(&self, y: &SpecState, scheme: Scheme) -> Result<f64> {
        let ph = self.physical(y)?;
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let vec_sup = |v: &[Vec<f64>]| {
            (0..self.grid.len())
                .map(|i| v.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        };
        let xm = if self.dealias { self.grid.xi_max_dealiased() } else { self.grid.xi_max() };
        let adv = xm * (vec_sup(&ph.u) + vec_sup(&ph.w));
        let bound = match scheme {
            Scheme::Strang => {
                let a1 = ph.a.iter().fold(0.0f64, |m, a| m.max((a - 1.0).abs()));
                let g2 = ph.gp.iter().fold(0.0f64, |m, g| m.max((g - 2.0).abs()));
                2.0 / (adv + a1 * h_symbol(xm) + g2)
            }
            Scheme::Rk4 => {
                let amax = sup(&ph.a).max(1.0);
                2.8 / (amax * h_symbol(xm) + adv + sup(&ph.gp))
            }
        };
        Ok(if bound.is_finite() { bound } else { f64::INFINITY })
    }

    pub fn monitor(&self, y: &SpecState, time: f64, criterion: f64) -> Result<MonitorSample> {
        let g = &*self.grid;
        let d = g.dim();
        let rho = self.density(&self.to_phys(&y.l))?;
        let rho_spec = self.to_spec_raw(&rho);
        let lap: Spectrum = (0..g.len()).map(|k| -rho_spec[k] * g.xi_sq(k)).collect();
        let lap_rho_inf = self.to_phys(&lap).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut grad_sq = vec![0.0; g.len()];
        let mut u_sq = vec![0.0; g.len()];
        for a in 0..d {
            for (o, v) in u_sq.iter_mut().zip(self.to_phys(&y.u[a])) {
                *o += v * v;
            }
            for b in 0..d {
                let du = self.to_phys(&self.deriv(&y.u[a], b));
                for (o, v) in grad_sq.iter_mut().zip(du) {
                    *o += v * v;
                }
            }
        }
        let sup_sqrt = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x)).sqrt();
        Ok(MonitorSample {
            time,
            min_rho: rho.iter().cloned().fold(f64::INFINITY, f64::min),
            max_rho: rho.iter().cloned().fold(0.0, f64::max),
            max_u: sup_sqrt(&u_sq),
            lap_rho_inf,
            grad_u_inf: sup_sqrt(&grad_sq),
            criterion,
            mass: rho.iter().sum::<f64>() * g.cell_volume(),
        })
    }

    fn to_spec_raw(&self, v: &[f64]) -> Spectrum {
        let mut buf: Spectrum = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.grid.forward(&mut buf);
        buf
    }
}

/// All right-hand sides of the extended system at `s`.
pub fn rhs_extended(s: &ExtendedState, laws: &ConstitutiveLaws) -> Result<Tendencies> {
    let engine = Engine::new(s.grid(), laws, true);
    let y = engine.load(s);
    let k = engine.tendencies(&y, true)?;
    let g = s.grid();
    Ok(Tendencies {
        dl: Field::from_spectral(g, ValueKind::Real, vec![k.l.clone()]),
        dw: Field::from_spectral(g, ValueKind::Real, grad_spectral(g, &k.l)),
        du: Field::from_spectral(g, ValueKind::Real, k.u),
    })
}

/// One step of size `cfg.dt`, conserving the mass of `s`.
pub fn step(s: &ExtendedState, cfg: &SolverConfig, laws: &ConstitutiveLaws) -> Result<ExtendedState> {
    if cfg.dt == 0.0 {
        return Ok(s.clone());
    }
    let engine = Engine::new(s.grid(), laws, cfg.dealias);
    let y = engine.load(s);
    if cfg.check_stability && cfg.dt > 0.0 {
        let bound = engine.stability_bound(&y, cfg.scheme)?;
        if cfg.dt > bound {
            return Err(Error::Unstable { dt: cfg.dt, bound });
        }
    }
    let mass = engine.mass(&y)?;
    let out = engine.step(&y, cfg.dt, cfg.scheme, mass)?;
    Ok(engine.unload(&out, s.time + cfg.dt))
}

/// Observer hook called after accepted steps; returning `Some` stops the run.
pub type Observer<'a> = dyn FnMut(&ExtendedState, &MonitorSample) -> Option<String> + 'a;

pub fn simulate(s0: &EKState, cfg: &SolverConfig, laws: &ConstitutiveLaws) -> Result<Trajectory> {
    let e = to_extended(s0, laws)?;
    simulate_extended(&e, cfg, laws, None)
}

/// Integrate from `s0` until `cfg.t_end` or until a monitor fires. The
/// optional observer is called every `stride` steps.
pub fn simulate_extended(
    s0: &ExtendedState,
    cfg: &SolverConfig,
    laws: &ConstitutiveLaws,
    observer: Option<(usize, &mut Observer<'_>)>,
) -> Result<Trajectory> {
    if !(cfg.dt > 0.0) || !(cfg.t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {}, t_end = {}", cfg.dt, cfg.t_end)));
    }
    let engine = Engine::new(s0.grid(), laws, cfg.dealias);
    let mut y = engine.load(s0);
    if cfg.check_stability {
        let bound = engine.stability_bound(&y, cfg.scheme)?;
        if cfg.dt > bound {
            return Err(Error::Unstable { dt: cfg.dt, bound });
        }
    }
    let mass = engine.mass(&y)?;
    let t0 = s0.time;
    let n_steps = ((cfg.t_end - t0) / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let mut time = t0;
    let mut criterion = 0.0;
    let mut sample = engine.monitor(&y, time, criterion)?;
    let mut monitor = vec![sample];
    let mut snapshots = vec![engine.unload(&y, time)];
    let mut observer = observer;
    let mut termination = Termination::ReachedEnd;
    let mut steps = 0;
    let mut last_snapshot_step = 0;

    for i in 1..=n_steps {
        let h = if i == n_steps { cfg.t_end - time } else { cfg.dt };
        let next = match engine.step(&y, h, cfg.scheme, mass) {
            Ok(next) => next,
            Err(e) => {
                termination = classify(e, sample.min_rho);
                break;
            }
        };
        let next_time = if i == n_steps { cfg.t_end } else { t0 + i as f64 * cfg.dt };
        let next_sample = match engine.monitor(&next, next_time, 0.0) {
            Ok(m) => m,
            Err(e) => {
                termination = classify(e, sample.min_rho);
                break;
            }
        };
        y = next;
        time = next_time;
        steps = i;
        let rate = |m: &MonitorSample| m.lap_rho_inf + m.grad_u_inf;
        criterion += 0.5 * h * (rate(&sample) + rate(&next_sample));
        sample = MonitorSample { criterion, ..next_sample };
        monitor.push(sample);

        let stride_hit = cfg.snapshot_stride > 0 && i % cfg.snapshot_stride == 0;
        if stride_hit {
            snapshots.push(engine.unload(&y, time));
            last_snapshot_step = i;
        }
        if sample.min_rho <= cfg.rho_min_stop {
            termination = Termination::Vacuum { min_rho: sample.min_rho };
            break;
        }
        if criterion > cfg.criterion_cap {
            termination = Termination::CriterionCap { integral: criterion };
            break;
        }
        let size = sample.max_u.max(sample.max_rho);
        if size > cfg.norm_cap {
            termination = Termination::NormCap { value: size };
            break;
        }
        if let Some((stride, obs)) = observer.as_mut() {
            if *stride > 0 && i % *stride == 0 {
                let state = if stride_hit { snapshots.last().unwrap().clone() } else { engine.unload(&y, time) };
                if let Some(detail) = obs(&state, &sample) {
                    termination = Termination::Observer { detail };
                    break;
                }
            }
        }
    }
    if last_snapshot_step != steps || steps == 0 {
        if steps > 0 || snapshots.is_empty() {
            snapshots.push(engine.unload(&y, time));
        }
    }
    Ok(Trajectory { snapshots, monitor, termination, end_time: time, steps })
}

fn classify(e: Error, last_min: f64) -> Termination {
    match e {
        Error::Vacuum { min, .. } => Termination::Vacuum { min_rho: min.min(last_min) },
        Error::DensityOutOfRange { value, .. } => Termination::NormCap { value },
        other => Termination::NonFinite { detail: other.to_string() },
    }
}

/// Right-hand side of the primitive system in one dimension:
/// `rho_t = -(rho u)_x`,
/// `u_t = -u u_x - g(rho)_x + (K rho_xx + K'(rho) rho_x^2 / 2)_x`.
pub fn primitive_rhs_1d(rho: &Field, u: &Field, laws: &ConstitutiveLaws) -> Result<(Field, Field)> {
    let g = rho.grid().clone();
    if g.dim() != 1 {
        return Err(Error::InvalidArgument("primitive form is one-dimensional".into()));
    }
    let d = |f: &Field| crate::multiplier::grad(f).map(|v| v.component(0));
    let r = rho.real(0);
    let uu = u.real(0);
    let rx = d(rho)?.real(0);
    let rxx = d(&d(rho)?)?.real(0);
    let n = g.len();
    let mut flux = vec![0.0; n];
    let mut bern = vec![0.0; n];
    for i in 0..n {
        laws.check_density(r[i])?;
        flux[i] = r[i] * uu[i];
        bern[i] = -0.5 * uu[i] * uu[i] - laws.g(r[i]) + laws.k(r[i]) * rxx[i] + 0.5 * laws.k_prime(r[i]) * rx[i] * rx[i];
    }
    let drho = d(&Field::real_scalar(&g, flux))?.scale(-1.0).dealiased();
    let du = d(&Field::real_scalar(&g, bern))?.dealiased();
    Ok((drho, du))
}

/// Classical RK4 on the primitive one-dimensional system.
pub fn simulate_primitive_1d(s0: &EKState, dt: f64, t_end: f64, laws: &ConstitutiveLaws) -> Result<EKState> {
    let n_steps = ((t_end - s0.time) / dt - 1e-9).ceil().max(0.0) as usize;
    let (mut rho, mut u) = (s0.rho.dealiased(), s0.u.dealiased());
    let mut time = s0.time;
    for i in 1..=n_steps {
        let h = if i == n_steps { t_end - time } else { dt };
        let stage = |r: &Field, v: &Field, kr: &Field, kv: &Field, c: f64| -> Result<(Field, Field)> {
            Ok((r.add(&kr.scale(c))?, v.add(&kv.scale(c))?))
        };
        let (a_r, a_u) = primitive_rhs_1d(&rho, &u, laws)?;
        let (r2, u2) = stage(&rho, &u, &a_r, &a_u, 0.5 * h)?;
        let (b_r, b_u) = primitive_rhs_1d(&r2, &u2, laws)?;
        let (r3, u3) = stage(&rho, &u, &b_r, &b_u, 0.5 * h)?;
        let (c_r, c_u) = primitive_rhs_1d(&r3, &u3, laws)?;
        let (r4, u4) = stage(&rho, &u, &c_r, &c_u, h)?;
        let (d_r, d_u) = primitive_rhs_1d(&r4, &u4, laws)?;
        let comb = |x: &Field, k1: &Field, k2: &Field, k3: &Field, k4: &Field| -> Result<Field> {
            x.add(&k1.add(&k4)?.scale(h / 6.0))?.add(&k2.add(k3)?.scale(h / 3.0))
        };
        rho = comb(&rho, &a_r, &b_r, &c_r, &d_r)?;
        u = comb(&u, &a_u, &b_u, &c_u, &d_u)?;
        time = if i == n_steps { t_end } else { s0.time + i as f64 * dt };
        if !rho.is_finite() || !u.is_finite() {
            return Err(Error::NonFinite(format!("primitive run at t = {time}")));
        }
    }
    Ok(EKState { rho, u, time })
}

/// One row of the lifespan table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanRow {
    pub delta: f64,
    pub t_obs: f64,
    pub censored: bool,
    pub reason: String,
    /// `t_obs * delta`.
    pub product: f64,
}

/// Run one simulation per entry of `deltas`; the observer returns a stop
/// reason once a bootstrap envelope is violated. `make_state` builds the
/// initial state for a given solenoidal amplitude.
pub fn lifespan_experiment(
    deltas: &[f64],
    cfg: &SolverConfig,
    laws: &ConstitutiveLaws,
    check_stride: usize,
    mut make_state: impl FnMut(f64) -> Result<ExtendedState>,
    mut make_observer: impl FnMut(f64, &ExtendedState) -> Result<Box<Observer<'static>>>,
) -> Result<Vec<LifespanRow>> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let s0 = make_state(delta)?;
        let mut obs = make_observer(delta, &s0)?;
        let traj = simulate_extended(&s0, cfg, laws, Some((check_stride, obs.as_mut())))?;
        let censored = traj.termination == Termination::ReachedEnd;
        let reason = match &traj.termination {
            Termination::Observer { detail } => detail.clone(),
            other => other.label().to_string(),
        };
        rows.push(LifespanRow { delta, t_obs: traj.end_time, censored, reason, product: traj.end_time * delta });
    }
    Ok(rows)
}
