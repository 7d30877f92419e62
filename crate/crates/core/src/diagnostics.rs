//! Measurements taken along simulations: Sobolev and Lebesgue norms, the
//! weighted dispersive norm, gauge energies, the Hamiltonian, decay fits,
//! the resonance phase and bootstrap envelopes.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::FourierGrid;
use crate::laws::ConstitutiveLaws;
use crate::model::{EKState, ExtendedState};
use crate::multiplier::{apply_multiplier, h_prime, h_symbol, semigroup, MultiplierSymbol};

/// `W^{k,p}` norm selector. `p = f64::INFINITY` is the max norm.
///
/// Derivatives act through the Bessel potential `(1 - Delta)^{k/2}`, or
/// `(-Delta)^{k/2}` when `homogeneous` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub k: u32,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(default)]
    pub homogeneous: bool,
}

impl NormSpec {
    pub fn l2() -> Self {
        Self { k: 0, p: 2.0, homogeneous: false }
    }

    pub fn sobolev(k: u32) -> Self {
        Self { k, p: 2.0, homogeneous: false }
    }

    pub fn lp(p: f64) -> Self {
        Self { k: 0, p, homogeneous: false }
    }

    pub fn max() -> Self {
        Self::lp(f64::INFINITY)
    }

    fn weight(&self, xi_sq: f64) -> f64 {
        let k = self.k as f64;
        if self.k == 0 {
            1.0
        } else if self.homogeneous {
            xi_sq.powf(0.5 * k)
        } else {
            (1.0 + xi_sq).powf(0.5 * k)
        }
    }
}

/// Integrability exponents as JSON numbers, with the string `"inf"` for the
/// max norm.
mod exponent {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(p) => Ok(p),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(D::Error::custom(format!("unknown exponent '{t}'"))),
        }
    }
}

pub fn norm(f: &Field, spec: &NormSpec) -> Result<f64> {
    let grid = f.grid();
    let max = grid.dims().iter().map(|&n| (n / 3) as u32).min().unwrap_or(0);
    if spec.k > max {
        return Err(Error::DerivativeOrder { order: spec.k, max });
    }
    if !(spec.p >= 1.0) {
        return Err(Error::InvalidArgument(format!("integrability p = {} below 1", spec.p)));
    }
    let spec_coeffs: Vec<Vec<Complex64>> = f
        .spectral()
        .iter()
        .map(|c| c.iter().enumerate().map(|(m, v)| v * spec.weight(grid.xi_sq(m))).collect())
        .collect();
    if spec.p == 2.0 {
        let s: f64 = spec_coeffs.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum();
        return Ok((s * grid.volume()).sqrt());
    }
    let (fine, samples) = zero_pad(grid, &spec_coeffs)?;
    let n = fine.len();
    let modulus = |p: usize| samples.iter().map(|c| c[p].norm_sqr()).sum::<f64>().sqrt();
    if spec.p.is_infinite() {
        return Ok((0..n).map(modulus).fold(0.0, f64::max));
    }
    let avg = (0..n).map(|p| modulus(p).powf(spec.p)).sum::<f64>() / n as f64;
    Ok((avg * grid.volume()).powf(1.0 / spec.p))
}

/// Resample band-limited coefficients on a grid twice as fine along each
/// axis. Nyquist modes are dropped.
fn zero_pad(grid: &Arc<FourierGrid>, coeffs: &[Vec<Complex64>]) -> Result<(Arc<FourierGrid>, Vec<Vec<Complex64>>)> {
    let dims: Vec<usize> = grid.dims().iter().map(|n| 2 * n).collect();
    let fine = FourierGrid::new(&dims, grid.lengths())?;
    let out = coeffs
        .iter()
        .map(|c| {
            let mut buf = vec![Complex64::new(0.0, 0.0); fine.len()];
            for (m, v) in c.iter().enumerate() {
                if grid.is_nyquist(m) {
                    continue;
                }
                let idx: Vec<usize> = grid
                    .mode_wavenumbers(m)
                    .iter()
                    .zip(&dims)
                    .map(|(&k, &n)| k.rem_euclid(n as i64) as usize)
                    .collect();
                buf[fine.flatten(&idx)] = *v;
            }
            fine.inverse(&mut buf);
            buf
        })
        .collect();
    Ok((fine, out))
}

/// Periodic coordinate relative to the domain midpoint, in `[-L/2, L/2)`.
fn centered_coords(grid: &FourierGrid, p: usize) -> Vec<f64> {
    grid.point(p)
        .iter()
        .zip(grid.lengths())
        .map(|(x, l)| x - 0.5 * l)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub value: f64,
    /// Fraction of `|e^{-itH} Psi|^2` outside the central half of the box.
    pub tail_fraction: f64,
    pub valid: bool,
}

pub const WRAP_TAIL_FRACTION: f64 = 0.01;

/// `|| x_c e^{-itH} Psi ||_2`, flagged invalid once more than 1% of the
/// mass of `e^{-itH} Psi` leaves the central half of the box. A nonzero
/// mean mode is carried along unchanged.
pub fn weighted_norm(psi: &Field, t: f64) -> Result<WeightedNorm> {
    let pulled = if t == 0.0 { psi.clone() } else { semigroup(psi, -t) };
    let grid = pulled.grid();
    let dens = pulled.abs_sq();
    let dv = grid.cell_volume();
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut tail = 0.0;
    for (p, v) in dens.component_samples(0).iter().enumerate() {
        let xc = centered_coords(grid, p);
        let r2: f64 = xc.iter().map(|x| x * x).sum();
        weighted += r2 * v.re;
        total += v.re;
        if xc.iter().zip(grid.lengths()).any(|(x, l)| x.abs() > 0.25 * l) {
            tail += v.re;
        }
    }
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    Ok(WeightedNorm {
        value: (weighted * dv).sqrt(),
        tail_fraction,
        valid: tail_fraction <= WRAP_TAIL_FRACTION,
    })
}

/// Tabulated gauge `phi_tilde_n^2` solving
/// `(phi^2)' = -2n a^{2n-1} rho a' + a^{2n}`, `phi^2(1) = 1`,
/// on a log-spaced density grid, with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct GaugeTable {
    n: u32,
    laws: ConstitutiveLaws,
    log_rho: Vec<f64>,
    values: Vec<f64>,
}

const GAUGE_NODES_PER_DECADE: usize = 64;

impl GaugeTable {
    pub fn new(laws: &ConstitutiveLaws, n: u32) -> Self {
        let lo = laws.rho_floor().ln();
        let hi = laws.rho_ceil().ln();
        let per = GAUGE_NODES_PER_DECADE as f64 / std::f64::consts::LN_10;
        let n_lo = ((-lo) * per).ceil().max(1.0) as usize;
        let n_hi = (hi * per).ceil().max(1.0) as usize;
        let mut log_rho: Vec<f64> = (0..=n_lo).rev().map(|i| lo * i as f64 / n_lo as f64).collect();
        log_rho.extend((1..=n_hi).map(|i| hi * i as f64 / n_hi as f64));
        let one = n_lo;
        let mut values = vec![0.0; log_rho.len()];
        values[one] = 1.0;
        let rhs = |r: f64| gauge_rhs(laws, n, r);
        for i in one + 1..log_rho.len() {
            values[i] = values[i - 1] + gauss3(&rhs, log_rho[i - 1].exp(), log_rho[i].exp());
        }
        for i in (0..one).rev() {
            values[i] = values[i + 1] - gauss3(&rhs, log_rho[i].exp(), log_rho[i + 1].exp());
        }
        Self { n, laws: laws.clone(), log_rho, values }
    }

    /// `phi_tilde_n^2 (rho)`.
    pub fn squared(&self, rho: f64) -> f64 {
        let x = rho.ln();
        let last = self.log_rho.len() - 1;
        let i = match self.log_rho.partition_point(|&v| v <= x) {
            0 => 0,
            j if j > last => last - 1,
            j => j - 1,
        };
        let (x0, x1) = (self.log_rho[i], self.log_rho[i + 1]);
        let (r0, r1) = (x0.exp(), x1.exp());
        let h = r1 - r0;
        let s = (rho - r0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (gauge_rhs(&self.laws, self.n, r0), gauge_rhs(&self.laws, self.n, r1));
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1
    }

    pub fn value(&self, rho: f64) -> Result<f64> {
        let sq = self.squared(rho);
        if !(sq > 0.0) {
            return Err(Error::GaugeInvalid { rho, value: sq });
        }
        Ok(sq.sqrt())
    }
}

fn gauge_rhs(laws: &ConstitutiveLaws, n: u32, rho: f64) -> f64 {
    let a = laws.a(rho);
    let n = n as i32;
    let lead = if n == 0 { 0.0 } else { -2.0 * n as f64 * a.powi(2 * n - 1) * rho * laws.a_prime(rho) };
    lead + a.powi(2 * n)
}

fn gauss3(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let x = (0.6f64).sqrt();
    h * (5.0 * f(m - h * x) + 8.0 * f(m) + 5.0 * f(m + h * x)) / 9.0
}

fn density(s: &ExtendedState, laws: &ConstitutiveLaws) -> Result<Vec<f64>> {
    s.l.real(0).iter().map(|&l| laws.rho_from_l(l)).collect()
}

fn laplacian_power(f: &Field, n: u32) -> Field {
    if n == 0 {
        return f.clone();
    }
    let grid = f.grid();
    let spec = f
        .spectral()
        .iter()
        .map(|c| c.iter().enumerate().map(|(m, v)| v * (-grid.xi_sq(m)).powi(n as i32)).collect())
        .collect();
    Field::from_spectral(grid, f.kind(), spec)
}

/// `int |Q(phi_n D^n z)|^2 + |P(phi_tilde_n D^n z)|^2 + 2 |D^n r|^2 dx`
/// with `z = u + i w`, `r = rho - 1`, `phi_n = a^n sqrt(rho)` and `D` the
/// Laplacian.
pub fn gauge_energy(s: &ExtendedState, laws: &ConstitutiveLaws, n: u32) -> Result<f64> {
    if n > 2 {
        return Err(Error::DerivativeOrder { order: 2 * n, max: 4 });
    }
    let grid = s.grid().clone();
    let rho = density(s, laws)?;
    let table = GaugeTable::new(laws, n);
    let phi: Vec<f64> = rho.iter().map(|&r| laws.a(r).powi(n as i32) * r.sqrt()).collect();
    let phi_t: Vec<f64> = rho.iter().map(|&r| table.value(r)).collect::<Result<_>>()?;
    let z = Field::from_re_im(&s.u, &s.w)?;
    let dz = laplacian_power(&z, n);
    let q_part = apply_multiplier(&dz.mul_scalar_field(&Field::real_scalar(&grid, phi))?, &MultiplierSymbol::Q)?;
    let p_part = apply_multiplier(&dz.mul_scalar_field(&Field::real_scalar(&grid, phi_t))?, &MultiplierSymbol::P)?;
    let r = Field::real_scalar(&grid, rho.iter().map(|v| v - 1.0).collect());
    let dr = laplacian_power(&r, n);
    Ok(q_part.norm_l2().powi(2) + p_part.norm_l2().powi(2) + 2.0 * dr.norm_l2().powi(2))
}

/// `int rho |u|^2 / 2 + K(rho) |grad rho|^2 / 2 + G(rho) dx`.
pub fn hamiltonian(s: &EKState, laws: &ConstitutiveLaws) -> Result<f64> {
    let grid = s.grid();
    let grad_rho = apply_multiplier(&s.rho, &MultiplierSymbol::Grad)?;
    let gsq = grad_rho.abs_sq();
    let usq = s.u.abs_sq();
    let mut total = 0.0;
    for (p, r) in s.rho.component_samples(0).iter().enumerate() {
        let r = r.re;
        laws.check_density(r)?;
        total += 0.5 * r * usq.component_samples(0)[p].re
            + 0.5 * laws.k(r) * gsq.component_samples(0)[p].re
            + laws.pressure_potential(r);
    }
    Ok(total * grid.cell_volume())
}

pub fn mass(s: &EKState) -> f64 {
    s.rho.integral()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `t_wrap = L / (2 H'(xi_c))`.
pub fn wrap_time(length: f64, xi_c: f64) -> f64 {
    length / (2.0 * h_prime(xi_c))
}

/// Least-squares slope of `log value` against `log t` over samples with
/// `window.0 <= t <= window.1`.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, v)| t >= window.0 && t <= window.1 && t > 0.0 && v > 0.0)
        .collect();
    if pts.len() < 6 {
        return Err(Error::FitWindow(pts.len()));
    }
    let (slope, stderr) = crate::ode::log_log_slope(&pts);
    Ok(DecayFit { slope, stderr, samples: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `Omega_{s1 s2}(xi, eta) = H(xi) + s1 H(eta) + s2 H(xi - eta)`.
pub fn resonance_eval(xi: &[f64], eta: &[f64], signs: (Sign, Sign)) -> f64 {
    let mag = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let a = mag(&mut xi.iter().copied());
    let b = mag(&mut eta.iter().copied());
    let c = mag(&mut xi.iter().zip(eta).map(|(x, e)| x - e));
    h_symbol(a) + signs.0.value() * h_symbol(b) + signs.1.value() * h_symbol(c)
}

/// `-3 eps |eta|^3 / (2 sqrt 2)`, the small-`eps` behaviour of `Omega_{-+}(eps eta, eta)`.
pub fn resonance_asymptotic(eps: f64, eta_norm: f64) -> f64 {
    -3.0 * eps * eta_norm.powi(3) / (2.0 * std::f64::consts::SQRT_2)
}

/// Norms recorded at one time for the bootstrap envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub t: f64,
    /// `||Psi||_{H^N}`.
    pub energy: f64,
    /// `||Psi||_{W^{k,p}}`.
    pub dispersive: f64,
    /// `|| |x| e^{-itH} Psi ||_2`, if measured.
    pub weighted: Option<f64>,
    /// `||P u||_{W^{k,q}} + || |x| P u_0 ||_2`.
    pub transport: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSlot {
    Energy,
    Dispersive,
    Weighted,
    Transport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOutcome {
    pub passed: Vec<bool>,
    pub first_violation: Option<(f64, EnvelopeSlot)>,
}

/// Check every record against `energy <= C eps`, `weighted <= C eps`,
/// `dispersive <= C delta + C eps (1+t)^{-beta}` and `transport <= C delta`.
pub fn envelope_check(history: &[EnvelopeRecord], c: f64, eps: f64, delta: f64, beta: f64) -> Result<EnvelopeOutcome> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("empty envelope history".into()));
    }
    let mut passed = Vec::with_capacity(history.len());
    let mut first_violation = None;
    for r in history {
        let checks = [
            (EnvelopeSlot::Energy, r.energy <= c * eps),
            (EnvelopeSlot::Weighted, r.weighted.map_or(true, |v| v <= c * eps)),
            (EnvelopeSlot::Dispersive, r.dispersive <= c * delta + c * eps / (1.0 + r.t).powf(beta)),
            (EnvelopeSlot::Transport, r.transport <= c * delta),
        ];
        let bad = checks.iter().find(|(_, ok)| !ok).map(|(s, _)| *s);
        passed.push(bad.is_none());
        if let (None, Some(slot)) = (first_violation, bad) {
            first_violation = Some((r.t, slot));
        }
    }
    Ok(EnvelopeOutcome { passed, first_violation })
}

/// `sup_t (1+t)^beta (||psi||_{W^{k,p}} - C delta)`, taken as written
/// (the bracket may be negative).
pub fn x_norm(history: &[EnvelopeRecord], c: f64, delta: f64, beta: f64) -> f64 {
    history
        .iter()
        .map(|r| (1.0 + r.t).powf(beta) * (r.dispersive - c * delta))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub mass: f64,
    pub hamiltonian: f64,
    pub gauge: Vec<f64>,
    pub criterion: f64,
}

/// Time series of conserved and controlled quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub gauge_orders: Vec<u32>,
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn new(gauge_orders: Vec<u32>) -> Self {
        Self { gauge_orders, rows: Vec::new() }
    }

    pub fn record(&mut self, s: &ExtendedState, laws: &ConstitutiveLaws, criterion: f64) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(s.time > last.t) {
                return Err(Error::InvalidArgument(format!("ledger time {} not after {}", s.time, last.t)));
            }
        }
        let ek = crate::model::from_extended(s, laws)?;
        let gauge = self.gauge_orders.iter().map(|&n| gauge_energy(s, laws, n)).collect::<Result<_>>()?;
        self.rows.push(LedgerRow {
            t: s.time,
            mass: mass(&ek),
            hamiltonian: hamiltonian(&ek, laws)?,
            gauge,
            criterion,
        });
        Ok(())
    }

    /// Largest `|mass - mass_0| / mass_0`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.rows.first().map_or(1.0, |r| r.mass);
        self.rows.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max)
    }

    /// Largest `|E - E_0|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.rows.first().map_or(0.0, |r| r.hamiltonian);
        self.rows.iter().map(|r| (r.hamiltonian - e0).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "mass".into(), "hamiltonian".into()];
        header.extend(self.gauge_orders.iter().map(|n| format!("gauge_{n}")));
        header.push("criterion".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![fmt17(r.t), fmt17(r.mass), fmt17(r.hamiltonian)];
            rec.extend(r.gauge.iter().map(|&v| fmt17(v)));
            rec.push(fmt17(r.criterion));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Copy of `f` with the mean mode removed.
pub fn mean_free(f: &Field) -> Field {
    let grid = f.grid();
    let mut spec: Vec<Vec<Complex64>> = f.spectral().to_vec();
    for c in spec.iter_mut() {
        c[0] = Complex64::new(0.0, 0.0);
    }
    Field::from_spectral(grid, f.kind(), spec)
}
