//! The acceptance suite behind `korteweg verify`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use korteweg_core::bilinear::bilinear_b;
use korteweg_core::diagnostics::{gauge_energy, hamiltonian, EnergyLedger};
use korteweg_core::gp::{gp_evolve, inverse_madelung, madelung, VACUUM_THRESHOLD};
use korteweg_core::model::{from_extended, to_extended};
use korteweg_core::multiplier::{apply_multiplier, div, laplacian, semigroup, MultiplierSymbol};
use korteweg_core::solver::{simulate, SolverConfig};
use korteweg_core::{ConstitutiveLaws, EKState, Field, FourierGrid, ValueKind};

use crate::config::{preset, GridConfig, ScenarioKind};
use crate::error::Result;
use crate::initial::{generate_initial_data, InitialDataSpec};
use crate::report::{ScenarioReport, Verdict};
use crate::scenarios::evaluate;

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "linear dispersion exponent"),
    (2, "toy ODE lifespan"),
    (3, "blow-up construction"),
    (4, "Madelung consistency"),
    (5, "normal form cubic residual"),
    (6, "resonance asymptotic"),
    (7, "conservation suite"),
    (8, "operator algebra"),
    (9, "solenoidal invariance and lifespan monotonicity"),
];

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub verdicts: Vec<Verdict>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }

    /// One line: `PASS 4 Madelung consistency (3.2 s)`, then the failing verdicts.
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {} {} ({:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        );
        for v in self.verdicts.iter().filter(|v| !v.passed) {
            s.push_str(&format!("\n    {v}"));
        }
        s
    }
}

fn scenario_verdicts(rep: ScenarioReport, prefix: &str) -> Vec<Verdict> {
    rep.verdicts
        .into_iter()
        .map(|mut v| {
            if !prefix.is_empty() {
                v.name = format!("{prefix}: {}", v.name);
            }
            v
        })
        .collect()
}

fn timed(prefix: &str, budget: f64, f: impl FnOnce() -> ScenarioReport) -> Vec<Verdict> {
    let t = Instant::now();
    let rep = f();
    let secs = t.elapsed().as_secs_f64();
    let name = if prefix.is_empty() { "runtime seconds".to_string() } else { format!("{prefix}: runtime seconds") };
    let mut v = scenario_verdicts(rep, prefix);
    v.push(Verdict::at_most(&name, secs, budget));
    v
}

fn dispersion() -> Result<Vec<Verdict>> {
    let one = preset(ScenarioKind::Dispersion);
    let mut two = one.clone();
    two.grid = GridConfig { dim: 2, n: 512, length: 100.0 * PI };
    two.dispersion.t_first = 5.0;
    two.dispersion.t_last = 25.0;
    two.dispersion.samples = 10;
    let mut v = timed("d = 1", 120.0, || evaluate(&one));
    v.extend(timed("d = 2", 120.0, || evaluate(&two)));
    Ok(v)
}

fn blowup() -> Result<Vec<Verdict>> {
    Ok(timed("", 60.0, || evaluate(&preset(ScenarioKind::Blowup))))
}

/// Phase with `2 grad phi = u` for a gradient field `u`.
fn madelung_phase(u: &Field) -> Result<Field> {
    let g = u.grid().clone();
    let d = div(u)?;
    let spec = d.spectral()[0]
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let s = g.xi_sq(m);
            if s == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                -v / (2.0 * s)
            }
        })
        .collect();
    Ok(Field::from_spectral(&g, ValueKind::Real, vec![spec]))
}

fn madelung_setup() -> Result<(Arc<FourierGrid>, EKState)> {
    let grid = FourierGrid::uniform(1, 256, 32.0 * PI)?;
    let spec = InitialDataSpec { epsilon: 0.1, band_limit: 1.0, seed: 1, ..Default::default() };
    let s0 = generate_initial_data(&spec, &grid)?;
    Ok((grid, s0))
}

/// Relative `L^2` distance at `t = 1` between the fluid solver and the
/// wave-function solver mapped back through the inverse transform.
pub fn madelung_discrepancy(dt: f64) -> Result<f64> {
    let laws = ConstitutiveLaws::quantum();
    let (grid, s0) = madelung_setup()?;
    let psi0 = madelung(&s0.rho, &madelung_phase(&s0.u)?, 0.0)?;
    let cfg = SolverConfig { dt, t_end: 1.0, ..Default::default() };
    let fluid = from_extended(simulate(&s0, &cfg, &laws)?.last(), &laws)?;
    let wave = inverse_madelung(&gp_evolve(&psi0, dt, 1.0, &laws)?, VACUUM_THRESHOLD)?;
    let dr = fluid.rho.sub(&wave.rho)?.norm_l2();
    let du = fluid.u.sub(&wave.u)?.norm_l2();
    let r = wave.rho.sub(&Field::constant(&grid, 1.0))?.norm_l2();
    let u = wave.u.norm_l2();
    Ok((dr * dr + du * du).sqrt() / (r * r + u * u).sqrt())
}

fn madelung_consistency() -> Result<Vec<Verdict>> {
    let coarse = madelung_discrepancy(2e-4)?;
    let fine = madelung_discrepancy(1e-4)?;
    let order = (coarse / fine).log2();
    Ok(vec![
        Verdict::at_most("relative discrepancy at dt = 1e-4", fine, 1e-3),
        Verdict::at_least("discrepancy order under dt halving", order, 1.95).configured(),
    ])
}

fn conservation() -> Result<Vec<Verdict>> {
    let laws = ConstitutiveLaws::quantum();
    let (grid, s0) = madelung_setup()?;
    let mut mass_drift = 0.0f64;
    let mut drifts = Vec::new();
    for dt in [2e-2, 1e-2, 5e-3] {
        let cfg = SolverConfig { dt, t_end: 2.0, snapshot_stride: 1, ..Default::default() };
        let traj = simulate(&s0, &cfg, &laws)?;
        let mut ledger = EnergyLedger::new(vec![]);
        for s in &traj.snapshots {
            ledger.record(s, &laws, 0.0)?;
        }
        mass_drift = mass_drift.max(ledger.mass_drift());
        drifts.push(ledger.energy_drift());
    }
    let mut v = vec![Verdict::at_most("mass drift", mass_drift, 1e-10)];
    for (i, w) in drifts.windows(2).enumerate() {
        v.push(Verdict::near(&format!("energy drift order, refinement {}", i + 1), (w[0] / w[1]).log2(), 2.0, 0.3));
    }
    let mut ratios = Vec::new();
    for amp in [0.04, 0.02, 0.01] {
        let spec = InitialDataSpec { epsilon: amp, band_limit: 1.0, seed: 1, ..Default::default() };
        let s = generate_initial_data(&spec, &grid)?;
        let e0 = gauge_energy(&to_extended(&s, &laws)?, &laws, 0)?;
        ratios.push((e0 - 2.0 * hamiltonian(&s, &laws)?).abs() / amp.powi(3));
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    v.push(Verdict::at_most("cubic-normalised gauge mismatch spread", hi / lo, 2.0).configured());
    Ok(v)
}

fn rel(a: &Field, b: &Field) -> Result<f64> {
    Ok(a.sub(b)?.norm_l2() / b.norm_l2().max(f64::MIN_POSITIVE))
}

/// Aliased double sum over all mode pairs, then 2/3 truncation.
fn bilinear_double_sum(f: &Field, g: &Field, strength: f64) -> Field {
    let grid = f.grid().clone();
    let n = grid.len();
    let (fs, gs) = (&f.spectral()[0], &g.spectral()[0]);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for a in 0..n {
        for b in 0..n {
            let sym = strength / (2.0 * (2.0 + grid.xi_sq(a) + grid.xi_sq(b)));
            out[(a + b) % n] += sym * fs[a] * gs[b];
        }
    }
    grid.dealias(&mut out);
    Field::from_spectral(&grid, ValueKind::Complex, vec![out])
}

fn operator_algebra() -> Result<Vec<Verdict>> {
    use MultiplierSymbol::{P, Q};
    let mut v = Vec::new();

    let g2 = FourierGrid::uniform(2, 32, 8.0 * PI)?;
    let spec = InitialDataSpec { epsilon: 0.3, delta: 0.2, band_limit: 2.5, seed: 11, ..Default::default() };
    let u = generate_initial_data(&spec, &g2)?.u;
    let scale = u.norm_l2();
    let pu = apply_multiplier(&u, &P)?;
    let qu = apply_multiplier(&u, &Q)?;
    v.push(Verdict::at_most("P idempotent", apply_multiplier(&pu, &P)?.sub(&pu)?.norm_l2() / scale, 1e-12));
    v.push(Verdict::at_most("Q idempotent", apply_multiplier(&qu, &Q)?.sub(&qu)?.norm_l2() / scale, 1e-12));
    v.push(Verdict::at_most("QP = 0", apply_multiplier(&pu, &Q)?.norm_l2() / scale, 1e-12));
    v.push(Verdict::at_most("PQ = 0", apply_multiplier(&qu, &P)?.norm_l2() / scale, 1e-12));
    v.push(Verdict::at_most("P + Q = I", pu.add(&qu)?.sub(&u)?.norm_l2() / scale, 1e-12));

    let c = Field::from_fn_complex(&g2, |x| {
        Complex64::new((x[0] / 4.0).sin() * (x[1] / 2.0).cos(), (-(x[0] - 12.0).powi(2) / 8.0).exp())
    });
    let (t1, t2) = (0.7, 2.3);
    let composed = semigroup(&semigroup(&c, t1), t2);
    v.push(Verdict::at_most("group law", rel(&composed, &semigroup(&c, t1 + t2))?, 1e-12));
    let drift = (semigroup(&c, 5.0).norm_l2() - c.norm_l2()).abs() / c.norm_l2();
    v.push(Verdict::at_most("unitarity", drift, 1e-12));

    let g1 = FourierGrid::uniform(1, 16, 2.0 * PI)?;
    let f = Field::scalar_fn(&g1, |x| x[0].sin() + 0.5 * (2.0 * x[0] - 0.3).cos() + 0.1);
    let h = Field::scalar_fn(&g1, |x| (x[0] + 1.1).cos() + 0.25 * (3.0 * x[0]).sin());
    let strength = -0.7;
    let quad = bilinear_b(&f, &h, strength)?;
    v.push(Verdict::at_most("bilinear quadrature vs double sum", rel(&quad, &bilinear_double_sum(&f, &h, strength))?, 1e-6));

    let g = FourierGrid::uniform(1, 64, 8.0 * PI)?;
    let a = Field::scalar_fn(&g, |x| (-(x[0] - 4.0 * PI).powi(2) / 4.0).exp());
    let b = Field::scalar_fn(&g, |x| (x[0] / 4.0).sin() * (-(x[0] - 12.0).powi(2) / 8.0).exp());
    let lhs = bilinear_b(&a, &laplacian(&b), strength)?
        .add(&bilinear_b(&laplacian(&a).sub(&a.scale(2.0))?, &b, strength)?)?
        .scale(2.0);
    let rhs = a.dot(&b)?.dealiased().scale(-strength);
    v.push(Verdict::at_most("B cancellation identity", lhs.sub(&rhs)?.max_abs() / rhs.max_abs(), 1e-8));
    Ok(v)
}

pub fn run_criterion(id: u8) -> CriterionResult {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => dispersion(),
        2 => Ok(scenario_verdicts(evaluate(&preset(ScenarioKind::Ode)), "")),
        3 => blowup(),
        4 => madelung_consistency(),
        5 => Ok(scenario_verdicts(evaluate(&preset(ScenarioKind::Normalform)), "")),
        6 => Ok(scenario_verdicts(evaluate(&preset(ScenarioKind::Resonance)), "")),
        7 => conservation(),
        8 => operator_algebra(),
        9 => Ok(scenario_verdicts(evaluate(&preset(ScenarioKind::Lifespan)), "")),
        _ => Ok(vec![Verdict::failed("criterion", &format!("no criterion {id}"))]),
    };
    let verdicts = outcome.unwrap_or_else(|e| vec![Verdict::failed(title, &e.to_string())]);
    CriterionResult { id, title, verdicts, seconds: start.elapsed().as_secs_f64() }
}

/// Run every criterion and fold the verdicts into one report.
pub fn run_all(mut on_result: impl FnMut(&CriterionResult)) -> ScenarioReport {
    let start = Instant::now();
    let mut rep = ScenarioReport::new("verify", String::new());
    for (id, _) in CRITERIA {
        let r = run_criterion(id);
        on_result(&r);
        rep.verdicts.extend(r.verdicts.into_iter().map(|mut v| {
            v.name = format!("[{}] {}", r.id, v.name);
            v
        }));
    }
    rep.wall_clock_seconds = start.elapsed().as_secs_f64();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_algebra_passes() {
        let r = run_criterion(8);
        assert!(r.passed(), "{}", r.line());
    }

    #[test]
    fn unknown_criterion_fails() {
        assert!(!run_criterion(42).passed());
    }
}
