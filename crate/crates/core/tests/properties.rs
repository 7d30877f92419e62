use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use korteweg_core::diagnostics::{decay_fit, norm, resonance_eval, NormSpec, Sign};
use korteweg_core::gp::{gp_evolve, WaveFunction};
use korteweg_core::model::{from_extended, to_extended};
use korteweg_core::multiplier::{helmholtz_split, semigroup};
use korteweg_core::ode::{lifespan, OdeSystem};
use korteweg_core::solver::{simulate, SolverConfig, Termination};
use korteweg_core::{ConstitutiveLaws, EKState, Field, FourierGrid, ValueKind};

fn trig_field(grid: &Arc<FourierGrid>, coeffs: &[(f64, f64)]) -> Field {
    let l = grid.lengths()[0];
    Field::scalar_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let y = 2.0 * PI * (k + 1) as f64 * x[0] / l;
                a * y.cos() + b * y.sin()
            })
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_matches_physical_quadrature(coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let g = FourierGrid::uniform(1, 64, 7.0).unwrap();
        let f = trig_field(&g, &coeffs);
        let physical = (f.real(0).iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt();
        let spectral = norm(&f, &NormSpec::l2()).unwrap();
        prop_assert!((physical - spectral).abs() <= 1e-12 * physical.max(1e-300));
    }

    #[test]
    fn sobolev_norms_increase_with_order(coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let g = FourierGrid::uniform(1, 64, 7.0).unwrap();
        let f = trig_field(&g, &coeffs);
        let a = norm(&f, &NormSpec::sobolev(1)).unwrap();
        let b = norm(&f, &NormSpec::sobolev(2)).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn group_law(t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
        let g = FourierGrid::uniform(1, 64, 20.0).unwrap();
        let f = Field::from_fn_complex(&g, |x| Complex64::new((-(x[0] - 10.0).powi(2)).exp(), (x[0] * PI / 10.0).sin()));
        let a = semigroup(&semigroup(&f, t1), t2);
        let b = semigroup(&f, t1 + t2);
        prop_assert!(a.sub(&b).unwrap().norm_l2() <= 1e-12 * f.norm_l2());
    }

    #[test]
    fn minus_minus_phase_is_symmetric(xi in -4.0f64..4.0, eta in -4.0f64..4.0, zeta in -4.0f64..4.0) {
        let x = [xi, zeta];
        let e = [eta, -zeta];
        let swapped = [xi - eta, 2.0 * zeta];
        let a = resonance_eval(&x, &e, (Sign::Minus, Sign::Minus));
        let b = resonance_eval(&x, &swapped, (Sign::Minus, Sign::Minus));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn helmholtz_parts_recombine() {
    let g = FourierGrid::uniform(2, 32, 10.0).unwrap();
    let u = Field::from_fn(&g, 2, |x| vec![(0.6 * x[0]).sin() * (1.2 * x[1]).cos(), (0.6 * x[1] + 0.2).cos()]);
    let (p, q) = helmholtz_split(&u).unwrap();
    let mean_free = Field::from_spectral(
        &g,
        ValueKind::Real,
        u.spectral()
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c[0] = Complex64::new(0.0, 0.0);
                c
            })
            .collect(),
    );
    assert!(p.add(&q).unwrap().sub(&mean_free).unwrap().norm_l2() <= 1e-12 * u.norm_l2());
}

#[test]
fn decay_fit_recovers_a_planted_power() {
    let series: Vec<(f64, f64)> = (0..10).map(|i| 2f64.powi(i)).map(|t| (t, 7.0 * t.powf(-1.5))).collect();
    let fit = decay_fit(&series, (1.0, 1000.0)).unwrap();
    assert!((fit.slope + 1.5).abs() <= 1e-3, "{fit:?}");
    assert!(decay_fit(&series[..4], (1.0, 1000.0)).is_err());
}

#[test]
fn constant_state_reaches_the_end_unchanged() {
    let g = FourierGrid::uniform(1, 32, 10.0).unwrap();
    let laws = ConstitutiveLaws::quantum();
    let cfg = SolverConfig { dt: 0.01, t_end: 1.0, snapshot_stride: 25, ..Default::default() };
    let traj = simulate(&EKState::rest(&g), &cfg, &laws).unwrap();
    assert_eq!(traj.termination, Termination::ReachedEnd);
    for s in &traj.snapshots {
        let e = from_extended(s, &laws).unwrap();
        assert!(e.rho.sub(&Field::constant(&g, 1.0)).unwrap().max_abs() <= 1e-14);
        assert!(e.u.max_abs() <= 1e-14);
    }
}

#[test]
fn extended_round_trip_for_every_law() {
    let g = FourierGrid::uniform(1, 64, 4.0 * PI).unwrap();
    let rho = Field::scalar_fn(&g, |x| 1.0 + 0.2 * (x[0] / 2.0).cos());
    let u = Field::scalar_fn(&g, |x| 0.1 * (x[0] / 2.0).sin());
    let s = EKState::new(rho, u, 0.0).unwrap();
    for laws in [ConstitutiveLaws::quantum(), ConstitutiveLaws::constant(), ConstitutiveLaws::linear()] {
        let back = from_extended(&to_extended(&s, &laws).unwrap(), &laws).unwrap();
        assert!(back.rho.sub(&s.rho).unwrap().max_abs() <= 1e-10);
    }
}

#[test]
fn lifespan_times_delta_is_nearly_constant_over_a_decade() {
    let x0 = Complex64::new(0.05, 0.0);
    let products: Vec<f64> = [0.1, 0.05, 0.025, 0.0125, 0.01]
        .iter()
        .map(|&d| lifespan(OdeSystem::Full, x0, Complex64::new(d, 0.0), 1e6, 1e5).unwrap().t_obs * d)
        .collect();
    let (lo, hi) = products.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    assert!(hi / lo <= 1.3, "{products:?}");
}

#[test]
fn conjugation_reverses_the_wave_flow() {
    let g = FourierGrid::uniform(1, 128, 40.0).unwrap();
    let laws = ConstitutiveLaws::quantum();
    let psi = Field::from_fn_complex(&g, |x| {
        Complex64::new(1.0 - 0.3 * (-(x[0] - 20.0).powi(2) / 4.0).exp(), 0.1 * (x[0] * PI / 20.0).sin())
    });
    let w0 = WaveFunction::new(psi, 0.0).unwrap();
    let fwd = gp_evolve(&w0, 1e-3, 0.5, &laws).unwrap();
    let rewound = WaveFunction { psi: fwd.psi.conj(), time: 0.0 };
    let back = gp_evolve(&rewound, 1e-3, 0.5, &laws).unwrap().conj();
    assert!(back.psi.sub(&w0.psi).unwrap().norm_l2() <= 1e-9 * w0.psi.norm_l2());
}
