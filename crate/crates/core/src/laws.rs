//! Capillarity `K(rho)`, pressure `g(rho)` and the derived quantities
//! `a(rho) = sqrt(rho K(rho))` and `l(rho) = int_1^rho sqrt(K(r)/r) dr`.
//!
//! Laws are normalised around the reference density `rho = 1`:
//! `a(1) = 1` (equivalently `K(1) = 1`) and `g'(1) = 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Capillarity {
    /// `K = 1/rho`, quantum hydrodynamics.
    Quantum,
    /// `K = 1`.
    Constant,
    /// `K = rho`.
    Linear,
    /// `K = sum_j c_j (rho - 1)^j`.
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Pressure {
    /// `g = rho^2 - 1`.
    Quadratic,
    /// `g = sum_j c_j (rho - 1)^j`.
    Polynomial { coefficients: Vec<f64> },
}

impl Default for Pressure {
    fn default() -> Self {
        Self::Quadratic
    }
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &cj| acc * x + cj)
}

fn poly_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, &cj)| acc * x + j as f64 * cj)
}

fn poly_antideriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (j, &cj)| acc * x + cj / (j + 1) as f64)
        * x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveLaws {
    capillarity: Capillarity,
    pressure: Pressure,
    rho_floor: f64,
    rho_ceil: f64,
}

impl ConstitutiveLaws {
    pub const DEFAULT_FLOOR: f64 = 1e-6;
    pub const DEFAULT_CEIL: f64 = 1e6;

    pub fn new(capillarity: Capillarity, pressure: Pressure) -> Result<Self> {
        Self::with_window(capillarity, pressure, Self::DEFAULT_FLOOR, Self::DEFAULT_CEIL)
    }

    pub fn with_window(capillarity: Capillarity, pressure: Pressure, rho_floor: f64, rho_ceil: f64) -> Result<Self> {
        if !(rho_floor > 0.0 && rho_floor < 1.0 && rho_ceil > 1.0) {
            return Err(Error::InvalidLaw(format!(
                "density window [{rho_floor}, {rho_ceil}] must bracket 1 with a positive floor"
            )));
        }
        if let Capillarity::Polynomial { coefficients } = &capillarity {
            if coefficients.is_empty() {
                return Err(Error::InvalidLaw("empty capillarity polynomial".into()));
            }
        }
        if let Pressure::Polynomial { coefficients } = &pressure {
            if coefficients.is_empty() {
                return Err(Error::InvalidLaw("empty pressure polynomial".into()));
            }
        }
        let laws = Self { capillarity, pressure, rho_floor, rho_ceil };
        let a1 = laws.a(1.0);
        if (a1 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidLaw(format!("a(1) = {a1}, expected 1")));
        }
        let gp1 = laws.g_prime(1.0);
        if (gp1 - 2.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidLaw(format!("g'(1) = {gp1}, expected 2")));
        }
        Ok(laws)
    }

    pub fn quantum() -> Self {
        Self::new(Capillarity::Quantum, Pressure::Quadratic).expect("normalised")
    }

    pub fn constant() -> Self {
        Self::new(Capillarity::Constant, Pressure::Quadratic).expect("normalised")
    }

    pub fn linear() -> Self {
        Self::new(Capillarity::Linear, Pressure::Quadratic).expect("normalised")
    }

    /// Look up a named capillarity law with the default pressure.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "quantum" => Ok(Self::quantum()),
            "constant" => Ok(Self::constant()),
            "linear" => Ok(Self::linear()),
            other => Err(Error::InvalidLaw(format!("unknown law '{other}'"))),
        }
    }

    pub fn capillarity(&self) -> &Capillarity {
        &self.capillarity
    }

    pub fn pressure(&self) -> &Pressure {
        &self.pressure
    }

    pub fn rho_floor(&self) -> f64 {
        self.rho_floor
    }

    pub fn rho_ceil(&self) -> f64 {
        self.rho_ceil
    }

    pub fn is_quantum(&self) -> bool {
        self.capillarity == Capillarity::Quantum
    }

    pub fn check_density(&self, rho: f64) -> Result<()> {
        if !(rho > self.rho_floor) {
            return Err(Error::Vacuum { min: rho, floor: self.rho_floor });
        }
        if rho > self.rho_ceil {
            return Err(Error::DensityOutOfRange { value: rho, lo: self.rho_floor, hi: self.rho_ceil });
        }
        Ok(())
    }

    pub fn k(&self, rho: f64) -> f64 {
        match &self.capillarity {
            Capillarity::Quantum => 1.0 / rho,
            Capillarity::Constant => 1.0,
            Capillarity::Linear => rho,
            Capillarity::Polynomial { coefficients } => poly_eval(coefficients, rho - 1.0),
        }
    }

    pub fn k_prime(&self, rho: f64) -> f64 {
        match &self.capillarity {
            Capillarity::Quantum => -1.0 / (rho * rho),
            Capillarity::Constant => 0.0,
            Capillarity::Linear => 1.0,
            Capillarity::Polynomial { coefficients } => poly_deriv(coefficients, rho - 1.0),
        }
    }

    pub fn g(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Quadratic => rho * rho - 1.0,
            Pressure::Polynomial { coefficients } => poly_eval(coefficients, rho - 1.0),
        }
    }

    pub fn g_prime(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Quadratic => 2.0 * rho,
            Pressure::Polynomial { coefficients } => poly_deriv(coefficients, rho - 1.0),
        }
    }

    /// `dg/dl = rho g'(rho) / a(rho)`, so that `grad g(rho) = (dg/dl) w`.
    /// Equals `g'(1) = 2` at the reference density.
    pub fn g_prime_l(&self, rho: f64) -> f64 {
        self.g_prime(rho) * rho / self.a(rho)
    }

    /// `G(rho) = int_1^rho (g(s) - g(1)) ds`.
    pub fn pressure_potential(&self, rho: f64) -> f64 {
        let g1 = self.g(1.0);
        match &self.pressure {
            Pressure::Quadratic => (rho.powi(3) - 1.0) / 3.0 - (rho - 1.0) - g1 * (rho - 1.0),
            Pressure::Polynomial { coefficients } => poly_antideriv(coefficients, rho - 1.0) - g1 * (rho - 1.0),
        }
    }

    pub fn a(&self, rho: f64) -> f64 {
        match &self.capillarity {
            Capillarity::Quantum => 1.0,
            Capillarity::Constant => rho.sqrt(),
            Capillarity::Linear => rho,
            Capillarity::Polynomial { .. } => (rho * self.k(rho)).sqrt(),
        }
    }

    pub fn a_prime(&self, rho: f64) -> f64 {
        match &self.capillarity {
            Capillarity::Quantum => 0.0,
            Capillarity::Constant => 0.5 / rho.sqrt(),
            Capillarity::Linear => 1.0,
            Capillarity::Polynomial { .. } => (self.k(rho) + rho * self.k_prime(rho)) / (2.0 * self.a(rho)),
        }
    }

    /// Strength `a'(1) - 1` of the normal-form pseudo-product.
    pub fn normal_form_strength(&self) -> f64 {
        self.a_prime(1.0) - 1.0
    }

    /// `dl/drho = sqrt(K/rho)`.
    pub fn dl_drho(&self, rho: f64) -> f64 {
        (self.k(rho) / rho).sqrt()
    }

    /// The primitive `l(rho)`.
    pub fn l(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(match &self.capillarity {
            Capillarity::Quantum => rho.ln(),
            Capillarity::Constant => 2.0 * (rho.sqrt() - 1.0),
            Capillarity::Linear => rho - 1.0,
            Capillarity::Polynomial { .. } => self.l_numeric(rho)?,
        })
    }

    fn l_numeric(&self, rho: f64) -> Result<f64> {
        let bad = std::cell::Cell::new(None);
        let integrand = |r: f64| {
            let k = self.k(r);
            if k <= 0.0 {
                bad.set(Some(r));
                0.0
            } else {
                (k / r).sqrt()
            }
        };
        let out = quadrature::integrate(integrand, 1.0, rho, 1e-13);
        if let Some(r) = bad.get() {
            return Err(Error::InvalidLaw(format!("K({r}) <= 0")));
        }
        Ok(out.integral)
    }

    /// Inverse of [`Self::l`].
    pub fn rho_from_l(&self, l: f64) -> Result<f64> {
        let rho = match &self.capillarity {
            Capillarity::Quantum => l.exp(),
            Capillarity::Constant => (1.0 + 0.5 * l).powi(2),
            Capillarity::Linear => 1.0 + l,
            Capillarity::Polynomial { .. } => self.rho_from_l_newton(l)?,
        };
        if matches!(self.capillarity, Capillarity::Constant) && 1.0 + 0.5 * l <= 0.0 {
            return Err(Error::Vacuum { min: 0.0, floor: self.rho_floor });
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite(format!("density from l = {l}")));
        }
        self.check_density(rho)?;
        Ok(rho)
    }

    fn rho_from_l_newton(&self, target: f64) -> Result<f64> {
        let mut rho: f64 = 1.0 + target;
        if rho <= self.rho_floor {
            rho = 0.5;
        }
        for _ in 0..100 {
            let f = self.l_numeric(rho)? - target;
            let step = f / self.dl_drho(rho);
            let mut next = rho - step;
            if next <= 0.0 {
                next = 0.5 * rho;
            }
            if (next - rho).abs() <= 1e-15 * rho.max(1.0) {
                return Ok(next);
            }
            rho = next;
            if rho < self.rho_floor {
                return Err(Error::Vacuum { min: rho, floor: self.rho_floor });
            }
        }
        Err(Error::InvalidLaw(format!("l inversion did not converge for l = {target}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_laws_are_normalised() {
        for law in [ConstitutiveLaws::quantum(), ConstitutiveLaws::constant(), ConstitutiveLaws::linear()] {
            assert!((law.a(1.0) - 1.0).abs() < 1e-14);
            assert!((law.g_prime(1.0) - 2.0).abs() < 1e-14);
            assert_eq!(law.l(1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_unnormalised_laws() {
        let bad_k = Capillarity::Polynomial { coefficients: vec![2.0] };
        assert!(ConstitutiveLaws::new(bad_k, Pressure::Quadratic).is_err());
        let bad_g = Pressure::Polynomial { coefficients: vec![0.0, 3.0] };
        assert!(ConstitutiveLaws::new(Capillarity::Constant, bad_g).is_err());
    }

    #[test]
    fn closed_form_primitives() {
        let q = ConstitutiveLaws::quantum();
        assert!((q.l(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        let c = ConstitutiveLaws::constant();
        assert!((c.l(4.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn numeric_primitive_matches_closed_forms() {
        // K = 1 written as a polynomial
        let p = ConstitutiveLaws::new(Capillarity::Polynomial { coefficients: vec![1.0] }, Pressure::Quadratic).unwrap();
        let c = ConstitutiveLaws::constant();
        for rho in [0.01, 0.5, 1.3, 4.0, 50.0] {
            let a = p.l(rho).unwrap();
            let b = c.l(rho).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs().max(1e-3), "rho={rho}: {a} vs {b}");
            let back = p.rho_from_l(a).unwrap();
            assert!((back - rho).abs() < 1e-10 * rho);
        }
        // K = rho, also as polynomial 1 + (rho - 1)
        let lp = ConstitutiveLaws::new(Capillarity::Polynomial { coefficients: vec![1.0, 1.0] }, Pressure::Quadratic).unwrap();
        assert!((lp.l(2.5).unwrap() - 1.5).abs() < 1e-11);
        assert!((lp.a_prime(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn l_is_increasing_and_invertible() {
        for law in [ConstitutiveLaws::quantum(), ConstitutiveLaws::constant(), ConstitutiveLaws::linear()] {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..200 {
                let rho = 0.02 * i as f64;
                let l = law.l(rho).unwrap();
                assert!(l > prev);
                prev = l;
                assert!((law.rho_from_l(l).unwrap() - rho).abs() < 1e-13 * rho.max(1.0));
            }
        }
    }

    #[test]
    fn vacuum_is_rejected() {
        let q = ConstitutiveLaws::quantum();
        assert!(matches!(q.l(1e-7), Err(Error::Vacuum { .. })));
        assert!(matches!(q.rho_from_l(-20.0), Err(Error::Vacuum { .. })));
    }

    #[test]
    fn pressure_potential_is_primitive_of_g() {
        let laws = [
            ConstitutiveLaws::quantum(),
            ConstitutiveLaws::new(Capillarity::Constant, Pressure::Polynomial { coefficients: vec![0.1, 2.0, 0.7, -0.2] }).unwrap(),
        ];
        for law in laws {
            assert_eq!(law.pressure_potential(1.0), 0.0);
            for rho in [0.3, 0.9, 1.7] {
                let h = 1e-6;
                let fd = (law.pressure_potential(rho + h) - law.pressure_potential(rho - h)) / (2.0 * h);
                assert!((fd - (law.g(rho) - law.g(1.0))).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pressure_derivative_in_l() {
        for law in [ConstitutiveLaws::quantum(), ConstitutiveLaws::constant(), ConstitutiveLaws::linear()] {
            assert!((law.g_prime_l(1.0) - 2.0).abs() < 1e-15);
            for rho in [0.4, 1.3, 2.2] {
                let h = 1e-6;
                let fd = (law.g(law.rho_from_l(law.l(rho).unwrap() + h).unwrap())
                    - law.g(law.rho_from_l(law.l(rho).unwrap() - h).unwrap()))
                    / (2.0 * h);
                assert!((fd - law.g_prime_l(rho)).abs() < 1e-7, "rho={rho}");
            }
        }
    }

    #[test]
    fn normal_form_strengths() {
        assert_eq!(ConstitutiveLaws::quantum().normal_form_strength(), -1.0);
        assert_eq!(ConstitutiveLaws::constant().normal_form_strength(), -0.5);
        assert_eq!(ConstitutiveLaws::linear().normal_form_strength(), 0.0);
    }
}
