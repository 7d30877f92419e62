//! State representations and lossless conversions between them:
//! primitive `(rho, u)`, extended `(l, w = grad l, u)`, the dispersive
//! variable `psi = Q u + i U^{-1} w` and its normal form.

use std::sync::Arc;

use crate::bilinear::bilinear_b;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::FourierGrid;
use crate::laws::ConstitutiveLaws;
use crate::multiplier::{apply_multiplier, grad, MultiplierSymbol};

/// Primitive variables.
#[derive(Debug, Clone)]
pub struct EKState {
    pub rho: Field,
    pub u: Field,
    pub time: f64,
}

/// Extended variables with `w = grad l`.
#[derive(Debug, Clone)]
pub struct ExtendedState {
    pub l: Field,
    pub w: Field,
    pub u: Field,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct NormalForm {
    /// `Q u + i U^{-1} w_1`.
    pub psi: Field,
    pub w1: Field,
}

#[derive(Debug, Clone)]
pub struct DispersiveVariable {
    /// `Q u + i U^{-1} w`.
    pub psi: Field,
    /// `u - Q u`, i.e. the solenoidal part plus the mean flow.
    pub transport: Field,
    pub normal: Option<NormalForm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionReport {
    pub iterations: usize,
    /// Relative size of the last fixed-point increment.
    pub last_step: f64,
}

pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAX_ITER: usize = 50;

fn check_shape(grid: &Arc<FourierGrid>, f: &Field, comps: usize) -> Result<()> {
    if f.grid() != grid && **f.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    if f.n_components() != comps {
        return Err(Error::ComponentMismatch { expected: comps, found: f.n_components() });
    }
    if !f.is_real() {
        return Err(Error::InvalidArgument("state fields must be real".into()));
    }
    Ok(())
}

impl EKState {
    pub fn new(rho: Field, u: Field, time: f64) -> Result<Self> {
        let grid = rho.grid().clone();
        check_shape(&grid, &rho, 1)?;
        check_shape(&grid, &u, grid.dim())?;
        Ok(Self { rho, u, time })
    }

    /// `rho = 1`, `u = 0`.
    pub fn rest(grid: &Arc<FourierGrid>) -> Self {
        Self {
            rho: Field::constant(grid, 1.0),
            u: Field::zeros(grid, grid.dim(), crate::ValueKind::Real),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.rho.grid()
    }

    pub fn min_density(&self) -> f64 {
        self.rho.real(0).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }
}

impl ExtendedState {
    pub fn new(l: Field, u: Field, time: f64) -> Result<Self> {
        let grid = l.grid().clone();
        check_shape(&grid, &l, 1)?;
        check_shape(&grid, &u, grid.dim())?;
        let w = grad(&l)?;
        Ok(Self { l, w, u, time })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.l.grid()
    }
}

pub fn to_extended(s: &EKState, laws: &ConstitutiveLaws) -> Result<ExtendedState> {
    let min = s.min_density();
    if !(min > laws.rho_floor()) {
        return Err(Error::Vacuum { min, floor: laws.rho_floor() });
    }
    let l = s.rho.real(0).into_iter().map(|r| laws.l(r)).collect::<Result<Vec<_>>>()?;
    ExtendedState::new(Field::real_scalar(s.grid(), l), s.u.clone(), s.time)
}

pub fn from_extended(s: &ExtendedState, laws: &ConstitutiveLaws) -> Result<EKState> {
    let rho = s.l.real(0).into_iter().map(|l| laws.rho_from_l(l)).collect::<Result<Vec<_>>>()?;
    Ok(EKState { rho: Field::real_scalar(s.grid(), rho), u: s.u.clone(), time: s.time })
}

fn imaginary_potential(qu: &Field, w: &Field) -> Result<Field> {
    let uw = apply_multiplier(w, &MultiplierSymbol::Uinv)?;
    Field::from_re_im(qu, &uw)
}

pub fn to_psi(s: &ExtendedState) -> Result<DispersiveVariable> {
    let qu = apply_multiplier(&s.u, &MultiplierSymbol::Q)?;
    let transport = s.u.sub(&qu)?;
    Ok(DispersiveVariable { psi: imaginary_potential(&qu, &s.w)?, transport, normal: None })
}

/// `(Q u, w)` from `psi`.
pub fn from_psi(v: &DispersiveVariable) -> Result<(Field, Field)> {
    split_psi(&v.psi)
}

pub fn split_psi(psi: &Field) -> Result<(Field, Field)> {
    let qu = psi.re();
    let w = apply_multiplier(&psi.im(), &MultiplierSymbol::U)?;
    Ok((qu, w))
}

/// `grad(B[f, f] - B[g, g])`.
fn correction(f: &Field, g: &Field, strength: f64) -> Result<Field> {
    let bf = bilinear_b(f, f, strength)?;
    let bg = bilinear_b(g, g, strength)?;
    grad(&bf.sub(&bg)?)
}

/// `w_1 = w - grad(B[w, w] - B[Q u, Q u])` with strength `a'(1) - 1`.
pub fn normal_form(s: &ExtendedState, laws: &ConstitutiveLaws) -> Result<DispersiveVariable> {
    let mut v = to_psi(s)?;
    let qu = v.psi.re();
    let strength = laws.normal_form_strength();
    let w1 = if strength == 0.0 { s.w.clone() } else { s.w.sub(&correction(&s.w, &qu, strength)?)? };
    let psi = imaginary_potential(&qu, &w1)?;
    v.normal = Some(NormalForm { psi, w1 });
    Ok(v)
}

/// Recover `w` from `w_1` by the iteration `w <- w_1 + grad(B[w, w] - B[Q u, Q u])`.
pub fn invert_normal_form(qu: &Field, w1: &Field, strength: f64) -> Result<(Field, InversionReport)> {
    if strength == 0.0 {
        return Ok((w1.clone(), InversionReport { iterations: 0, last_step: 0.0 }));
    }
    let bq = bilinear_b(qu, qu, strength)?;
    let scale = w1.norm_l2().max(f64::MIN_POSITIVE);
    let mut w = w1.clone();
    let mut prev_step = f64::INFINITY;
    for it in 1..=INVERSION_MAX_ITER {
        let bw = bilinear_b(&w, &w, strength)?;
        let next = w1.add(&grad(&bw.sub(&bq)?)?)?;
        let step = next.sub(&w)?.norm_l2() / scale;
        w = next;
        if !step.is_finite() || (it > 2 && step > prev_step) {
            return Err(Error::NormalFormDivergence { iterations: it, step });
        }
        if step <= INVERSION_TOL {
            return Ok((w, InversionReport { iterations: it, last_step: step }));
        }
        prev_step = step;
    }
    Err(Error::NormalFormDivergence { iterations: INVERSION_MAX_ITER, step: prev_step })
}

/// Residual `R = d_t w_1 + Laplacian(Q u) - grad div((1 - a) Q u)` of the
/// normal-form equation, with `d_t w_1` taken from the exact tendencies.
/// Quadratic terms cancel, so `R` is cubic in the amplitude for
/// irrotational data.
pub fn normal_form_residual(s: &ExtendedState, laws: &ConstitutiveLaws) -> Result<Field> {
    let grid = s.grid().clone();
    let k = crate::solver::rhs_extended(s, laws)?;
    let qu = apply_multiplier(&s.u, &MultiplierSymbol::Q)?;
    let qdu = apply_multiplier(&k.du, &MultiplierSymbol::Q)?;
    let strength = laws.normal_form_strength();
    let mut dw1 = k.dw.clone();
    if strength != 0.0 {
        let bw = bilinear_b(&s.w, &k.dw, strength)?;
        let bq = bilinear_b(&qu, &qdu, strength)?;
        dw1 = dw1.sub(&grad(&bw.sub(&bq)?.scale(2.0))?)?;
    }
    let one_minus_a = s
        .l
        .real(0)
        .iter()
        .map(|&l| laws.rho_from_l(l).map(|r| 1.0 - laws.a(r)))
        .collect::<Result<Vec<f64>>>()?;
    let flux = qu.mul_scalar_field(&Field::real_scalar(&grid, one_minus_a))?;
    let forcing = grad(&crate::multiplier::div(&flux)?)?;
    dw1.add(&crate::multiplier::laplacian(&qu))?.sub(&forcing)
}
