use thiserror::Error;

/// Errors raised by the simulation kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("component mismatch: expected {expected} component(s), got {found}")]
    ComponentMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("inverse multiplier applied to a field with non-zero mean mode (|mean| = {0:e})")]
    NonZeroMeanMode(f64),

    #[error("bilinear quadrature did not converge: last relative change {change:e} with {nodes} nodes")]
    QuadratureNonConvergence { change: f64, nodes: usize },

    #[error("vacuum breach: min density {min:e} <= floor {floor:e}")]
    Vacuum { min: f64, floor: f64 },

    #[error("density {value:e} outside admissible window [{lo:e}, {hi:e}]")]
    DensityOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("invalid constitutive law: {0}")]
    InvalidLaw(String),

    #[error("normal form inversion did not contract after {iterations} iterations (step {step:e})")]
    NormalFormDivergence { iterations: usize, step: f64 },

    #[error("non-finite values encountered {0}")]
    NonFinite(String),

    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },

    #[error("derivative order {order} too high for grid (max {max})")]
    DerivativeOrder { order: u32, max: u32 },

    #[error("fit window contains {0} valid samples, need at least 6")]
    FitWindow(usize),

    #[error("gauge function invalid: phi_tilde^2 = {value:e} at rho = {rho:e}")]
    GaugeInvalid { rho: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
