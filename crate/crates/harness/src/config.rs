//! Scenario configuration: one JSON document, versioned, unknown keys rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use korteweg_core::diagnostics::NormSpec;
use korteweg_core::gp::BlowupConfig;
use korteweg_core::laws::{Capillarity, ConstitutiveLaws, Pressure};
use korteweg_core::solver::SolverConfig;
use korteweg_core::FourierGrid;

use crate::error::{HarnessError, Result};
use crate::initial::InitialDataSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Dispersion,
    Lifespan,
    Blowup,
    Normalform,
    Resonance,
    Ode,
    Simulate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        Self::Dispersion,
        Self::Lifespan,
        Self::Blowup,
        Self::Normalform,
        Self::Resonance,
        Self::Ode,
        Self::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dispersion => "dispersion",
            Self::Lifespan => "lifespan",
            Self::Blowup => "blowup",
            Self::Normalform => "normalform",
            Self::Resonance => "resonance",
            Self::Ode => "ode",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, n: 256, length: 32.0 * PI }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<FourierGrid>> {
        Ok(FourierGrid::uniform(self.dim, self.n, self.length)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawConfig {
    pub capillarity: Capillarity,
    pub pressure: Pressure,
    pub rho_floor: f64,
    pub rho_ceil: f64,
}

impl Default for LawConfig {
    fn default() -> Self {
        Self {
            capillarity: Capillarity::Quantum,
            pressure: Pressure::Quadratic,
            rho_floor: ConstitutiveLaws::DEFAULT_FLOOR,
            rho_ceil: ConstitutiveLaws::DEFAULT_CEIL,
        }
    }
}

impl LawConfig {
    pub fn build(&self) -> Result<ConstitutiveLaws> {
        Ok(ConstitutiveLaws::with_window(
            self.capillarity.clone(),
            self.pressure.clone(),
            self.rho_floor,
            self.rho_ceil,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write every n-th retained solver state as a snapshot; 0 writes none.
    pub snapshot_stride: usize,
    pub gauge_orders: Vec<u32>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), snapshot_stride: 0, gauge_orders: vec![0, 1] }
    }
}

/// Linear flow of a band-limited annular wave packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionConfig {
    /// Radius of the spectral annulus.
    pub xi0: f64,
    pub sigma: f64,
    pub cutoff: f64,
    pub norm: NormSpec,
    pub t_first: f64,
    pub t_last: f64,
    /// Geometrically spaced sample times.
    pub samples: usize,
    /// Relative tolerance on the fitted slope.
    pub tolerance: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            xi0: 1.5,
            sigma: 0.4,
            cutoff: 2.7,
            norm: NormSpec::max(),
            t_first: 10.0,
            t_last: 100.0,
            samples: 12,
            tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifespanConfig {
    pub deltas: Vec<f64>,
    /// Stop once the transport norm exceeds this multiple of its initial value.
    pub envelope_factor: f64,
    /// Time between envelope checks.
    pub check_interval: f64,
    /// Bound on `||Pu||_2 / ||u||_2` for irrotational runs.
    pub leak_tolerance: f64,
}

impl Default for LifespanConfig {
    fn default() -> Self {
        Self { deltas: vec![0.04, 0.02, 0.01, 0.0], envelope_factor: 2.0, check_interval: 4.0, leak_tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormConfig {
    pub epsilons: Vec<f64>,
    pub target_slope: f64,
    pub tolerance: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self { epsilons: vec![0.02, 0.01, 0.005], target_slope: 3.0, tolerance: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    /// Values of `eps = |eta|` tabulated.
    pub scales: Vec<f64>,
    /// Scale at which the ratio is judged.
    pub check_scale: f64,
    pub tolerance: f64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { scales: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3], check_scale: 1e-2, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    pub blow_cap: f64,
    pub t_max: f64,
    pub comparison_y0: f64,
    pub comparison_tolerance: f64,
    pub ansatz_epsilon: f64,
    pub ansatz_delta: f64,
    pub tol: f64,
    pub target_slope: f64,
    pub slope_tolerance: f64,
    /// Start from a complex `x0 = i eps` instead of the real `x0 = eps`.
    pub complex: bool,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            deltas: vec![0.1, 0.05, 0.025, 0.0125],
            blow_cap: korteweg_core::ode::DEFAULT_BLOW_CAP,
            t_max: 1e4,
            comparison_y0: 0.1,
            comparison_tolerance: 0.01,
            ansatz_epsilon: 1.0 / 16.0,
            ansatz_delta: 1.0 / 16.0,
            tol: 1e-10,
            target_slope: -1.0,
            slope_tolerance: 0.15,
            complex: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub scenario: ScenarioKind,
    pub grid: GridConfig,
    pub law: LawConfig,
    pub initial: InitialDataSpec,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub dispersion: DispersionConfig,
    pub lifespan: LifespanConfig,
    pub blowup: BlowupConfig,
    pub normalform: NormalFormConfig,
    pub resonance: ResonanceConfig,
    pub ode: OdeConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        preset(ScenarioKind::Simulate)
    }
}

/// Ready-to-run configuration for each scenario.
pub fn preset(kind: ScenarioKind) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        version: SCHEMA_VERSION,
        scenario: kind,
        grid: GridConfig::default(),
        law: LawConfig::default(),
        initial: InitialDataSpec { epsilon: 0.1, seed: 1, ..Default::default() },
        solver: SolverConfig { dt: 1e-2, t_end: 2.0, snapshot_stride: 10, ..Default::default() },
        output: OutputConfig::default(),
        dispersion: DispersionConfig::default(),
        lifespan: LifespanConfig::default(),
        blowup: BlowupConfig::default(),
        normalform: NormalFormConfig::default(),
        resonance: ResonanceConfig::default(),
        ode: OdeConfig::default(),
    };
    match kind {
        ScenarioKind::Dispersion => {
            c.grid = GridConfig { dim: 1, n: 4096, length: 400.0 * PI };
        }
        ScenarioKind::Lifespan => {
            c.grid = GridConfig { dim: 2, n: 128, length: 32.0 * PI };
            c.initial = InitialDataSpec {
                epsilon: 0.05,
                band_limit: 0.5,
                seed: 3,
                transport_norm: NormSpec { k: 2, p: 4.0, homogeneous: true },
                ..Default::default()
            };
            c.solver = SolverConfig { dt: 2.0, t_end: 1200.0, ..Default::default() };
        }
        ScenarioKind::Normalform => {
            c.grid = GridConfig { dim: 1, n: 128, length: 16.0 * PI };
            c.law.capillarity = Capillarity::Constant;
        }
        _ => {}
    }
    c
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(config_err)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical pretty-printed JSON; parsing it back reproduces it byte for byte.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serialisable")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(config_err(format!("schema version {} (expected {SCHEMA_VERSION})", self.version)));
        }
        Ok(())
    }

    /// Apply `a.b.c=value`. The value is read as JSON when it parses, else as a string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, raw) = spec.split_once('=').ok_or_else(|| config_err(format!("override '{spec}' lacks '='")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|m| m.get_mut(part))
                .ok_or_else(|| config_err(format!("unknown key '{key}'")))?;
        }
        *slot = value;
        let next: Self = serde_json::from_value(doc).map_err(|e| config_err(format!("override '{spec}': {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_round_trips_byte_identically() {
        for kind in ScenarioKind::ALL {
            let text = preset(kind).to_json();
            let back = ScenarioConfig::from_json(&text).unwrap();
            assert_eq!(back.to_json(), text, "{}", kind.name());
            assert_eq!(back, preset(kind));
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(preset(ScenarioKind::Ode)).unwrap();
        v["ode"]["epsilonn"] = Value::from(0.1);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = ScenarioConfig::from_json(r#"{"version": 1, "scenario": "resonance"}"#).unwrap();
        assert_eq!(c.scenario, ScenarioKind::Resonance);
        assert_eq!(c.resonance, ResonanceConfig::default());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut c = preset(ScenarioKind::Simulate);
        c.apply_override("grid.n=64").unwrap();
        c.apply_override("law.capillarity={\"kind\":\"constant\"}").unwrap();
        c.apply_override("output.dir=runs/a").unwrap();
        c.apply_override("dispersion.norm.p=\"inf\"").unwrap();
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.law.capillarity, Capillarity::Constant);
        assert_eq!(c.output.dir, PathBuf::from("runs/a"));
        assert!(c.apply_override("grid.nn=3").is_err());
        assert!(c.apply_override("grid.n=-3").is_err());
        assert!(c.apply_override("version=2").is_err());
    }

    #[test]
    fn infinite_exponent_survives_the_round_trip() {
        let c = preset(ScenarioKind::Dispersion);
        assert!(c.to_json().contains("\"inf\""));
        assert!(ScenarioConfig::from_json(&c.to_json()).unwrap().dispersion.norm.p.is_infinite());
    }

    #[test]
    fn digest_tracks_content() {
        let a = preset(ScenarioKind::Ode);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.ode.epsilon = 0.04;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
