//! Run configuration: one human-editable TOML file per run. The whole
//! parsed tree is echoed into the report for provenance, and it must
//! round-trip serialize -> parse without loss.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<ScatteringConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockConfig>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    SoftSphere,
    Gaussian,
    Zero,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_scatter_points")]
    pub n_points: usize,
}

fn default_r_max() -> f64 {
    6.0
}
fn default_scatter_points() -> usize {
    8192
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self { r_max: default_r_max(), n_points: default_scatter_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub ell_list: Vec<f64>,
    pub n_scale: f64,
    /// optional second axis for the scaling-exponent sweep
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    #[serde(default = "default_chi")]
    pub chi: ChiKind,
    #[serde(default = "default_table_points")]
    pub table_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiKind {
    Smoothstep,
    Cosine,
}

fn default_chi() -> ChiKind {
    ChiKind::Smoothstep
}
fn default_table_points() -> usize {
    4096
}

impl ChiKind {
    pub fn to_profile(self) -> bgsp_core::scattering::ChiProfile {
        match self {
            ChiKind::Smoothstep => bgsp_core::scattering::ChiProfile::Smoothstep,
            ChiKind::Cosine => bgsp_core::scattering::ChiProfile::CosineTaper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct TrapConfig {
    pub kind: TrapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    Harmonic,
    Quartic,
}

impl TrapConfig {
    pub fn to_potential(&self) -> bgsp_core::gp::ExternalPotential {
        match self.kind {
            TrapKind::Harmonic => bgsp_core::gp::ExternalPotential::Harmonic,
            TrapKind::Quartic => bgsp_core::gp::ExternalPotential::Quartic {
                strength: self.strength.unwrap_or(1.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    pub a0: A0Source,
    #[serde(default = "default_r_box")]
    pub r_box: f64,
    #[serde(default = "default_gp_points")]
    pub n_points: usize,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
}

fn default_r_box() -> f64 {
    7.0
}
fn default_gp_points() -> usize {
    1024
}
fn default_gp_tol() -> f64 {
    1e-9
}

/// Either a fixed scattering length or "from_scattering".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum A0Source {
    Fixed(f64),
    Named(String),
}

impl A0Source {
    pub fn is_from_scattering(&self) -> Result<bool, CliError> {
        match self {
            A0Source::Fixed(v) if *v >= 0.0 => Ok(false),
            A0Source::Fixed(v) => Err(CliError::Config(format!("a0 = {} must be nonnegative", v))),
            A0Source::Named(s) if s == "from_scattering" => Ok(true),
            A0Source::Named(s) => {
                Err(CliError::Config(format!("unknown a0 source {:?} (want a number or \"from_scattering\")", s)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: BasisKindConfig,
    /// torus momentum cutoff in units of 2 pi
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_over_2pi: Option<f64>,
    /// radial angular momentum channels
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<usize>>,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKindConfig {
    Torus,
    Radial,
}

fn default_n_modes() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub lambda: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    pub d: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub n_max_list: Vec<u32>,
    #[serde(default = "default_fock_levels")]
    pub levels: usize,
}

fn default_fock_levels() -> usize {
    8
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {}", path.display(), e)))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("config parse error: {}", e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.potential {
            match p.kind {
                PotentialKind::SoftSphere | PotentialKind::Gaussian => {
                    let r = p.radius.ok_or_else(|| CliError::Config("potential.radius missing".into()))?;
                    let v0 = p.v0.ok_or_else(|| CliError::Config("potential.v0 missing".into()))?;
                    if r <= 0.0 || v0 < 0.0 {
                        return Err(CliError::Config("potential parameters out of range".into()));
                    }
                }
                PotentialKind::Csv => {
                    let path = p.path.as_ref().ok_or_else(|| CliError::Config("potential.path missing".into()))?;
                    if !Path::new(path).exists() {
                        return Err(CliError::Config(format!("potential file {} does not exist", path)));
                    }
                }
                PotentialKind::Zero => {}
            }
        }
        if let Some(s) = &self.scattering {
            if s.r_max <= 0.0 || s.n_points < 512 {
                return Err(CliError::Config("scattering grid out of range (n_points >= 512)".into()));
            }
        }
        if let Some(t) = &self.truncation {
            if t.ell_list.is_empty() || t.ell_list.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                return Err(CliError::Config("truncation.ell_list entries must lie in (0, 1]".into()));
            }
            if t.n_scale < 1.0 {
                return Err(CliError::Config("truncation.n_scale must be >= 1".into()));
            }
        }
        if let Some(g) = &self.gp {
            g.a0.is_from_scattering()?;
            if g.r_box <= 0.0 || g.n_points < 64 || g.tol <= 0.0 {
                return Err(CliError::Config("gp section out of range".into()));
            }
        }
        if let Some(b) = &self.basis {
            match b.kind {
                BasisKindConfig::Torus => {
                    let p = b.p_max_over_2pi.ok_or_else(|| CliError::Config("basis.p_max_over_2pi missing".into()))?;
                    if p < 1.0 {
                        return Err(CliError::Config("torus cutoff must be >= 1 (in units of 2 pi)".into()));
                    }
                }
                BasisKindConfig::Radial => {
                    if b.channels.as_ref().is_none_or(|c| c.is_empty()) {
                        return Err(CliError::Config("basis.channels missing for radial kind".into()));
                    }
                    if b.n_modes < 2 {
                        return Err(CliError::Config("basis.n_modes must be >= 2".into()));
                    }
                }
            }
        }
        if let Some(s) = &self.spectrum {
            if s.lambda < 0.0 {
                return Err(CliError::Config("spectrum.lambda must be nonnegative".into()));
            }
        }
        if let Some(f) = &self.fock {
            let m = f.d.len();
            if m == 0 || m > 4 {
                return Err(CliError::Config("fock.d must be an m x m matrix with m <= 4".into()));
            }
            if f.d.iter().any(|r| r.len() != m) || f.k.len() != m || f.k.iter().any(|r| r.len() != m) {
                return Err(CliError::Config("fock.d / fock.k must be square of equal size".into()));
            }
            if f.n_max_list.is_empty() {
                return Err(CliError::Config("fock.n_max_list must be nonempty".into()));
            }
        }
        Ok(())
    }

    /// serialize -> parse -> compare; the lossless-echo invariant.
    pub fn roundtrips(&self) -> bool {
        toml::to_string(self)
            .ok()
            .and_then(|s| toml::from_str::<RunConfig>(&s).ok())
            .is_some_and(|back| back == *self)
    }
}
