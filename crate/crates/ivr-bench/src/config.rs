//! Benchmark case configuration: versioned TOML files, CLI overrides, and
//! the resolved, validated case description.
//!
//! Precedence is CLI flag > config file > default, where the defaults are
//! the 64x64 rotation setup (dt = 3.37e-3, one full rotation T = 2pi).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ivr_core::fields::VelocityField;
use ivr_core::mesh::BcMode;
use ivr_core::rom::TruncationPolicy;
use serde::Deserialize;

/// Physical regime of the benchmark. The variant fixes the diffusivity and
/// the boundary-condition mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// kappa = 0; Dirichlet only on inflow boundary.
    PureAdvection,
    /// kappa = 1e-5; Dirichlet on the whole outer boundary.
    HighPeclet,
}

impl Variant {
    pub fn kappa(self) -> f64 {
        match self {
            Variant::PureAdvection => 0.0,
            Variant::HighPeclet => 1e-5,
        }
    }

    pub fn bc_mode(self) -> BcMode {
        match self {
            Variant::PureAdvection => BcMode::InflowOnly,
            Variant::HighPeclet => BcMode::AllDirichlet,
        }
    }

    /// Snapshot spacing used by the reference studies of each regime.
    pub fn default_ds_t(self) -> f64 {
        match self {
            Variant::PureAdvection => 1.35e-2,
            Variant::HighPeclet => 6.73e-3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::PureAdvection => "pure_advection",
            Variant::HighPeclet => "high_peclet",
        }
    }
}

impl FromStr for Variant {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure_advection" => Ok(Variant::PureAdvection),
            "high_peclet" => Ok(Variant::HighPeclet),
            other => bail!("unknown variant '{other}' (expected pure_advection or high_peclet)"),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which solver pairing runs the case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    GlobalFem,
    GlobalRom,
    FemFem,
    RomFem,
    RomRom,
}

impl Coupling {
    pub fn as_str(self) -> &'static str {
        match self {
            Coupling::GlobalFem => "global_fem",
            Coupling::GlobalRom => "global_rom",
            Coupling::FemFem => "fem_fem",
            Coupling::RomFem => "rom_fem",
            Coupling::RomRom => "rom_rom",
        }
    }

    /// Does this pairing need any reduced basis at all?
    pub fn needs_bases(self) -> bool {
        !matches!(self, Coupling::GlobalFem | Coupling::FemFem)
    }
}

impl FromStr for Coupling {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global_fem" => Ok(Coupling::GlobalFem),
            "global_rom" => Ok(Coupling::GlobalRom),
            "fem_fem" => Ok(Coupling::FemFem),
            "rom_fem" => Ok(Coupling::RomFem),
            "rom_rom" => Ok(Coupling::RomRom),
            other => bail!(
                "unknown coupling '{other}' (expected global_fem, global_rom, fem_fem, \
                 rom_fem, or rom_rom)"
            ),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parse a truncation policy: "energy:0.99999", "threshold:1e-7", or
/// "fixed:100".
pub fn parse_truncation(s: &str) -> Result<TruncationPolicy> {
    s.parse().map_err(anyhow::Error::from)
}

pub fn truncation_to_string(p: &TruncationPolicy) -> String {
    p.to_string()
}

/// On-disk configuration file (TOML). Every field is optional except the
/// version; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub config_version: u32,
    pub variant: Option<String>,
    pub coupling: Option<String>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub ds_t: Option<f64>,
    pub truncation_left: Option<String>,
    pub truncation_right: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub basis_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let file: ConfigFile = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        if file.config_version != 1 {
            bail!(
                "unsupported config_version {} in {} (this build understands version 1)",
                file.config_version,
                path.display()
            );
        }
        Ok(file)
    }
}

/// CLI-level overrides; `None` means "not given on the command line".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub variant: Option<String>,
    pub coupling: Option<String>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub ds_t: Option<f64>,
    pub truncation_left: Option<String>,
    pub truncation_right: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub basis_dir: Option<PathBuf>,
}

/// Fully resolved, validated case description.
#[derive(Clone, Debug)]
pub struct CaseConfig {
    pub variant: Variant,
    pub coupling: Coupling,
    /// Global resolution (cells); the coupled meshes use nx/2 cells per side.
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub t_final: f64,
    pub ds_t: f64,
    pub truncation_left: TruncationPolicy,
    pub truncation_right: TruncationPolicy,
    pub output_dir: PathBuf,
    pub basis_dir: Option<PathBuf>,
}

impl CaseConfig {
    /// Merge defaults, file values, and CLI overrides (highest precedence),
    /// then validate.
    pub fn resolve(file: Option<&ConfigFile>, cli: &Overrides) -> Result<CaseConfig> {
        let pick_str = |c: &Option<String>, f: &Option<String>| c.clone().or_else(|| f.clone());
        let empty = ConfigFile {
            config_version: 1,
            variant: None,
            coupling: None,
            nx: None,
            ny: None,
            dt: None,
            t_final: None,
            ds_t: None,
            truncation_left: None,
            truncation_right: None,
            output_dir: None,
            basis_dir: None,
        };
        let f = file.unwrap_or(&empty);
        let variant: Variant = pick_str(&cli.variant, &f.variant)
            .as_deref()
            .unwrap_or("pure_advection")
            .parse()?;
        let coupling: Coupling = pick_str(&cli.coupling, &f.coupling)
            .as_deref()
            .unwrap_or("global_fem")
            .parse()?;
        let cfg = CaseConfig {
            variant,
            coupling,
            nx: cli.nx.or(f.nx).unwrap_or(64),
            ny: cli.ny.or(f.ny).unwrap_or(64),
            dt: cli.dt.or(f.dt).unwrap_or(3.37e-3),
            t_final: cli.t_final.or(f.t_final).unwrap_or(std::f64::consts::TAU),
            ds_t: cli.ds_t.or(f.ds_t).unwrap_or_else(|| variant.default_ds_t()),
            truncation_left: parse_truncation(
                pick_str(&cli.truncation_left, &f.truncation_left)
                    .as_deref()
                    .unwrap_or("energy:0.99999"),
            )?,
            truncation_right: parse_truncation(
                pick_str(&cli.truncation_right, &f.truncation_right)
                    .as_deref()
                    .unwrap_or("energy:0.99999"),
            )?,
            output_dir: cli
                .output_dir
                .clone()
                .or_else(|| f.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            basis_dir: cli.basis_dir.clone().or_else(|| f.basis_dir.clone()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nx % 2 != 0 {
            bail!(
                "nx must be a positive even cell count (the domain splits at x = 0.5), got {}",
                self.nx
            );
        }
        if self.ny == 0 {
            bail!("ny must be positive, got {}", self.ny);
        }
        if !(self.dt > 0.0) {
            bail!("dt must be positive, got {}", self.dt);
        }
        if !(self.t_final > 0.0) {
            bail!("t_final must be positive, got {}", self.t_final);
        }
        if !(self.ds_t > 0.0) {
            bail!("ds_t must be positive, got {}", self.ds_t);
        }
        if self.ds_t > self.t_final {
            bail!(
                "ds_t = {} exceeds t_final = {}: no snapshot would ever be taken",
                self.ds_t,
                self.t_final
            );
        }
        Ok(())
    }

    pub fn velocity(&self) -> VelocityField {
        VelocityField::rotation()
    }
}
