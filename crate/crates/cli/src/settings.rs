use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use fracsing::extension::MeshSpec;
use fracsing::{ParamError, Params};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const DEFAULT_OUT_DIR: &str = "fracsing-out";

/// `NXxNZ`, e.g. `256x128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mesh {
    pub nx: usize,
    pub nz: usize,
}

impl FromStr for Mesh {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("mesh {s:?} is not of the form NXxNZ"))?;
        let nx: usize = a.trim().parse().map_err(|e| format!("mesh {s:?}: {e}"))?;
        let nz: usize = b.trim().parse().map_err(|e| format!("mesh {s:?}: {e}"))?;
        if nx < 8 || nz < 4 {
            return Err(format!("mesh {s:?} is too coarse (need NX >= 8, NZ >= 4)"));
        }
        Ok(Mesh { nx, nz })
    }
}

impl<'de> Deserialize<'de> for Mesh {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<Mesh> for MeshSpec {
    fn from(m: Mesh) -> Self {
        MeshSpec { nx: m.nx, nz: m.nz }
    }
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Spatial dimension n
    #[arg(short = 'n', long = "dim", global = true)]
    pub dim: Option<usize>,
    /// Fractional order sigma in (0, 1)
    #[arg(short = 's', long, global = true)]
    pub sigma: Option<f64>,
    /// Nonlinearity exponent p
    #[arg(short = 'p', long = "exponent", global = true)]
    pub exponent: Option<f64>,
    /// Solver mesh as NXxNZ
    #[arg(long, global = true)]
    pub mesh: Option<Mesh>,
    /// Order of the hemisphere quadrature used by energy evaluations
    #[arg(long, global = true)]
    pub quad_order: Option<usize>,
    /// Tolerance of the command's own check (solver residual for `solve`,
    /// oracle deviation for `constant`)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory for output files
    #[arg(long, env = "FRACSING_OUT", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Cross-check closed forms against the principal-value oracle
    #[arg(long, global = true)]
    pub with_oracle: bool,
    /// JSON file with default values for any of the flags above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub mesh: Option<Mesh>,
    pub quad_order: Option<usize>,
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub with_oracle: Option<bool>,
    pub inner_r: Option<f64>,
    pub outer_r: Option<f64>,
    pub perturbation: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::BadInput(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::BadInput(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flags merged over the config file over built-in defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
    pub mesh: Mesh,
    pub quad_order: usize,
    pub tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub with_oracle: bool,
    pub config: ConfigFile,
}

impl Settings {
    pub fn resolve(g: &GlobalArgs) -> Result<Self, Failure> {
        let config = match &g.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let s = Settings {
            n: g.dim.or(config.n).unwrap_or(3),
            sigma: g.sigma.or(config.sigma).unwrap_or(0.5),
            p: g.exponent.or(config.p).unwrap_or(1.8),
            mesh: g.mesh.or(config.mesh).unwrap_or(Mesh { nx: 256, nz: 128 }),
            quad_order: g.quad_order.or(config.quad_order).unwrap_or(fracsing::energy::DEFAULT_ENERGY_ORDER),
            tol: g.tol.or(config.tol),
            out_dir: g.out_dir.clone().or_else(|| config.out_dir.clone()),
            with_oracle: g.with_oracle || config.with_oracle.unwrap_or(false),
            config,
        };
        if s.quad_order < 2 {
            return Err(Failure::BadInput(format!("quad order {} is below 2", s.quad_order)));
        }
        if let Some(t) = s.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::BadInput(format!("tolerance {t} must be positive")));
            }
        }
        Ok(s)
    }

    pub fn params(&self) -> Result<Params, Failure> {
        Params::new(self.n, self.sigma, self.p).map_err(|e: ParamError| Failure::BadInput(e.to_string()))
    }

    pub fn out_dir_or_default(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
