//! Run configuration.
//!
//! The format is sectioned `key = value` text (TOML):
//!
//! ```text
//! [run]
//! mode = "full"            # full | decoupled | limit
//! output_dir = "out"       # optional
//!
//! [grid]
//! nx = 64
//! ny = 64
//! lx = 1.0
//! ly = 1.0
//!
//! [time]
//! t_end = 0.1
//! dt = 5e-4
//! snapshot_every = 0       # 0 disables snapshots
//!
//! [params]                 # any ModelParams key; omitted keys take defaults
//! theta = 2.5
//!
//! [initial.phi]
//! kind = "spinodal"        # uniform | spinodal | cosine | file
//! mean = 0.5
//! amp = 0.01
//! seed = 42
//!
//! [initial.p]
//! kind = "uniform"
//! value = 0.25
//!
//! [limit]                  # only read by the limit driver
//! eps_list = [0.2, 0.1, 0.05]
//! ```
//!
//! Unknown keys are rejected. Every section except `[grid]` and `[time]` may
//! be omitted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};
use crate::fields::{GridSpec, ScalarField};
use crate::physics::ModelParams;
use crate::rng::Lcg64;
use crate::simulate::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_mode() -> Mode {
    Mode::Full
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub snapshot_every: usize,
}

impl TimeSection {
    /// Number of fixed steps covering `[0, t_end]`.
    pub fn num_steps(&self) -> usize {
        if self.t_end <= 0.0 {
            0
        } else {
            (self.t_end / self.dt - 1e-9).ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_phi0")]
    pub phi: InitialCondition,
    #[serde(default = "default_p0")]
    pub p: InitialCondition,
}

fn default_phi0() -> InitialCondition {
    InitialCondition::Spinodal {
        mean: 0.5,
        amp: 0.01,
        seed: 42,
    }
}

fn default_p0() -> InitialCondition {
    InitialCondition::Uniform { value: 0.25 }
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            phi: default_phi0(),
            p: default_p0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform {
        value: f64,
    },
    /// `mean + amp (2 U - 1)` per cell, `U` drawn row-major from [`Lcg64`].
    Spinodal {
        mean: f64,
        amp: f64,
        seed: u32,
    },
    /// `mean + amp cos(kx pi x / lx) cos(ky pi y / ly)`.
    Cosine {
        mean: f64,
        amp: f64,
        #[serde(default = "one")]
        kx: f64,
        #[serde(default = "one")]
        ky: f64,
    },
    /// Snapshot file in the plain-text field format.
    File {
        path: PathBuf,
    },
}

impl InitialCondition {
    pub fn build(&self, grid: &GridSpec) -> Result<ScalarField, Error> {
        match self {
            InitialCondition::Uniform { value } => Ok(ScalarField::constant(*grid, *value)),
            InitialCondition::Spinodal { mean, amp, seed } => {
                let mut rng = Lcg64::new(u64::from(*seed));
                let data = (0..grid.num_cells())
                    .map(|_| mean + amp * (2.0 * rng.next_f64() - 1.0))
                    .collect();
                ScalarField::from_vec(*grid, data)
            }
            InitialCondition::Cosine { mean, amp, kx, ky } => {
                let (lx, ly) = (grid.lx(), grid.ly());
                let pi = std::f64::consts::PI;
                Ok(ScalarField::from_fn(*grid, |x, y| {
                    mean + amp * (kx * pi * x / lx).cos() * (ky * pi * y / ly).cos()
                }))
            }
            InitialCondition::File { path } => {
                let f = std::fs::File::open(path)?;
                let (field, _) = ScalarField::read_snapshot(std::io::BufReader::new(f))?;
                if field.grid().nx() != grid.nx() || field.grid().ny() != grid.ny() {
                    return Err(Error::Shape(format!(
                        "{} holds a {}x{} field, grid is {}x{}",
                        path.display(),
                        field.grid().nx(),
                        field.grid().ny(),
                        grid.nx(),
                        grid.ny()
                    )));
                }
                ScalarField::from_vec(*grid, field.into_vec())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSection {
    pub eps_list: Vec<f64>,
}

impl RunConfig {
    pub fn grid_spec(&self) -> Result<GridSpec, Error> {
        GridSpec::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    /// Initial `(phi_0, P_0)`.
    pub fn initial_fields(&self) -> Result<(ScalarField, ScalarField), Error> {
        let g = self.grid_spec()?;
        Ok((self.initial.phi.build(&g)?, self.initial.p.build(&g)?))
    }

    /// Serialize back to the text format.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn check(&self) -> Result<(), Error> {
        self.grid_spec()?;
        let mut v = self.params.violations();
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            v.push(Violation {
                tag: "time",
                message: format!("dt > 0 (got {})", self.time.dt),
            });
        }
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            v.push(Violation {
                tag: "time",
                message: format!("t_end >= 0 (got {})", self.time.t_end),
            });
        }
        for ic in [&self.initial.phi, &self.initial.p] {
            if let InitialCondition::File { path } = ic {
                if !Path::new(path).exists() {
                    v.push(Violation {
                        tag: "file",
                        message: format!("{} does not exist", path.display()),
                    });
                }
            }
        }
        if let Some(l) = &self.limit {
            let decreasing = l.eps_list.windows(2).all(|w| w[1] < w[0]);
            if l.eps_list.is_empty() || !decreasing || l.eps_list.iter().any(|&e| !(e > 0.0)) {
                v.push(Violation {
                    tag: "limit",
                    message: "eps_list must be nonempty, positive and strictly decreasing".into(),
                });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Parse and check a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, Error> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
