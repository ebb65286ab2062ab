//! Run configuration, read from TOML. Units are g = 1.

use std::fs;
use std::path::{Path, PathBuf};

use cavnet::evolve::IntegratorConfig;
use cavnet::hamiltonian::SystemParams;
use cavnet::lattice::Lattice;
use cavnet::protocol::{
    fourier_protocol, split_protocol, transfer_protocol, FreeField, FreeParam, Move, MovePlan,
    OptimizeOptions, Protocol, RampOptions, Schedule,
};
use cavnet::target::StateSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub params: SystemParams,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub dark: Option<DarkConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub optimize: Option<OptimizeConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LatticeConfig {
    Chain { n: usize },
    Ring { n: usize },
    Square {
        nx: usize,
        ny: usize,
        #[serde(default)]
        periodic: bool,
    },
    Custom {
        n: usize,
        edges: Vec<(usize, usize)>,
        #[serde(default)]
        coords: Option<Vec<(i64, i64)>>,
    },
}

impl LatticeConfig {
    pub fn build(&self) -> CliResult<Lattice> {
        let lattice = match self {
            LatticeConfig::Chain { n } => Lattice::chain(*n, false),
            LatticeConfig::Ring { n } => Lattice::chain(*n, true),
            LatticeConfig::Square { nx, ny, periodic } => Lattice::square(*nx, *ny, *periodic),
            LatticeConfig::Custom { n, edges, coords: None } => Lattice::custom(*n, edges),
            LatticeConfig::Custom { n, edges, coords: Some(c) } => {
                Lattice::custom_with_coords(*n, edges, c.clone())
            }
        };
        Ok(lattice?)
    }
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    Transfer {
        path: Vec<usize>,
        #[serde(default)]
        ramp: RampOptions,
        #[serde(default = "unit")]
        time_scale: f64,
    },
    Split {
        from: StateSpec,
        to: StateSpec,
        #[serde(default)]
        ramp: RampOptions,
        #[serde(default = "unit")]
        time_scale: f64,
    },
    Plan {
        moves: Vec<Move>,
        #[serde(default)]
        ramp: RampOptions,
        #[serde(default = "unit")]
        time_scale: f64,
    },
    Fourier {
        phi0: f64,
        #[serde(default)]
        ramp: RampOptions,
        #[serde(default = "unit")]
        time_scale: f64,
    },
    /// All lasers off.
    Idle {
        duration: f64,
        initial: StateSpec,
        #[serde(default)]
        target: Option<StateSpec>,
    },
    Explicit {
        schedules: Vec<Schedule>,
        duration: f64,
        initial: StateSpec,
        target: StateSpec,
    },
    /// Protocol JSON as written by `optimize`, relative to the config file.
    File { path: PathBuf },
}

/// A built protocol with the generator's caveats.
#[derive(Debug, Clone)]
pub struct BuiltProtocol {
    pub protocol: Protocol,
    pub flags: Vec<String>,
}

impl ProtocolConfig {
    pub fn build(&self, lattice: &Lattice, base: &Path) -> CliResult<BuiltProtocol> {
        let scaled = |p: Protocol, k: f64| -> CliResult<Protocol> {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Config(format!("time_scale must be positive, got {k}")));
            }
            Ok(if k == 1.0 { p } else { p.time_scaled(k) })
        };
        let (protocol, flags) = match self {
            ProtocolConfig::Transfer { path, ramp, time_scale } => {
                (scaled(transfer_protocol(lattice, path, ramp)?, *time_scale)?, Vec::new())
            }
            ProtocolConfig::Split { from, to, ramp, time_scale } => {
                let planned = split_protocol(lattice, from, to, ramp)?;
                (scaled(planned.protocol, *time_scale)?, planned.flags)
            }
            ProtocolConfig::Plan { moves, ramp, time_scale } => {
                let planned = MovePlan::new(moves.clone(), ramp.clone()).build(lattice)?;
                (scaled(planned.protocol, *time_scale)?, planned.flags)
            }
            ProtocolConfig::Fourier { phi0, ramp, time_scale } => {
                (scaled(fourier_protocol(lattice, *phi0, ramp)?, *time_scale)?, Vec::new())
            }
            ProtocolConfig::Idle { duration, initial, target } => {
                let target = target.clone().unwrap_or_else(|| initial.clone());
                (Protocol::idle(lattice.n_nodes(), *duration, initial.clone(), target), Vec::new())
            }
            ProtocolConfig::Explicit { schedules, duration, initial, target } => (
                Protocol {
                    schedules: schedules.clone(),
                    duration: *duration,
                    initial: initial.clone(),
                    target: target.clone(),
                },
                Vec::new(),
            ),
            ProtocolConfig::File { path } => {
                let full = base.join(path);
                let text = fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
                let p: Protocol = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
                (p, Vec::new())
            }
        };
        protocol.validate(lattice.n_nodes())?;
        let coords = lattice.coords();
        protocol.initial.node_amplitudes(coords)?;
        protocol.target.node_amplitudes(coords)?;
        Ok(BuiltProtocol { protocol, flags })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File name stem; defaults to the config file stem.
    pub prefix: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), prefix: None, formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarkConfig {
    /// Time of the snapshot; defaults to the protocol midpoint.
    pub at: Option<f64>,
    /// Relative null-space threshold.
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParam {
    Gamma,
    Kappa,
    KappaF,
    W,
    Delta,
    RampScale,
}

impl ScanParam {
    pub fn name(self) -> &'static str {
        match self {
            ScanParam::Gamma => "gamma",
            ScanParam::Kappa => "kappa",
            ScanParam::KappaF => "kappa_f",
            ScanParam::W => "w",
            ScanParam::Delta => "delta",
            ScanParam::RampScale => "ramp_scale",
        }
    }

    fn is_loss(self) -> bool {
        matches!(self, ScanParam::Gamma | ScanParam::Kappa | ScanParam::KappaF)
    }

    /// Apply one value to a copy of the system.
    pub fn apply(self, value: f64, params: &mut SystemParams, protocol: &mut Protocol) {
        match self {
            ScanParam::Gamma => params.gamma = value,
            ScanParam::Kappa => params.kappa = value,
            ScanParam::KappaF => params.kappa_f = value,
            ScanParam::W => params.w = value,
            ScanParam::Delta => params.delta = value,
            ScanParam::RampScale => *protocol = protocol.time_scaled(value),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub parameter: ScanParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub parameter: ScanParam,
    pub values: Vec<f64>,
    /// Optional outer parameter: one curve per value.
    #[serde(default)]
    pub series: Option<Series>,
}

impl ScanConfig {
    pub fn check(&self, params: &SystemParams) -> CliResult<()> {
        let mut all = vec![(self.parameter, &self.values)];
        if let Some(s) = &self.series {
            all.push((s.parameter, &s.values));
            if s.parameter == self.parameter {
                return Err(CliError::Config("scan.series must differ from scan.parameter".into()));
            }
        }
        for (p, values) in all {
            if values.is_empty() {
                return Err(CliError::Config(format!("scan over {} has no values", p.name())));
            }
            if p.is_loss() && !params.dissipative {
                return Err(CliError::Config(format!(
                    "scanning {} needs params.dissipative = true",
                    p.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub free: Vec<FreeParam>,
    /// Shorthand: these fields on every driven node.
    pub driven: Vec<FreeField>,
    pub conditional: bool,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub center_step: f64,
    pub log_step: f64,
    pub phase_step: f64,
    pub stop_at: Option<f64>,
    pub max_amplitude: Option<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        Self {
            free: Vec::new(),
            driven: Vec::new(),
            conditional: false,
            budget: o.budget,
            restarts: o.restarts,
            seed: o.seed,
            center_step: o.center_step,
            log_step: o.log_step,
            phase_step: o.phase_step,
            stop_at: o.stop_at,
            max_amplitude: o.max_amplitude,
        }
    }
}

impl OptimizeConfig {
    pub fn options(&self, seed: Option<u64>) -> OptimizeOptions {
        OptimizeOptions {
            budget: self.budget,
            restarts: self.restarts,
            seed: seed.unwrap_or(self.seed),
            center_step: self.center_step,
            log_step: self.log_step,
            phase_step: self.phase_step,
            stop_at: self.stop_at,
            max_amplitude: self.max_amplitude,
        }
    }

    /// Explicit parameters followed by the `driven` expansion, without
    /// duplicates.
    pub fn free_params(&self, protocol: &Protocol) -> Vec<FreeParam> {
        let mut out = self.free.clone();
        for (node, sched) in protocol.schedules.iter().enumerate() {
            if sched.segments.is_empty() {
                continue;
            }
            for &field in &self.driven {
                let fp = FreeParam::new(node, field);
                if !out.contains(&fp) {
                    out.push(fp);
                }
            }
        }
        out
    }
}

/// A parsed config with the directory it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub path: PathBuf,
}

impl Loaded {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn stem(&self) -> String {
        self.config.output.prefix.clone().unwrap_or_else(|| {
            self.path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
        })
    }
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load(path: &Path) -> CliResult<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded { config, path: path.to_path_buf() })
}
